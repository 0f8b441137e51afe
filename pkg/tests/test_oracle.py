"""Certification of the partial-wave oracle.

The certification protocol: the analytically derived round-trip matrix must
agree with fine-grid Nystrom computations (which themselves are validated by
the exact circle diagonalization in the operator tests) before the oracle is
allowed to certify anything else.  These tests run the protocol.
"""

import mpmath as mp
import numpy as np
import pytest
from scipy.special import iv, kv

from layerdet import (ConvergenceError, LayerDetError, PartialWaveConfig,
                      default_l_max, discretize, make_circle,
                      make_scene, xi_imag, xi_nystrom_extrapolated,
                      xi_two_disks)
from layerdet.oracle import log_bessel_i_seq, log_bessel_k_seq


class TestLogBesselSequences:
    @pytest.mark.parametrize("x", [0.05, 0.4, 2.0, 50.0, 400.0])
    def test_vs_scipy(self, x):
        n = np.arange(13)
        assert np.allclose(log_bessel_k_seq(12, x), np.log(kv(n, x)), rtol=1e-13)
        assert np.allclose(log_bessel_i_seq(12, x), np.log(iv(n, x)), rtol=1e-12)

    def test_extreme_orders_vs_mpmath(self):
        # the regime where direct scipy evaluation over/underflows
        x, nmax = 0.4, 120
        lk = log_bessel_k_seq(nmax, x)
        li = log_bessel_i_seq(nmax, x)
        with mp.workdps(60):
            for n in (80, 100, 120):
                assert lk[n] == pytest.approx(float(mp.log(mp.besselk(n, x))),
                                              rel=1e-12)
                assert li[n] == pytest.approx(float(mp.log(mp.besseli(n, x))),
                                              rel=1e-12)


class TestPartialWave:
    def test_config_validation(self):
        with pytest.raises(LayerDetError):
            PartialWaveConfig(40, 1.0, 1.0, 1.9, 1.0)
        with pytest.raises(ValueError):
            PartialWaveConfig(2, 1.0, 1.0, 4.0, 1.0)

    def test_truncation_convergence(self):
        v30 = xi_two_disks(PartialWaveConfig(30, 1.0, 1.0, 4.0, 1.0))
        v40 = xi_two_disks(PartialWaveConfig(40, 1.0, 1.0, 4.0, 1.0))
        assert abs(v30 - v40) <= 1e-12

    def test_insufficient_truncation_refused(self):
        # high kappa needs more modes than l_max = 4 offers
        with pytest.raises(ConvergenceError):
            xi_two_disks(PartialWaveConfig(4, 1.0, 1.0, 2.5, 12.0))

    def test_radius_symmetry_exact(self):
        a = xi_two_disks(PartialWaveConfig(30, 1.0, 0.5, 4.0, 0.7))
        b = xi_two_disks(PartialWaveConfig(30, 0.5, 1.0, 4.0, 0.7))
        assert a == b

    def test_default_l_max(self):
        assert default_l_max(1.0, 1.0, 1.0) == 11
        assert default_l_max(0.1, 1.0, 0.5) >= 8

    def test_decay_envelope_at_high_kappa(self):
        # oracle values consistent with the exponential bound
        gap = 2.0
        k0, k1 = 8.0 / gap, 10.0 / gap
        v0 = abs(xi_two_disks(PartialWaveConfig(48, 1.0, 1.0, 4.0, k0)))
        v1 = abs(xi_two_disks(PartialWaveConfig(48, 1.0, 1.0, 4.0, k1)))
        assert v1 <= v0 * np.exp(-0.9 * gap * (k1 - k0))


class TestCertification:
    def test_vs_extrapolated_nystrom(self, canonical_scene):
        for kap in (0.3, 1.0):
            ny = xi_nystrom_extrapolated(canonical_scene, kap, (128, 256, 512))
            pw = xi_two_disks(PartialWaveConfig(40, 1.0, 1.0, 4.0, kap))
            assert ny.extrapolated
            assert pw == pytest.approx(ny.value, abs=1e-10)

    def test_asymmetric_disks(self):
        scene = make_scene([make_circle((0, 0), 1.0), make_circle((3, 0.5), 0.5)])
        d = float(np.hypot(3.0, 0.5))
        for kap in (0.5, 2.0):
            grid = discretize(scene, 256)
            bem = xi_imag(scene, grid, kap).xi.real
            pw = xi_two_disks(PartialWaveConfig(40, 1.0, 0.5, d, kap))
            assert bem == pytest.approx(pw, abs=1e-9)

    @pytest.mark.slow
    def test_fine_grid_certification(self, canonical_scene):
        # the full protocol: n = 2048 per disk, Richardson-extrapolated
        ny = xi_nystrom_extrapolated(canonical_scene, 1.0, (512, 1024, 2048))
        pw = xi_two_disks(PartialWaveConfig(40, 1.0, 1.0, 4.0, 1.0))
        assert ny.extrapolated
        assert pw == pytest.approx(ny.value, abs=1e-10)

    def test_agreement_across_kappa_grid(self, canonical_scene, canonical_grid_256):
        gap = canonical_scene.gap
        for kap in np.geomspace(0.1 / gap, 10 / gap, 7):
            bem = xi_imag(canonical_scene, canonical_grid_256, kap).xi.real
            pw = xi_two_disks(PartialWaveConfig(
                max(40, default_l_max(kap, 1.0, 1.0)), 1.0, 1.0, 4.0, kap))
            assert abs(bem - pw) <= 1e-8 * (1 + abs(pw))


class TestNystromExtrapolation:
    def test_stable_across_sequences(self, canonical_scene):
        a = xi_nystrom_extrapolated(canonical_scene, 1.0, (64, 128, 256))
        b = xi_nystrom_extrapolated(canonical_scene, 1.0, (128, 256, 512))
        assert a.value == pytest.approx(b.value, abs=1e-10)

    def test_single_obstacle_zero(self):
        scene = make_scene([make_circle((0, 0), 1.0)])
        out = xi_nystrom_extrapolated(scene, 1.0, (32, 64, 128))
        assert out.value == pytest.approx(0.0, abs=1e-13)

    def test_error_decreases_with_longer_sequence(self, mixed_scene):
        short = xi_nystrom_extrapolated(mixed_scene, 1.0, (32, 64, 128))
        long = xi_nystrom_extrapolated(mixed_scene, 1.0, (32, 64, 128, 256))
        assert long.err <= short.err

    def test_validates_input(self, canonical_scene):
        with pytest.raises(ValueError):
            xi_nystrom_extrapolated(canonical_scene, 1.0, (64, 128))
        with pytest.raises(ValueError):
            xi_nystrom_extrapolated(canonical_scene, 1.0, (128, 64, 256))
