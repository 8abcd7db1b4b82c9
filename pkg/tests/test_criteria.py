"""Burst criteria: closed forms against the product-space oracle.

brute_force_g2 evaluates the two-photon correlation on |e...e> by
explicit operator algebra on the full product space, independent of the
Frobenius and quadratic-form shortcuts it certifies here.
"""

import numpy as np
import pytest

from superburst.atoms import build_level_scheme, two_level_scheme
from superburst.criteria import (CriterionResult, brute_force_g2,
                                 criterion_sweep, directional_criterion,
                                 directional_g2, per_channel_g2,
                                 variance_criterion)
from superburst.geometry import (DETECTOR_X, Detector, detector_direction,
                                 random_cloud, square_lattice)
from superburst.interactions import coupling_matrices

RNG_SEED = 48615


def _tiny_cloud(n, rng):
    # pairwise separations far below the wavelength but finite
    return random_cloud(n, extent=2.0, rng=rng, min_separation=0.2)


def test_point_limit_values():
    rng = np.random.default_rng(RNG_SEED)
    scheme = build_level_scheme("Yb174", "D1_m0")
    geo = _tiny_cloud(5, rng)
    cs = coupling_matrices(geo, scheme)
    for label, beta in zip(("f", "g", "h"), scheme.branching_ratios()):
        vc = variance_criterion(cs, label)
        assert vc.value == pytest.approx(4.0, abs=1e-3)
        assert vc.threshold == pytest.approx(1.0 / beta)
        dc = directional_criterion(cs, geo, label, DETECTOR_X)
        assert dc.value == pytest.approx(5 * beta / (1 + beta), abs=1e-3)
        assert dc.threshold == 1.0
    # a five-atom point cloud bursts on the dominant channel only
    assert variance_criterion(cs, "f").burst_predicted
    assert directional_criterion(cs, geo, "f", DETECTOR_X).burst_predicted
    assert not directional_criterion(cs, geo, "g", DETECTOR_X).burst_predicted


def test_single_atom_never_bursts():
    scheme = two_level_scheme()
    geo = square_lattice(1, 1, 100.0)
    cs = coupling_matrices(geo, scheme)
    vc = variance_criterion(cs, "f")
    assert vc.value == pytest.approx(0.0, abs=1e-15)
    assert not vc.burst_predicted
    dc = directional_criterion(cs, geo, "f", DETECTOR_X)
    assert dc.value == pytest.approx(0.5)  # beta/(1+beta) with beta = 1
    assert not dc.burst_predicted


def test_distant_atoms_decouple():
    scheme = two_level_scheme(wavelength_nm=1000.0)
    geo = square_lattice(3, 3, 80000.0)
    cs = coupling_matrices(geo, scheme)
    assert variance_criterion(cs, "f").value == pytest.approx(0.0, abs=1e-3)
    dc = directional_criterion(cs, geo, "f", DETECTOR_X)
    assert dc.value == pytest.approx(0.5, abs=2e-3)


def test_burst_flag_is_strict_inequality():
    above = CriterionResult(value=1.01, threshold=1.0, channel="f", detector=None)
    at = CriterionResult(value=1.0, threshold=1.0, channel="f", detector=None)
    assert above.burst_predicted and not at.burst_predicted


def test_closed_forms_match_brute_force():
    rng = np.random.default_rng(RNG_SEED + 1)
    schemes = [two_level_scheme(), build_level_scheme("Yb174", "D1_m0")]
    for trial in range(12):
        scheme = schemes[trial % 2]
        geo = random_cloud(int(rng.integers(2, 6)), extent=1200.0, rng=rng,
                           min_separation=130.0)
        det = Detector(theta=float(rng.uniform(0, np.pi)),
                       phi=float(rng.uniform(0, 2 * np.pi)))
        cs = coupling_matrices(geo, scheme)
        for label in cs.labels:
            want = brute_force_g2(cs, geo, label)
            assert per_channel_g2(cs, label) == pytest.approx(want, abs=1e-10)
            assert variance_criterion(cs, label).burst_predicted == (want > 1.0)
            want_d = brute_force_g2(cs, geo, label, detector=det)
            got_d = directional_g2(cs, geo, label, det)
            assert got_d == pytest.approx(want_d, abs=1e-10)
            assert (directional_criterion(cs, geo, label, det).burst_predicted
                    == (want_d > 1.0))


def test_brute_force_caps_atom_number():
    scheme = two_level_scheme()
    geo = square_lattice(4, 4, 300.0)
    cs = coupling_matrices(geo, scheme)
    with pytest.raises(ValueError):
        brute_force_g2(cs, geo, "f")


def test_directional_criterion_translation_invariant():
    rng = np.random.default_rng(RNG_SEED + 2)
    scheme = build_level_scheme("Sr88", "D3_m0")
    geo = random_cloud(6, extent=900.0, rng=rng, min_separation=120.0)
    shifted = type(geo)(geo.positions + np.array([310.0, -120.0, 45.0]),
                        geo.lattice_constant, geo.shape)
    det = detector_direction(1.1, 0.4)
    for label in ("f", "g"):
        a = directional_criterion(coupling_matrices(geo, scheme), geo, label, det)
        b = directional_criterion(coupling_matrices(shifted, scheme), shifted,
                                  label, det)
        assert a.value == pytest.approx(b.value, rel=1e-12)


def test_directional_criterion_detector_flip():
    # S is a real quadratic form, so an inverted detector sees the same value
    rng = np.random.default_rng(RNG_SEED + 3)
    scheme = two_level_scheme()
    geo = random_cloud(5, extent=1100.0, rng=rng, min_separation=140.0)
    cs = coupling_matrices(geo, scheme)
    det = detector_direction(0.7, 1.9)
    flipped = detector_direction(np.pi - 0.7, 1.9 + np.pi)
    a = directional_criterion(cs, geo, "f", det)
    b = directional_criterion(cs, geo, "f", flipped)
    assert a.value == pytest.approx(b.value, rel=1e-12)


def test_sweep_grid_and_values():
    scheme = build_level_scheme("Yb174", "D1_m0")
    sw = criterion_sweep(scheme, (3, 3), 100.0, 400.0, "f",
                         detector=DETECTOR_X, step=50.0)
    np.testing.assert_allclose(sw.distances, np.arange(100.0, 401.0, 50.0))
    geo = square_lattice(3, 3, 250.0)
    direct = directional_criterion(coupling_matrices(geo, scheme), geo, "f",
                                   DETECTOR_X)
    i = list(sw.distances).index(250.0)
    assert sw.values[i] == pytest.approx(direct.value, rel=1e-12)
    assert sw.threshold == direct.threshold
    assert sw.channel == "f"


def test_sweep_crossings_and_intervals_synthetic():
    sw = criterion_sweep(two_level_scheme(wavelength_nm=1000.0), (2, 2),
                         100.0, 1000.0, "f", detector=DETECTOR_X, step=25.0)
    burst = sw.burst
    assert burst.dtype == bool and burst.any() and not burst.all()
    # each crossing is the midpoint of a grid interval where the flag flips
    for x in sw.crossings():
        k = int(np.searchsorted(sw.distances, x)) - 1
        assert burst[k] != burst[k + 1]
        assert x == pytest.approx((sw.distances[k] + sw.distances[k + 1]) / 2)
    for lo, hi in sw.burst_intervals():
        assert lo < hi
        inside = (sw.distances > lo) & (sw.distances < hi)
        assert burst[inside].all()


def test_yb_all_light_burst_region():
    # dominant-channel variance criterion for a 12x12 array crosses once
    scheme = build_level_scheme("Yb174", "D1_m0")
    sw = criterion_sweep(scheme, (12, 12), 100.0, 1200.0, "f", step=5.0)
    crossings = sw.crossings()
    assert len(crossings) == 1
    assert 500.0 < crossings[0] < 600.0
    assert sw.values[0] > sw.threshold
    assert sw.values[-1] < sw.threshold


def test_sigma_channels_never_burst_beyond_near_field():
    scheme = build_level_scheme("Yb174", "D1_m0")
    for label in ("g", "h"):
        for det in (None, DETECTOR_X):
            sw = criterion_sweep(scheme, (12, 12), 300.0, 2600.0, label,
                                 detector=det, step=10.0)
            assert not sw.burst.any(), (label, det)
