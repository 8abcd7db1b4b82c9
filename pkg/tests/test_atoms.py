"""Angular-momentum weights, line data and scheme construction.

The line-strength oracle rebuilds squared Clebsch-Gordan coefficients
from scratch: diagonalize the total J^2 in a fixed-m product sector and
read the coupled-state overlaps off the eigenvector. No shared code
with the rational single-sum evaluation under test.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from superburst.atoms import (build_level_scheme, min_zeeman_field,
                              relative_line_strength, species_transitions,
                              two_level_scheme)


def _jz_jpm(j):
    """Angular momentum matrices for integer j, basis m = -j..j."""
    ms = np.arange(-j, j + 1, dtype=float)
    jz = np.diag(ms)
    jp = np.zeros((ms.size, ms.size))
    for i, m in enumerate(ms[:-1]):
        jp[i + 1, i] = math.sqrt(j * (j + 1) - m * (m + 1))
    return jz, jp, jp.T


def _cg_squared_oracle(j1, m1, j2, m2, jtot):
    """<j1 m1; j2 m2 | jtot (m1+m2)>^2 by diagonalizing J_total^2."""
    mtot = m1 + m2
    z1, p1, m1op = _jz_jpm(j1)
    z2, p2, m2op = _jz_jpm(j2)
    eye1, eye2 = np.eye(z1.shape[0]), np.eye(z2.shape[0])
    j1sq = j1 * (j1 + 1) * np.kron(eye1, eye2)
    j2sq = j2 * (j2 + 1) * np.kron(eye1, eye2)
    jsq = (j1sq + j2sq + 2.0 * np.kron(z1, z2)
           + np.kron(p1, m2op) + np.kron(m1op, p2))
    # restrict to the fixed-mtot sector; the jtot eigenvalue is simple there
    pairs = [(a, b)
             for a in range(-j1, j1 + 1) for b in range(-j2, j2 + 1)
             if a + b == mtot]
    if not pairs or abs(mtot) > jtot:
        return 0.0
    idx = [(a + j1) * (2 * j2 + 1) + (b + j2) for a, b in pairs]
    vals, vecs = np.linalg.eigh(jsq[np.ix_(idx, idx)])
    (col,) = np.nonzero(np.abs(vals - jtot * (jtot + 1)) < 1e-9)
    if col.size == 0:
        return 0.0
    row = pairs.index((m1, m2))
    return float(vecs[row, col[0]] ** 2)


def test_line_strengths_match_coupled_basis_oracle():
    for J in (1, 2, 3):
        for J_prime in (J - 1, J):
            for m in range(-J, J + 1):
                for q in (-1, 0, 1):
                    if abs(m - q) > J_prime:
                        continue
                    got = float(relative_line_strength(J, m, q, J_prime))
                    want = _cg_squared_oracle(J_prime, m - q, 1, q, J)
                    assert got == pytest.approx(want, abs=1e-12), (J, m, q, J_prime)


def test_line_strengths_sum_to_one_over_polarizations():
    # exact rational arithmetic, so exact equality
    for J in (1, 2, 3):
        for J_prime in (J - 1, J):
            if J_prime < 0:
                continue
            for m in range(-J, J + 1):
                total = sum(relative_line_strength(J, m, q, J_prime)
                            for q in (-1, 0, 1))
                assert total == Fraction(1), (J, m, J_prime)


def test_line_strength_frozen_values():
    assert relative_line_strength(1, 0, 0, 0) == Fraction(1)
    assert relative_line_strength(1, 0, 0, 1) == Fraction(0)  # forbidden
    assert relative_line_strength(1, 0, 1, 1) == Fraction(1, 2)
    assert relative_line_strength(1, 0, -1, 1) == Fraction(1, 2)
    assert relative_line_strength(3, 0, 0, 2) == Fraction(3, 5)
    assert relative_line_strength(3, 0, 1, 2) == Fraction(1, 5)
    assert relative_line_strength(3, 3, 1, 2) == Fraction(1)  # stretch state


def test_line_strength_rejects_bad_arguments():
    with pytest.raises(ValueError):
        relative_line_strength(1, 0, 2, 1)
    with pytest.raises(ValueError):
        relative_line_strength(1, 2, 0, 1)
    with pytest.raises(ValueError):
        relative_line_strength(2, 0, 0, 0)


def test_species_tables():
    for species in ("Yb174", "Sr88"):
        rows = species_transitions(species)
        assert len(rows) == 7
        assert all(t.wavelength > 0 and t.line_rate > 0 for t in rows)
    with pytest.raises(ValueError):
        species_transitions("Cs133")

    def line(species, upper, lower):
        (t,) = [t for t in species_transitions(species)
                if (t.upper_term, t.lower_term) == (upper, lower)]
        return t

    t = line("Yb174", "3D1", "3P0")
    assert (t.wavelength, t.line_rate) == (1389.0, 2.0e6)
    t = line("Sr88", "3D3", "3P2")
    assert (t.wavelength, t.line_rate) == (2920.0, 5.9e5)
    t = line("Sr88", "3D1", "3P0")
    assert (t.wavelength, t.line_rate) == (2600.0, 2.8e5)


def test_d1_m0_scheme_rates_and_labels():
    scheme = build_level_scheme("Yb174", "D1_m0")
    assert scheme.labels == ("f", "g", "h")
    rates = {ch.label: ch.rate for ch in scheme.channels}
    # pi branch to J'=1 is forbidden from m=0, so f carries the full
    # J'=0 line and the J'=1 line splits evenly between the sigmas
    assert rates["f"] == pytest.approx(2.0e6)
    assert rates["g"] == pytest.approx(0.5e6)
    assert rates["h"] == pytest.approx(0.5e6)
    lam = {ch.label: ch.wavelength for ch in scheme.channels}
    assert lam["f"] == pytest.approx(1389.0)
    assert lam["g"] == pytest.approx(1540.0)
    beta = scheme.branching_ratios()
    assert beta.sum() == 1.0
    assert beta[0] == pytest.approx(2.0 / 3.0)


def test_d1_m0_weak_loss_channel():
    scheme = build_level_scheme("Yb174", "D1_m0", include_weak_loss=True)
    assert scheme.labels == ("f", "g", "h", "loss")
    loss = scheme.channel("loss")
    assert not loss.correlated
    assert loss.rate == pytest.approx(0.03e6)
    assert scheme.branching_ratios().sum() == 1.0


def test_d3_m0_scheme_weights():
    for species in ("Yb174", "Sr88"):
        scheme = build_level_scheme(species, "D3_m0")
        beta = scheme.branching_ratios()
        np.testing.assert_allclose(beta, [0.6, 0.2, 0.2], atol=1e-15)
        # all three channels ride the same line
        ks = {ch.wavenumber for ch in scheme.channels}
        assert len(ks) == 1


def test_d3_m3_stretch_state_is_two_level():
    scheme = build_level_scheme("Sr88", "D3_m3")
    assert scheme.labels == ("f",)
    ch = scheme.channel("f")
    line = [t for t in species_transitions("Sr88")
            if (t.upper_term, t.lower_term) == ("3D3", "3P2")][0]
    assert ch.rate == pytest.approx(line.line_rate)
    np.testing.assert_allclose(ch.polarization,
                               np.array([0, 1, 1j]) / math.sqrt(2))


def test_scheme_construction_rejects_unknown_input():
    with pytest.raises(ValueError):
        build_level_scheme("Yb173", "D1_m0")
    with pytest.raises(ValueError):
        build_level_scheme("Yb174", "D2_m0")
    with pytest.raises(KeyError):
        build_level_scheme("Yb174", "D1_m0").channel("x")


def test_two_level_scheme_normalizes_polarization():
    scheme = two_level_scheme(rate=2.5e5, wavelength_nm=780.0,
                              polarization=(0.0, 3.0, 4.0))
    ch = scheme.channel("f")
    assert ch.rate == 2.5e5
    np.testing.assert_allclose(ch.polarization, [0.0, 0.6, 0.8])
    assert np.vdot(ch.polarization, ch.polarization).real == pytest.approx(1.0)


def test_min_zeeman_field_scales_linearly():
    b1 = min_zeeman_field(144, 3.53e6)
    assert b1 == pytest.approx(57.802, rel=1e-4)
    assert min_zeeman_field(288, 3.53e6) == pytest.approx(2 * b1)
    assert min_zeeman_field(144, 7.06e6) == pytest.approx(2 * b1)
