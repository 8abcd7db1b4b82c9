"""Benchmark solvers against closed-form decay and against each other."""

import numpy as np
import pytest

from superburst.atoms import build_level_scheme, two_level_scheme
from superburst.exact import master_equation_evolve, mcwf_ensemble
from superburst.geometry import DETECTOR_X, detector_direction, square_lattice
from superburst.interactions import coupling_matrices, greens_coupling


def _pair_rate_oracle(gamma12, times):
    """Two inverted atoms with decay coupling gamma12: exact photon rate.

    The density matrix stays diagonal in {ee, symmetric, antisymmetric,
    gg}, decaying through bright (1 + gamma12) and dark (1 - gamma12)
    modes. The coherent coupling shifts phases only, so it cannot enter.
    """
    gp, gm = 1.0 + gamma12, 1.0 - gamma12
    p_ee = np.exp(-2.0 * times)
    p_s = gp * (np.exp(-gp * times) - p_ee) / gm
    p_a = gm * (np.exp(-gm * times) - p_ee) / gp
    return 2.0 * p_ee + gp * p_s + gm * p_a


def test_master_equation_single_atom_decays_exponentially():
    cs = coupling_matrices(square_lattice(1, 1, 500.0), two_level_scheme())
    rec = master_equation_evolve(cs, 6.0, n_samples=61)
    np.testing.assert_allclose(rec.total_rate, np.exp(-rec.times), atol=1e-8)
    np.testing.assert_allclose(rec.populations["e"], np.exp(-rec.times),
                               atol=1e-8)


def test_master_equation_matches_two_atom_closed_form():
    scheme = two_level_scheme(wavelength_nm=1000.0)
    cs = coupling_matrices(square_lattice(2, 1, 180.0), scheme)
    gamma12 = cs.channels[0].gamma[0, 1]
    assert 0.2 < gamma12 < 1.0  # meaningfully collective spacing
    rec = master_equation_evolve(cs, 5.0, n_samples=101)
    np.testing.assert_allclose(rec.total_rate,
                               _pair_rate_oracle(gamma12, rec.times),
                               atol=1e-7)


def test_initial_rate_is_atom_number_for_both_solvers():
    cs = coupling_matrices(square_lattice(2, 2, 300.0), two_level_scheme())
    me = master_equation_evolve(cs, 1.0, n_samples=11)
    mc = mcwf_ensemble(cs, 1.0, n_traj=8, seed=1, n_samples=11)
    assert me.total_rate[0] == pytest.approx(4.0, abs=1e-10)
    assert mc.total_rate[0] == pytest.approx(4.0, abs=1e-10)


def test_mcwf_agrees_with_master_equation_within_stderr():
    scheme = two_level_scheme(wavelength_nm=800.0)
    cs = coupling_matrices(square_lattice(3, 2, 160.0), scheme)
    me = master_equation_evolve(cs, 6.0, n_samples=61, detector=DETECTOR_X)
    mc = mcwf_ensemble(cs, 6.0, n_traj=600, seed=42, n_samples=61,
                       detector=DETECTOR_X)
    assert mc.meta["restarts"] == 0
    for me_curve, mc_curve, err in (
            (me.total_rate, mc.total_rate, mc.stderr["R_total"]),
            (me.directional["f"], mc.directional["f"], mc.stderr["R_dir_f"])):
        z = np.abs(mc_curve - me_curve) / np.maximum(err, 1e-12)
        # ignore the deterministic t=0 sample, where stderr is zero
        assert np.max(z[1:]) < 4.0
    np.testing.assert_allclose(me.total_rate[0], mc.total_rate[0], atol=1e-9)


def test_site_basis_unravelling_leaves_means_unchanged():
    cs = coupling_matrices(square_lattice(2, 2, 200.0), two_level_scheme())
    me = master_equation_evolve(cs, 5.0, n_samples=41)
    modes = mcwf_ensemble(cs, 5.0, n_traj=500, seed=9, n_samples=41)
    sites = mcwf_ensemble(cs, 5.0, n_traj=500, seed=9, n_samples=41,
                          site_basis=True)
    assert sites.meta["site_basis"] is True
    for mc in (modes, sites):
        z = np.abs(mc.total_rate - me.total_rate)[1:] \
            / np.maximum(mc.stderr["R_total"][1:], 1e-12)
        assert np.max(z) < 4.0


def test_mcwf_reruns_are_bit_identical_and_seed_sensitive():
    cs = coupling_matrices(square_lattice(2, 2, 250.0), two_level_scheme())
    a = mcwf_ensemble(cs, 3.0, n_traj=40, seed=7, n_samples=31)
    b = mcwf_ensemble(cs, 3.0, n_traj=40, seed=7, n_samples=31)
    c = mcwf_ensemble(cs, 3.0, n_traj=40, seed=8, n_samples=31)
    assert np.array_equal(a.total_rate, b.total_rate)
    assert not np.array_equal(a.total_rate, c.total_rate)


def test_photon_bookkeeping_closes_for_both_solvers():
    cs = coupling_matrices(square_lattice(2, 2, 220.0), two_level_scheme())
    me = master_equation_evolve(cs, 25.0, n_samples=501)
    emitted = np.trapezoid(me.total_rate, me.times)
    assert emitted + me.populations["e"][-1] == pytest.approx(4.0, abs=1e-3)
    assert me.meta["trace_error_max"] < 1e-6
    # the trajectory mean integrates to N only statistically; 300
    # trajectories put the standard error of the integral near 0.06
    mc = mcwf_ensemble(cs, 25.0, n_traj=300, seed=3, n_samples=501)
    emitted = np.trapezoid(mc.total_rate, mc.times)
    assert emitted + mc.populations["e"][-1] == pytest.approx(4.0, abs=0.25)


def test_detector_on_dipole_axis_sees_nothing():
    # z-polarized dipole, detector on z: radiation null at all times
    cs = coupling_matrices(square_lattice(2, 2, 240.0), two_level_scheme())
    rec = master_equation_evolve(cs, 3.0, n_samples=31,
                                 detector=detector_direction(0.0, 0.0))
    np.testing.assert_allclose(rec.directional["f"], 0.0, atol=1e-12)


def test_solver_input_validation():
    cs = coupling_matrices(square_lattice(2, 2, 300.0), two_level_scheme())
    with pytest.raises(ValueError):
        master_equation_evolve(cs, 0.0)
    with pytest.raises(ValueError):
        mcwf_ensemble(cs, 1.0, n_traj=0, seed=1)
    multi = coupling_matrices(square_lattice(2, 2, 300.0),
                              build_level_scheme("Yb174", "D1_m0"))
    with pytest.raises(ValueError):
        master_equation_evolve(multi, 1.0)
    with pytest.raises(ValueError):
        mcwf_ensemble(multi, 1.0, n_traj=1, seed=1)
    big_me = coupling_matrices(square_lattice(4, 3, 300.0), two_level_scheme())
    with pytest.raises(ValueError):
        master_equation_evolve(big_me, 1.0)
    big_mc = coupling_matrices(square_lattice(5, 4, 300.0), two_level_scheme())
    with pytest.raises(ValueError):
        mcwf_ensemble(big_mc, 1.0, n_traj=1, seed=1)


def test_near_field_pair_still_conserves_probability():
    # 60 nm spacing: |J| >> Gamma0, a stiff phase that must not leak trace
    cs = coupling_matrices(square_lattice(2, 1, 60.0), two_level_scheme())
    jval, _ = greens_coupling(np.array([60.0, 0.0, 0.0]),
                              cs.channels[0].channel)
    assert abs(jval) > 5.0
    rec = master_equation_evolve(cs, 8.0, n_samples=201)
    assert rec.meta["trace_error_max"] < 1e-6
    emitted = np.trapezoid(rec.total_rate, rec.times)
    assert emitted + rec.populations["e"][-1] == pytest.approx(2.0, abs=1e-3)
