"""Second-order cumulant dynamics for extended multilevel arrays.

Tracked moments (scheme units, Gamma0 = 1): single-site populations
a = <s_ee>, b = <s_ff>, c = <s_gg>, and pair matrices for j != l

    e_jl = <s_ee^j s_ee^l>   real symmetric
    f_jl = <s_ee^j s_ff^l>   real
    g_jl = <s_ee^j s_gg^l>   real
    q_jl = <s_ef^j s_fe^l>   Hermitian   (channel f coherences)
    p_jl = <s_eg^j s_ge^l>   Hermitian   (channel g)
    r_jl = <s_eh^j s_he^l>   Hermitian   (channel h)

Third-order expectations close as <uvw> = <uv><w> + <vw><u> + <uw><v>
- 2<u><v><w>; expectations with unpaired raising operators vanish from
the fully excited start, and everything involving the h level is
eliminated through completeness (s_hh = 1 - s_ee - s_ff - s_gg), which
is why no h population or eh-pair field appears. Channel matrices enter
as A = J^f - i Gamma^f / 2 (zero diagonal) and the zero-diagonal
dissipative matrices; with those conventions each derivative needs six
N x N matrix products (BLAS) plus elementwise work (_kernels).

The emitted rate on channel a is R_a = Gamma0a sum_j a_j
+ sum_{j!=l} Gamma^a_jl q^a_jl, and the ground populations integrate it:
sum_j b_j(t) is exactly the photon count emitted on channel f up to t.

Schemes with one channel run a dedicated two-level system of {a, e, p};
the four-level engine padded with zero-rate channels must reproduce it,
which is a test, not an assumption.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from threadpoolctl import threadpool_limits

from . import _kernels
from .atoms import LevelScheme
from .geometry import Detector
from .interactions import CouplingSet
from .records import EmissionRecord

logger = logging.getLogger(__name__)

_POSITIVITY_TOL = 1e-6
_CHUNK = 96  # samples per integration window; bounds solver output memory


@dataclass
class CumulantState:
    """Unpacked moment set. Pair diagonals are zero by construction."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    e: np.ndarray
    f: np.ndarray
    g: np.ndarray
    q: np.ndarray
    p: np.ndarray
    r: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.a.size


def init_fully_excited(n: int) -> CumulantState:
    if n < 1:
        raise ValueError("need at least one atom")
    ones = np.ones(n)
    zeros = np.zeros(n)
    e = np.ones((n, n)) - np.eye(n)
    zm = np.zeros((n, n))
    zc = np.zeros((n, n), dtype=complex)
    return CumulantState(ones, zeros.copy(), zeros.copy(), e, zm.copy(),
                         zm.copy(), zc.copy(), zc.copy(), zc.copy())


@dataclass(frozen=True)
class ChannelConstants:
    """Per-channel coupling combinations feeding the moment equations."""

    labels: tuple[str, ...]
    beta: np.ndarray
    amats: tuple[np.ndarray, ...]   # J - i Gamma / 2, zero diagonal
    gtilde: tuple[np.ndarray, ...]  # Gamma with zero diagonal


def channel_constants(coupling_set: CouplingSet) -> ChannelConstants:
    amats, gtilde = [], []
    for cc in coupling_set.channels:
        gt = cc.gamma - np.diag(np.diag(cc.gamma))
        amats.append(np.ascontiguousarray(cc.j_coh - 0.5j * gt))
        gtilde.append(np.ascontiguousarray(gt))
    beta = np.array([cc.branching for cc in coupling_set.channels])
    return ChannelConstants(coupling_set.labels, beta, tuple(amats), tuple(gtilde))


def cumulant_rhs(state: CumulantState, constants: ChannelConstants) -> CumulantState:
    """Time derivative of every tracked moment (scheme units)."""
    n = state.n_atoms
    if any(m.shape != (n, n) for m in constants.amats):
        raise ValueError("channel constants do not match the state size")
    if len(constants.labels) == 1:
        (bmat,) = constants.amats
        dat, de, dp = _kernels.two_level_rhs(
            state.a, state.e, state.p, bmat, constants.gtilde[0],
            np.conj(bmat) @ state.p, state.p @ bmat)
        zc = np.zeros((n, n), dtype=complex)
        # the live coherence sits in the p slot, matching _Engine.unpack
        return CumulantState(dat, _ground_gain(state, constants, 0),
                             np.zeros(n), de, np.zeros((n, n)), np.zeros((n, n)),
                             zc, dp, zc.copy())
    if len(constants.labels) != 3:
        raise ValueError("cumulant dynamics support 1 or 3 correlated channels")
    amat, bmat, cmat = constants.amats
    gf, gg, gh = constants.gtilde
    dat, dbt, dct, de, df, dg, dq, dp, dr = _kernels.four_level_rhs(
        state.a, state.b, state.c, state.e, state.f, state.g,
        state.q, state.p, state.r, amat, bmat, cmat, gf, gg, gh,
        np.conj(amat) @ state.q, state.q @ amat,
        np.conj(bmat) @ state.p, state.p @ bmat,
        np.conj(cmat) @ state.r, state.r @ cmat,
        constants.beta[0], constants.beta[1])
    return CumulantState(dat, dbt, dct, de, df, dg, dq, dp, dr)


def _ground_gain(state, constants, idx):
    # two-level db/dt, only used to keep the CumulantState API uniform
    imp = (constants.amats[idx] * state.p).imag
    return constants.beta[idx] * state.a - 2.0 * imp.sum(axis=1)


def channel_rate(state: CumulantState, constants: ChannelConstants,
                 label: str) -> float:
    """R_a(t): collective photon rate into one channel, in Gamma0 units."""
    i = constants.labels.index(label)
    pair = (state.q, state.p, state.r)[i] if len(constants.labels) == 3 else state.p
    return float(constants.beta[i] * state.a.sum()
                 + np.sum(constants.gtilde[i] * pair).real)


def directional_rate(state: CumulantState, coupling_set: CouplingSet,
                     label: str, detector: Detector) -> float:
    """Photon rate per steradian toward the detector on one channel."""
    cc = coupling_set.channel(label)
    labels = coupling_set.labels
    i = labels.index(label)
    pair = (state.q, state.p, state.r)[i] if len(labels) == 3 else state.p
    v = np.exp(1j * cc.channel.wavenumber
               * (coupling_set.geometry.positions @ detector.direction))
    pref = (3.0 * cc.branching / (8.0 * np.pi)) \
        * (1.0 - abs(np.dot(cc.channel.polarization, detector.direction)) ** 2)
    return float(pref * (state.a.sum() + (np.conj(v) @ (pair @ v)).real))


def reduce_two_level(scheme: LevelScheme) -> LevelScheme:
    """Strip zero-rate channels; valid only when one channel survives."""
    live = tuple(ch for ch in scheme.channels if ch.rate > 0)
    if len(live) != 1:
        raise ValueError("scheme does not reduce to a two-level system")
    return LevelScheme(scheme.species, scheme.initial_state, live)


# ---------------------------------------------------------------------------
# packed integration


class _Engine:
    """Packs the moment set into a flat real vector for the integrator.

    Pair symmetry is enforced structurally: e and the Hermitian q/p/r
    keep only j < l entries, f and g keep all off-diagonal entries.
    """

    def __init__(self, coupling_set: CouplingSet):
        self.constants = channel_constants(coupling_set)
        self.two_level = len(self.constants.labels) == 1
        n = coupling_set.n_atoms
        self.n = n
        self.iu = np.triu_indices(n, 1)
        self.off = ~np.eye(n, dtype=bool)
        m = n * (n - 1) // 2
        if self.two_level:
            self.size = n + 3 * m
        else:
            self.size = 3 * n + 11 * m
        self._norms = None

    # -- layout helpers

    def _sym(self, vals):
        n = self.n
        mat = np.zeros((n, n))
        mat[self.iu] = vals
        return mat + mat.T

    def _herm(self, re, im):
        n = self.n
        mat = np.zeros((n, n), dtype=complex)
        mat[self.iu] = re + 1j * im
        return mat + mat.conj().T

    def _full(self, vals):
        mat = np.zeros((self.n, self.n))
        mat[self.off] = vals
        return mat

    def unpack(self, y: np.ndarray) -> CumulantState:
        n = self.n
        m = n * (n - 1) // 2
        if self.two_level:
            a = y[:n]
            e = self._sym(y[n:n + m])
            p = self._herm(y[n + m:n + 2 * m], y[n + 2 * m:n + 3 * m])
            z = np.zeros(n)
            zm = np.zeros((n, n))
            zc = np.zeros((n, n), dtype=complex)
            return CumulantState(a, z.copy(), z.copy(), e, zm.copy(), zm.copy(),
                                 zc.copy(), p, zc.copy())
        k = 3 * n
        a, b, c = y[:n], y[n:2 * n], y[2 * n:k]
        e = self._sym(y[k:k + m]); k += m
        f = self._full(y[k:k + 2 * m]); k += 2 * m
        g = self._full(y[k:k + 2 * m]); k += 2 * m
        q = self._herm(y[k:k + m], y[k + m:k + 2 * m]); k += 2 * m
        p = self._herm(y[k:k + m], y[k + m:k + 2 * m]); k += 2 * m
        r = self._herm(y[k:k + m], y[k + m:k + 2 * m])
        return CumulantState(a, b, c, e, f, g, q, p, r)

    def pack(self, st: CumulantState) -> np.ndarray:
        iu, off = self.iu, self.off
        if self.two_level:
            return np.concatenate([
                st.a, st.e[iu], st.p[iu].real, st.p[iu].imag])
        return np.concatenate([
            st.a, st.b, st.c, st.e[iu], st.f[off], st.g[off],
            st.q[iu].real, st.q[iu].imag, st.p[iu].real, st.p[iu].imag,
            st.r[iu].real, st.r[iu].imag])

    # -- packed right-hand side, no CumulantState detour

    def rhs(self, _, y):
        c = self.constants
        if self.two_level:
            n, m = self.n, self.n * (self.n - 1) // 2
            a = y[:n]
            e = self._sym(y[n:n + m])
            p = self._herm(y[n + m:n + 2 * m], y[n + 2 * m:n + 3 * m])
            bmat = c.amats[0]
            da, de, dp = _kernels.two_level_rhs(
                a, e, p, bmat, c.gtilde[0], np.conj(bmat) @ p, p @ bmat)
            iu = self.iu
            return np.concatenate([da, de[iu], dp[iu].real, dp[iu].imag])
        st = self.unpack(y)
        amat, bmat, cmat = c.amats
        derivs = _kernels.four_level_rhs(
            st.a, st.b, st.c, st.e, st.f, st.g, st.q, st.p, st.r,
            amat, bmat, cmat, *c.gtilde,
            np.conj(amat) @ st.q, st.q @ amat,
            np.conj(bmat) @ st.p, st.p @ bmat,
            np.conj(cmat) @ st.r, st.r @ cmat,
            c.beta[0], c.beta[1])
        return self.pack(CumulantState(*derivs))

    # -- observables straight from a packed vector

    def observe(self, y, coupling_set, detector):
        st = self.unpack(y)
        c = self.constants
        rates = [channel_rate(st, c, lab) for lab in c.labels]
        pops = [st.a.sum()]
        if self.two_level:
            pops.append(self.n - st.a.sum())
        else:
            pops += [st.b.sum(), st.c.sum(),
                     self.n - (st.a + st.b + st.c).sum()]
        direct = [directional_rate(st, coupling_set, lab, detector)
                  for lab in c.labels] if detector is not None else []
        viol = max(
            max(0.0, float(-st.a.min()), float(st.a.max() - 1.0)),
            max(0.0, float(-st.e.min()), float(st.e.max() - 1.0)),
        )
        if not self.two_level:
            for vec in (st.b, st.c):
                viol = max(viol, -float(vec.min()), float(vec.max()) - 1.0)
            for mat in (st.f, st.g):
                viol = max(viol, -float(mat.min()), float(mat.max()) - 1.0)
        return rates, pops, direct, max(viol, 0.0)


def evolve_cumulant(coupling_set: CouplingSet, t_max: float,
                    rtol: float = 1e-8, atol: float = 1e-10,
                    n_samples: int = 400, detector: Detector | None = None,
                    record_states: bool = False) -> EmissionRecord:
    """Integrate from the fully excited state and record emission curves.

    Time is in scheme units. Integration runs in windows of <= _CHUNK
    sample points so only observables are retained, except with
    record_states (small systems, tests). BLAS is pinned to one thread
    for the duration so results do not depend on the host's thread
    count.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    eng = _Engine(coupling_set)
    y = eng.pack(init_fully_excited(eng.n))
    t_grid = np.linspace(0.0, t_max, n_samples)
    labels = eng.constants.labels
    pop_labels = ("e",) + (labels if not eng.two_level else (labels[0],))

    rates = np.empty((n_samples, len(labels)))
    pops = np.empty((n_samples, len(pop_labels)))
    direct = np.empty((n_samples, len(labels))) if detector is not None else None
    states = [] if record_states else None
    worst = 0.0
    failure = None

    with threadpool_limits(limits=1, user_api="blas"):
        start = 0
        while start < n_samples and failure is None:
            stop = min(start + _CHUNK, n_samples)
            chunk = t_grid[start:stop]
            sol = solve_ivp(eng.rhs, (t_grid[max(start - 1, 0)], chunk[-1]), y,
                            t_eval=chunk, method="DOP853", rtol=rtol, atol=atol)
            if not sol.success:
                failure = sol.message
                rates, pops = rates[:start], pops[:start]
                direct = direct[:start] if direct is not None else None
                t_grid = t_grid[:start]
                break
            for k in range(chunk.size):
                yk = sol.y[:, k]
                r, pp, dd, viol = eng.observe(yk, coupling_set, detector)
                rates[start + k] = r
                pops[start + k] = pp
                if direct is not None:
                    direct[start + k] = dd
                worst = max(worst, viol)
                if states is not None:
                    states.append(yk.copy())
            y = sol.y[:, -1]
            start = stop

    if worst > _POSITIVITY_TOL:
        logger.warning("cumulant closure positivity violation %.3e", worst)
    if t_grid.size == 0:
        raise RuntimeError(f"cumulant integration failed at t=0: {failure}")

    channel_rates = {lab: rates[:, i] for i, lab in enumerate(labels)}
    directional = {lab: direct[:, i] for i, lab in enumerate(labels)} \
        if direct is not None else {}
    populations = {lab: pops[:, i] for i, lab in enumerate(pop_labels)}
    meta = {
        "kind": "cumulant",
        "n_atoms": eng.n,
        "species": coupling_set.scheme.species,
        "initial_state": coupling_set.scheme.initial_state,
        "lattice_constant_nm": coupling_set.geometry.lattice_constant,
        "positivity_violation_max": worst,
    }
    if detector is not None:
        meta["detector_theta"] = detector.theta
        meta["detector_phi"] = detector.phi
    if failure is not None:
        meta["integration_failure"] = failure
    rec = EmissionRecord(t_grid, channel_rates, directional, populations,
                         meta=meta)
    if record_states:
        rec.meta["states"] = np.array(states)
        rec.meta["engine"] = eng
    return rec
