"""Benchmark solvers for small two-level arrays.

Two deliberately independent implementations of the same Lindblad
problem:

* a dense master-equation integrator over the full 2^N density matrix
  (N <= 10), built from Kronecker-product site operators, and
* a Monte Carlo wave-function ensemble (N <= 16) that exploits
  excitation-number conservation of the non-Hermitian drift: between
  jumps the state lives in a single fixed-excitation block, so vectors
  and the effective Hamiltonian are stored per block.

Both decompose the dissipator into collective eigenmodes of the decay
matrix. Tiny negative eigenvalues (discretisation noise at coincident
geometry limits) are clamped to zero with a logged warning; the clamped
matrix is then used consistently for drift, feeding and jumps so the
trace stays conserved. The trajectory solver can instead unravel in the
site basis through the symmetric square root of the decay matrix, which
must leave ensemble means unchanged - a regression guard on the
unravelling independence of the master equation, not a user feature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from threadpoolctl import threadpool_limits

from .geometry import Detector
from .interactions import CouplingSet
from .records import EmissionRecord

logger = logging.getLogger(__name__)

_ME_MAX_ATOMS = 10
_MCWF_MAX_ATOMS = 16
_EIG_CLAMP = -1e-8
_MAX_RESTARTS = 50


def _single_channel(coupling_set: CouplingSet):
    if len(coupling_set.channels) != 1:
        raise ValueError("benchmark solvers handle single-channel (two-level) "
                         "schemes only")
    return coupling_set.channels[0]


def _clamped_decay(gamma: np.ndarray):
    """Eigendecomposition of the decay matrix with negative rates zeroed."""
    vals, vecs = np.linalg.eigh(gamma)
    if vals.min() < _EIG_CLAMP:
        logger.warning("decay matrix eigenvalue %.3e clamped to zero",
                       vals.min())
    vals = np.clip(vals, 0.0, None)
    clamped = (vecs * vals) @ vecs.T
    return vals, vecs, 0.5 * (clamped + clamped.T)


def _phase_vector(coupling_set, detector):
    cc = coupling_set.channels[0]
    return np.exp(1j * cc.channel.wavenumber
                  * (coupling_set.geometry.positions @ detector.direction))


def _detector_prefactor(coupling_set, detector):
    cc = coupling_set.channels[0]
    pol = cc.channel.polarization
    return (3.0 * cc.branching / (8.0 * np.pi)) \
        * (1.0 - abs(np.dot(pol, detector.direction)) ** 2)


# ---------------------------------------------------------------------------
# dense master equation


def _site_lowering(n: int, j: int) -> sparse.csr_matrix:
    low = sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    op = sparse.identity(1, format="csr")
    for site in range(n):
        factor = low if site == j else sparse.identity(2, format="csr")
        # site index = bit position, so later sites go on the left
        op = sparse.kron(factor, op, format="csr")
    return op


def master_equation_evolve(coupling_set: CouplingSet, t_max: float,
                           rtol: float = 1e-8, atol: float = 1e-12,
                           n_samples: int = 201,
                           detector: Detector | None = None) -> EmissionRecord:
    """Full density-matrix evolution from the inverted state (N <= 10)."""
    cc = _single_channel(coupling_set)
    n = coupling_set.n_atoms
    if n > _ME_MAX_ATOMS:
        raise ValueError(f"master equation solver is limited to "
                         f"{_ME_MAX_ATOMS} atoms, got {n}")
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    _, _, gam = _clamped_decay(cc.gamma)
    jmat = cc.j_coh

    dim = 1 << n
    lowers = [_site_lowering(n, j) for j in range(n)]
    hmat = sparse.csr_matrix((dim, dim), dtype=complex)
    kmat = sparse.csr_matrix((dim, dim), dtype=complex)
    zero = sparse.csr_matrix((dim, dim))
    for j in range(n):
        tj = sum((jmat[j, l] * lowers[l] for l in range(n) if l != j), zero)
        hmat = hmat + lowers[j].conj().T @ tj
        tk = sum(gam[j, l] * lowers[l] for l in range(n))
        kmat = kmat + lowers[j].conj().T @ tk
    h_nh = (hmat - 0.5j * kmat).tocsr()

    popcount = np.array([bin(k).count("1") for k in range(dim)])
    # gather indices for tr(s_eg^j X): sum of X[s, s | bit_j] over s without j
    gather = []
    for j in range(n):
        no_j = np.array([s for s in range(dim) if not (s >> j) & 1])
        gather.append((no_j, no_j | (1 << j)))

    # all products are kept sparse @ dense via rho A = (A^dag rho^dag)^dag;
    # the feeding term is Sum_jl gam_jl L_j rho L_l^dag = Sum_j L_j Q_j with
    # Q_j = (Sum_l gam_jl L_l rho^dag)^dag
    def rhs(_, y):
        rho = np.ascontiguousarray(y).view(complex).reshape(dim, dim)
        rho_h = np.ascontiguousarray(rho.conj().T)
        out = -1j * (h_nh @ rho)
        out += 1j * (h_nh @ rho_h).conj().T
        stack = [lw @ rho_h for lw in lowers]
        for j in range(n):
            qj = gam[j, 0] * stack[0]
            for l in range(1, n):
                qj += gam[j, l] * stack[l]
            out += lowers[j] @ np.ascontiguousarray(qj.conj().T)
        return out.reshape(-1).view(float)

    def observe(y):
        rho = np.ascontiguousarray(y).view(complex).reshape(dim, dim)
        rate = float((kmat @ rho).diagonal().sum().real)
        pop_e = float(popcount @ rho.diagonal().real)
        trace = float(rho.diagonal().sum().real)
        if detector is not None:
            cmat = np.empty((n, n), dtype=complex)
            for l in range(n):
                x = lowers[l] @ rho
                for j in range(n):
                    rows, cols = gather[j]
                    cmat[j, l] = x[rows, cols].sum()
            v = _phase_vector(coupling_set, detector)
            rdir = _detector_prefactor(coupling_set, detector) \
                * float((np.conj(v) @ cmat @ v).real)
        else:
            rdir = None
        return rate, pop_e, trace, rdir

    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[dim - 1, dim - 1] = 1.0
    y = rho0.reshape(-1).view(float).copy()
    t_grid = np.linspace(0.0, t_max, n_samples)
    label = cc.label

    rates = np.empty(n_samples)
    pops = np.empty(n_samples)
    rdirs = np.empty(n_samples) if detector is not None else None
    trace_err = 0.0
    chunk = max(1, min(16, (1 << 24) // (dim * dim)))
    with threadpool_limits(limits=1, user_api="blas"):
        start = 0
        while start < n_samples:
            stop = min(start + chunk, n_samples)
            sol = solve_ivp(rhs, (t_grid[max(start - 1, 0)], t_grid[stop - 1]),
                            y, t_eval=t_grid[start:stop], method="DOP853",
                            rtol=rtol, atol=atol)
            if not sol.success:
                raise RuntimeError(f"master equation integration failed: "
                                   f"{sol.message}")
            for k in range(stop - start):
                rate, pop_e, trace, rdir = observe(sol.y[:, k])
                rates[start + k] = rate
                pops[start + k] = pop_e
                if rdirs is not None:
                    rdirs[start + k] = rdir
                trace_err = max(trace_err, abs(trace - 1.0))
            y = sol.y[:, -1]
            start = stop

    meta = {
        "kind": "master_equation",
        "n_atoms": n,
        "species": coupling_set.scheme.species,
        "initial_state": coupling_set.scheme.initial_state,
        "lattice_constant_nm": coupling_set.geometry.lattice_constant,
        "trace_error_max": trace_err,
    }
    directional = {label: rdirs} if rdirs is not None else {}
    populations = {"e": pops, label: n - pops}
    return EmissionRecord(t_grid, {label: rates}, directional, populations,
                          meta=meta)


# ---------------------------------------------------------------------------
# Monte Carlo wave functions in fixed-excitation blocks


class _BlockSpace:
    """Lazily built bases, lowering maps and drift blocks for N atoms."""

    def __init__(self, n: int, bmat: np.ndarray, diag_rate: np.ndarray):
        self.n = n
        self.bmat = bmat              # J - i Gamma / 2, zero diagonal
        self.diag_rate = diag_rate    # per-site total rates (Gamma_jj)
        self._basis: dict[int, np.ndarray] = {}
        self._lower: dict[int, list[sparse.csr_matrix]] = {}
        self._drift: dict[int, sparse.csr_matrix] = {}

    def basis(self, k: int) -> np.ndarray:
        if k not in self._basis:
            states = np.arange(1 << self.n, dtype=np.int64)
            pop = np.zeros(states.size, dtype=np.int64)
            for j in range(self.n):
                pop += (states >> j) & 1
            self._basis[k] = states[pop == k]
        return self._basis[k]

    def lowering(self, k: int) -> list[sparse.csr_matrix]:
        """Maps from block k to block k-1, one per site."""
        if k not in self._lower:
            src = self.basis(k)
            dst = self.basis(k - 1)
            ops = []
            for j in range(self.n):
                bit = 1 << j
                cols = np.nonzero((src & bit) != 0)[0]
                rows = np.searchsorted(dst, src[cols] ^ bit)
                data = np.ones(cols.size)
                ops.append(sparse.csr_matrix(
                    (data, (rows, cols)), shape=(dst.size, src.size)))
            self._lower[k] = ops
        return self._lower[k]

    def drift(self, k: int) -> sparse.csr_matrix:
        """Non-Hermitian H_eff restricted to the k-excitation block."""
        if k not in self._drift:
            basis = self.basis(k)
            idx_rows, idx_cols, vals = [], [], []
            for v in range(self.n):
                bitv = 1 << v
                for u in range(self.n):
                    if u == v:
                        continue
                    bitu = 1 << u
                    sel = np.nonzero(((basis & bitv) != 0)
                                     & ((basis & bitu) == 0))[0]
                    if sel.size == 0:
                        continue
                    targets = (basis[sel] ^ bitv) | bitu
                    idx_rows.append(np.searchsorted(basis, targets))
                    idx_cols.append(sel)
                    vals.append(np.full(sel.size, self.bmat[u, v]))
            excited_rate = np.zeros(basis.size)
            for j in range(self.n):
                excited_rate += self.diag_rate[j] * ((basis >> j) & 1)
            diag = sparse.diags(-0.5j * excited_rate)
            if idx_rows:
                hop = sparse.csr_matrix(
                    (np.concatenate(vals),
                     (np.concatenate(idx_rows), np.concatenate(idx_cols))),
                    shape=(basis.size, basis.size))
                self._drift[k] = (hop + diag).tocsr()
            else:
                self._drift[k] = diag.tocsr()
        return self._drift[k]


@dataclass
class _TrajectoryTally:
    """Running first and second moments of per-sample observables."""

    total: np.ndarray
    total_sq: np.ndarray
    pop: np.ndarray
    direct: np.ndarray | None
    direct_sq: np.ndarray | None
    count: int = 0

    def add(self, rates, pops, direct):
        self.total += rates
        self.total_sq += rates ** 2
        self.pop += pops
        if self.direct is not None:
            self.direct += direct
            self.direct_sq += direct ** 2
        self.count += 1

    def mean_stderr(self, values, values_sq):
        m = values / self.count
        if self.count < 2:
            return m, np.zeros_like(m)
        var = (values_sq - values ** 2 / self.count) / (self.count - 1)
        return m, np.sqrt(np.clip(var, 0.0, None) / self.count)


def mcwf_ensemble(coupling_set: CouplingSet, t_max: float, n_traj: int,
                  seed: int, rtol: float = 1e-6, atol: float = 1e-9,
                  n_samples: int = 201, detector: Detector | None = None,
                  site_basis: bool = False) -> EmissionRecord:
    """Trajectory-averaged emission from the inverted state (N <= 16).

    Each trajectory draws its random stream from the master seed and a
    spawn key equal to its index, so results are independent of
    execution order. Trajectories whose ODE segment fails are discarded
    and redrawn from the same stream, with the incident counted in the
    record metadata.
    """
    cc = _single_channel(coupling_set)
    n = coupling_set.n_atoms
    if n > _MCWF_MAX_ATOMS:
        raise ValueError(f"trajectory solver is limited to "
                         f"{_MCWF_MAX_ATOMS} atoms, got {n}")
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if n_traj < 1:
        raise ValueError("need at least one trajectory")

    vals, vecs, gam = _clamped_decay(cc.gamma)
    if site_basis:
        root = (vecs * np.sqrt(vals)) @ vecs.T
        weights = np.ones(n)
        modes = 0.5 * (root + root.T)           # rows are jump vectors
    else:
        weights = vals
        modes = vecs.T
    bmat = cc.j_coh - 0.5j * (gam - np.diag(np.diag(gam)))
    space = _BlockSpace(n, bmat, np.diag(gam))

    t_grid = np.linspace(0.0, t_max, n_samples)
    tally = _TrajectoryTally(
        np.zeros(n_samples), np.zeros(n_samples), np.zeros(n_samples),
        np.zeros(n_samples) if detector is not None else None,
        np.zeros(n_samples) if detector is not None else None)
    if detector is not None:
        v_phase = _phase_vector(coupling_set, detector)
        pref = _detector_prefactor(coupling_set, detector)
    restarts = 0
    label = cc.label

    def segment_rate(psi, k):
        """<K> / <1>: instantaneous emission rate of one trajectory."""
        if k == 0:
            return 0.0
        phi = space.drift(k) @ psi
        norm2 = float(np.vdot(psi, psi).real)
        return -2.0 * float(np.vdot(psi, phi).imag) / norm2

    def gram(psi, k):
        """G_jl = <psi| L_j^dag L_l |psi> / <psi|psi>."""
        if k == 0:
            return np.zeros((n, n), dtype=complex)
        mat = np.column_stack([lw @ psi for lw in space.lowering(k)])
        return (mat.conj().T @ mat) / float(np.vdot(psi, psi).real)

    def run_one(rng):
        rates = np.zeros(n_samples)
        pops = np.zeros(n_samples)
        direct = np.zeros(n_samples) if detector is not None else None
        k = n
        psi = np.ones(1, dtype=complex)
        t_now = 0.0
        cursor = 0
        while cursor < n_samples:
            if k == 0:
                break  # ground state: all remaining samples stay zero
            threshold = rng.random()

            def norm_event(_, y, u=threshold):
                return y @ y - u
            norm_event.terminal = True
            norm_event.direction = -1
            # every sample at index >= cursor lies in (t_now, t_max]: samples
            # before the last jump were returned by the previous segment
            t_eval = t_grid[cursor:]
            sol = solve_ivp(
                lambda _, y, hk=space.drift(k):
                    (-1j * (hk @ np.ascontiguousarray(y).view(complex)))
                    .view(float),
                (t_now, t_max), psi.view(float).copy(), t_eval=t_eval,
                events=norm_event, method="RK45", rtol=rtol, atol=atol)
            if not sol.success:
                return None
            # sol.t stays an empty list when a jump fires before the first
            # requested sample of the segment
            n_got = len(sol.t)
            for col in range(n_got):
                yk = np.ascontiguousarray(sol.y[:, col]).view(complex)
                idx = cursor + col
                rates[idx] = segment_rate(yk, k)
                pops[idx] = k
                if direct is not None:
                    # Gram diagonal already carries the single-site term:
                    # G_jj = <s_ee^j>, so no separate population sum
                    g = gram(yk, k)
                    direct[idx] = pref * float(
                        (np.conj(v_phase) @ g @ v_phase).real)
            cursor += n_got
            if sol.status == 1:  # a jump fired
                t_now = float(sol.t_events[0][0])
                psi = np.ascontiguousarray(sol.y_events[0][0]).view(complex)
                mat = np.column_stack([lw @ psi for lw in space.lowering(k)])
                gmat = mat.conj().T @ mat
                probs = np.array([w * float((np.conj(m) @ gmat @ m).real)
                                  for w, m in zip(weights, modes)])
                probs = np.clip(probs, 0.0, None)
                if probs.sum() <= 0.0:
                    return None
                choice = int(rng.choice(probs.size, p=probs / probs.sum()))
                psi = mat @ modes[choice]
                psi = psi / np.linalg.norm(psi)
                k -= 1
            else:
                break  # reached t_max without a jump
        return rates, pops, direct

    with threadpool_limits(limits=1, user_api="blas"):
        for i in range(n_traj):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
            result = run_one(rng)
            attempts = 0
            while result is None:
                attempts += 1
                restarts += 1
                logger.warning("trajectory %d restarted (attempt %d)",
                               i, attempts)
                if attempts > _MAX_RESTARTS:
                    raise RuntimeError("trajectory solver kept failing")
                result = run_one(rng)
            tally.add(*result)

    r_mean, r_err = tally.mean_stderr(tally.total, tally.total_sq)
    populations = {"e": tally.pop / n_traj,
                   label: n - tally.pop / n_traj}
    stderr = {"R_total": r_err}
    directional = {}
    if detector is not None:
        d_mean, d_err = tally.mean_stderr(tally.direct, tally.direct_sq)
        directional[label] = d_mean
        stderr[f"R_dir_{label}"] = d_err
    meta = {
        "kind": "mcwf",
        "n_atoms": n,
        "species": coupling_set.scheme.species,
        "initial_state": coupling_set.scheme.initial_state,
        "lattice_constant_nm": coupling_set.geometry.lattice_constant,
        "n_trajectories": n_traj,
        "seed": seed,
        "restarts": restarts,
        "site_basis": site_basis,
    }
    return EmissionRecord(t_grid, {label: r_mean}, directional, populations,
                          stderr=stderr, meta=meta)
