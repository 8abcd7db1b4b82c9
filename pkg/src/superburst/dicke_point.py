"""Exact point models: all atoms at one location, permutation symmetric.

With every pair coupling equal to the single-atom rate, the density
matrix started from |e...e> stays diagonal in the symmetric occupation
basis, so the dynamics reduce to a classical master equation on
occupation configurations (n per level, summing to N). The jump
e.g. |n_e, n_g> -> |n_e - 1, n_g + 1> carries the collective matrix
element n_e (n_g + 1): stimulated by the atoms already in the target
state. That closure is what symmetric_subspace_oracle verifies against
the full m^N Lindblad evolution.

Three models: a two-level atom, a Lambda atom (two ground states), and
a ladder (cascade through an intermediate level). Rates are per channel;
times in the records are in units of the inverse summed excited-state
width for two-level and Lambda, and of 1/Gamma_ef for the ladder.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from .records import EmissionRecord

MODELS = {
    # model -> (level labels, channels as (name, src level, dst level))
    "two_level": (("e", "g"), (("eg", "e", "g"),)),
    "lambda": (("e", "g", "h"), (("eg", "e", "g"), ("eh", "e", "h"))),
    "ladder": (("e", "f", "g"), (("ef", "e", "f"), ("fg", "f", "g"))),
}

_MAX_CONFIGS = 10_000_000
_ORACLE_MAX_ATOMS = 6


@dataclass(frozen=True)
class PointModelSpec:
    model: str
    n: int
    rates: tuple[float, ...]

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; one of {set(MODELS)}")
        if self.n < 1:
            raise ValueError("need at least one atom")
        names = self.channel_names
        if len(self.rates) != len(names):
            raise ValueError(f"model {self.model!r} takes rates for {names}")
        if any(r < 0 for r in self.rates) or not any(r > 0 for r in self.rates):
            raise ValueError("rates must be nonnegative with at least one positive")

    @property
    def levels(self) -> tuple[str, ...]:
        return MODELS[self.model][0]

    @property
    def channel_names(self) -> tuple[str, ...]:
        return tuple(name for name, _, _ in MODELS[self.model][1])

    def channel_rate(self, name: str) -> float:
        try:
            return self.rates[self.channel_names.index(name)]
        except ValueError:
            raise ValueError(f"model {self.model!r} has no channel {name!r}") from None


def two_level_model(n: int, rate: float = 1.0) -> PointModelSpec:
    return PointModelSpec("two_level", n, (rate,))


def lambda_model(n: int, rate_eg: float, rate_eh: float) -> PointModelSpec:
    return PointModelSpec("lambda", n, (rate_eg, rate_eh))


def ladder_model(n: int, rate_ef: float, rate_fg: float) -> PointModelSpec:
    return PointModelSpec("ladder", n, (rate_ef, rate_fg))


def _configs(spec: PointModelSpec) -> list[tuple[int, ...]]:
    """All occupation tuples over the model's levels summing to N.

    Deterministic lexicographic order; tuple order matches spec.levels."""
    n, m = spec.n, len(spec.levels)
    size = 1
    for k in range(1, m):
        size = size * (n + k) // k
    if size > _MAX_CONFIGS:
        raise ValueError(f"configuration simplex has {size} states (cap {_MAX_CONFIGS})")
    out = []
    if m == 2:
        for ne in range(n, -1, -1):
            out.append((ne, n - ne))
    else:
        for ne in range(n, -1, -1):
            for nmid in range(n - ne, -1, -1):
                out.append((ne, nmid, n - ne - nmid))
    return out


def config_jump_rate(spec: PointModelSpec, config: tuple[int, ...],
                     channel: str) -> float:
    """Collective jump rate out of one occupation configuration.

    rate * n_src * (n_dst + 1): the square of the symmetric-subspace
    matrix element of the collective lowering operator.
    """
    names = spec.channel_names
    if channel not in names:
        raise ValueError(f"model {spec.model!r} has no channel {channel!r}")
    if len(config) != len(spec.levels) or any(k < 0 for k in config) \
            or sum(config) != spec.n:
        raise ValueError(f"invalid configuration {config!r} for N={spec.n}")
    _, src, dst = MODELS[spec.model][1][names.index(channel)]
    i_src = spec.levels.index(src)
    i_dst = spec.levels.index(dst)
    return spec.channel_rate(channel) * config[i_src] * (config[i_dst] + 1)


def _generator(spec: PointModelSpec):
    """Sparse rate matrix Q with Q[c', c] the flow c -> c', plus the
    per-channel outflow-rate vectors used for emission records."""
    configs = _configs(spec)
    index = {c: i for i, c in enumerate(configs)}
    nc = len(configs)
    rate_vecs = {}
    rows, cols, vals = [], [], []
    diag = np.zeros(nc)
    for name, src, dst in MODELS[spec.model][1]:
        i_src = spec.levels.index(src)
        i_dst = spec.levels.index(dst)
        g = spec.channel_rate(name)
        vec = np.zeros(nc)
        for i, c in enumerate(configs):
            k = g * c[i_src] * (c[i_dst] + 1)
            if k == 0.0:
                continue
            vec[i] = k
            c2 = list(c)
            c2[i_src] -= 1
            c2[i_dst] += 1
            rows.append(index[tuple(c2)])
            cols.append(i)
            vals.append(k)
            diag[i] -= k
        rate_vecs[name] = vec
    q = sparse.csr_matrix((vals, (rows, cols)), shape=(nc, nc))
    q += sparse.diags(diag)
    return configs, q.tocsr(), rate_vecs


def evolve_point(spec: PointModelSpec, t_grid) -> EmissionRecord:
    """Integrate the configuration master equation from all atoms excited."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must increase from 0")
    configs, q, rate_vecs = _generator(spec)
    p0 = np.zeros(len(configs))
    p0[0] = 1.0  # lexicographic order puts the fully excited config first
    sol = solve_ivp(lambda _, p: q @ p, (0.0, t_grid[-1]), p0,
                    t_eval=t_grid, method="DOP853", rtol=1e-8, atol=1e-12)
    if not sol.success:
        raise RuntimeError(f"point-model integration failed: {sol.message}")
    probs = sol.y
    occ = np.array(configs, dtype=float)
    channel_rates = {name: vec @ probs for name, vec in rate_vecs.items()}
    populations = {lvl: occ[:, i] @ probs for i, lvl in enumerate(spec.levels)}
    return EmissionRecord(
        t_grid, channel_rates, populations=populations,
        meta={"kind": "point", "model": spec.model, "n_atoms": spec.n,
              "rates": list(spec.rates)})


def _collective_ops(spec: PointModelSpec):
    """Collective lowering operators on the full m^N space, one per channel."""
    m = len(spec.levels)
    n = spec.n
    eye = sparse.identity(m, format="csr")
    ops = {}
    for name, src, dst in MODELS[spec.model][1]:
        s = sparse.csr_matrix(
            (np.ones(1), ([spec.levels.index(dst)], [spec.levels.index(src)])),
            shape=(m, m))
        total = None
        for j in range(n):
            factors = [s if k == j else eye for k in range(n)]
            op = factors[0]
            for f in factors[1:]:
                op = sparse.kron(op, f, format="csr")
            total = op if total is None else total + op
        ops[name] = total.tocsr()
    return ops


def symmetric_subspace_oracle(spec: PointModelSpec, t_grid) -> EmissionRecord:
    """Full m^N Lindblad evolution with collective jump operators.

    Independent check of the rate-equation reduction: no diagonality or
    symmetry assumption enters, the density matrix is evolved whole.
    """
    if spec.n > _ORACLE_MAX_ATOMS:
        raise ValueError(f"oracle holds the full density matrix; "
                         f"N <= {_ORACLE_MAX_ATOMS} only")
    t_grid = np.asarray(t_grid, dtype=float)
    m = len(spec.levels)
    dim = m ** spec.n
    ops = _collective_ops(spec)
    pieces = []
    for name in spec.channel_names:
        s = ops[name]
        ss = (s.conj().T @ s).tocsr()
        pieces.append((spec.channel_rate(name), s, s.conj().tocsr(), ss,
                       ss.T.tocsr()))

    # only sparse @ dense products below: rho S† = (S* rho^T)^T etc.
    def rhs(_, y):
        rho = np.ascontiguousarray(y).view(complex).reshape(dim, dim)
        out = np.zeros_like(rho)
        for g, s, s_conj, ss, ss_t in pieces:
            out += g * (s @ np.ascontiguousarray((s_conj @ rho.T).T)
                        - 0.5 * (ss @ rho + (ss_t @ rho.T).T))
        return out.ravel().view(float)

    rho0 = np.zeros((dim, dim), dtype=complex)
    rho0[0, 0] = 1.0  # level 0 is "e", so index 0 is |e...e>
    sol = solve_ivp(rhs, (0.0, t_grid[-1]), rho0.ravel().view(float),
                    t_eval=t_grid, method="DOP853", rtol=1e-9, atol=1e-12)
    if not sol.success:
        raise RuntimeError(f"oracle integration failed: {sol.message}")
    channel_rates = {name: np.empty(t_grid.size) for name in spec.channel_names}
    for k in range(t_grid.size):
        rho = np.ascontiguousarray(sol.y[:, k]).view(complex).reshape(dim, dim)
        for (g, _, _, ss, _), name in zip(pieces, spec.channel_names):
            channel_rates[name][k] = g * (ss @ rho).trace().real
    return EmissionRecord(
        t_grid, channel_rates,
        meta={"kind": "point-oracle", "model": spec.model, "n_atoms": spec.n})
