"""Burst criteria for the fully excited state.

All four conditions reduce to quadratic forms of the dissipative
coupling matrices, evaluated here without time evolution:

  variance    (1/N) sum_nu [(Gamma_nu^a / Gamma0a)^2 - 1]  >  Gamma0 / Gamma0a
  directional S = sum_jl e^{i k0a R.(r_l - r_j)} Gamma^a_jl
                  / (N (Gamma0a + Gamma0))                 >  1

Both are the statement g2(0) > 1 for the corresponding detected set of
modes (a whole channel, or one far-field direction), and brute_force_g2
evaluates that correlation directly on |e...e> as the oracle. Everything
works in scheme units Gamma0 = 1, where Gamma0a is the branching ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .atoms import LevelScheme
from .geometry import ArrayGeometry, Detector, square_lattice
from .interactions import CouplingSet, _projections
from ._smallspace import collective_lower, fully_excited, norm2

_BRUTE_MAX_ATOMS = 12


@dataclass(frozen=True)
class CriterionResult:
    value: float
    threshold: float
    channel: str
    detector: Detector | None = None

    @property
    def burst_predicted(self) -> bool:
        return self.value > self.threshold


def _channel(coupling_set: CouplingSet, label: str):
    cc = coupling_set.channel(label)
    if cc.branching == 0.0:
        raise ValueError(f"channel {label!r} has zero rate; criterion undefined")
    return cc


def variance_criterion(coupling_set: CouplingSet, label: str) -> CriterionResult:
    """Variance of the channel's collective decay rates against its threshold.

    Uses sum_nu (Gamma_nu)^2 = ||Gamma||_F^2, so no diagonalization."""
    cc = _channel(coupling_set, label)
    n = coupling_set.n_atoms
    frob = float(np.sum(cc.gamma * cc.gamma))
    value = (frob / cc.branching**2 - n) / n
    return CriterionResult(value, 1.0 / cc.branching, label)


def _phase_vector(positions: np.ndarray, wavenumber: float,
                  detector: Detector) -> np.ndarray:
    return np.exp(1j * wavenumber * (positions @ detector.direction))


def directional_criterion(coupling_set: CouplingSet, geometry: ArrayGeometry,
                          label: str, detector: Detector) -> CriterionResult:
    """Phase-weighted coupling sum S toward one far-field direction."""
    cc = _channel(coupling_set, label)
    n = geometry.n_atoms
    v = _phase_vector(geometry.positions, cc.channel.wavenumber, detector)
    quad = float(np.real(np.conj(v) @ (cc.gamma @ v)))
    value = quad / (n * (cc.branching + 1.0))
    return CriterionResult(value, 1.0, label, detector)


def per_channel_g2(coupling_set: CouplingSet, label: str) -> float:
    """Closed-form g2(0) with the whole channel detected.

    Exceeds 1 exactly when the variance criterion is met; kept separate
    so the oracle comparison is an equality of numbers, not booleans.
    """
    cc = _channel(coupling_set, label)
    n = coupling_set.n_atoms
    frob = float(np.sum(cc.gamma * cc.gamma))
    return 1.0 + frob / (n**2 * cc.branching) - 1.0 / n - cc.branching / n


def directional_g2(coupling_set: CouplingSet, geometry: ArrayGeometry,
                   label: str, detector: Detector) -> float:
    """Closed-form g2(0) with a single far-field direction detected."""
    cc = _channel(coupling_set, label)
    n = geometry.n_atoms
    v = _phase_vector(geometry.positions, cc.channel.wavenumber, detector)
    quad = float(np.real(np.conj(v) @ (cc.gamma @ v)))
    return 1.0 + quad / n**2 - 1.0 / n - cc.branching / n


def brute_force_g2(coupling_set: CouplingSet, geometry: ArrayGeometry,
                   label: str, detector: Detector | None = None) -> float:
    """g2(0) on |e...e> by explicit operator algebra, the criteria oracle.

    The detected set is either channel `label`'s eigenmodes or, given a
    detector, the single phased collective operator toward it; the
    second photon ranges over every channel's eigenmodes. Cost is
    O(N^2 m^N), so N is capped.
    """
    n = coupling_set.n_atoms
    if n > _BRUTE_MAX_ATOMS:
        raise ValueError(
            f"brute-force g2 evaluates on the full {n}-atom product space; "
            f"N <= {_BRUTE_MAX_ATOMS} only")
    labels = coupling_set.labels
    n_levels = len(labels) + 1
    psi0 = fully_excited(n, n_levels)

    complete = []
    for ci, cc in enumerate(coupling_set.channels):
        for nu in range(n):
            complete.append((cc.spectrum[nu], cc.modes[nu], ci + 1))
    rate_all = sum(rate * norm2(collective_lower(psi0, vec, dst))
                   for rate, vec, dst in complete)

    cc = _channel(coupling_set, label)
    dst = labels.index(label) + 1
    if detector is None:
        detected = [(cc.spectrum[nu], cc.modes[nu], dst) for nu in range(n)]
    else:
        phases = np.conj(_phase_vector(
            geometry.positions, cc.channel.wavenumber, detector))
        detected = [(1.0, phases, dst)]

    numer = 0.0
    rate_det = 0.0
    for ra, va, da in detected:
        psi_a = collective_lower(psi0, va, da)
        rate_det += ra * norm2(psi_a)
        for rd, vd, dd in complete:
            numer += ra * rd * norm2(collective_lower(psi_a, vd, dd))
    return numer / (rate_det * rate_all)


@dataclass(frozen=True)
class SweepCurve:
    """Criterion values on a distance grid, one channel, one detector."""

    distances: np.ndarray  # nm
    values: np.ndarray
    threshold: float
    channel: str
    detector: Detector | None

    @property
    def burst(self) -> np.ndarray:
        return self.values > self.threshold

    def crossings(self) -> list[float]:
        """Threshold crossings, at the midpoint of the bracketing interval."""
        b = self.burst
        mid = 0.5 * (self.distances[1:] + self.distances[:-1])
        return [float(m) for m, lo, hi in zip(mid, b[:-1], b[1:]) if lo != hi]

    def burst_intervals(self) -> list[tuple[float, float]]:
        """Contiguous burst regions as (d_lo, d_hi) in nm, midpoint edges."""
        edges = self.crossings()
        b = self.burst
        if not b.any():
            return []
        # every crossing alternates the region state
        intervals = []
        state = bool(b[0])
        lo = float(self.distances[0]) if state else None
        for x in edges:
            if state:
                intervals.append((lo, x))
                state, lo = False, None
            else:
                state, lo = True, x
        if state:
            intervals.append((lo, float(self.distances[-1])))
        return intervals


def criterion_sweep(scheme: LevelScheme, shape: tuple[int, int],
                    d_min: float, d_max: float, label: str,
                    detector: Detector | None = None,
                    step: float = 10.0) -> SweepCurve:
    """Evaluate one criterion on a grid of lattice constants (nm).

    Skips the eigendecomposition: both criteria are O(N^2) functions of
    the coupling matrix, so a dense sweep over hundreds of grid points
    stays at seconds.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    beta = dict(zip([c.label for c in scheme.channels], scheme.branching_ratios()))
    ch = scheme.channel(label)
    b = float(beta[label])
    if b == 0.0:
        raise ValueError(f"channel {label!r} has zero rate; criterion undefined")
    distances = np.arange(d_min, d_max + 0.5 * step, step)
    values = np.empty(distances.size)
    for i, d in enumerate(distances):
        geom = square_lattice(shape[0], shape[1], float(d))
        pos = geom.positions
        n = geom.n_atoms
        proj = _projections(pos, ch.polarization)
        gamma, _ = _kernels.pair_couplings(pos, ch.wavenumber, proj)
        gamma = b * gamma
        if detector is None:
            frob = float(np.sum(gamma * gamma))
            values[i] = (frob / b**2 - n) / n
        else:
            v = _phase_vector(pos, ch.wavenumber, detector)
            values[i] = float(np.real(np.conj(v) @ (gamma @ v))) / (n * (b + 1.0))
    threshold = 1.0 if detector is not None else 1.0 / b
    return SweepCurve(distances, values, threshold, label, detector)
