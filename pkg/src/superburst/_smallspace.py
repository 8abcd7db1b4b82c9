"""Dense state vectors on (m levels)^N for small-system algebra.

States are ndarrays of shape (m,) * N, one axis per atom. Level 0 is the
excited state; ground levels follow in channel order. Operators that
move a single atom between levels are axis slices, so nothing here ever
materializes an m^N x m^N matrix. Used by the g2 oracle and by tests;
not a dynamics engine.
"""

from __future__ import annotations

import numpy as np

EXCITED = 0


def fully_excited(n_atoms: int, n_levels: int) -> np.ndarray:
    psi = np.zeros((n_levels,) * n_atoms, dtype=complex)
    psi[(EXCITED,) * n_atoms] = 1.0
    return psi


def transfer(psi: np.ndarray, atom: int, src: int, dst: int) -> np.ndarray:
    """Apply |dst><src| on one atom."""
    out = np.zeros_like(psi)
    take = [slice(None)] * psi.ndim
    put = [slice(None)] * psi.ndim
    take[atom] = src
    put[atom] = dst
    out[tuple(put)] = psi[tuple(take)]
    return out


def collective_lower(psi: np.ndarray, coeffs: np.ndarray, dst: int) -> np.ndarray:
    """Apply sum_j coeffs[j] |dst><excited|_j."""
    out = np.zeros_like(psi)
    for j, c in enumerate(coeffs):
        if c != 0.0:
            take = [slice(None)] * psi.ndim
            put = [slice(None)] * psi.ndim
            take[j] = EXCITED
            put[j] = dst
            out[tuple(put)] += c * psi[tuple(take)]
    return out


def norm2(psi: np.ndarray) -> float:
    return float(np.vdot(psi, psi).real)
