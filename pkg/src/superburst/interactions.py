"""Photon-mediated pair couplings and their collective decay spectra.

Each decay channel sees the free-space dyadic propagator at its own
wavelength. With u = k0 |r| and P = |d . rhat|^2,

    Gamma_jl / Gamma0a = (3/2) [ (1-P) sin u / u
                                 + (1-3P) (cos u / u^2 - sin u / u^3) ]
    J_jl / Gamma0a    = -(3/4) [ (1-P) cos u / u
                                 - (1-3P) (sin u / u^2 + cos u / u^3) ]

which is d* . G0(r) . d normalized so Gamma -> Gamma0a at contact. G0 is
a real combination of I and rhat rhat, so the quadratic form is real
even for circular polarizations and both matrices come out real
symmetric. A CouplingSet stores the per-channel matrices dimensionless
in units of the scheme total rate, so diag(Gamma^a) is the branching
ratio of channel a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .atoms import DecayChannel, LevelScheme
from .geometry import ArrayGeometry

# Hermiticity / identity tolerances quoted in the module tests.
_EIG_FLOOR = -1e-8


def greens_coupling(r_vec, channel: DecayChannel) -> tuple[float, float]:
    """(J_jl, Gamma_jl) between two atoms displaced by r_vec (nm), in units
    of the channel's single-atom rate.

    Raises on zero displacement: the contact value is direction
    dependent, and coincident atoms belong to the point model.
    """
    r = np.asarray(r_vec, dtype=float)
    dist = math.sqrt(r @ r)
    if dist == 0.0:
        raise ValueError(
            "zero displacement has no propagator value; coupling_matrices "
            "handles the diagonal, and coincident atoms belong in dicke_point")
    u = channel.wavenumber * dist
    rhat = r / dist
    proj = abs(np.dot(channel.polarization, rhat)) ** 2
    a, b = 1.0 - proj, 1.0 - 3.0 * proj
    su, cu = math.sin(u), math.cos(u)
    gamma = 1.5 * (a * su / u + b * (cu / u**2 - su / u**3))
    jcoh = -0.75 * (a * cu / u - b * (su / u**2 + cu / u**3))
    return jcoh, gamma


@dataclass(frozen=True)
class ChannelCoupling:
    """Coupling matrices of one channel, in units of the scheme total rate.

    spectrum holds the eigenvalues of gamma in descending order; modes[nu]
    is the eigenvector of spectrum[nu], so
    sum_nu spectrum[nu] * modes[nu, j] * modes[nu, l] reconstructs gamma.
    """

    channel: DecayChannel
    branching: float
    gamma: np.ndarray
    j_coh: np.ndarray
    spectrum: np.ndarray
    modes: np.ndarray

    @property
    def label(self) -> str:
        return self.channel.label


@dataclass(frozen=True)
class CouplingSet:
    geometry: ArrayGeometry
    scheme: LevelScheme
    channels: tuple[ChannelCoupling, ...]

    @property
    def n_atoms(self) -> int:
        return self.geometry.n_atoms

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(cc.label for cc in self.channels)

    def channel(self, label: str) -> ChannelCoupling:
        for cc in self.channels:
            if cc.label == label:
                return cc
        raise KeyError(f"no channel labeled {label!r}")


def _projections(positions: np.ndarray, pol: np.ndarray) -> np.ndarray:
    dr = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt(np.einsum("jlk,jlk->jl", dr, dr))
    np.fill_diagonal(dist, np.inf)
    rhat = dr / dist[:, :, None]
    proj = np.abs(np.einsum("jlk,k->jl", rhat, pol)) ** 2
    np.fill_diagonal(proj, 0.0)
    return proj


def coupling_matrices(geometry: ArrayGeometry, scheme: LevelScheme) -> CouplingSet:
    """Build all correlated channels' coupling matrices and decay spectra.

    Diagonals are Gamma^a_jj = branching ratio (in scheme units) and
    J^a_jj = 0, the single-atom Lamb shift being absorbed into the
    transition frequency. Channels flagged uncorrelated keep their
    diagonal but no off-diagonal coupling.
    """
    pos = geometry.positions
    n = geometry.n_atoms
    if n > 1:
        dr = pos[:, None, :] - pos[None, :, :]
        dist2 = np.einsum("jlk,jlk->jl", dr, dr)
        np.fill_diagonal(dist2, np.inf)
        if dist2.min() == 0.0:
            raise ValueError(
                "coincident atoms have no finite pair coupling; "
                "use dicke_point for atoms at a single point")
    beta = scheme.branching_ratios()
    out = []
    for ch, b in zip(scheme.channels, beta):
        if ch.correlated and n > 1:
            proj = _projections(pos, ch.polarization)
            gamma, jcoh = _kernels.pair_couplings(pos, ch.wavenumber, proj)
        else:
            gamma, jcoh = np.eye(n), np.zeros((n, n))
        gamma = b * gamma
        jcoh = b * jcoh
        vals, vecs = np.linalg.eigh(gamma)
        order = np.argsort(vals)[::-1]
        spectrum = vals[order]
        modes = vecs[:, order].T
        out.append(ChannelCoupling(ch, b, gamma, jcoh, spectrum, modes))
    return CouplingSet(geometry, scheme, tuple(out))
