"""Array geometries and detection directions.

Positions are in nanometers, arrays live in the z = 0 plane, and a
detector is a far-field unit vector fixed by polar angles measured from
the z axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """A fixed set of emitter positions, shape (N, 3), in nm."""

    positions: np.ndarray
    lattice_constant: float | None = None
    shape: tuple[int, int] | None = None

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        if pos.shape[0] < 1:
            raise ValueError("need at least one atom")
        object.__setattr__(self, "positions", pos)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class Detector:
    """Far-field detection direction, angles in radians from the z axis."""

    theta: float
    phi: float = 0.0
    direction: np.ndarray = field(init=False)

    def __post_init__(self):
        n = np.array([
            math.sin(self.theta) * math.cos(self.phi),
            math.sin(self.theta) * math.sin(self.phi),
            math.cos(self.theta),
        ])
        object.__setattr__(self, "direction", n)


def detector_direction(theta: float, phi: float = 0.0) -> Detector:
    """Detector at (theta, phi): direction (sin t cos p, sin t sin p, cos t)."""
    return Detector(theta, phi)


# Detector on the +x axis, the usual in-plane choice for a z-normal array.
DETECTOR_X = detector_direction(math.pi / 2.0, 0.0)


def square_lattice(n_x: int, n_y: int, d_nm: float) -> ArrayGeometry:
    """n_x by n_y rectangular lattice in the z = 0 plane, centered on the
    origin, spacing d_nm.

    Centering keeps geometric phases symmetric under x -> -x and
    y -> -y, which the directional estimators rely on in tests.
    """
    if n_x < 1 or n_y < 1:
        raise ValueError("lattice dimensions must be positive integers")
    if d_nm <= 0:
        raise ValueError("lattice constant must be positive")
    ax = (np.arange(n_x) - (n_x - 1) / 2.0) * d_nm
    ay = (np.arange(n_y) - (n_y - 1) / 2.0) * d_nm
    xx, yy = np.meshgrid(ax, ay, indexing="ij")
    pos = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(n_x * n_y)])
    return ArrayGeometry(pos, lattice_constant=d_nm, shape=(n_x, n_y))


def random_cloud(n: int, extent: float, rng: np.random.Generator,
                 min_separation: float = 0.0) -> ArrayGeometry:
    """n atoms uniform in a cube of edge length extent (nm), rejection
    sampled so every pair is at least min_separation apart."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    pts: list[np.ndarray] = []
    attempts = 0
    while len(pts) < n:
        cand = rng.uniform(-extent / 2.0, extent / 2.0, size=3)
        if all(np.linalg.norm(cand - p) >= min_separation for p in pts):
            pts.append(cand)
        attempts += 1
        if attempts > 10000 * n:
            raise RuntimeError("could not place atoms at this density")
    return ArrayGeometry(np.array(pts))
