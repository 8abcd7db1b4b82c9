"""Species transition data, Zeeman branching weights, and reduced level schemes.

Rates and wavelengths for the metastable D states of 174Yb and 88Sr are
tabulated per fine-structure line. A level scheme resolves one initial
Zeeman state into its independent decay channels, with per-channel rates
obtained as line rate times the squared Clebsch-Gordan weight of the
emitted polarization. All dynamics downstream work in units of the
scheme's total decay rate; absolute rates only matter for the magnetic
field bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import constants as _const

SPECIES = ("Yb174", "Sr88")
INITIAL_STATES = ("D1_m0", "D3_m0", "D3_m3")

# Fine-structure lines: (upper term, lower term, wavelength nm, rate 1/s)
_LINES = {
    "Yb174": (
        ("3P1", "1S0", 556.0, 1.0e6),
        ("3D1", "3P0", 1389.0, 2.0e6),
        ("3D1", "3P1", 1540.0, 1.0e6),
        ("3D1", "3P2", 2090.0, 0.03e6),
        ("3D2", "3P1", 1480.0, 2.0e6),
        ("3D2", "3P2", 1980.0, 0.3e6),
        ("3D3", "3P2", 1800.0, 2.0e6),
    ),
    "Sr88": (
        ("3P1", "1S0", 689.0, 0.47e5),
        ("3D1", "3P0", 2600.0, 2.8e5),
        ("3D1", "3P1", 2740.0, 1.8e5),
        ("3D1", "3P2", 3070.0, 0.088e5),
        ("3D2", "3P1", 2690.0, 3.3e5),
        ("3D2", "3P2", 3010.0, 0.79e5),
        ("3D3", "3P2", 2920.0, 5.9e5),
    ),
}

# Spherical unit vectors for the emitted polarization, quantization axis z.
_POL = {
    0: np.array([0.0, 0.0, 1.0], dtype=complex),
    +1: np.array([-1.0, -1.0j, 0.0]) / math.sqrt(2.0),
    -1: np.array([1.0, -1.0j, 0.0]) / math.sqrt(2.0),
}


@dataclass(frozen=True)
class Transition:
    """One fine-structure line: total rate summed over Zeeman sublevels."""

    upper_term: str
    lower_term: str
    wavelength: float  # nm
    line_rate: float  # 1/s

    def __post_init__(self):
        if self.wavelength <= 0 or self.line_rate <= 0:
            raise ValueError("transition needs positive wavelength and rate")


@dataclass(frozen=True)
class DecayChannel:
    """One Zeeman-resolved transition with its own photon mode.

    polarization is the normalized dipole matrix element; wavenumber is
    2 pi / wavelength in 1/nm. correlated=False marks a channel whose
    photons are treated as spatially uncorrelated (pure loss).
    """

    label: str
    rate: float  # 1/s
    wavenumber: float  # 1/nm
    polarization: np.ndarray
    correlated: bool = True

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("channel rate must be nonnegative")
        norm = np.vdot(self.polarization, self.polarization).real
        if abs(norm - 1.0) > 1e-12:
            raise ValueError("polarization must be a unit vector")

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.wavenumber


@dataclass(frozen=True)
class LevelScheme:
    species: str
    initial_state: str
    channels: tuple[DecayChannel, ...]

    @property
    def total_rate(self) -> float:
        return sum(ch.rate for ch in self.channels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(ch.label for ch in self.channels)

    def branching_ratios(self) -> np.ndarray:
        """Channel rates over the total, adjusted to sum to exactly 1.0."""
        beta = np.array([ch.rate for ch in self.channels]) / self.total_rate
        beta[-1] = 1.0 - beta[:-1].sum()
        return beta

    def channel(self, label: str) -> DecayChannel:
        for ch in self.channels:
            if ch.label == label:
                return ch
        raise KeyError(f"no channel labeled {label!r}")


def species_transitions(species: str) -> list[Transition]:
    """The tabulated fine-structure lines of one species (7 rows each)."""
    if species not in _LINES:
        raise ValueError(f"unknown species {species!r}; expected one of {SPECIES}")
    return [Transition(*row) for row in _LINES[species]]


def _cg_squared(j1: int, m1: int, j2: int, m2: int, jtot: int, mtot: int) -> Fraction:
    """Exact squared Clebsch-Gordan coefficient <j1 m1; j2 m2 | jtot mtot>^2.

    Racah's single-sum formula evaluated in rational arithmetic. Integer
    angular momenta only, which covers every transition handled here.
    """
    if mtot != m1 + m2 or jtot < abs(j1 - j2) or jtot > j1 + j2:
        return Fraction(0)
    if abs(m1) > j1 or abs(m2) > j2 or abs(mtot) > jtot:
        return Fraction(0)
    fact = math.factorial
    pref = Fraction(
        (2 * jtot + 1)
        * fact(jtot + j1 - j2) * fact(jtot - j1 + j2) * fact(j1 + j2 - jtot),
        fact(j1 + j2 + jtot + 1),
    )
    pref *= (
        fact(jtot + mtot) * fact(jtot - mtot)
        * fact(j1 - m1) * fact(j1 + m1)
        * fact(j2 - m2) * fact(j2 + m2)
    )
    total = Fraction(0)
    for k in range(0, j1 + j2 - jtot + 1):
        denoms = (
            k,
            j1 + j2 - jtot - k,
            j1 - m1 - k,
            j2 + m2 - k,
            jtot - j2 + m1 + k,
            jtot - j1 - m2 + k,
        )
        if any(d < 0 for d in denoms):
            continue
        total += Fraction((-1) ** k, math.prod(fact(d) for d in denoms))
    return pref * total * total


def relative_line_strength(J: int, m: int, q: int, J_prime: int) -> Fraction:
    """Fraction of the line J -> J_prime emitted with polarization q from |J m>.

    Equals <J' (m-q); 1 q | J m>^2; the weights over q sum to one for
    every (J, m, J'), so each Zeeman sublevel decays at the full line
    rate split among the allowed polarizations.
    """
    if q not in (-1, 0, 1):
        raise ValueError("polarization index must be -1, 0 or +1")
    if abs(m) > J:
        raise ValueError(f"|m| = {abs(m)} exceeds J = {J}")
    if J_prime not in (J - 1, J) or J_prime < 0:
        raise ValueError("only J' = J-1 or J' = J decay branches are supported")
    if abs(m - q) > J_prime:
        return Fraction(0)
    return _cg_squared(J_prime, m - q, 1, q, J, m)


def _line(species, upper, lower):
    for tr in species_transitions(species):
        if tr.upper_term == upper and tr.lower_term == lower:
            return tr
    raise KeyError((upper, lower))


def build_level_scheme(species: str, initial_state: str,
                       include_weak_loss: bool = False) -> LevelScheme:
    """Reduce one initial Zeeman state to its independent decay channels.

    D1_m0: |3D1, m=0>. The pi branch to 3P1 is Clebsch-Gordan forbidden,
    so the full 3D1->3P0 line is the pi channel and the 3D1->3P1 line
    splits evenly between sigma+ and sigma-. The weak 3D1->3P2 line is
    dropped unless include_weak_loss, which appends it as a spatially
    uncorrelated loss channel. The 3P1->1S0 cascade is outside scope.

    D3_m0: |3D3, m=0>, all three channels on the 3D3->3P2 line with
    weights 3/5, 1/5, 1/5.

    D3_m3: the stretch state, a two-level system. Its single channel
    carries polarization (y + iz)/sqrt(2): the quantization axis is
    rotated into the array plane so a detector on x stays perpendicular
    to the dipole.
    """
    if species not in _LINES:
        raise ValueError(f"unknown species {species!r}; expected one of {SPECIES}")
    if initial_state not in INITIAL_STATES:
        raise ValueError(
            f"unknown initial state {initial_state!r}; expected one of {INITIAL_STATES}")

    def chan(label, line, J, m, q, pol=None, correlated=True):
        weight = relative_line_strength(J, m, q, int(line.lower_term[2]))
        k0 = 2.0 * math.pi / line.wavelength
        pol = _POL[q] if pol is None else pol
        return DecayChannel(label, line.line_rate * float(weight), k0, pol,
                            correlated=correlated)

    if initial_state == "D1_m0":
        pi_line = _line(species, "3D1", "3P0")
        sig_line = _line(species, "3D1", "3P1")
        channels = [
            chan("f", pi_line, 1, 0, 0),
            chan("g", sig_line, 1, 0, +1),
            chan("h", sig_line, 1, 0, -1),
        ]
        if include_weak_loss:
            weak = _line(species, "3D1", "3P2")
            channels.append(DecayChannel(
                "loss", weak.line_rate, 2.0 * math.pi / weak.wavelength,
                _POL[0], correlated=False))
    elif initial_state == "D3_m0":
        line = _line(species, "3D3", "3P2")
        channels = [
            chan("f", line, 3, 0, 0),
            chan("g", line, 3, 0, +1),
            chan("h", line, 3, 0, -1),
        ]
    else:  # D3_m3
        line = _line(species, "3D3", "3P2")
        rotated = np.array([0.0, 1.0, 1.0j]) / math.sqrt(2.0)
        channels = [chan("f", line, 3, 3, +1, pol=rotated)]
    return LevelScheme(species, initial_state, tuple(channels))


def two_level_scheme(rate: float = 1.0e6, wavelength_nm: float = 1000.0,
                     polarization=(0.0, 0.0, 1.0)) -> LevelScheme:
    """An idealized two-level emitter, handy for benchmarks.

    Defaults to a z-polarized dipole so an in-plane detector sits at the
    radiation maximum.
    """
    pol = np.asarray(polarization, dtype=complex)
    pol = pol / math.sqrt(np.vdot(pol, pol).real)
    ch = DecayChannel("f", rate, 2.0 * math.pi / wavelength_nm, pol)
    return LevelScheme("ideal", "two_level", (ch,))


def min_zeeman_field(N: int, total_rate: float) -> float:
    """Smallest Zeeman splitting (in gauss) for channels to decay independently.

    The independent-channel treatment needs the splitting to exceed the
    collective linewidth, B > N hbar Gamma_0 / mu_B. Diagnostic only;
    the solvers always assume the condition holds.
    """
    if N < 1:
        raise ValueError("need at least one atom")
    tesla = N * _const.hbar * total_rate / _const.value("Bohr magneton")
    return tesla * 1.0e4
