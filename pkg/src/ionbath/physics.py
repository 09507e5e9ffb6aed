"""Species descriptions and ion-atom collision rates.

The long-range ion-atom interaction is the polarisation potential
``-C4 / (2 r**4)``. Two rates follow from it:

* the Langevin capture rate ``2 pi sqrt(C4/mu) n_a``, independent of the
  collision energy, and
* the total (elastic + forward-scattering) rate, which grows as
  ``E**(1/6)``.

Default parameters describe a 87Rb bath around a Yb+ ion; C4 is
calibrated so that ``gamma_L / n_a = 2.1e-15 m^3/s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import constants as const

#: Langevin rate coefficient used to calibrate the default C4 (m^3/s).
LANGEVIN_RATE_COEFFICIENT = 2.1e-15
#: Typical bath density (m^-3).
TYPICAL_DENSITY = 1e18

RB87_MASS_U = 86.909
YB171_MASS_U = 170.936
YB174_MASS_U = 173.939


class DomainError(ValueError):
    """An input lies outside the physical domain of a formula."""


class QubitKind(str, Enum):
    ZEEMAN = "zeeman_two_level"
    HYPERFINE = "hyperfine_clock"


@dataclass(frozen=True)
class IonSpec:
    """A trapped ion species and the qubit encoded in it.

    ``mass`` is in atomic mass units, ``hyperfine_splitting`` in J and
    ``zeeman_splitting`` in MHz.
    """

    isotope_label: str
    mass: float
    qubit_kind: QubitKind = QubitKind.ZEEMAN
    hyperfine_splitting: float = 0.0
    zeeman_splitting: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "qubit_kind", QubitKind(self.qubit_kind))
        if not self.mass > 0:
            raise DomainError(f"ion mass must be positive, got {self.mass}")
        if self.hyperfine_splitting < 0:
            raise DomainError("hyperfine_splitting must be >= 0")
        if self.zeeman_splitting < 0:
            raise DomainError("zeeman_splitting must be >= 0")

    @property
    def mass_kg(self):
        return const.amu_to_kg(self.mass)


@dataclass(frozen=True)
class AtomSpec:
    """A neutral bath species prepared in one hyperfine state |F, m_F>.

    ``polarizability`` is in C m^2 / V and is optional; C4 can be supplied
    directly through :class:`PairParams`.
    """

    species_label: str
    mass: float
    spin_state: tuple[int, int] = (2, 2)
    density: float = TYPICAL_DENSITY
    hyperfine_splitting: float = 0.0
    polarizability: float | None = None

    def __post_init__(self):
        F, m = self.spin_state
        object.__setattr__(self, "spin_state", (int(F), int(m)))
        if F < 0 or abs(m) > F:
            raise DomainError(f"invalid atomic state |F={F}, m_F={m}>")
        if not self.mass > 0:
            raise DomainError(f"atom mass must be positive, got {self.mass}")
        if self.density < 0:
            raise DomainError(f"density must be >= 0, got {self.density}")

    @property
    def mass_kg(self):
        return const.amu_to_kg(self.mass)

    @property
    def F(self):
        return self.spin_state[0]

    @property
    def m_F(self):
        return self.spin_state[1]


def _positive(x):
    return bool(np.all(np.asarray(x) > 0))


def reduced_mass(m_a, m_i):
    """Reduced mass ``m_a m_i / (m_a + m_i)`` in whatever unit the inputs use."""
    if not (np.all(np.asarray(m_a) > 0) and np.all(np.asarray(m_i) > 0)):
        raise DomainError(f"masses must be positive, got {m_a}, {m_i}")
    return m_a * m_i / (m_a + m_i)


def c4_from_polarizability(alpha0, q=const.e):
    """C4 = alpha0 q^2 / (4 pi eps0)^2 in J m^4 (alpha0 in C m^2/V)."""
    if not np.all(np.asarray(alpha0) > 0):
        raise DomainError(f"polarizability must be positive, got {alpha0}")
    return alpha0 * q**2 / (4.0 * math.pi * const.epsilon_0) ** 2


def c4_from_langevin(gamma_L_over_n, mu):
    """Invert the Langevin rate: C4 = mu (gamma_L / (2 pi n_a))^2.

    ``mu`` is in kg, ``gamma_L_over_n`` in m^3/s.
    """
    if not (_positive(gamma_L_over_n) and _positive(mu)):
        raise DomainError("gamma_L/n_a and mu must be positive")
    return mu * (gamma_L_over_n / const.TWO_PI) ** 2


def langevin_rate(C4, mu, n_a):
    """Langevin capture rate in 1/s (C4 in J m^4, mu in kg, n_a in m^-3)."""
    if not (_positive(C4) and _positive(mu)):
        raise DomainError("C4 and mu must be positive")
    if np.any(np.asarray(n_a) < 0):
        raise DomainError(f"density must be >= 0, got {n_a}")
    return const.TWO_PI * np.sqrt(C4 / mu) * n_a


def total_collision_rate(C4, mu, E, n_a):
    """Total ion-atom collision rate in 1/s at collision energy ``E`` (J).

    Includes the quantum mechanical forward-scattering contribution.
    """
    if not (_positive(C4) and _positive(mu)):
        raise DomainError("C4 and mu must be positive")
    if not _positive(E):
        raise DomainError(f"collision energy must be positive, got {E}")
    if np.any(np.asarray(n_a) < 0):
        raise DomainError(f"density must be >= 0, got {n_a}")
    prefactor = math.sqrt(2.0) * math.pi * (1.0 + math.pi**2 / 16.0)
    return n_a * prefactor * (C4 / const.hbar) ** (2.0 / 3.0) * (E / mu) ** (1.0 / 6.0)


def _default_c4():
    mu = const.amu_to_kg(reduced_mass(RB87_MASS_U, YB171_MASS_U))
    return c4_from_langevin(LANGEVIN_RATE_COEFFICIENT, mu)


#: Calibrated C4 for Rb-Yb+ (J m^4), about 1.069e-56.
DEFAULT_C4 = _default_c4()


@dataclass(frozen=True)
class PairParams:
    """Ion-atom pair quantities that feed the rate formulas (all SI)."""

    mu: float
    C4: float = DEFAULT_C4
    q: float = const.e
    E_coll: float = const.mK_to_J(100.0)

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError("mu must be positive")
        if not self.C4 > 0:
            raise DomainError("C4 must be positive")

    @classmethod
    def from_species(cls, ion: IonSpec, atom: AtomSpec, C4=None, E_coll=None):
        mu = reduced_mass(atom.mass_kg, ion.mass_kg)
        if C4 is None:
            C4 = (c4_from_polarizability(atom.polarizability)
                  if atom.polarizability is not None else DEFAULT_C4)
        kw = {} if E_coll is None else {"E_coll": E_coll}
        pair = cls(mu=mu, C4=C4, **kw)
        if not pair.mu < min(atom.mass_kg, ion.mass_kg):
            raise DomainError("reduced mass must be below both masses")
        return pair

    def langevin_rate(self, n_a):
        return langevin_rate(self.C4, self.mu, n_a)

    def total_collision_rate(self, n_a, E=None):
        return total_collision_rate(self.C4, self.mu, self.E_coll if E is None else E, n_a)

    def langevin_time(self, n_a):
        """t_L = 1 / gamma_L in seconds."""
        return 1.0 / self.langevin_rate(n_a)


@dataclass(frozen=True)
class RateTable:
    density: float
    gamma_L: float
    gamma_c: float
    t_L: float
    E_coll: float

    @property
    def gamma_L_over_n(self):
        return self.gamma_L / self.density

    @property
    def gamma_c_over_n(self):
        return self.gamma_c / self.density

    @property
    def ratio(self):
        return self.gamma_c / self.gamma_L


def rate_table(pair: PairParams, n_a=TYPICAL_DENSITY):
    gL = pair.langevin_rate(n_a)
    gc = pair.total_collision_rate(n_a)
    return RateTable(density=n_a, gamma_L=float(gL), gamma_c=float(gc),
                     t_L=1.0 / gL if gL > 0 else math.inf, E_coll=pair.E_coll)


# Species presets -----------------------------------------------------------

YB174 = IonSpec("174Yb+", YB174_MASS_U, QubitKind.ZEEMAN, 0.0, 37.5)
YB171 = IonSpec("171Yb+", YB171_MASS_U, QubitKind.HYPERFINE, const.GHz_to_J(12.6), 0.0)

RB87_HFS = const.GHz_to_J(6.8)


def rb87(spin_state=(2, 2), density=TYPICAL_DENSITY):
    return AtomSpec("87Rb", RB87_MASS_U, spin_state, density, RB87_HFS)


ION_PRESETS = {"yb174": YB174, "yb171": YB171}
