"""Physical constants and unit conversions.

Everything inside the package is SI (J, kg, s, m). The helpers below are
the only place where the convenience units used at the interfaces
(atomic mass units, mK, GHz, MHz, microseconds) are translated.
"""

import math

from scipy import constants as _sc

h = _sc.h
hbar = _sc.hbar
k_B = _sc.k
epsilon_0 = _sc.epsilon_0
e = _sc.e
amu = _sc.atomic_mass


def amu_to_kg(m):
    return m * amu


def kg_to_amu(m):
    return m / amu


def mK_to_J(T_mK):
    return T_mK * 1e-3 * k_B


def J_to_mK(E):
    return E / k_B * 1e3


def K_to_J(T):
    return T * k_B


def J_to_K(E):
    return E / k_B


def GHz_to_J(f_GHz):
    """Energy of a transition at ``f_GHz`` (E = h f)."""
    return h * f_GHz * 1e9


def J_to_GHz(E):
    return E / h * 1e-9


def MHz_to_J(f_MHz):
    return h * f_MHz * 1e6


def J_to_Hz(E):
    return E / h


TWO_PI = 2.0 * math.pi
