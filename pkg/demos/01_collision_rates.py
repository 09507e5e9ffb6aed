# coding: utf-8

# # Collision rates of an ion in a cold atomic bath
#
# The Langevin rate does not depend on collision energy. The total rate
# (which includes glancing collisions that never touch the spin) grows
# slowly with energy. Times below are quoted in units of t_L = 1/gamma_L.

import numpy as np

from ionbath import PairParams, reduced_mass
from ionbath.constants import amu_to_kg, mK_to_J
from ionbath.physics import RB87_MASS_U, YB171_MASS_U, rate_table

# Reduced mass of the 87Rb / 171Yb+ pair, in u.
mu = reduced_mass(amu_to_kg(RB87_MASS_U), amu_to_kg(YB171_MASS_U))
print(f"reduced mass: {mu / amu_to_kg(1.0):.4f} u")

# The default pair is calibrated to gamma_L / n = 2.1e-15 m^3/s.
pair = PairParams(mu=mu)
table = rate_table(pair, n_a=1e18)
print(f"gamma_L / n   {table.gamma_L_over_n:.4e} m^3/s")
print(f"gamma_c / n   {table.gamma_c_over_n:.4e} m^3/s  (ratio {table.ratio:.2f})")
print(f"t_L           {table.t_L * 1e6:.1f} us")

# The total rate scales as E^(1/6): a factor 64 in energy doubles it.
for T in (1.0, 10.0, 100.0, 1000.0):
    g = pair.total_collision_rate(1e18, E=mK_to_J(T))
    print(f"E = {T:7.1f} mK   gamma_c / gamma_L = {g / table.gamma_L:6.2f}")

# Both rates are linear in density and vectorise over arrays.
n = np.logspace(16, 19, 4)
print("t_L (ms) vs density:", np.round(1e3 / pair.langevin_rate(n), 4))
