# coding: utf-8

# # Spin relaxation of a Zeeman qubit in a stretched bath
#
# In a |2,2> bath only spin exchange can pump the ion up, while spin
# relaxation acts in both directions. A measured (T1, p_inf) pair
# therefore fixes both channels.

import numpy as np

from ionbath import TwoLevelRates, decompose_rates, two_level_evolution
from ionbath.rates import n_level_evolution

T1, p_inf = 2.50, 0.609          # T1 in t_L
rates = decompose_rates(T1, p_inf)
print(rates)
print(f"SE = {rates.down_se * T1:.3f} / T1    SR = {rates.up_sr * T1:.3f} / T1")

# The closed form and the matrix exponential agree to rounding.
t = np.linspace(0, 4 * T1, 9)
closed = two_level_evolution(0.0, rates, t)
M = rates.to_rate_matrix().generator
full = np.array([n_level_evolution(M, [0.0, 1.0], ti)[0] for ti in t])
print("max |closed - expm| =", np.max(np.abs(closed - full)))

# Rates given as totals are booked as spin relaxation.
plain = TwoLevelRates.from_totals((1 - 0.163) / 3.39, 0.163 / 3.39)
print(f"hyperfine steady state p_up = {plain.steady_state:.3f}, T1 = {plain.T1:.2f}")
