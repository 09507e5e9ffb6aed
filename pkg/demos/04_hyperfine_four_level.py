# coding: utf-8

# # Four hyperfine levels and their steady state
#
# The 171Yb+ ground manifold has F=0 and three F=1 sublevels. A generic
# rate matrix is propagated with the matrix exponential, and the steady
# state comes from the closed classes of its graph.

import numpy as np

from ionbath import RateMatrix, n_level_evolution, n_level_steady_state
from ionbath.rates import MultipleSteadyStatesError

labels = ("F0", "F1m1", "F1_0", "F1p1")
rm = RateMatrix.empty(labels)
for f1 in labels[1:]:
    rm = rm.with_rate(f1, "F0", 0.1).with_rate("F0", f1, 0.17)
M = rm.generator
print("steady state:", np.round(n_level_steady_state(M), 4))

p0 = np.array([1.0, 0, 0, 0])
for t in (0.5, 2.0, 10.0):
    print(f"t = {t:4.1f}", np.round(n_level_evolution(M, p0, t), 4))

# Cutting F0 off leaves two closed classes and no unique steady state.
cut = RateMatrix.empty(labels).with_rate("F1m1", "F0", 0.2)
try:
    n_level_steady_state(cut.generator)
except MultipleSteadyStatesError as exc:
    print("no unique steady state:", exc)

# Matrices round-trip through JSON.
assert RateMatrix.from_json(rm.to_json()) == rm
