# coding: utf-8

# # Kinetic energy of the ion: sympathetic cooling against spin flips
#
# Every Langevin collision removes a fraction kappa of the ion energy. A
# spin-changing collision that flips the atom from F=2 to F=1 releases
# the atomic hyperfine energy, so the ion settles where cooling and
# heating balance.

from ionbath import TrajectoryState, run_ensemble, spin_temperature, steady_energy_analytic
from ionbath.collisions import cooling_fraction, zeeman_stretched_config
from ionbath.constants import J_to_mK, mK_to_J
from ionbath.physics import RB87_HFS, RB87_MASS_U, YB171_MASS_U
from ionbath.rates import decompose_rates

kappa = cooling_fraction(RB87_MASS_U, YB171_MASS_U)
print(f"kappa = {kappa:.4f}")

eps = 1.0   # every spin-changing collision flips the atom (F=2 bath)
E_ss = steady_energy_analytic(eps, RB87_MASS_U, YB171_MASS_U, RB87_HFS)
print(f"steady energy {J_to_mK(E_ss):.1f} mK")

# Monte Carlo from a hot start, sampled at a few multiples of t_L.
cfg = zeeman_stretched_config(decompose_rates(2.5, 0.609), epsilon=eps, sampled_angles=True)
start = TrajectoryState("up", mK_to_J(1000.0))
stats = run_ensemble(start, cfg, [1, 5, 20, 60], N=20_000, base_seed=1)
for t, E, s in zip(stats.times, stats.mean_energy, stats.energy_stderr):
    print(f"t = {t:4.0f} t_L   <E> = {J_to_mK(E):8.1f} +- {J_to_mK(s):.1f} mK")

# A hyperfine population of 0.163 corresponds to a spin temperature.
print(f"spin temperature {spin_temperature(0.163) * 1e3:.0f} mK")
