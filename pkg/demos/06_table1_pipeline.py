# coding: utf-8

# # From simulated counts to fitted relaxation parameters
#
# Each profile is simulated collision by collision, read out through its
# detection model and fitted in observed space. The fitted T1 and p_inf
# should sit within their errors of the input values.

from ionbath import bootstrap, fit_relaxation
from ionbath.detection import preset
from ionbath.pipeline import default_times, format_table1, measure_relaxation, reproduce_table1
from ionbath.profiles import profile

print(format_table1(reproduce_table1(seed=0)))

# One profile in detail, with a bootstrap check of the covariance errors.
prof = profile("yb171_rb22")
data = measure_relaxation(prof, default_times(prof.T1), n_trials=3000, seed=7)
fit = fit_relaxation(data, detection=preset(prof.detection))
for name in fit.names:
    print(f"{name:6s} {fit[name]:.4f} +- {fit.sigma(name):.4f}")
print("flags:", fit.flags)
boot = bootstrap(data, lambda d: fit_relaxation(d, detection=preset(prof.detection)), n_resamples=100, seed=1)
print(f"T1 sigma: covariance {fit.sigma('T1'):.3f}, bootstrap {boot.std('T1'):.3f}")
