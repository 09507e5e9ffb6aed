# coding: utf-8

# # Ramsey fringes on the clock transition
#
# A spin-changing collision during the wait destroys coherence, so the
# contrast decays as exp(-t/T2). Fringes taken with and without the bath
# bound any collisional frequency shift.

import numpy as np

from ionbath import RamseySettings, contrast_decay, fit_contrast_decay, fit_fringe, simulate_ramsey_mc
from ionbath.estimate import frequency_shift
from ionbath.ramsey import shift_bound, simulate_fringe_scan

settings = RamseySettings(decoherence_rate=1 / 1.4)
print(f"fringe period {settings.fringe_period:.2f} Hz, T2 = {settings.T2:.2f} t_L")

# Contrast after several exposures, then a fit of the decay.
points = []
for t in (0.0, 0.5, 1.0, 2.0, 3.0):
    est = simulate_ramsey_mc(settings, 1 / 1.4, t, N=20_000, seed=3)
    points.append((t, est.contrast, max(est.stderr, 1e-4)))
    print(f"t = {t:.1f}  C = {est.contrast:.4f}  closed form {contrast_decay(t, settings.contrast, 1.4):.4f}")
fit = fit_contrast_decay(points)
print(f"T2 = {fit['T2']:.3f} +- {fit.sigma('T2'):.3f}")

# Fringe scans without and with atoms give the shift.
rng = np.random.default_rng(0)
det = np.linspace(-111, 111, 81)
a = fit_fringe(simulate_fringe_scan(det, settings, 3000, rng))
b = fit_fringe(simulate_fringe_scan(det, settings, 3000, rng, exposure=0.5))
shift, sigma = frequency_shift(a, b)
print(f"shift {shift:+.3f} +- {sigma:.3f} Hz")
print(f"fractional bound at 0.1 Hz resolution: {shift_bound(0.1):.1e}")
