"""
Quadratic power dependence
==========================

Detected coincidences versus pump power, with Poisson counting noise at
20 s per point, fitted with a power law in log-log space.  Repeating
over seeds shows the spread of the fitted exponent.
"""

import numpy as np

from dualring_sfwm import device, fitting, sfwm

chip = device.reference_device()
powers = np.linspace(0.05, 0.5, 10)

_, clean = sfwm.power_scan(chip, powers)
print("noiseless exponent:", fitting.fit_power_law(powers, clean).params["p"])

exps = []
for seed in range(30):
    _, noisy = sfwm.power_scan(chip, powers, integration_s=20.0,
                               rng=np.random.default_rng(seed))
    exps.append(fitting.fit_power_law(powers, noisy).params["p"])
exps = np.array(exps)
print(f"noisy exponent over 30 seeds: median {np.median(exps):.3f}, "
      f"spread {exps.std():.3f}")

for p, c in zip(powers, clean):
    print(f"  {p:.2f} mW  {c:8.2f} Hz")
