"""Fitted decay exponents for Gaussian data, on the two trajectory shapes.

Along x = t^2 the amplitude decays like t^-2; along x = t it decays like
t^-1/2.  Takes about a minute.
"""

import numpy as np

from dispersive_lab.experiments import decay_envelope_experiment

t = np.geomspace(10, 1000, 9)
for curve in ("inv_a", "linear"):
    fit = decay_envelope_experiment(0.5, "gaussian", t, "fixed_y", y=1.0, curve=curve)
    print(f"curve={curve:<6} exponent {fit.exponent:+.4f}")
