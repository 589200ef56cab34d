"""Propagate a Gaussian under exp(i t |D|^a) and sample it along x = y t^(1/a)."""

import numpy as np

from dispersive_lab.experiments import gaussian_profile
from dispersive_lab.propagator import TrajectorySpec, propagate_halfde, sample_trajectory
from dispersive_lab.spectral import FrequencyGrid, SpectralField

grid = FrequencyGrid(2**12, 40.0)
u0 = SpectralField.from_function(grid, gaussian_profile)

print("L2 norm drift under the flow")
for a in (0.5, 2.0):
    for t in (1.0, 10.0, 100.0):
        drift = propagate_halfde(u0, a, t).l2_norm() / u0.l2_norm() - 1
        print(f"  a={a:<4g} t={t:<6g} {drift:+.1e}")

print("\n|S(t)| along x = t^2 (a = 1/2, y = 1)")
times = np.array([1.0, 2.0, 5.0])
for t, s in zip(times, sample_trajectory(u0, 0.5, TrajectorySpec(1.0), times)):
    print(f"  t={t:<4g} {abs(s):.6e}")
