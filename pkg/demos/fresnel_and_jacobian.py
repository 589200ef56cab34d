"""Fresnel-type kernel values and the Jacobian minimum on the left branch."""

import numpy as np

from dispersive_lab.oscillatory import fresnel_kernel
from dispersive_lab.sharpness import JacobianSpec, jacobian_min

print("x          k(x)                       |k2(x)|")
for x in np.geomspace(1e-2, 1e2, 5):
    r = fresnel_kernel(x)
    print(f"{x:<10.3g} {complex(r.k):<26.6g} {abs(r.k2):.4f}")

print("\na     y    argmin     J(argmin)   stated endpoint")
for a in (0.25, 0.75, 1.5, 3.0):
    for y in (0.5, 1.0):
        m = jacobian_min(JacobianSpec(a, y))
        print(f"{a:<5g} {y:<4g} {m.argmin:<10.4g} {m.value:<11.6g} {m.predicted:.4g}")
