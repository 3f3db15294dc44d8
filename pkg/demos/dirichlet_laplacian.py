"""Eigenvalues and resolvent of the Dirichlet Laplacian on 8 points.

The exact eigenvalues are 4 sin²(kπ/18).  The determinant scan gives an
independent check, and the resolvent at an eigenvalue is refused.
"""

import numpy as np

from hamspec import (HamSequence, ZIsEigenvalue, dirichlet_bc, eigen_oracle, eigenvalues_regular,
                     regular_resolvent, second_order)

sys = second_order(1.0, 0.0, 1.0)
bc = dirichlet_bc(sys, 7)
eigs = eigenvalues_regular(sys, bc).values
exact = 4 * np.sin(np.arange(1, 9) * np.pi / 18) ** 2
scan = np.array(eigen_oracle(sys, bc, (-0.5, 4.5)))
for k, (lam, ex, sc) in enumerate(zip(eigs, exact, scan), start=1):
    print(f"k={k}  λ={lam:.15f}  exact error={abs(lam - ex):.1e}  scan error={abs(lam - sc):.1e}")

try:
    regular_resolvent(sys, bc, exact[0], HamSequence.zeros(0, 9, 1))
except ZIsEigenvalue as exc:
    print("resolvent at λ_1 refused:", exc)
