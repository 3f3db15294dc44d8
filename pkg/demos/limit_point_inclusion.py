"""Spectral inclusion for a limit-point system.

ex-lpc has continuous spectrum [0, 4].  Truncated Dirichlet eigenvalues fill
[0.5, 3.5] more densely as b grows, which is all that is claimed here.
"""

import numpy as np

from hamspec import eigenvalues_regular, ex_lpc, induce_regular, lpc_dirichlet

desc = lpc_dirichlet(ex_lpc())
for b in (30, 60, 120):
    e = eigenvalues_regular(desc.sys, induce_regular(desc, b)).values
    w = np.sort(e[(e >= 0.5) & (e <= 3.5)])
    print(f"b={b:4d}  eigenvalues in [0.5, 3.5]: {len(w):3d}  max gap {np.max(np.diff(w)):.3f}")
