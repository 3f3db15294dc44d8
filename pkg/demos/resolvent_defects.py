"""Resolvent defects of the truncated problems.

Compares the regular resolvent on [0, b] with the resolvent of the singular
problem for a fixed source.  The defect falls off with b and stays below the
a-priori bound η|g|².
"""

from hamspec import (eta_bound, ex_lcc, green_kernel_singular, induce_regular, lcc_identity,
                     resolvent_defect)
from hamspec.spectral import sample_source

desc = lcc_identity(ex_lcc())
g = sample_source(desc.sys, 10, 3)
gs = green_kernel_singular(desc, 1j)
for b in (15, 30, 60, 120):
    bc = induce_regular(desc, b)
    d = resolvent_defect(desc, bc, 1j, g, green=gs)
    eta = eta_bound(desc, bc, 1j, green=gs).eta
    print(f"b={b:4d}  δ={d.delta:.2e}  η|g|²={eta * d.g_norm2:.2e}")
