"""Endpoint classification of the built-in systems.

Counts square-summable solutions at a non-real spectral parameter and prints
the resulting case and defect index d.
"""

from hamspec import classify, ex_lcc, ex_lpc, ex_mid, finite_support

for name, sys in [("ex-lcc", ex_lcc()), ("ex-lpc", ex_lpc()), ("ex-mid", ex_mid()),
                  ("finite-support", finite_support())]:
    label = classify(sys)
    print(f"{name:15s} {label.kind.value:13s} d={label.d} finite={label.finite_dim_space}")
