"""Fundamental matrices of a discrete Hamiltonian system.

Steps ex-mid forward, checks the conjugate-symplectic identity
Φ(t, conj λ)* J Φ(t, λ) = J, and evaluates the Lagrange identity on two
arbitrary sequences.
"""

import numpy as np

from hamspec import HamSequence, canonical_j, ex_mid, fundamental, lagrange_residual

sys = ex_mid()
lam = 0.3 + 0.8j
phi = fundamental(sys, lam).values(0, 100)
psi = fundamental(sys, np.conj(lam)).values(0, 100)
j = canonical_j(sys.n)

res = np.conj(np.swapaxes(psi, 1, 2)) @ j @ phi - j
print(f"n = {sys.n}, steps = {len(phi) - 1}")
# ex-mid solutions grow geometrically, so measure against the sizes involved
scale = np.linalg.norm(psi, axis=(1, 2)) * np.linalg.norm(phi, axis=(1, 2))
print(f"max |Φ(conj λ)* J Φ(λ) - J| / (|Φ(conj λ)| |Φ(λ)|) = "
      f"{np.max(np.linalg.norm(res, axis=(1, 2)) / scale):.2e}")

rng = np.random.default_rng(0)
u = HamSequence(0, rng.standard_normal((101, 2 * sys.n)) + 0j)
v = HamSequence(0, rng.standard_normal((101, 2 * sys.n)) + 0j)
print(f"Lagrange residual on random sequences = {lagrange_residual(sys, u, None, v, None, 0, 98):.2e}")
