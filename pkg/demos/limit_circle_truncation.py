"""Truncated eigenvalues of a limit-circle system and their error bounds.

ex-lcc carries the weight 2^-t, so the boundary condition at infinity is
transported to the truncation point through the fundamental matrix.  With
M = N = I all eigenvalues are positive in the frame λ = 0, so the run uses
shift 5 to get signed indices on both sides.
"""

from hamspec import ApproxOptions, approximate, ex_lcc, lcc_identity
from hamspec.spectral import shifted_descriptor

SHIFT = 5.0
desc = shifted_descriptor(lcc_identity(ex_lcc(), SHIFT), SHIFT)
rep = approximate(desc, [15, 30, 60, 120], ApproxOptions(defect_samples=0))

print(f"case: {rep.case.value}")
for run in rep.runs:
    print(f"b={run.b:4d}  e_r={run.e_r:.2e}  Σ|λ|^-2={run.hs_sum:.6f}")
for k, seq in sorted(rep.trajectories.items()):
    print(f"k={k:+d}  " + "  ".join(f"{v + SHIFT:.12f}" for v in seq))
