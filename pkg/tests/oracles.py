"""Independent reference computations used by the tests.

Nothing here imports the numerical layers of ``hamspec``; each oracle is
written out directly from the recurrence so that agreement with the
package is evidence rather than tautology.
"""

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq


def one_step(blocks, lam):
    """Dense ``2n x 2n`` matrix taking ``y(t)`` to ``y(t+1)``.

    ``y1' = E y1 + E (B + λ W2) y2`` and ``y2' = (C - λ W1) y1' + (I - A*) y2``
    with ``E = (I - A)^{-1}``.
    """
    A, B, C, W1, W2 = (np.atleast_2d(np.asarray(x, dtype=complex)) for x in blocks)
    n = A.shape[0]
    eye = np.eye(n)
    E = np.linalg.inv(eye - A)
    top = np.hstack([E, E @ (B + lam * W2)])
    low = np.hstack([(C - lam * W1) @ E, (C - lam * W1) @ E @ (B + lam * W2) + eye - A.conj().T])
    return np.vstack([top, low])


def fundamental_dense(provider, n, a, t_end, lam):
    """``Φ(t, λ)`` for ``a <= t <= t_end`` by explicit products, ``Φ(a) = I``."""
    phi = [np.eye(2 * n, dtype=complex)]
    for t in range(a, t_end):
        phi.append(one_step(provider(t), lam) @ phi[-1])
    return np.array(phi)


def random_blocks(rng, n, scale=0.5):
    """One admissible coefficient tuple: Hermitian B, C and PSD weights."""
    def herm():
        x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return scale * (x + x.conj().T) / 2

    def psd():
        x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return scale * x @ x.conj().T / n

    A = 0.3 * scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / n
    return A, herm(), herm(), psd(), psd()


def scalar_recurrence(p, q, w, lam, z_prev, z0, a, t_end):
    """``z(a-1), ..., z(t_end)`` from ``-Δ(p Δz(t-1)) + q z = λ w z``.

    Uses ``p(t+1)(z(t+1) - z(t)) = p(t)(z(t) - z(t-1)) + (q(t) - λ w(t)) z(t)``.
    """
    z = {a - 1: complex(z_prev), a: complex(z0)}
    for t in range(a, t_end):
        z[t + 1] = z[t] + (p(t) * (z[t] - z[t - 1]) + (q(t) - lam * w(t)) * z[t]) / p(t + 1)
    return z


def dirichlet_eigs(p, q, w, a, b):
    """Eigenvalues of the scalar problem with ``z(a-1) = z(b+1) = 0``.

    Tridiagonal symmetric matrix against the diagonal weight; points with
    zero weight are eliminated by a Schur complement.
    """
    ts = np.arange(a, b + 1)
    h = np.zeros((len(ts), len(ts)))
    for i, t in enumerate(ts):
        h[i, i] = p(t + 1) + p(t) + q(t)
        if i + 1 < len(ts):
            h[i, i + 1] = h[i + 1, i] = -p(t + 1)
    wd = np.array([w(t) for t in ts], dtype=float)
    pos = wd > 0
    zero = ~pos
    if zero.any():
        h = h[np.ix_(pos, pos)] - h[np.ix_(pos, zero)] @ np.linalg.solve(
            h[np.ix_(zero, zero)], h[np.ix_(zero, pos)])
    return eigh(h, np.diag(wd[pos]), eigvals_only=True)


def _phi_end_batch(provider, a, t_end, lams):
    """``Φ(t_end, λ)`` for an array of λ, scalar real data only."""
    lams = np.asarray(lams, dtype=float)
    phi = np.broadcast_to(np.eye(2), lams.shape + (2, 2)).copy()
    for t in range(a, t_end):
        A, B, C, W1, W2 = (float(np.real(x)) for x in provider(t))
        e = 1.0 / (1.0 - A)
        b = B + lams * W2
        c = C - lams * W1
        step = np.empty(lams.shape + (2, 2))
        step[..., 0, 0] = e
        step[..., 0, 1] = e * b
        step[..., 1, 0] = c * e
        step[..., 1, 1] = c * e * b + 1.0 - A
        phi = step @ phi
    return phi


def coupled_bc_roots(provider, a, b, M, N, lam_frame, window, grid=2e-3, dps=None):
    """Real roots in ``window`` of ``det(M - N Θ*(b+1) J Φ(b+1, λ))`` for n = 1.

    ``Θ = Φ(·, lam_frame)``.  Everything is real for real scalar data, so a
    sign scan followed by Brent's method is enough.  ``Θ* J Φ`` cancels
    terms of size ``b²``, so for long intervals pass ``dps`` to polish each
    root with mpmath.
    """
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    theta = _phi_end_batch(provider, a, b + 1, lam_frame)
    Q = N @ theta.T @ J

    def f(lam):
        return np.linalg.det(M - Q @ _phi_end_batch(provider, a, b + 1, lam))

    xs = np.arange(window[0], window[1] + grid, grid)
    fs = f(xs)
    roots = []
    for x0, x1, f0, f1 in zip(xs, xs[1:], fs, fs[1:]):
        if f0 == 0.0:
            roots.append(x0)
        elif f0 * f1 < 0:
            roots.append(brentq(lambda x: float(f(x)), x0, x1, xtol=1e-14, rtol=1e-15))
    if dps:
        roots = [_mp_root(provider, a, b, M, N, lam_frame, r, dps) for r in roots]
    return np.array(roots)


def _mp_root(provider, a, b, M, N, lam_frame, guess, dps):
    import mpmath

    with mpmath.workdps(dps):
        def phi_end(lam):
            phi = mpmath.eye(2)
            for t in range(a, b + 1):
                A, B, C, W1, W2 = (mpmath.mpf(float(np.real(x))) for x in provider(t))
                e = 1 / (1 - A)
                bb, cc = B + lam * W2, C - lam * W1
                phi = mpmath.matrix([[e, e * bb], [cc * e, cc * e * bb + 1 - A]]) * phi
            return phi

        J = mpmath.matrix([[0, -1], [1, 0]])
        Q = mpmath.matrix(N.tolist()) * phi_end(mpmath.mpf(lam_frame)).T * J
        Mm = mpmath.matrix(M.tolist())
        root = mpmath.findroot(lambda x: mpmath.det(Mm - Q * phi_end(x)), mpmath.mpf(guess),
                               solver="secant", tol=mpmath.mpf(10) ** (-dps + 8))
        return float(root)


def geometric_moment(k, r):
    """``Σ_{m>=0} (m+1)^k r^m`` for k in {0, 1, 2}, in closed form."""
    if k == 0:
        return 1 / (1 - r)
    if k == 1:
        return 1 / (1 - r) ** 2
    if k == 2:
        return (1 + r) / (1 - r) ** 3
    raise ValueError(k)
