"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Everything here
is a pure function of its inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

EPS = np.finfo(float).eps
#: Pivots below ``PIVOT_FACTOR * eps * ||A||`` are treated as zero.
PIVOT_FACTOR = 1e3


class ContractViolation(ValueError):
    """Input does not satisfy the documented precondition."""


class SingularMatrix(np.linalg.LinAlgError):
    """LU factorisation met a pivot below the singularity threshold."""

    def __init__(self, index: int, pivot: float, threshold: float):
        self.index = index
        self.pivot = pivot
        self.threshold = threshold
        super().__init__(
            f"pivot {index} has magnitude {pivot:.3e} below threshold {threshold:.3e}"
        )


@dataclass(frozen=True)
class HermEigen:
    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0


def as_cmat(a) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=complex))
    if m.ndim != 2:
        raise ContractViolation(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractViolation("matrix has non-finite entries")
    return m


def fro_norm(a) -> float:
    """Frobenius norm, the only matrix norm used in the error bounds."""
    return float(np.sqrt(np.sum(np.abs(np.asarray(a)) ** 2)))


def _require_square(a: np.ndarray) -> None:
    if a.shape[0] != a.shape[1]:
        raise ContractViolation(f"matrix must be square, got {a.shape}")


def _round_robin(k: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint (p, q) pair sets covering every pair once (tournament order)."""
    m = k + (k % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            u, v = players[i], players[m - 1 - i]
            if u < k and v < k:
                p.append(min(u, v))
                q.append(max(u, v))
        rounds.append((np.array(p, dtype=int), np.array(q, dtype=int)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


#: Off-diagonal entries below this multiple of ``||A||`` are never rotated.
TINY_ROTATION = 1e-250


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60) -> HermEigen:
    """Cyclic Jacobi for Hermitian matrices with parallel (round-robin) ordering.

    Each round applies up to ``k/2`` commuting rotations at once.  Entries that
    are exactly zero are never rotated, so exact block structure survives.
    """
    a = np.array(a, dtype=complex)
    k = a.shape[0]
    v = np.eye(k, dtype=complex)
    if k == 1:
        return HermEigen(a.diagonal().real.copy(), v, 0)
    scale = fro_norm(a)
    if scale == 0.0:
        return HermEigen(np.zeros(k), v, 0)
    rounds = _round_robin(k)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for p, q in rounds:
            if p.size == 0:
                continue
            apq = a[p, q]
            mag = np.abs(apq)
            # exact zeros keep block structure; subnormal entries would overflow the phase
            active = mag > TINY_ROTATION * scale
            if not active.any():
                continue
            p, q, apq, mag = p[active], q[active], apq[active], mag[active]
            app = a[p, p].real
            aqq = a[q, q].real
            dd = aqq - app
            # smallest rotation, |theta| <= pi/4
            theta = 0.5 * np.arctan2(np.where(dd >= 0, 2.0 * mag, -2.0 * mag), np.abs(dd))
            c = np.cos(theta)
            s = np.sin(theta)
            ph = apq / mag
            # columns: A <- A U, U = diag(1, conj(ph)) [[c, s], [-s, c]]
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * cp - s * np.conj(ph) * cq
            a[:, q] = s * cp + c * np.conj(ph) * cq
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - (s * ph)[:, None] * rq
            a[q, :] = s[:, None] * rp + (c * ph)[:, None] * rq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * np.conj(ph) * vq
            v[:, q] = s * vp + c * np.conj(ph) * vq
        off = fro_norm(a - np.diag(a.diagonal()))
        if off <= tol * scale:
            break
    values = a.diagonal().real
    order = np.argsort(values, kind="stable")
    return HermEigen(values[order], v[:, order], sweeps)


#: Above this order ``method="auto"`` hands over to LAPACK.
JACOBI_MAX_ORDER = 128


def herm_eigen(a, tol: float = 1e-12, method: str = "auto") -> HermEigen:
    """Full spectrum of a Hermitian matrix.

    Parameters
    ----------
    a : array_like
        Square Hermitian matrix.
    tol : float
        Relative tolerance for both the Hermitian check and the Jacobi
        stopping rule (off-diagonal Frobenius mass).
    method : {"auto", "jacobi", "lapack"}
        ``"lapack"`` delegates to :func:`numpy.linalg.eigh`; both meet the
        same residual contract.  ``"auto"`` uses Jacobi up to
        ``JACOBI_MAX_ORDER`` and LAPACK beyond.

    Returns
    -------
    HermEigen
        Ascending eigenvalues and orthonormal eigenvectors (columns).
    """
    a = as_cmat(a)
    _require_square(a)
    scale = fro_norm(a)
    if fro_norm(a - a.conj().T) > max(tol, 1e-12) * max(scale, 1.0) * 10:
        raise ContractViolation("matrix is not Hermitian within tolerance")
    a = 0.5 * (a + a.conj().T)
    if method == "auto":
        method = "jacobi" if a.shape[0] <= JACOBI_MAX_ORDER else "lapack"
    if method == "jacobi":
        return jacobi_eigh(a, tol=tol)
    if method == "lapack":
        w, v = np.linalg.eigh(a)
        return HermEigen(w, v, 0)
    raise ValueError(f"unknown method {method!r}")


def _threshold(a: np.ndarray, factor: float) -> float:
    return factor * EPS * max(fro_norm(a), np.finfo(float).tiny)


def _lu(a):
    # singularity is judged by our own pivot threshold, not scipy's warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        return scipy.linalg.lu_factor(a, check_finite=False)


def lu_factor(a, pivot_factor: float = PIVOT_FACTOR):
    """LU with partial pivoting; raises :class:`SingularMatrix` on a tiny pivot."""
    a = as_cmat(a)
    _require_square(a)
    lu, piv = _lu(a)
    thr = _threshold(a, pivot_factor)
    d = np.abs(lu.diagonal())
    bad = np.nonzero(d < thr)[0]
    if bad.size:
        i = int(bad[0])
        raise SingularMatrix(i, float(d[i]), thr)
    return lu, piv


def lu_solve(a, b, pivot_factor: float = PIVOT_FACTOR) -> np.ndarray:
    """Solve ``A X = B`` by partial-pivoting LU."""
    b = np.asarray(b, dtype=complex)
    lu, piv = lu_factor(a, pivot_factor)
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def det(a, pivot_factor: float = PIVOT_FACTOR) -> complex:
    """Determinant as the signed product of LU pivots; 0 if a pivot underflows."""
    a = as_cmat(a)
    _require_square(a)
    lu, piv = _lu(a)
    diag = lu.diagonal()
    if np.any(np.abs(diag) < _threshold(a, pivot_factor)):
        return 0j
    sign = (-1) ** int(np.sum(piv != np.arange(a.shape[0])))
    return complex(sign * np.prod(diag))


def rank(a, tol: float = 1e-10) -> int:
    """Numerical rank by Gaussian elimination with full pivoting.

    A pivot counts if it exceeds ``tol * ||A||_F``.
    """
    m = np.array(np.atleast_2d(a), dtype=complex)
    scale = fro_norm(m)
    if scale == 0.0:
        return 0
    thr = tol * scale
    rows, cols = m.shape
    r = 0
    for r in range(min(rows, cols)):
        sub = np.abs(m[r:, r:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= thr:
            return r
        i += r
        j += r
        m[[r, i], :] = m[[i, r], :]
        m[:, [r, j]] = m[:, [j, r]]
        m[r + 1:, r:] -= np.outer(m[r + 1:, r] / m[r, r], m[r, r:])
    return min(rows, cols)


def diag_skew_hermitian(s, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Unitary diagonalisation ``U* S U = D`` of a skew-Hermitian matrix.

    Computed from the Hermitian matrix ``iS``.  Diagonal entries of ``D`` are
    purely imaginary; those with modulus above ``tol * ||S||`` come first
    (ordered by decreasing modulus), the numerically zero ones last.
    """
    s = as_cmat(s)
    _require_square(s)
    scale = fro_norm(s)
    if fro_norm(s + s.conj().T) > tol * max(scale, 1.0):
        raise ContractViolation("matrix is not skew-Hermitian within tolerance")
    k = s.shape[0]
    if scale == 0.0:
        return np.eye(k, dtype=complex), np.zeros((k, k), dtype=complex)
    eig = herm_eigen(1j * s, tol=min(tol, 1e-12))
    mu = eig.values  # iS v = mu v  =>  S v = -i mu v
    nonzero = np.abs(mu) > tol * scale
    order = np.concatenate([
        np.nonzero(nonzero)[0][np.argsort(-np.abs(mu[nonzero]), kind="stable")],
        np.nonzero(~nonzero)[0],
    ])
    u = eig.vectors[:, order]
    dvals = -1j * mu[order]
    dvals[~nonzero[order]] = 0.0
    return u, np.diag(dvals)
