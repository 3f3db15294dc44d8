"""Self-adjoint boundary data and the induced regular problems on ``[a, b]``.

A regular problem is the system on ``t = a .. b`` with the boundary condition

    P y(a) - Q y(b+1) = 0,     rank(P, Q) = 2n,  P J P* = Q J Q*.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classify import CaseKind, find_definiteness
from .linalg import ContractViolation, as_cmat, diag_skew_hermitian, fro_norm, rank
from .model import HamSequence, SystemCoefficients, canonical_j
from .solutions import _step_operators, fundamental

SSE_TOL = 1e-9


class InvalidBoundaryCondition(ValueError):
    def __init__(self, identity: str, residual: float, tol: float):
        self.identity = identity
        self.residual = residual
        super().__init__(f"{identity} fails: residual {residual:.3e} > {tol:.1e}")


class InternalConsistency(RuntimeError):
    pass


@dataclass
class PsiBasis:
    """Solutions ψ_1..ψ_2n at a real ``lam0``; the first ``d`` are square summable.

    ``Ψ_1*(t) J Ψ_1(t) = diag(Λ, 0)`` for all ``t``, with ``Λ`` diagonal and
    invertible of order ``2d - 2n``.  ``values(t0, t1)`` evaluates Ψ for
    ``t <= t_far``.
    """

    sys: SystemCoefficients
    lam0: float
    d: int
    psi_a: np.ndarray
    Lambda: np.ndarray
    t_far: int
    _l2: np.ndarray = field(repr=False)
    _frame: np.ndarray = field(repr=False)
    margin: int = 64

    @property
    def n(self) -> int:
        return self.sys.n

    @property
    def valid_until(self) -> int:
        return self.t_far - self.margin

    def ensure(self, t: int) -> None:
        """Re-sweep from further out when ``t`` is past the trusted range."""
        if t <= self.valid_until:
            return
        t_far = max(t + self.margin, 2 * (self.t_far - self.sys.a) + self.sys.a)
        fresh, frame = _backward_sweep(self.sys, self.lam0, self.d, t_far)
        # express the stored initial data in the new sweep's columns
        coef, *_ = np.linalg.lstsq(fresh[0], self.psi_a[:, :self.d], rcond=None)
        self._l2 = fresh @ coef
        self._frame = frame
        self.t_far = t_far

    def null_directions(self, t: int) -> np.ndarray:
        """Orthonormal basis of the values at ``t`` of the ℓ² solutions whose
        form with every ℓ² solution vanishes (the ``Λ``-free block).

        Taken from the orthonormal sweep frame at ``t`` rather than from the
        initial data, because these solutions may decay and would lose all
        relative accuracy when propagated from ``a``.
        """
        self.ensure(t)
        y = self._frame[t - self.sys.a]
        f = y.conj().T @ canonical_j(self.n) @ y
        w, v = np.linalg.eigh(1j * 0.5 * (f - f.conj().T))
        idx = np.argsort(np.abs(w), kind="stable")[:2 * self.n - self.d]
        out, _ = np.linalg.qr(y @ v[:, idx])
        return out

    def values(self, t0: int, t1: int) -> np.ndarray:
        a = self.sys.a
        self.ensure(t1)
        out = np.empty((t1 - t0 + 1, 2 * self.n, 2 * self.n), dtype=complex)
        out[:, :, :self.d] = self._l2[t0 - a:t1 - a + 1]
        if self.d < 2 * self.n:
            phi = fundamental(self.sys, self.lam0).values(t0, t1)
            out[:, :, self.d:] = phi @ self.psi_a[:, self.d:]
        return out

    def __call__(self, t: int) -> np.ndarray:
        return self.values(t, t)[0]


def _backward_sweep(sys: SystemCoefficients, lam0: float, d: int, t_far: int, seed: int = 0):
    """Dominant ``d``-dimensional backward subspace, as solutions on ``[a, t_far]``.

    Integrating backward from ``t_far`` amplifies the solutions that are
    small far out, which is where the square-summable ones live.  Each step
    re-orthonormalises, ``S(t)^{-1} Y(t+1) = Y(t) R_t``, and the solution
    values are recovered as ``Y(t) K(t)`` with ``K(a) = I`` and
    ``K(t+1) = R_t^{-1} K(t)``.
    """
    a = sys.a
    n = sys.n
    m = 2 * n
    e, m1, m2, ah = _step_operators(sys, complex(lam0), a, t_far - 1)
    eye = np.eye(m, dtype=complex)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((m, d)) + 1j * rng.standard_normal((m, d))
    y, _ = np.linalg.qr(y)
    count = t_far - a + 1
    ys = np.empty((count, m, d), dtype=complex)
    rs = np.empty((count - 1, d, d), dtype=complex)
    ys[-1] = y
    for k in range(count - 2, -1, -1):
        s = np.empty((m, m), dtype=complex)
        s1 = e[k] @ (eye[:n] + m1[k] @ eye[n:])
        s[:n] = s1
        s[n:] = eye[n:] + m2[k] @ s1 - ah[k] @ eye[n:]
        z = np.linalg.solve(s, y)
        y, r = np.linalg.qr(z)
        ys[k] = y
        rs[k] = r
    kmat = np.eye(d, dtype=complex)
    out = np.empty_like(ys)
    out[0] = ys[0]
    for k in range(count - 1):
        kmat = np.linalg.solve(rs[k], kmat)
        out[k + 1] = ys[k + 1] @ kmat
    return out, ys


def build_psi_basis(sys: SystemCoefficients, lam0: float, d: int, t_far: int | None = None,
                    margin: int = 64, tol: float = 1e-10) -> PsiBasis:
    """Normalised square-summable solutions at ``lam0`` plus a completion.

    Raises
    ------
    ContractViolation
        If ``d`` is not strictly between ``n`` and ``2n``.
    InternalConsistency
        If ``Ψ̃_1* J Ψ̃_1`` does not have rank ``2d - 2n``.
    """
    n = sys.n
    if not n < d < 2 * n:
        raise ContractViolation(f"a Ψ basis needs n < d < 2n, got d={d}, n={n}")
    if np.imag(lam0) != 0:
        raise ContractViolation("lam0 must be real")
    lam0 = float(np.real(lam0))
    a = sys.a
    t_far = a + max(4 * margin, 256) if t_far is None else t_far
    l2, frame = _backward_sweep(sys, lam0, d, t_far)
    j = canonical_j(n)
    s = l2[0].conj().T @ j @ l2[0]
    s = 0.5 * (s - s.conj().T)
    u, dmat = diag_skew_hermitian(s, tol=tol)
    k = 2 * d - 2 * n
    nonzero = int(np.count_nonzero(np.abs(dmat.diagonal()) > 0))
    if nonzero != k:
        raise InternalConsistency(f"rank of Ψ̃*JΨ̃ is {nonzero}, expected {k}")
    l2 = l2 @ u
    # normalise columns at a so that the data are well scaled
    scale = np.linalg.norm(l2[0], axis=0)
    l2 = l2 / scale
    psi1_a = l2[0]
    # orthonormal complement of span Ψ_1(a)
    proj = np.eye(2 * n) - psi1_a @ np.linalg.pinv(psi1_a)
    uu, _, _ = np.linalg.svd(proj)
    comp = uu[:, :2 * n - d]
    psi_a = np.concatenate([psi1_a, comp], axis=1)
    lam_block = (psi1_a.conj().T @ j @ psi1_a)[:k, :k]
    lam_block = np.diag(lam_block.diagonal())
    return PsiBasis(sys, lam0, d, psi_a, lam_block, t_far, l2, frame, margin)


@dataclass
class SseDescriptor:
    """Boundary data ``(M, N)`` of a self-adjoint extension at the regular end.

    Shapes: limit circle ``M, N`` are ``2n x 2n``; limit point ``M`` and
    ``aux_N`` are ``n x 2n``; intermediate ``M`` is ``d x 2n`` and ``N`` is
    ``d x (2d - 2n)`` with ``psi`` the normalised solution basis.
    """

    sys: SystemCoefficients
    case: CaseKind
    M: np.ndarray
    N: np.ndarray | None = None
    aux_N: np.ndarray | None = None
    psi: PsiBasis | None = None
    lam_frame: float = 0.0
    t0: int | None = None

    def __post_init__(self):
        self.case = CaseKind(self.case)
        self.M = as_cmat(self.M)
        if self.N is not None:
            self.N = as_cmat(self.N)
        if self.case is CaseKind.LIMIT_POINT and self.aux_N is None:
            self.aux_N = self.M.copy()
        if self.aux_N is not None:
            self.aux_N = as_cmat(self.aux_N)

    @property
    def n(self) -> int:
        return self.sys.n

    @property
    def d(self) -> int:
        if self.case is CaseKind.LIMIT_CIRCLE:
            return 2 * self.n
        if self.case is CaseKind.LIMIT_POINT:
            return self.n
        return self.psi.d

    def definiteness_end(self) -> int:
        if self.t0 is None:
            self.t0 = find_definiteness(self.sys).t0
        return self.t0


@dataclass
class SseReport:
    ok: bool
    residuals: dict
    ranks: dict


def _check_shape(m, shape, name):
    if m is None or m.shape != shape:
        got = None if m is None else m.shape
        raise InvalidBoundaryCondition(f"{name} has shape {got}, expected {shape}", float("inf"), 0.0)


def validate_sse(desc: SseDescriptor, tol: float = SSE_TOL) -> SseReport:
    """Rank and symplectic conditions appropriate to the case.

    Raises
    ------
    InvalidBoundaryCondition
        Naming the identity that fails.
    """
    n = desc.n
    j = canonical_j(n)
    res, ranks = {}, {}
    m = desc.M
    scale = lambda *xs: max(1.0, *(fro_norm(x) ** 2 for x in xs))  # noqa: E731
    if desc.case is CaseKind.LIMIT_CIRCLE:
        _check_shape(m, (2 * n, 2 * n), "M")
        _check_shape(desc.N, (2 * n, 2 * n), "N")
        ranks["rank(M,N)"] = rank(np.concatenate([m, desc.N], axis=1))
        res["MJM*-NJN*"] = fro_norm(m @ j @ m.conj().T - desc.N @ j @ desc.N.conj().T) / scale(m, desc.N)
        required = {"rank(M,N)": 2 * n}
    elif desc.case is CaseKind.LIMIT_POINT:
        _check_shape(m, (n, 2 * n), "M")
        _check_shape(desc.aux_N, (n, 2 * n), "aux_N")
        ranks["rank(M)"] = rank(m)
        ranks["rank(aux_N)"] = rank(desc.aux_N)
        res["MJM*"] = fro_norm(m @ j @ m.conj().T) / scale(m)
        res["aux_N J aux_N*"] = fro_norm(desc.aux_N @ j @ desc.aux_N.conj().T) / scale(desc.aux_N)
        required = {"rank(M)": n, "rank(aux_N)": n}
    else:
        if desc.psi is None:
            raise InvalidBoundaryCondition("intermediate case needs a Ψ basis", float("inf"), tol)
        d = desc.psi.d
        _check_shape(m, (d, 2 * n), "M")
        _check_shape(desc.N, (d, 2 * d - 2 * n), "N")
        lam = desc.psi.Lambda
        ranks["rank(M,N)"] = rank(np.concatenate([m, desc.N], axis=1))
        res["MJM*-NΛᵀN*"] = fro_norm(m @ j @ m.conj().T - desc.N @ lam.T @ desc.N.conj().T) / scale(m, desc.N)
        required = {"rank(M,N)": d}
    for key, want in required.items():
        if ranks[key] != want:
            raise InvalidBoundaryCondition(f"{key} = {want}", float(abs(ranks[key] - want)), 0.0)
    for key, r in res.items():
        if r > tol:
            raise InvalidBoundaryCondition(f"{key} = 0", r, tol)
    return SseReport(True, res, ranks)


def default_intermediate_sse(sys: SystemCoefficients, lam0: float, d: int, **kw) -> SseDescriptor:
    """A valid intermediate extension: ``M = Ψ_1*(a)``, ``N = [I; 0]``."""
    psi = build_psi_basis(sys, lam0, d, **kw)
    k = 2 * d - 2 * sys.n
    m = psi.psi_a[:, :d].conj().T
    nmat = np.zeros((d, k), dtype=complex)
    nmat[:k, :k] = np.eye(k)
    return SseDescriptor(sys, CaseKind.INTERMEDIATE, m, nmat, psi=psi, lam_frame=lam0)


@dataclass
class RegularBC:
    b: int
    P: np.ndarray
    Q: np.ndarray
    parent: SseDescriptor | None = None
    sys: SystemCoefficients | None = None

    def __post_init__(self):
        if self.sys is None and self.parent is not None:
            self.sys = self.parent.sys

    def symplectic_residual(self) -> float:
        j = canonical_j(self.P.shape[0] // 2)
        return fro_norm(self.P @ j @ self.P.conj().T - self.Q @ j @ self.Q.conj().T)

    def rank(self) -> int:
        return rank(np.concatenate([self.P, self.Q], axis=1))

    def boundary_matrix(self, phi_end: np.ndarray) -> np.ndarray:
        """``P - Q Φ(b+1)`` for a given end value of a fundamental matrix."""
        return self.P - self.Q @ phi_end


def _normalise_rows(q: np.ndarray, rows: slice) -> np.ndarray:
    q = q.copy()
    norms = np.linalg.norm(q[rows], axis=1)
    norms[norms == 0] = 1.0
    q[rows] /= norms[:, None]
    return q


def induce_regular(desc: SseDescriptor, b: int, check: bool = True, tol: float = SSE_TOL) -> RegularBC:
    """Induced regular boundary condition on ``[a, b]``.

    Rows of ``Q`` that only encode ``(y, ·)(b+1) = 0`` are rescaled to unit
    length, which leaves the condition and ``QJQ*`` unchanged.

    Raises
    ------
    ContractViolation
        If ``b`` does not exceed the definiteness endpoint.
    """
    t0 = desc.definiteness_end()
    if b <= t0:
        raise ContractViolation(f"b={b} must exceed the definiteness endpoint t0={t0}")
    n = desc.n
    j = canonical_j(n)
    if desc.case is CaseKind.LIMIT_CIRCLE:
        theta = fundamental(desc.sys, desc.lam_frame)(b + 1)
        p = desc.M.copy()
        q = desc.N @ theta.conj().T @ j
    elif desc.case is CaseKind.LIMIT_POINT:
        theta = fundamental(desc.sys, desc.lam_frame)(b + 1)
        p = np.concatenate([desc.M, np.zeros((n, 2 * n))])
        q = -np.concatenate([np.zeros((n, 2 * n)), desc.aux_N]) @ theta.conj().T @ j
        q = _normalise_rows(q, slice(n, 2 * n))
    else:
        psi = desc.psi
        d = psi.d
        k = 2 * d - 2 * n
        p = np.concatenate([desc.M, np.zeros((2 * n - d, 2 * n))])
        top = desc.N @ psi(b + 1)[:, :k].conj().T @ j
        # (y, ψ)(b+1) = 0 for the Λ-free block, in an orthonormal basis
        bottom = psi.null_directions(b + 1).conj().T @ j
        q = np.concatenate([top, bottom])
    bc = RegularBC(b, p, q, desc)
    if check:
        if bc.rank() != 2 * n:
            raise InvalidBoundaryCondition("rank(P,Q) = 2n", float(2 * n - bc.rank()), 0.0)
        r = bc.symplectic_residual() / max(1.0, fro_norm(p) ** 2, fro_norm(q) ** 2)
        if r > tol:
            raise InvalidBoundaryCondition("PJP* = QJQ*", r, tol)
    return bc


def dirichlet_bc(sys: SystemCoefficients, b: int) -> RegularBC:
    """``y1(a) = 0`` and ``y1(b+1) + B(b+1) y2(b+1) = 0``.

    For a second-order system (``A = 0``, ``W2 = 0``) these are
    ``z(a-1) = 0`` and ``z(b+1) = 0``, leaving ``t = a .. b`` as interior
    points.
    """
    n = sys.n
    p = np.zeros((2 * n, 2 * n), dtype=complex)
    p[:n, :n] = np.eye(n)
    q = np.zeros((2 * n, 2 * n), dtype=complex)
    q[n:, :n] = -np.eye(n)
    q[n:, n:] = -sys.blocks(b + 1).B
    return RegularBC(b, p, q, None, sys)


def lpc_dirichlet(sys: SystemCoefficients) -> SseDescriptor:
    """Limit-point descriptor ``M = aux_N = (I, 0)``."""
    n = sys.n
    m = np.concatenate([np.eye(n), np.zeros((n, n))], axis=1)
    return SseDescriptor(sys, CaseKind.LIMIT_POINT, m, aux_N=m.copy())


def lcc_identity(sys: SystemCoefficients, lam_frame: float = 0.0) -> SseDescriptor:
    """Limit-circle descriptor ``M = N = I``."""
    eye = np.eye(2 * sys.n)
    return SseDescriptor(sys, CaseKind.LIMIT_CIRCLE, eye, eye.copy(), lam_frame=lam_frame)


def boundary_residual(bc: RegularBC, y: HamSequence) -> float:
    """``|P y(a) - Q y(b+1)|``."""
    return float(np.linalg.norm(bc.P @ y(y.start) - bc.Q @ y(bc.b + 1)))
