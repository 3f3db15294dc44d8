"""Resolvents, Green kernels, eigenvalues of regular problems, defects and
error bounds, and the driver that runs a sequence of truncations.

Resolvent convention: ``y = (zI - H)^{-1} g`` means ``L(y) = W R(z y - g)``
together with the boundary condition.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .classify import CaseKind
from .extensions import RegularBC, SseDescriptor, induce_regular
from .linalg import EPS, PIVOT_FACTOR, SingularMatrix, det, fro_norm, herm_eigen, lu_solve
from .model import HamSequence, SystemCoefficients, canonical_j, shifted
from .solutions import (HORIZON_CAP, TAIL_TOL, TailDivergence, cauchy_terms, fundamental,
                        gram_terms, reverse_tails, tail_quantities, _step_operators)


class ZIsEigenvalue(ArithmeticError):
    """The boundary solve is singular: ``z`` is (numerically) an eigenvalue."""

    def __init__(self, z, detail: str = ""):
        self.z = z
        super().__init__(f"z={z} is an eigenvalue of the problem{': ' + detail if detail else ''}")


class ShiftSearchFailed(RuntimeError):
    pass


def _ct(x: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(x, -1, -2))


def _weighted_sources(sys: SystemCoefficients, g: HamSequence, t0: int, t1: int) -> np.ndarray:
    """``W(s) R(g)(s)`` for ``t0 <= s <= t1``; ``g`` is zero outside its range."""
    m = 2 * sys.n
    out = np.zeros((t1 - t0 + 1, m), dtype=complex)
    lo, hi = max(t0, g.start), min(t1, g.end)
    if hi >= lo:
        # pad by one so R(g)(end) sees y1(end+1) = 0
        vals = np.concatenate([g.values, np.zeros((1, m))])
        r = HamSequence(g.start, vals).r_traces()[lo - g.start:hi - g.start + 1]
        out[lo - t0:hi - t0 + 1] = np.einsum("tij,tj->ti", sys.weights(lo, hi), r)
    return out


# --- regular problems -----------------------------------------------------------

def _bvp_matrix(sys: SystemCoefficients, bc: RegularBC, z: complex) -> scipy.sparse.csc_matrix:
    """Sparse matrix of ``L(y) - z W R(y)`` on ``[a, b]`` stacked over the
    boundary rows ``P y(a) - Q y(b+1)``; unknowns are ``y(a), ..., y(b+1)``.

    Per ``t`` the first block row reads
    ``(C - zW1) y1(t+1) - y2(t+1) + (I - A*) y2(t)`` and the second
    ``(I - A) y1(t+1) - y1(t) - (B + zW2) y2(t)``.
    """
    a, b = sys.a, bc.b
    n, m = sys.n, 2 * sys.n
    steps = b - a + 1
    blk = sys.block_arrays(a, b)
    eye = np.broadcast_to(np.eye(n), (steps, n, n))
    # coefficients on (y(t), y(t+1)), shape (steps, 2n, 4n)
    c = np.zeros((steps, m, 2 * m), dtype=complex)
    c[:, :n, n:m] = eye - _ct(blk.A)
    c[:, :n, m:m + n] = blk.C - z * blk.W1
    c[:, :n, m + n:] = -eye
    c[:, n:, :n] = -eye
    c[:, n:, n:m] = -(blk.B + z * blk.W2)
    c[:, n:, m:m + n] = eye - blk.A
    rows = (np.arange(steps)[:, None, None] * m + np.arange(m)[None, :, None]).repeat(2 * m, axis=2)
    cols = (np.arange(steps)[:, None, None] * m + np.arange(2 * m)[None, None, :]).repeat(m, axis=1)
    bc_rows = np.arange(m)[:, None] + steps * m
    bc_vals = np.concatenate([bc.P, -bc.Q], axis=1)
    bc_cols = np.concatenate([np.arange(m), steps * m + np.arange(m)])[None, :].repeat(m, axis=0)
    size = (steps + 1) * m
    mat = scipy.sparse.coo_matrix(
        (np.concatenate([c.ravel(), bc_vals.ravel()]),
         (np.concatenate([rows.ravel(), bc_rows.repeat(2 * m, axis=1).ravel()]),
          np.concatenate([cols.ravel(), bc_cols.ravel()]))),
        shape=(size, size))
    return mat.tocsc()


def _resolvent_values(sys: SystemCoefficients, bc: RegularBC, z: complex, wrg: np.ndarray) -> np.ndarray:
    """Solutions for a batch of sources ``W R(g)`` of shape ``(b-a+1, 2n, k)``.

    Returns values ``y(t)`` for ``t = a .. b+1``, shape ``(b-a+2, 2n, k)``.
    The boundary value problem is solved directly as one sparse system,
    which stays accurate when ``Φ(·, z)`` grows exponentially.

    Raises
    ------
    ZIsEigenvalue
        If a pivot of the sparse LU falls below the relative threshold.
    """
    z = complex(z)
    mat = _bvp_matrix(sys, bc, z)
    thr = PIVOT_FACTOR * EPS * max(fro_norm(mat.data), np.finfo(float).tiny)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.sparse.linalg.MatrixRankWarning)
            lu = scipy.sparse.linalg.splu(mat)
    except RuntimeError as exc:  # exactly singular
        raise ZIsEigenvalue(z, str(exc)) from exc
    piv = np.abs(lu.U.diagonal())
    if piv.min() < thr:
        raise ZIsEigenvalue(z, f"pivot {int(piv.argmin())} has magnitude {piv.min():.3e} "
                               f"below threshold {thr:.3e}")
    m = 2 * sys.n
    steps, _, k = wrg.shape
    rhs = np.zeros(((steps + 1) * m, k), dtype=complex)
    rhs[:steps * m] = -wrg.reshape(steps * m, k)
    y = lu.solve(rhs)
    return y.reshape(steps + 1, m, k)


def regular_resolvent(sys: SystemCoefficients, bc: RegularBC, z: complex, g: HamSequence) -> HamSequence:
    """``(zI - H_b)^{-1} g`` on ``[a, b+1]`` by variation of constants.

    Raises
    ------
    ZIsEigenvalue
        If ``P - Q Φ(b+1, z)`` is singular.
    """
    wrg = _weighted_sources(sys, g, sys.a, bc.b)[:, :, None]
    return HamSequence(sys.a, _resolvent_values(sys, bc, z, wrg)[:, :, 0])


@dataclass(frozen=True)
class GreenData:
    """Kernel matrices of a resolvent, ``M_kernel = N_kernel + J``."""

    z: complex
    kind: str
    b: int | None
    K: np.ndarray
    N_kernel: np.ndarray
    M_kernel: np.ndarray
    residual: float = 0.0
    horizon: int | None = None


def _kernel_from_K(m: np.ndarray, k: np.ndarray, z) -> tuple[np.ndarray, np.ndarray]:
    j = canonical_j(m.shape[0] // 2)
    try:
        nk = lu_solve(m - k, k @ j)
    except SingularMatrix as exc:
        raise ZIsEigenvalue(z, str(exc)) from exc
    return nk, nk + j


def green_kernel_regular(sys: SystemCoefficients, bc: RegularBC, z: complex) -> GreenData:
    """``K_r = Q Φ(b+1, z)`` and ``N_r = (P - K_r)^{-1} K_r J``."""
    z = complex(z)
    k = bc.Q @ fundamental(sys, z)(bc.b + 1)
    nk, mk = _kernel_from_K(bc.P, k, z)
    return GreenData(z, "regular", bc.b, k, nk, mk)


def green_apply(sys: SystemCoefficients, gd: GreenData, g: HamSequence, t_end: int) -> HamSequence:
    """``y(t) = Φ(t)[M Σ_{s<t} + N Σ_{s>=t}] R(Φ)*(s, z̄) W(s) R(g)(s)`` for ``t <= t_end``.

    Sums run over ``s <= b`` for a regular kernel and over the support of
    ``g`` for the singular one.
    """
    a = sys.a
    s_end = gd.b if gd.b is not None else max(g.end, a)
    wrg = _weighted_sources(sys, g, a, s_end)
    rphi_bar = fundamental(sys, np.conj(gd.z)).r_traces(a, s_end)
    terms = np.einsum("tji,tj->ti", np.conj(rphi_bar), wrg)
    before = np.concatenate([np.zeros((1, terms.shape[1])), np.cumsum(terms, axis=0)])
    after = reverse_tails(np.concatenate([terms, np.zeros((1, terms.shape[1]))]))
    idx = np.minimum(np.arange(t_end - a + 1), s_end - a + 1)
    coef = before[idx] @ gd.M_kernel.T + after[idx] @ gd.N_kernel.T
    phi = fundamental(sys, gd.z).values(a, t_end)
    return HamSequence(a, np.einsum("tij,tj->ti", phi, coef))


def lcc_limit_K(desc: SseDescriptor, z: complex, tol: float = TAIL_TOL, start: int = 16,
                cap: int = HORIZON_CAP) -> tuple[np.ndarray, float, int]:
    """``K = lim N Θ*(t) J Φ(t, z)`` by doubling ``t`` until successive values settle.

    Raises
    ------
    TailDivergence
        If the values have not settled by ``a + cap``.
    """
    sys = desc.sys
    j = canonical_j(sys.n)
    theta = fundamental(sys, desc.lam_frame)
    phi = fundamental(sys, z)
    t = sys.a + start
    prev = desc.N @ _ct(theta(t)) @ j @ phi(t)
    while True:
        t = sys.a + 2 * (t - sys.a)
        cur = desc.N @ _ct(theta(t)) @ j @ phi(t)
        diff = fro_norm(cur - prev)
        if diff <= tol * max(1.0, fro_norm(cur)):
            return cur, diff, t
        if t - sys.a >= cap:
            raise TailDivergence("boundary limit matrix", t, diff)
        prev = cur


def green_kernel_singular(desc: SseDescriptor, z: complex, tol: float = TAIL_TOL) -> GreenData:
    if desc.case is not CaseKind.LIMIT_CIRCLE:
        raise ValueError("the singular resolvent is only available in the limit circle case")
    z = complex(z)
    k, res, horizon = lcc_limit_K(desc, z, tol)
    nk, mk = _kernel_from_K(desc.M, k, z)
    return GreenData(z, "singular-lcc", None, k, nk, mk, res, horizon)


@dataclass
class SingularSolution:
    """Singular resolvent: explicit values on ``[a, t_end]`` and ``y(t) = Φ(t) c``
    for all ``t >= tail_from``."""

    values: HamSequence
    tail_coef: np.ndarray
    tail_from: int
    green: GreenData


def singular_resolvent_lcc(desc: SseDescriptor, z: complex, g: HamSequence, tol: float = TAIL_TOL,
                           t_end: int | None = None, green: GreenData | None = None) -> SingularSolution:
    """``(zI - H)^{-1} g`` on the half-line for a limit circle extension.

    ``g`` is taken to vanish beyond its last stored index.
    """
    sys = desc.sys
    gd = green if green is not None else green_kernel_singular(desc, z, tol)
    a = sys.a
    s_end = max(g.end, a)
    t_end = max(t_end if t_end is not None else s_end + 1, s_end + 1)
    y = green_apply(sys, gd, g, t_end)
    wrg = _weighted_sources(sys, g, a, s_end)
    rphi_bar = fundamental(sys, np.conj(gd.z)).r_traces(a, s_end)
    total = np.einsum("tji,tj->i", np.conj(rphi_bar), wrg)
    return SingularSolution(y, gd.M_kernel @ total, s_end + 1, gd)


# --- eigenvalues -------------------------------------------------------------------

@dataclass
class EigenList:
    """Eigenvalues of one regular problem, in the frame where they were computed.

    ``values`` is sorted with multiplicity.  ``negatives[k-1]`` is the k-th
    eigenvalue below zero counting downward; ``positives[k-1]`` the k-th at
    or above zero counting upward.
    """

    values: np.ndarray
    multiplicities: list
    mu: float
    theta_threshold: float
    discarded: int = 0
    herm_residual: float = 0.0
    basis_size: int = 0

    @property
    def negatives(self) -> np.ndarray:
        return np.sort(self.values[self.values < 0])[::-1]

    @property
    def positives(self) -> np.ndarray:
        return np.sort(self.values[self.values >= 0])

    def signed(self, k: int) -> float | None:
        """``λ_k`` by signed index; ``None`` if not available."""
        if k == 0:
            raise ValueError("signed indices start at ±1")
        seq = self.positives if k > 0 else self.negatives
        return float(seq[abs(k) - 1]) if abs(k) <= len(seq) else None


def weight_basis(sys: SystemCoefficients, b: int, rel_tol: float = 1e-12):
    """Orthonormal basis of the weighted space on ``[a, b]``.

    Element ``j`` has a single non-zero R-trace ``v_j / sqrt(w_j)`` at ``t_j``,
    where ``(w_j, v_j)`` is an eigenpair of ``W(t_j)``.  Returns the list of
    ``t_j`` and the vectors ``u_j = sqrt(w_j) v_j = W(t_j) R(e_j)(t_j)``,
    plus the number of zero weight directions skipped.
    """
    ts, us = [], []
    skipped = 0
    w = sys.weights(sys.a, b)
    for k in range(w.shape[0]):
        wk = 0.5 * (w[k] + _ct(w[k]))
        vals, vecs = np.linalg.eigh(wk)
        top = max(float(np.max(np.abs(vals))), 0.0)
        keep = vals > rel_tol * top if top > 0 else np.zeros_like(vals, dtype=bool)
        skipped += int(np.count_nonzero(~keep))
        for i in np.nonzero(keep)[0]:
            ts.append(sys.a + k)
            us.append(math.sqrt(vals[i]) * vecs[:, i])
    return np.array(ts, dtype=int), np.array(us).reshape(len(us), 2 * sys.n)


def compressed_resolvent(sys: SystemCoefficients, bc: RegularBC, mu: float):
    """Hermitian matrix of ``(μI - H_b)^{-1}`` in the weight basis."""
    a, b = sys.a, bc.b
    ts, us = weight_basis(sys, b)
    k = len(ts)
    m = 2 * sys.n
    if k == 0:
        return np.zeros((0, 0), dtype=complex), ts, us
    wrg = np.zeros((b - a + 1, m, k), dtype=complex)
    wrg[ts - a, :, np.arange(k)] = us
    y = _resolvent_values(sys, bc, mu, wrg)
    n = sys.n
    # R(y_j)(t_i) for every pair
    r = np.concatenate([y[ts - a + 1, :n, :], y[ts - a, n:, :]], axis=1)   # (k, 2n, k)
    s = np.einsum("im,imj->ij", us.conj(), r)
    return s, ts, us


def _cluster(values: np.ndarray, rel: float) -> list[int]:
    mults = []
    i = 0
    while i < len(values):
        j = i + 1
        while j < len(values) and values[j] - values[j - 1] <= rel * max(1.0, abs(values[j])):
            j += 1
        mults.append(j - i)
        i = j
    return mults


def shift_candidates(count: int = 12):
    yield 0.0
    for k in range(count):
        yield -(2 * k + 1.0)
        yield 2 * k + 1.0


def eigenvalues_regular(sys: SystemCoefficients, bc: RegularBC, mu: float | None = None,
                        zero_tol: float = 1e-10, cluster_tol: float = 1e-8,
                        herm_tol: float = 1e-9, retries: int = 12) -> EigenList:
    """Eigenvalues of the regular problem by resolvent compression.

    With ``mu=None`` the shifts ``0, -1, 1, -3, 3, ...`` are tried until the
    boundary solve is regular.

    Raises
    ------
    ShiftSearchFailed
        If every candidate shift is (numerically) an eigenvalue.
    """
    candidates = [mu] if mu is not None else list(shift_candidates(retries))
    last = None
    for m in candidates:
        try:
            s, ts, _ = compressed_resolvent(sys, bc, m)
        except ZIsEigenvalue as exc:
            last = exc
            continue
        break
    else:
        if mu is not None:
            raise last
        raise ShiftSearchFailed(f"no regular shift among {candidates}") from last
    if s.shape[0] == 0:
        return EigenList(np.zeros(0), [], m, 0.0, 0, 0.0, 0)
    scale = fro_norm(s)
    herm_res = fro_norm(s - _ct(s)) / max(scale, np.finfo(float).tiny)
    if herm_res > herm_tol:
        raise ArithmeticError(f"compressed resolvent is not Hermitian (residual {herm_res:.2e})")
    theta = herm_eigen(0.5 * (s + _ct(s))).values
    thr = zero_tol * float(np.max(np.abs(theta)))
    keep = np.abs(theta) > thr
    lam = np.sort(m - 1.0 / theta[keep])
    return EigenList(lam, _cluster(lam, cluster_tol), m, thr, int(np.count_nonzero(~keep)),
                     herm_res, s.shape[0])


def _phi_end_batch(sys: SystemCoefficients, lams: np.ndarray, t_end: int) -> np.ndarray:
    """``Φ(t_end, λ)`` for every ``λ`` in ``lams`` at once."""
    lams = np.asarray(lams, dtype=complex)
    n, m = sys.n, 2 * sys.n
    e, _, _, ah = _step_operators(sys, 0.0, sys.a, t_end - 1)
    blk = sys.block_arrays(sys.a, t_end - 1)
    y = np.broadcast_to(np.eye(m, dtype=complex), (len(lams), m, m)).copy()
    lw = lams[:, None, None]
    for k in range(e.shape[0]):
        y1, y2 = y[:, :n], y[:, n:]
        y1n = e[k] @ (y1 + (blk.B[k] + lw * blk.W2[k]) @ y2)
        y2n = y2 + (blk.C[k] - lw * blk.W1[k]) @ y1n - ah[k] @ y2
        y = np.concatenate([y1n, y2n], axis=1)
    return y


def boundary_determinant(sys: SystemCoefficients, bc: RegularBC, lams) -> np.ndarray:
    """``|det(P - Q Φ(b+1, λ))|`` for each ``λ``."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    phis = _phi_end_batch(sys, lams, bc.b + 1)
    return np.array([abs(det(bc.boundary_matrix(p))) for p in phis])


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def eigen_oracle(sys: SystemCoefficients, bc: RegularBC, window: tuple[float, float],
                 grid: float = 1e-2, width: float = 1e-10, reject: float = 1e-6) -> list[float]:
    """Roots of the boundary determinant in ``window`` by grid scan and
    golden-section refinement.

    Clustered roots closer than the grid step can be missed, and roots are
    returned without multiplicity.
    """
    lo, hi = window
    count = max(3, int(math.ceil((hi - lo) / grid)) + 1)
    xs = np.linspace(lo, hi, count)
    f = boundary_determinant(sys, bc, xs)
    roots = []
    for i in range(1, count - 1):
        if not (f[i] <= f[i - 1] and f[i] <= f[i + 1] and f[i] < max(f[i - 1], f[i + 1])):
            continue
        x0, x1 = xs[i - 1], xs[i + 1]
        c = x1 - _GOLDEN * (x1 - x0)
        d = x0 + _GOLDEN * (x1 - x0)
        fc, fd = boundary_determinant(sys, bc, [c, d])
        while x1 - x0 > width:
            if fc < fd:
                x1, d, fd = d, c, fc
                c = x1 - _GOLDEN * (x1 - x0)
                fc = boundary_determinant(sys, bc, [c])[0]
            else:
                x0, c, fc = c, d, fd
                d = x0 + _GOLDEN * (x1 - x0)
                fd = boundary_determinant(sys, bc, [d])[0]
        x = 0.5 * (x0 + x1)
        fx = boundary_determinant(sys, bc, [x])[0]
        if fx <= reject * max(f[i - 1], f[i + 1]):
            roots.append(float(x))
    return roots


# --- defects and bounds --------------------------------------------------------------

@dataclass
class DefectResult:
    delta: float
    delta1: float
    delta2: float
    g_norm2: float


def _weighted_norm2_rows(sys, r: np.ndarray, t0: int) -> float:
    if r.shape[0] == 0:
        return 0.0
    w = sys.weights(t0, t0 + r.shape[0] - 1)
    return float(np.einsum("ti,tij,tj->", r.conj(), w, r).real)


def _r_rows(y: HamSequence, t0: int, t1: int) -> np.ndarray:
    return y.r_traces()[t0 - y.start:t1 - y.start + 1]


def resolvent_defect(desc: SseDescriptor, bc: RegularBC, z: complex, g: HamSequence,
                     tol: float = TAIL_TOL, green: GreenData | None = None) -> DefectResult:
    """Squared weighted distance between the singular and truncated resolvents.

    ``δ_1`` is the mass on ``[a, b]`` of the difference, ``δ_2`` the mass of the
    singular resolvent beyond ``b``.
    """
    sys = desc.sys
    a, b = sys.a, bc.b
    padded = HamSequence(g.start, np.concatenate([g.values, np.zeros((1, g.values.shape[1]))]))
    g_norm2 = _weighted_norm2_rows(sys, _r_rows(padded, g.start, g.end), g.start)
    t_explicit = max(b + 1, g.end + 1)
    sing = singular_resolvent_lcc(desc, z, g, tol, t_end=t_explicit + 1, green=green)
    # the truncated problem only sees R(g)(s) for s <= b, i.e. g restricted to [a, b]
    reg = regular_resolvent(sys, bc, z, g)
    diff = HamSequence(a, sing.values.values[:b + 2 - a] - reg.values)
    d1 = _weighted_norm2_rows(sys, _r_rows(diff, a, b), a)
    # explicit part of the tail, then Φ(t)c beyond tail_from
    t_from = max(b + 1, sing.tail_from)
    d2 = _weighted_norm2_rows(sys, _r_rows(sing.values, b + 1, t_from - 1), b + 1) if t_from > b + 1 else 0.0
    fm = fundamental(sys, sing.green.z)
    c = sing.tail_coef
    terms, _ = cauchy_terms(lambda t0, t1: np.einsum("i,tij,j->t", c.conj(), gram_terms(sys, fm, t0, t1), c).real[:, None],
                            t_from, tol, what="singular resolvent tail")
    d2 += float(reverse_tails(terms)[0, 0]) if len(terms) else 0.0
    return DefectResult(d1 + d2, d1, d2, g_norm2)


@dataclass
class EtaTerms:
    eta: float
    m0: float
    n0: float
    m_r: float
    n_r: float
    alpha0_z: float
    alpha0_zbar: float
    alpha_r_z: float
    alpha_r_zbar: float


def eta_bound(desc: SseDescriptor, bc: RegularBC, z: complex, tol: float = TAIL_TOL,
              green: GreenData | None = None) -> EtaTerms:
    """Constant ``η(r)`` with ``δ_r(g) <= η(r) |g|²``."""
    sys = desc.sys
    n = sys.n
    z = complex(z)
    gs = green if green is not None else green_kernel_singular(desc, z, tol)
    gr = green_kernel_regular(sys, bc, z)
    m0, n0 = fro_norm(gs.M_kernel), fro_norm(gs.N_kernel)
    m_r, n_r = fro_norm(gs.M_kernel - gr.M_kernel), fro_norm(gs.N_kernel - gr.N_kernel)
    tz = tail_quantities(sys, z, [bc.b], tol, with_eps=False)
    tzb = tail_quantities(sys, np.conj(z), [bc.b], tol, with_eps=False)
    a0z, a0zb = tz.alpha0, tzb.alpha0
    arz, arzb = tz.alpha_r[bc.b], tzb.alpha_r[bc.b]
    eta = 12 * n ** 2 * (9 * a0z ** 2 * a0zb ** 2 * (m_r ** 2 + n_r ** 2)
                         + n0 ** 2 * a0z ** 2 * arzb
                         + 6 * (m0 ** 2 + n0 ** 2) * a0zb ** 2 * arz)
    return EtaTerms(eta, m0, n0, m_r, n_r, a0z, a0zb, arz, arzb)


@dataclass
class BoundConstants:
    """Pieces of ``e_r`` that do not depend on the truncation point."""

    prefactor: float
    alpha0: float
    m0: float
    n0: float


def bound_constants(desc: SseDescriptor, tol: float = TAIL_TOL) -> BoundConstants:
    sys = desc.sys
    if desc.case is not CaseKind.LIMIT_CIRCLE:
        raise ValueError("error bounds are only available in the limit circle case")
    if desc.lam_frame != 0:
        raise ValueError("error bounds need the frame at λ = 0; shift the system instead")
    gd = green_kernel_singular(desc, 0.0, tol)
    m0, n0 = fro_norm(gd.M_kernel), fro_norm(gd.N_kernel)
    alpha0 = tail_quantities(sys, 0.0, [], tol, with_eps=False).alpha0
    blk = sys.blocks(sys.a)
    e = np.linalg.inv(np.eye(sys.n) - blk.A)
    n = sys.n
    pre = 2 * math.sqrt(3) * n * alpha0 * math.sqrt(
        (6 * m0 ** 2 + 7 * n0 ** 2) * (fro_norm(e) ** 2 + fro_norm(e @ blk.B) ** 2 + n))
    return BoundConstants(pre, alpha0, m0, n0)


def error_bound(desc: SseDescriptor, b: int, tol: float = TAIL_TOL,
                constants: BoundConstants | None = None) -> float:
    """``e_r`` for truncation at ``b`` (frame at λ = 0, limit circle case).

    Raises
    ------
    ZIsEigenvalue
        If 0 is an eigenvalue of the singular problem; shift the system.
    """
    c = constants if constants is not None else bound_constants(desc, tol)
    eps = tail_quantities(desc.sys, 0.0, [b], tol).eps_r[b]
    return c.prefactor * math.sqrt(eps)


def eigenvalue_bounds(lam_r: float, e_r: float, lam_best: float | None = None):
    """``|λ|² e / (1 - |λ| e)`` at ``λ_k^{(r)}`` and at the best estimate.

    Returns ``(bound_a, bound_b, valid)``; an invalid bound is ``inf``.
    """
    def one(lam):
        x = abs(lam)
        den = 1.0 - x * e_r
        if den <= 0:
            return math.inf
        return x * x * e_r / den

    lam_best = lam_r if lam_best is None else lam_best
    ba, bb = one(lam_r), one(lam_best)
    return ba, bb, math.isfinite(ba)


def hs_tail_check(eigs) -> float:
    """``Σ |λ_k|^{-2}`` over the given eigenvalues."""
    vals = eigs.values if isinstance(eigs, EigenList) else np.asarray(eigs, dtype=float)
    if np.any(vals == 0):
        raise ValueError("zero eigenvalue in the summability check")
    return float(np.sum(1.0 / np.abs(vals) ** 2))


# --- driver ----------------------------------------------------------------------

@dataclass
class ApproxOptions:
    shift: float = 0.0
    indices: int = 3
    oracle: bool = False
    oracle_window: tuple | None = None
    oracle_grid: float = 1e-2
    defect_z: complex = 1j
    defect_samples: int = 1
    seed: int = 0
    tail_tol: float = TAIL_TOL
    converge_tol: float = 1e-6
    bounds: bool = True
    workers: int = 1


@dataclass
class RunResult:
    b: int
    eigs: EigenList | None = None
    e_r: float | None = None
    oracle: list | None = None
    defects: list = field(default_factory=list)
    hs_sum: float | None = None
    error: str | None = None


@dataclass
class TrajectoryRow:
    r: int
    b: int
    k: int
    lam: float | None
    e_r: float | None
    bound_a: float | None
    bound_b: float | None
    verdict: str


@dataclass
class ApproximationReport:
    case: CaseKind
    schedule: list
    shift: float
    runs: list
    trajectories: dict
    rows: list
    verdicts: dict

    def eigenvalues(self, b: int) -> np.ndarray:
        """Eigenvalues at ``b`` in the original spectral variable."""
        run = next(r for r in self.runs if r.b == b)
        return run.eigs.values + self.shift


def sample_source(sys: SystemCoefficients, length: int, seed: int) -> HamSequence:
    """Deterministic random source supported on ``[a, a+length-1]``."""
    rng = np.random.default_rng(seed)
    m = 2 * sys.n
    vals = rng.standard_normal((length + 1, m)) + 1j * rng.standard_normal((length + 1, m))
    vals[-1] = 0.0
    return HamSequence(sys.a, vals)


def shifted_descriptor(desc: SseDescriptor, s: float) -> SseDescriptor:
    """Same extension expressed for the system in the variable ``λ - s``."""
    if s == 0:
        return desc
    return replace(desc, sys=shifted(desc.sys, s), lam_frame=desc.lam_frame - s,
                   t0=desc.t0)


def approximate(desc: SseDescriptor, schedule, opts: ApproxOptions | None = None) -> ApproximationReport:
    """Eigenvalues, defects and bounds along a truncation schedule.

    Per-truncation failures are recorded in the run and do not stop the
    sweep.  Trajectories are matched by signed index around zero in the
    shifted frame.
    """
    opts = opts or ApproxOptions()
    schedule = [int(b) for b in schedule]
    if any(b2 <= b1 for b1, b2 in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    d = shifted_descriptor(desc, opts.shift)
    sys = d.sys
    lcc = d.case is CaseKind.LIMIT_CIRCLE
    constants = None
    const_error = None
    if lcc and opts.bounds and schedule:
        try:
            constants = bound_constants(d, opts.tail_tol)
        except (ZIsEigenvalue, TailDivergence, ValueError) as exc:
            const_error = f"{type(exc).__name__}: {exc}"
    green_sing = None
    if lcc and opts.defect_samples and schedule:
        try:
            green_sing = green_kernel_singular(d, opts.defect_z, opts.tail_tol)
        except (ZIsEigenvalue, TailDivergence) as exc:
            const_error = const_error or f"{type(exc).__name__}: {exc}"

    def run_one(b: int) -> RunResult:
        res = RunResult(b)
        try:
            bc = induce_regular(d, b)
            res.eigs = eigenvalues_regular(sys, bc)
            nz = res.eigs.values[res.eigs.values != 0]
            res.hs_sum = hs_tail_check(nz) if len(nz) else 0.0
            if opts.oracle:
                win = opts.oracle_window or (float(res.eigs.values.min()) - 0.5,
                                             float(res.eigs.values.max()) + 0.5) \
                    if len(res.eigs.values) else (0.0, 1.0)
                res.oracle = eigen_oracle(sys, bc, (win[0] - opts.shift, win[1] - opts.shift)
                                          if opts.oracle_window else win, opts.oracle_grid)
            if constants is not None:
                res.e_r = error_bound(d, b, opts.tail_tol, constants)
            if green_sing is not None:
                length = max(1, min(b - sys.a, 10))
                for k in range(opts.defect_samples):
                    g = sample_source(sys, length, opts.seed + k)
                    res.defects.append(resolvent_defect(d, bc, opts.defect_z, g, opts.tail_tol,
                                                        green=green_sing))
        except Exception as exc:  # recorded per run, the sweep continues
            res.error = f"{type(exc).__name__}: {exc}"
        return res

    if opts.workers > 1 and len(schedule) > 1:
        with ThreadPoolExecutor(opts.workers) as pool:
            runs = list(pool.map(run_one, schedule))
    else:
        runs = [run_one(b) for b in schedule]

    ks = [k for k in range(-opts.indices, opts.indices + 1) if k != 0]
    traj = {k: [r.eigs.signed(k) if r.eigs is not None else None for r in runs] for k in ks}
    verdicts = {}
    for k in ks:
        seq = [v for v in traj[k] if v is not None]
        if not lcc:
            verdicts[k] = "inclusive-only"
        elif len(seq) >= 2 and abs(seq[-1] - seq[-2]) <= opts.converge_tol * max(1.0, abs(seq[-1])):
            verdicts[k] = "converged"
        else:
            verdicts[k] = "unresolved"
    rows = []
    for i, run in enumerate(runs):
        for k in ks:
            lam = traj[k][i]
            ba = bb = None
            if lam is not None and run.e_r is not None:
                best = next((v for v in reversed(traj[k]) if v is not None), lam)
                ba, bb, _ = eigenvalue_bounds(lam, run.e_r, best)
            rows.append(TrajectoryRow(i, run.b, k, None if lam is None else lam + opts.shift,
                                      run.e_r, ba, bb, verdicts[k]))
    report = ApproximationReport(d.case, schedule, opts.shift, runs, traj, rows, verdicts)
    report.bound_error = const_error
    return report


# --- extended precision polish ------------------------------------------------------

def _mp_fundamental_end(sys: SystemCoefficients, lam, t_end: int, mp):
    """``Φ(t_end, λ)`` in mpmath arithmetic; coefficients are taken as exact."""
    n, m = sys.n, 2 * sys.n
    y = mp.eye(m)
    eye = mp.eye(n)
    for t in range(sys.a, t_end):
        blk = sys.blocks(t)
        A, B, C, W1, W2 = (mp.matrix(x.tolist()) for x in blk)
        e = mp.inverse(eye - A)
        y1 = y[:n, :]
        y2 = y[n:, :]
        y1n = e * (y1 + (B + lam * W2) * y2)
        y2n = y2 + (C - lam * W1) * y1n - A.H * y2
        for i in range(n):
            for j in range(m):
                y[i, j] = y1n[i, j]
                y[n + i, j] = y2n[i, j]
    return y


def polish_eigenvalue(desc: SseDescriptor, b: int, lam: float, dps: int = 40,
                      tol: float | None = None, max_iter: int = 40) -> float:
    """Refine an eigenvalue of the limit circle regular problem on ``[a, b]``
    as a root of ``det(P - Q Φ(b+1, λ))``, all in ``dps``-digit arithmetic.

    Double precision resolves eigenvalues only to a few units in the last
    place.  This is used where that is not enough, e.g. when comparing
    against error bounds that are themselves near machine precision.
    """
    import mpmath

    if desc.case is not CaseKind.LIMIT_CIRCLE:
        raise ValueError("polishing is implemented for the limit circle construction")
    old = mpmath.mp.dps
    mpmath.mp.dps = dps
    try:
        sys = desc.sys
        n = sys.n
        j = mpmath.zeros(2 * n)
        for i in range(n):
            j[i, n + i] = -1
            j[n + i, i] = 1
        theta = _mp_fundamental_end(sys, mpmath.mpf(desc.lam_frame), b + 1, mpmath)
        P = mpmath.matrix(desc.M.tolist())
        Q = mpmath.matrix(desc.N.tolist()) * theta.H * j

        def f(x):
            return mpmath.det(P - Q * _mp_fundamental_end(sys, x, b + 1, mpmath))

        tol = tol if tol is not None else mpmath.mpf(10) ** (-(dps - 10))
        x0 = mpmath.mpf(lam)
        h = mpmath.mpf(1e-7) * max(1, abs(x0))
        x1 = x0 + h
        f0, f1 = f(x0), f(x1)
        for _ in range(max_iter):
            if f1 == f0:
                break
            step = (f1 * (x1 - x0) / (f1 - f0)).real
            x0, f0 = x1, f1
            x1 = x1 - step
            f1 = f(x1)
            if abs(step) <= tol * max(1, abs(x1)):
                break
        return float(x1)
    finally:
        mpmath.mp.dps = old
