"""Initial value problems, fundamental matrices, weighted sums and tail sums."""

from __future__ import annotations

import math
import threading
import weakref
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .linalg import ContractViolation, fro_norm
from .model import AssumptionViolation, HamSequence, SystemCoefficients, apply_L, canonical_j

#: Column norms above this are rescaled and the factor kept in log form.
OVERFLOW_GUARD = 1e150
#: Default Cauchy tolerance and horizon cap for all infinite sums.
TAIL_TOL = 1e-11
HORIZON_CAP = 2 ** 18
SINGULAR_THRESHOLD = 1e-12


class TailDivergence(RuntimeError):
    """A tail sum did not settle within the horizon cap."""

    def __init__(self, what: str, horizon: int, increment: float):
        self.what = what
        self.horizon = horizon
        self.increment = increment
        super().__init__(f"{what}: last increment {increment:.3e} at horizon {horizon}")


def _step_operators(sys: SystemCoefficients, lam: complex, t0: int, t1: int):
    """Per-t matrices ``E, B + λW2, C - λW1, A*`` for ``t0 <= t <= t1``."""
    b = sys.block_arrays(t0, t1)
    eye = np.eye(sys.n)
    ia = eye - b.A
    smin = np.linalg.svd(ia, compute_uv=False).min(axis=-1)
    bad = np.nonzero(smin <= SINGULAR_THRESHOLD)[0]
    if bad.size:
        t = t0 + int(bad[0])
        raise AssumptionViolation(t, "I - A(t) invertible",
                                  f"smallest singular value {smin[bad[0]]:.3e}")
    e = np.linalg.solve(ia, np.broadcast_to(eye, ia.shape))
    return e, b.B + lam * b.W2, b.C - lam * b.W1, np.conj(np.swapaxes(b.A, -1, -2))


def step(sys: SystemCoefficients, lam: complex, y, t: int) -> np.ndarray:
    """Advance ``y(t)`` (a 2n-vector or 2n x k matrix) to ``y(t+1)``."""
    y = np.asarray(y, dtype=complex)
    n = sys.n
    e, m1, m2, ah = (x[0] for x in _step_operators(sys, complex(lam), t, t))
    y1, y2 = y[:n], y[n:]
    y1n = e @ (y1 + m1 @ y2)
    y2n = y2 + m2 @ y1n - ah @ y2
    return np.concatenate([y1n, y2n])


def solve_ivp(sys: SystemCoefficients, lam: complex, y0, t_end: int, start: int | None = None) -> HamSequence:
    """Solution with ``y(start) = y0`` on ``[start, t_end]``."""
    start = sys.a if start is None else start
    y0 = np.asarray(y0, dtype=complex)
    if y0.shape != (2 * sys.n,):
        raise ContractViolation(f"initial vector must have length {2 * sys.n}")
    out = np.zeros((t_end - start + 1, 2 * sys.n), dtype=complex)
    out[0] = y0
    if t_end > start:
        ops = _step_operators(sys, complex(lam), start, t_end - 1)
        _propagate(out, *ops, sys.n)
    return HamSequence(start, out)


def _propagate(out, e, m1, m2, ah, n, logs=None):
    """Fill ``out[1:]`` from ``out[0]`` (vectors or matrices)."""
    mat = out.ndim == 3
    for k in range(e.shape[0]):
        y = out[k]
        y1, y2 = y[:n], y[n:]
        y1n = e[k] @ (y1 + m1[k] @ y2)
        y2n = y2 + m2[k] @ y1n - ah[k] @ y2
        out[k + 1, :n] = y1n
        out[k + 1, n:] = y2n
        if logs is not None and mat:
            norms = np.sqrt(np.sum(np.abs(out[k + 1]) ** 2, axis=0))
            big = norms > OVERFLOW_GUARD
            logs[k + 1] = logs[k]
            if big.any():
                out[k + 1][:, big] /= norms[big]
                logs[k + 1, big] += np.log(norms[big])


class FundamentalMatrix:
    """``Φ(t, λ)`` with ``Φ(a, λ) = I``, extended lazily and never recomputed.

    Values are stored as ``buf[t] * exp(logs[t])`` column-wise; the log
    factors stay zero unless a column norm passes :data:`OVERFLOW_GUARD`.
    """

    def __init__(self, sys: SystemCoefficients, lam: complex):
        self.sys = sys
        self.lam = complex(lam)
        m = 2 * sys.n
        self._buf = np.zeros((64, m, m), dtype=complex)
        self._buf[0] = np.eye(m)
        self._logs = np.zeros((64, m))
        self._horizon = sys.a
        self._lock = threading.Lock()

    @property
    def horizon(self) -> int:
        return self._horizon

    @property
    def a(self) -> int:
        return self.sys.a

    def extend(self, t: int) -> None:
        if t <= self._horizon:
            return
        with self._lock:
            h = self._horizon
            if t <= h:
                return
            # grow in chunks so repeated small extensions stay cheap
            target = max(t, h + min(max(h - self.a, 32), 4096))
            need = target - self.a + 1
            if need > self._buf.shape[0]:
                cap = max(need, 2 * self._buf.shape[0])
                buf = np.zeros((cap,) + self._buf.shape[1:], dtype=complex)
                logs = np.zeros((cap, self._logs.shape[1]))
                buf[:self._buf.shape[0]] = self._buf
                logs[:self._logs.shape[0]] = self._logs
                self._buf, self._logs = buf, logs
            try:
                ops = _step_operators(self.sys, self.lam, h, target - 1)
            except (AssumptionViolation, ContractViolation, IndexError):
                # the read-ahead must not fail on coefficients nobody asked for
                if target == t:
                    raise
                target = t
                ops = _step_operators(self.sys, self.lam, h, target - 1)
            i0 = h - self.a
            _propagate(self._buf[i0:target - self.a + 1], *ops, self.sys.n,
                       logs=self._logs[i0:target - self.a + 1])
            self._horizon = target

    def scaled(self, t0: int, t1: int) -> tuple[np.ndarray, np.ndarray]:
        """Raw buffer slice and column log-scales for ``t0 <= t <= t1``."""
        if t0 < self.a:
            raise IndexError(f"t={t0} precedes the start a={self.a}")
        self.extend(t1)
        s = slice(t0 - self.a, t1 - self.a + 1)
        return self._buf[s], self._logs[s]

    @property
    def rescaled(self) -> bool:
        return bool(np.any(self._logs[:self._horizon - self.a + 1]))

    def values(self, t0: int, t1: int) -> np.ndarray:
        buf, logs = self.scaled(t0, t1)
        if not np.any(logs):
            return buf.copy()
        return buf * np.exp(logs)[:, None, :]

    def __call__(self, t: int) -> np.ndarray:
        return self.values(t, t)[0]

    def r_traces(self, t0: int, t1: int) -> np.ndarray:
        """``R(Φ)(t)`` for ``t0 <= t <= t1``, shape ``(T, 2n, 2n)``."""
        v = self.values(t0, t1 + 1)
        n = self.sys.n
        return np.concatenate([v[1:, :n], v[:-1, n:]], axis=1)

    def column(self, i: int, t_end: int) -> HamSequence:
        return HamSequence(self.a, self.values(self.a, t_end)[:, :, i])


_FM_CACHE: "weakref.WeakKeyDictionary[SystemCoefficients, dict]" = weakref.WeakKeyDictionary()
_FM_LOCK = threading.Lock()


def fundamental(sys: SystemCoefficients, lam: complex, horizon: int | None = None) -> FundamentalMatrix:
    """Shared fundamental matrix of ``sys`` at ``lam``, extended to ``horizon``."""
    key = complex(lam)
    with _FM_LOCK:
        per_sys = _FM_CACHE.setdefault(sys, {})
        fm = per_sys.get(key)
        if fm is None:
            fm = per_sys[key] = FundamentalMatrix(sys, key)
    if horizon is not None:
        if horizon < sys.a:
            raise ContractViolation(f"horizon {horizon} precedes a={sys.a}")
        fm.extend(horizon)
    return fm


# --- sums and forms -----------------------------------------------------------

def _r_rows(y: HamSequence, t0: int, t1: int) -> np.ndarray:
    if t0 < y.start or t1 + 1 > y.end:
        raise ContractViolation(f"range [{t0}, {t1}] needs the sequence on [{t0}, {t1 + 1}]")
    return y.r_traces()[t0 - y.start:t1 - y.start + 1]


def weighted_inner(sys: SystemCoefficients, x: HamSequence, y: HamSequence,
                   t_range: tuple[int, int]) -> complex:
    """``Σ R(y)*(t) W(t) R(x)(t)`` over ``t_range`` (inclusive)."""
    t0, t1 = t_range
    if t1 < t0:
        return 0j
    rx, ry = _r_rows(x, t0, t1), _r_rows(y, t0, t1)
    w = sys.weights(t0, t1)
    return complex(np.einsum("ti,tij,tj->", ry.conj(), w, rx))


def weighted_norm2(sys, x: HamSequence, t_range) -> float:
    return weighted_inner(sys, x, x, t_range).real


def bform(x, y, t: int | None = None) -> complex:
    """``(x, y)(t) = y*(t) J x(t)``; accepts sequences or plain vectors."""
    xv = x(t) if isinstance(x, HamSequence) else np.asarray(x, dtype=complex)
    yv = y(t) if isinstance(y, HamSequence) else np.asarray(y, dtype=complex)
    return complex(yv.conj() @ canonical_j(xv.shape[0] // 2) @ xv)


def lagrange_residual(sys: SystemCoefficients, x: HamSequence, f: HamSequence | None,
                      y: HamSequence, g: HamSequence | None, s: int, k: int,
                      check_tol: float | None = None) -> float:
    """Residual of the summation-by-parts identity on ``[s, k]``.

    ``|Σ_{t=s}^{k} [R(y)* L(x) - L(y)* R(x)] - ((x,y)(k+1) - (x,y)(s))|``.
    The identity is algebraic; ``f`` and ``g`` are only used when
    ``check_tol`` is given, to confirm ``L(x) = W R(f)`` and ``L(y) = W R(g)``.
    """
    total = 0j
    for t in range(s, k + 1):
        lx = apply_L(sys, x, t)
        ly = apply_L(sys, y, t)
        rx = np.concatenate([x(t + 1)[:sys.n], x(t)[sys.n:]])
        ry = np.concatenate([y(t + 1)[:sys.n], y(t)[sys.n:]])
        total += ry.conj() @ lx - ly.conj() @ rx
        if check_tol is not None:
            w = sys.weight(t)
            for lv, src in ((lx, f), (ly, g)):
                if src is not None:
                    rs = np.concatenate([src(t + 1)[:sys.n], src(t)[sys.n:]])
                    if np.linalg.norm(lv - w @ rs) > check_tol:
                        raise ContractViolation(f"L(.) = W R(.) fails at t={t}")
    return float(abs(total - (bform(x, y, k + 1) - bform(x, y, s))))


def transfer_U(sys: SystemCoefficients, t: int) -> np.ndarray:
    """Matrix with ``R(y)(t+1) = U(t) R(y)(t)`` for solutions at λ = 0."""
    return transfer_U_range(sys, t, t)[0]


def transfer_U_range(sys: SystemCoefficients, t0: int, t1: int) -> np.ndarray:
    n = sys.n
    e1, _, _, _ = _step_operators(sys, 0.0, t0 + 1, t1 + 1)
    b1 = sys.block_arrays(t0 + 1, t1 + 1).B
    b0 = sys.block_arrays(t0, t1)
    eb = e1 @ b1
    ia_h = np.eye(n) - np.conj(np.swapaxes(b0.A, -1, -2))
    u = np.empty((t1 - t0 + 1, 2 * n, 2 * n), dtype=complex)
    u[:, :n, :n] = e1 + eb @ b0.C
    u[:, :n, n:] = eb @ ia_h
    u[:, n:, :n] = b0.C
    u[:, n:, n:] = ia_h
    return u


# --- tail sums ----------------------------------------------------------------

def cauchy_terms(term_block, start: int, tol: float = TAIL_TOL, cap: int = HORIZON_CAP,
                 what: str = "tail sum", first_window: int = 16,
                 min_end: int | None = None) -> tuple[np.ndarray, float]:
    """Collect terms ``term_block(t0, t1) -> array (T, ...)`` until they settle.

    Windows double in length; collection stops after the first window (ending
    at or beyond ``min_end``) whose summed increment has Frobenius norm
    ``<= tol``.  Returns the stacked terms from ``start`` and that increment.

    Raises
    ------
    TailDivergence
        If more than ``cap`` terms are needed.
    """
    chunks = []
    t = start
    length = first_window
    total = 0
    while True:
        block = term_block(t, t + length - 1)
        chunks.append(block)
        total += length
        t += length
        inc = fro_norm(block.sum(axis=0))
        if inc <= tol and (min_end is None or t - 1 >= min_end):
            return np.concatenate(chunks), inc
        if total >= cap:
            raise TailDivergence(what, t - 1, inc)
        length = min(2 * length, cap - total) if total < cap else length


def reverse_tails(terms: np.ndarray) -> np.ndarray:
    """``out[k] = Σ_{j>=k} terms[j]`` summed from the far end."""
    return np.flip(np.cumsum(np.flip(terms, axis=0), axis=0), axis=0)


@dataclass
class TailSums:
    """Tail quantities of one fundamental matrix.

    ``alpha0`` is the largest column weighted norm, ``alpha_r[b]`` the
    largest column weighted mass over ``t > b`` and ``eps_r[b]`` the
    Frobenius norm of ``D_b = Σ_{t>=b} V*(t) W(t+1) V(t)``.
    """

    alpha0: float
    alpha_r: dict = field(default_factory=dict)
    eps_r: dict = field(default_factory=dict)
    D_r: dict = field(default_factory=dict)
    gram: np.ndarray | None = None
    horizon: int = 0
    residual: float = 0.0


def gram_terms(sys: SystemCoefficients, fm: FundamentalMatrix, t0: int, t1: int) -> np.ndarray:
    """``R(Φ)*(t, z̄) W(t) R(Φ)(t, z)`` style terms with both factors from ``fm``."""
    r = fm.r_traces(t0, t1)
    w = sys.weights(t0, t1)
    return np.conj(np.swapaxes(r, -1, -2)) @ w @ r


def tail_quantities(sys: SystemCoefficients, z: complex = 0.0, b_list: Iterable[int] = (),
                    tol: float = TAIL_TOL, cap: int = HORIZON_CAP,
                    with_eps: bool = True) -> TailSums:
    """Column norms of ``Φ(·, z)`` and the transfer tail ``ε_r`` for each ``b``."""
    a = sys.a
    fm = fundamental(sys, z)
    b_list = sorted(set(int(b) for b in b_list))
    if b_list and b_list[0] < a:
        raise ContractViolation("truncation points must be >= a")
    min_end = b_list[-1] + 1 if b_list else None
    g_terms, res = cauchy_terms(lambda t0, t1: gram_terms(sys, fm, t0, t1), a, tol, cap,
                                what="column weighted norms", min_end=min_end)
    g_tail = reverse_tails(g_terms)
    gram = g_tail[0]
    alpha0 = math.sqrt(max(0.0, float(np.max(gram.diagonal().real))))
    out = TailSums(alpha0, gram=gram, horizon=a + g_terms.shape[0] - 1, residual=res)
    for b in b_list:
        k = b + 1 - a
        out.alpha_r[b] = float(np.max(g_tail[k].diagonal().real)) if k < len(g_tail) else 0.0
    if with_eps and b_list:
        state = {"v": np.eye(2 * sys.n, dtype=complex), "next": a}

        def d_terms(t0, t1):
            # V(t) = U(t) ... U(a), accumulated in order
            assert t0 == state["next"]
            u = transfer_U_range(sys, t0, t1)
            w = sys.weights(t0 + 1, t1 + 1)
            vs = np.empty_like(u)
            v = state["v"]
            for k in range(u.shape[0]):
                v = u[k] @ v
                vs[k] = v
            state["v"], state["next"] = v, t1 + 1
            return np.conj(np.swapaxes(vs, -1, -2)) @ w @ vs

        d, res2 = cauchy_terms(d_terms, a, tol, cap, what="transfer tail", min_end=min_end)
        d_tail = reverse_tails(d)
        for b in b_list:
            k = b - a
            dm = d_tail[k] if k < len(d_tail) else np.zeros_like(d_tail[0])
            out.D_r[b] = dm
            out.eps_r[b] = fro_norm(dm)
        out.residual = max(res, res2)
        out.horizon = max(out.horizon, a + d.shape[0] - 1)
    return out
