"""Coefficient data of the discrete linear Hamiltonian system

    J Δy(t) = (P(t) + λ W(t)) R(y)(t),   t = a, a+1, ...

with ``P = [[-C, A*], [A, B]]``, ``W = diag(W1, W2)`` and the partial right
shift ``R(y)(t) = (y1(t+1), y2(t))``.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, NamedTuple

import numpy as np

from .linalg import ContractViolation, fro_norm


class Blocks(NamedTuple):
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W1: np.ndarray
    W2: np.ndarray


class AssumptionViolation(ValueError):
    """A standing assumption fails at some index ``t``."""

    def __init__(self, t: int, assumption: str, detail: str, report=None):
        self.t = t
        self.assumption = assumption
        self.detail = detail
        self.report = report
        super().__init__(f"t={t}: {assumption} violated ({detail})")


def canonical_j(n: int) -> np.ndarray:
    """The 2n x 2n matrix [[0, -I], [I, 0]]."""
    j = np.zeros((2 * n, 2 * n), dtype=complex)
    j[:n, n:] = -np.eye(n)
    j[n:, :n] = np.eye(n)
    return j


def _block(x, n: int) -> np.ndarray:
    m = np.asarray(x, dtype=complex)
    if m.ndim == 0:
        m = m * np.eye(n)
    if m.shape != (n, n):
        raise ContractViolation(f"coefficient block has shape {m.shape}, expected {(n, n)}")
    return m


@dataclass(frozen=True, eq=False)
class SystemCoefficients:
    """Half-line coefficient data.

    ``provider(t)`` must return ``(A, B, C, W1, W2)`` for every ``t >= a``
    (scalars are accepted when ``n == 1``).  ``tail_tag`` describes the
    analytic tail, e.g. ``{"kind": "geometric", "ratio": 0.5}`` or
    ``{"kind": "zero", "after": T}`` for weights vanishing beyond ``T``.
    """

    n: int
    a: int
    provider: Callable[[int], Any]
    tail_tag: dict = field(default_factory=dict)
    name: str = ""
    _store: dict = field(default_factory=dict, repr=False)
    _lock: Any = field(default_factory=threading.Lock, repr=False)

    def _ensure(self, t_max: int) -> None:
        store = self._store
        filled = store.get("filled", self.a - 1)
        if t_max <= filled:
            return
        with self._lock:
            filled = store.get("filled", self.a - 1)
            if t_max <= filled:
                return
            n = self.n
            need = t_max - self.a + 1
            cap = store.get("cap", 0)
            if need > cap:
                new_cap = max(need, 2 * cap, 64)
                arr = np.zeros((new_cap, 5, n, n), dtype=complex)
                if cap:
                    arr[:cap] = store["data"]
                store["data"] = arr
                store["cap"] = new_cap
            data = store["data"]
            for t in range(filled + 1, t_max + 1):
                raw = self.provider(t)
                if len(raw) != 5:
                    raise ContractViolation("provider must return (A, B, C, W1, W2)")
                data[t - self.a] = [_block(x, n) for x in raw]
            store["filled"] = t_max

    def blocks(self, t: int) -> Blocks:
        if t < self.a:
            raise IndexError(f"t={t} precedes the start a={self.a}")
        self._ensure(t)
        d = self._store["data"][t - self.a]
        return Blocks(d[0], d[1], d[2], d[3], d[4])

    def block_arrays(self, t0: int, t1: int) -> Blocks:
        """Stacked blocks for ``t0 <= t <= t1``, each of shape ``(T, n, n)``."""
        if t0 < self.a:
            raise IndexError(f"t={t0} precedes the start a={self.a}")
        self._ensure(t1)
        d = self._store["data"][t0 - self.a:t1 - self.a + 1]
        return Blocks(d[:, 0], d[:, 1], d[:, 2], d[:, 3], d[:, 4])

    def weight(self, t: int) -> np.ndarray:
        b = self.blocks(t)
        n = self.n
        w = np.zeros((2 * n, 2 * n), dtype=complex)
        w[:n, :n] = b.W1
        w[n:, n:] = b.W2
        return w

    def weights(self, t0: int, t1: int) -> np.ndarray:
        b = self.block_arrays(t0, t1)
        n = self.n
        w = np.zeros((t1 - t0 + 1, 2 * n, 2 * n), dtype=complex)
        w[:, :n, :n] = b.W1
        w[:, n:, n:] = b.W2
        return w

    def support_end(self) -> int | None:
        """Last index with non-zero weight, when the tail tag declares one."""
        if self.tail_tag.get("kind") == "zero":
            return int(self.tail_tag["after"])
        return None

    @property
    def J(self) -> np.ndarray:
        return canonical_j(self.n)


@dataclass
class HamSequence:
    """Vectors ``y(t)`` in C^{2n} for ``t = start, ..., start + len - 1``."""

    start: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=complex))
        if self.values.shape[0] < 1:
            raise ContractViolation("a sequence needs at least one term")
        if self.values.shape[1] % 2:
            raise ContractViolation("vector dimension must be even (2n)")

    @property
    def end(self) -> int:
        return self.start + self.values.shape[0] - 1

    @property
    def n(self) -> int:
        return self.values.shape[1] // 2

    def __call__(self, t: int) -> np.ndarray:
        if not self.start <= t <= self.end:
            raise IndexError(f"t={t} outside [{self.start}, {self.end}]")
        return self.values[t - self.start]

    def __len__(self) -> int:
        return self.values.shape[0]

    def r_traces(self) -> np.ndarray:
        """``R(y)(t)`` for ``t = start .. end - 1`` as rows."""
        n = self.n
        v = self.values
        return np.concatenate([v[1:, :n], v[:-1, n:]], axis=1)

    @classmethod
    def zeros(cls, start: int, length: int, n: int) -> "HamSequence":
        return cls(start, np.zeros((length, 2 * n), dtype=complex))

    @classmethod
    def from_r_traces(cls, start: int, traces) -> "HamSequence":
        """A sequence whose R-trace at ``start + k`` is ``traces[k]``."""
        traces = np.atleast_2d(np.asarray(traces, dtype=complex))
        n = traces.shape[1] // 2
        v = np.zeros((traces.shape[0] + 1, 2 * n), dtype=complex)
        v[1:, :n] = traces[:, :n]
        v[:-1, n:] = traces[:, n:]
        return cls(start, v)


def p_matrix(sys: SystemCoefficients, t: int) -> np.ndarray:
    b = sys.blocks(t)
    return np.block([[-b.C, b.A.conj().T], [b.A, b.B]])


def apply_R(y: HamSequence, t: int) -> np.ndarray:
    n = y.n
    return np.concatenate([y(t + 1)[:n], y(t)[n:]])


def apply_L(sys: SystemCoefficients, y: HamSequence, t: int) -> np.ndarray:
    """``J Δy(t) - P(t) R(y)(t)``."""
    j = canonical_j(sys.n)
    return j @ (y(t + 1) - y(t)) - p_matrix(sys, t) @ apply_R(y, t)


@dataclass
class ValidationReport:
    t_range: tuple[int, int]
    records: list[dict]
    ok: bool = True

    def worst(self, key: str) -> float:
        vals = [r[key] for r in self.records]
        return min(vals) if key.startswith("min") else max(vals)


def validate(sys: SystemCoefficients, t_range: tuple[int, int], tol: float = 1e-12,
             invertibility_threshold: float = 1e-12) -> ValidationReport:
    """Check Hermitian B, C; PSD W1, W2; invertible I - A on ``t_range``.

    Raises
    ------
    AssumptionViolation
        At the first failing ``t``; the full report is attached.
    """
    t0, t1 = t_range
    if t0 < sys.a:
        raise IndexError(f"t={t0} precedes the start a={sys.a}")
    n = sys.n
    eye = np.eye(n)
    records = []
    failure = None
    for t in range(t0, t1 + 1):
        b = sys.blocks(t)
        scale = max(1.0, fro_norm(b.B), fro_norm(b.C))
        rec = {
            "t": t,
            "herm_B": fro_norm(b.B - b.B.conj().T) / scale,
            "herm_C": fro_norm(b.C - b.C.conj().T) / scale,
            "min_eig_W1": float(np.linalg.eigvalsh(0.5 * (b.W1 + b.W1.conj().T)).min()),
            "min_eig_W2": float(np.linalg.eigvalsh(0.5 * (b.W2 + b.W2.conj().T)).min()),
            "smin_I_minus_A": float(np.linalg.svd(eye - b.A, compute_uv=False).min()),
        }
        records.append(rec)
        if failure is None:
            if rec["herm_B"] > tol:
                failure = (t, "B Hermitian", f"residual {rec['herm_B']:.3e}")
            elif rec["herm_C"] > tol:
                failure = (t, "C Hermitian", f"residual {rec['herm_C']:.3e}")
            elif rec["min_eig_W1"] < -tol * max(1.0, fro_norm(b.W1)):
                failure = (t, "W1 positive semi-definite", f"min eigenvalue {rec['min_eig_W1']:.3e}")
            elif rec["min_eig_W2"] < -tol * max(1.0, fro_norm(b.W2)):
                failure = (t, "W2 positive semi-definite", f"min eigenvalue {rec['min_eig_W2']:.3e}")
            elif rec["smin_I_minus_A"] <= invertibility_threshold:
                failure = (t, "I - A(t) invertible",
                           f"smallest singular value {rec['smin_I_minus_A']:.3e}")
    report = ValidationReport((t0, t1), records, failure is None)
    if failure is not None:
        raise AssumptionViolation(*failure, report=report)
    return report


# --- builtin families -------------------------------------------------------

def _scalar_sequence(spec) -> tuple[Callable[[int], float], dict]:
    """Turn a coefficient spec into ``(f(t), tail_tag)``.

    Accepted specs: a number, a callable, ``{"geometric": r, "scale": c}``
    (``c * r**t``), or ``{"values": [...], "start": a, "after": v}`` (finite
    table, constant value ``after`` beyond it, default 0).
    """
    if callable(spec):
        return spec, {}
    if isinstance(spec, (int, float, complex)):
        v = spec
        return (lambda t: v), {"kind": "constant"}
    if isinstance(spec, dict):
        if "geometric" in spec:
            r = float(spec["geometric"])
            c = float(spec.get("scale", 1.0))
            return (lambda t: c * r ** t), {"kind": "geometric", "ratio": r}
        if "values" in spec:
            vals = list(spec["values"])
            start = int(spec.get("start", 0))
            after = spec.get("after", 0.0)
            last = start + len(vals) - 1

            def f(t):
                return vals[t - start] if start <= t <= last else after

            tag = {"kind": "zero", "after": last} if after == 0 else {"kind": "constant"}
            return f, tag
    raise ContractViolation(f"cannot interpret coefficient spec {spec!r}")


def second_order(p=1.0, q=0.0, w=1.0, a: int = 0, name: str = "second_order") -> SystemCoefficients:
    """Scalar equation ``-Δ(p(t) Δz(t-1)) + q(t) z(t) = λ w(t) z(t)`` as an n=1 system.

    The embedding is ``y1(t) = z(t-1)``, ``y2(t) = p(t) Δz(t-1)``, so that
    ``R(y)(t) = (z(t), p(t)Δz(t-1))`` and the weighted norm is
    ``Σ w(t) |z(t)|²``.  Blocks: ``A = 0, B = 1/p, C = q, W1 = w, W2 = 0``.
    """
    pf, _ = _scalar_sequence(p)
    qf, _ = _scalar_sequence(q)
    wf, wtag = _scalar_sequence(w)

    def provider(t):
        pt = pf(t)
        if pt == 0:
            raise ContractViolation(f"p({t}) = 0")
        return 0.0, 1.0 / pt, qf(t), wf(t), 0.0

    return SystemCoefficients(1, a, provider, dict(wtag), name)


def direct_sum(first: SystemCoefficients, second: SystemCoefficients,
               name: str = "direct_sum") -> SystemCoefficients:
    """Block-diagonal stacking; ``y = (y1', y1'', y2', y2'')``."""
    if first.a != second.a:
        raise ContractViolation("direct sum needs a common start a")
    n1, n2 = first.n, second.n

    def provider(t):
        b1, b2 = first.blocks(t), second.blocks(t)
        out = []
        for x1, x2 in zip(b1, b2):
            m = np.zeros((n1 + n2, n1 + n2), dtype=complex)
            m[:n1, :n1] = x1
            m[n1:, n1:] = x2
            out.append(m)
        return tuple(out)

    tags = [first.tail_tag, second.tail_tag]
    if all(t.get("kind") == "zero" for t in tags):
        tag = {"kind": "zero", "after": max(t["after"] for t in tags)}
    else:
        tag = {"kind": "sum", "parts": tags}
    return SystemCoefficients(n1 + n2, first.a, provider, tag, name)


def direct_sum_permutation(n1: int, n2: int) -> np.ndarray:
    """Index map from (y', y'') coordinates to direct-sum coordinates."""
    n = n1 + n2
    perm = np.empty(2 * n, dtype=int)
    perm[:n1] = np.arange(n1)                        # y1'
    perm[n1:2 * n1] = n + np.arange(n1)              # y2'
    perm[2 * n1:2 * n1 + n2] = n1 + np.arange(n2)    # y1''
    perm[2 * n1 + n2:] = n + n1 + np.arange(n2)      # y2''
    return perm


def shifted(sys: SystemCoefficients, s: float) -> SystemCoefficients:
    """Same system in the spectral variable ``λ - s``."""
    if s == 0:
        return sys

    def provider(t):
        b = sys.blocks(t)
        return b.A, b.B + s * b.W2, b.C - s * b.W1, b.W1, b.W2

    return SystemCoefficients(sys.n, sys.a, provider, dict(sys.tail_tag),
                              f"{sys.name}[shift={s:g}]")


# --- coefficient tables -------------------------------------------------------

def _parse_cmatrix(raw, n: int) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (n, n, 2):
        raise ContractViolation(f"matrix must be {n}x{n} of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def cmatrix_to_json(m) -> list:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def cmatrix_from_json(raw) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ContractViolation("matrices are nested arrays of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def table_with_tail(data: dict | str | Path, name: str = "table") -> SystemCoefficients:
    """System from a coefficient table plus tail rule.

    ``data`` (or the JSON file it names) has fields ``n``, ``a``, ``rows``
    (``{t, A, B, C, W1, W2}`` with ``[re, im]`` matrices, contiguous from
    ``a``) and ``tail``: ``{"kind": "constant"}`` repeats the last row,
    ``{"kind": "geometric", "ratio": r}`` repeats it with weights scaled by
    ``r**(t - t_last)``, ``{"kind": "zero"}`` repeats it with zero weights.
    """
    if not isinstance(data, dict):
        data = json.loads(Path(data).read_text())
    try:
        n = int(data["n"])
        a = int(data["a"])
        rows = data["rows"]
        tail = dict(data.get("tail", {"kind": "constant"}))
    except (KeyError, TypeError) as exc:
        raise ContractViolation(f"malformed coefficient table: {exc}") from exc
    if not rows:
        raise ContractViolation("coefficient table has no rows")
    table = []
    for k, row in enumerate(rows):
        if int(row["t"]) != a + k:
            raise ContractViolation(f"row {k} has t={row['t']}, expected {a + k}")
        table.append(tuple(_parse_cmatrix(row[key], n) for key in ("A", "B", "C", "W1", "W2")))
    last = a + len(table) - 1
    kind = tail.get("kind", "constant")
    if kind not in ("constant", "geometric", "zero"):
        raise ContractViolation(f"unknown tail kind {kind!r}")
    ratio = float(tail.get("ratio", 1.0))

    def provider(t):
        if t <= last:
            return table[t - a]
        A, B, C, W1, W2 = table[-1]
        if kind == "constant":
            return A, B, C, W1, W2
        f = ratio ** (t - last) if kind == "geometric" else 0.0
        return A, B, C, f * W1, f * W2

    tag = dict(tail)
    if kind == "zero":
        nz = [k for k, r in enumerate(table) if np.any(r[3]) or np.any(r[4])]
        tag = {"kind": "zero", "after": a + (nz[-1] if nz else -1)}
    return SystemCoefficients(n, a, provider, tag, name)


def table_to_json(sys: SystemCoefficients, t_last: int, tail: dict) -> dict:
    rows = []
    for t in range(sys.a, t_last + 1):
        b = sys.blocks(t)
        rows.append({"t": t, **{k: cmatrix_to_json(v) for k, v in zip(Blocks._fields, b)}})
    return {"n": sys.n, "a": sys.a, "rows": rows, "tail": tail}


# --- named reference systems ------------------------------------------------

def ex_lcc(a: int = 0) -> SystemCoefficients:
    """``-Δ²z(t-1) = λ 2^{-t} z(t)``: both solutions at λ=0 are square summable."""
    return second_order(1.0, 0.0, {"geometric": 0.5}, a=a, name="ex-lcc")


def ex_lpc(a: int = 0) -> SystemCoefficients:
    """``-Δ²z(t-1) = λ z(t)``: the free discrete Laplacian on the half-line."""
    return second_order(1.0, 0.0, 1.0, a=a, name="ex-lpc")


def ex_mid(a: int = 0) -> SystemCoefficients:
    """Direct sum of ex-lcc and ex-lpc: n=2 with deficiency index 3."""
    return direct_sum(ex_lcc(a), ex_lpc(a), name="ex-mid")


def finite_support(length: int = 6, a: int = 0) -> SystemCoefficients:
    """Unit weight on ``length`` points and zero beyond (finite-dimensional space)."""
    return second_order(1.0, 0.0, {"values": [1.0] * length, "start": a}, a=a,
                        name="finite-support")


REFERENCE_SYSTEMS = {
    "ex-lcc": ex_lcc,
    "ex-lpc": ex_lpc,
    "ex-mid": ex_mid,
    "finite-support": finite_support,
}


def builtin(name: str, params: dict | None = None) -> SystemCoefficients:
    """Construct a builtin system.

    ``second_order``: params ``p, q, w`` (see :func:`second_order`) and ``a``.
    ``direct_sum``: params ``first``, ``second`` (systems or nested
    ``{"builtin": ..., "params": ...}`` specs).  ``table_with_tail``: params
    ``path`` or ``data``.  The reference names ``ex-lcc``, ``ex-lpc``,
    ``ex-mid`` and ``finite-support`` are also accepted.
    """
    params = dict(params or {})
    if name == "second_order":
        unknown = set(params) - {"p", "q", "w", "a"}
        if unknown:
            raise ContractViolation(f"unknown second_order params {sorted(unknown)}")
        return second_order(params.get("p", 1.0), params.get("q", 0.0), params.get("w", 1.0),
                            a=int(params.get("a", 0)))
    if name == "direct_sum":
        try:
            parts = [params["first"], params["second"]]
        except KeyError as exc:
            raise ContractViolation("direct_sum needs 'first' and 'second'") from exc
        parts = [p if isinstance(p, SystemCoefficients)
                 else builtin(p["builtin"], p.get("params")) for p in parts]
        return direct_sum(*parts)
    if name == "table_with_tail":
        if "data" in params:
            return table_with_tail(params["data"])
        if "path" in params:
            return table_with_tail(params["path"])
        raise ContractViolation("table_with_tail needs 'path' or 'data'")
    if name in REFERENCE_SYSTEMS:
        return REFERENCE_SYSTEMS[name](**params)
    raise ContractViolation(f"unknown builtin {name!r}")


def is_finite(x) -> bool:
    return bool(np.all(np.isfinite(x))) and not (isinstance(x, float) and math.isnan(x))
