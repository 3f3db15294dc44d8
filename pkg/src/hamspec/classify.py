"""Definiteness windows, square-summable solution counts and endpoint cases.

Square summability cannot be decided from finitely many terms.  The counts
here watch the eigenvalues of the partial Gram matrix

    G(N) = Σ_{t=a}^{a+N-1} R(Φ)*(t) W(t) R(Φ)(t)

as ``N`` doubles.  The k-th smallest eigenvalue stays bounded exactly when
the space of square-summable solutions has dimension at least k, so the
count is the number of eigenvalues judged bounded.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .linalg import herm_eigen
from .model import SystemCoefficients
from .solutions import FundamentalMatrix, gram_terms


class DefinitenessNotFound(RuntimeError):
    pass


class ClassificationAmbiguous(RuntimeError):
    def __init__(self, message: str, evidence=None):
        self.evidence = evidence
        super().__init__(message)


class NoSelfAdjointExtension(RuntimeError):
    pass


class CaseKind(str, enum.Enum):
    LIMIT_CIRCLE = "LimitCircle"
    LIMIT_POINT = "LimitPoint"
    INTERMEDIATE = "Intermediate"


@dataclass
class DefinitenessWindow:
    s0: int
    t0: int
    min_eig: float


@dataclass
class L2Count:
    count: int
    lam: complex
    horizons: list
    gram_eigs: list
    verdicts: list
    exact_tail: bool = False


@dataclass
class CaseLabel:
    kind: CaseKind
    d: int
    n: int
    finite_dim_space: bool = False
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = CaseKind(self.kind)
        expected = {CaseKind.LIMIT_CIRCLE: self.d == 2 * self.n,
                    CaseKind.LIMIT_POINT: self.d == self.n,
                    CaseKind.INTERMEDIATE: self.n < self.d < 2 * self.n}[self.kind]
        if not expected:
            raise ValueError(f"{self.kind.value} is inconsistent with d={self.d}, n={self.n}")

    def as_dict(self) -> dict:
        return {"kind": self.kind.value, "d": self.d, "finite_dim_space": self.finite_dim_space}


def kind_for(d: int, n: int) -> CaseKind:
    if d == 2 * n:
        return CaseKind.LIMIT_CIRCLE
    if d == n:
        return CaseKind.LIMIT_POINT
    return CaseKind.INTERMEDIATE


def find_definiteness(sys: SystemCoefficients, lam: complex = 0.0, max_window: int = 4096,
                      tol: float = 1e-10) -> DefinitenessWindow:
    """Smallest ``t0`` making the solution Gram on ``[a, t0]`` positive definite."""
    fm = FundamentalMatrix(sys, lam)
    a = sys.a
    g = np.zeros((2 * sys.n,) * 2, dtype=complex)
    chunk = 32
    t = a
    while t - a < max_window:
        t1 = min(t + chunk - 1, a + max_window - 1)
        terms = gram_terms(sys, fm, t, t1)
        for k in range(terms.shape[0]):
            g = g + terms[k]
            ev = np.linalg.eigvalsh(0.5 * (g + g.conj().T))
            if ev[0] > tol * max(1.0, ev[-1]):
                return DefinitenessWindow(a, t + k, float(ev[0]))
        t = t1 + 1
        chunk *= 2
    raise DefinitenessNotFound(f"no definiteness window within {max_window} steps")


def _verdict(s_prev2, s_prev, s_cur, tol, margin, growth):
    d1 = s_prev - s_prev2
    d2 = s_cur - s_prev
    if abs(d2) <= tol * max(abs(s_cur), np.finfo(float).tiny) or d2 == 0.0:
        return "bounded"
    if d1 > 0 and d2 / d1 < 1.0 - margin:
        return "bounded"
    if s_prev > 0 and s_cur / s_prev > growth:
        return "divergent"
    if d1 > 0 and d2 / d1 > 1.0 + margin:
        return "divergent"
    return "ambiguous"


def count_l2_solutions(sys: SystemCoefficients, lam: complex, tol: float = 1e-9,
                       margin: float = 0.25, growth: float = 1.5, cond_cap: float = 1e12,
                       max_doublings: int = 14, t0: int | None = None) -> L2Count:
    """Number of linearly independent square-summable solutions at ``lam``.

    Parameters
    ----------
    tol : float
        Relative increment below which a Gram eigenvalue counts as settled.
    margin, growth : float
        An eigenvalue is bounded when successive increments shrink by more
        than ``1 - margin`` and divergent when they grow by more than
        ``1 + margin`` or the eigenvalue itself grows by ``growth``.
    cond_cap : float
        Forward integration cannot resolve decaying solutions beyond this
        Gram condition number, so doubling stops there.

    Raises
    ------
    ClassificationAmbiguous
        When some eigenvalue is still undecided at the stopping horizon.
    """
    a = sys.a
    if t0 is None:
        t0 = find_definiteness(sys).t0
    n0 = max(4, t0 - a + 1)
    fm = FundamentalMatrix(sys, lam)
    g = np.zeros((2 * sys.n,) * 2, dtype=complex)
    done = a - 1
    horizons, eigs, verdicts = [], [], []
    for k in range(max_doublings + 1):
        t_end = a + n0 * 2 ** k - 1
        g = g + gram_terms(sys, fm, done + 1, t_end).sum(axis=0)
        done = t_end
        ev = herm_eigen(0.5 * (g + g.conj().T), tol=1e-14, method="jacobi").values
        horizons.append(t_end)
        eigs.append(ev)
        if len(eigs) >= 3:
            v = [_verdict(eigs[-3][i], eigs[-2][i], ev[i], tol, margin, growth)
                 for i in range(len(ev))]
            verdicts.append(v)
            if "ambiguous" not in v:
                m = v.count("bounded")
                if all(x == "bounded" for x in v[:m]):
                    exact = bool(np.all(eigs[-1] == eigs[-2]))
                    return L2Count(m, complex(lam), horizons, eigs, verdicts, exact)
        if ev[-1] > cond_cap * max(ev[0], np.finfo(float).tiny):
            break
    raise ClassificationAmbiguous(
        f"square-summable count at λ={lam} undecided up to horizon {horizons[-1]}",
        evidence={"horizons": horizons, "gram_eigs": eigs, "verdicts": verdicts})


def classify(sys: SystemCoefficients, force: str | tuple | None = None, **count_opts) -> CaseLabel:
    """Endpoint case from the counts at ``λ = ±i``.

    ``force`` skips the numeric decision: ``"LimitCircle"``, ``"LimitPoint"``
    or ``("Intermediate", d)``.
    """
    n = sys.n
    finite_tag = sys.tail_tag.get("kind") == "zero"
    if force is not None:
        kind, d = (force, None) if isinstance(force, str) else force
        kind = CaseKind(kind)
        if d is None:
            d = 2 * n if kind is CaseKind.LIMIT_CIRCLE else n
        return CaseLabel(kind, int(d), n, finite_tag and d == 2 * n, {"forced": True})
    window = find_definiteness(sys)
    plus = count_l2_solutions(sys, 1j, t0=window.t0, **count_opts)
    minus = count_l2_solutions(sys, -1j, t0=window.t0, **count_opts)
    if plus.count != minus.count:
        raise NoSelfAdjointExtension(f"d+ = {plus.count} differs from d- = {minus.count}")
    d = plus.count
    if not n <= d <= 2 * n:
        raise ClassificationAmbiguous(f"count {d} outside [{n}, {2 * n}]",
                                      evidence={"plus": plus, "minus": minus})
    finite = finite_tag or (plus.exact_tail and minus.exact_tail)
    return CaseLabel(kind_for(d, n), d, n, bool(finite and d == 2 * n),
                     {"window": window, "plus": plus, "minus": minus})


def check_real_count(sys: SystemCoefficients, lam0: float, d: int, **count_opts) -> bool:
    """Whether ``d`` square-summable solutions exist at the real point ``lam0``."""
    return count_l2_solutions(sys, lam0, **count_opts).count == d
