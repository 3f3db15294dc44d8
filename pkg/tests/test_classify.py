import numpy as np
import pytest

from hamspec import (CaseKind, CaseLabel, ClassificationAmbiguous, DefinitenessNotFound,
                     SystemCoefficients, classify, count_l2_solutions, direct_sum, ex_lcc,
                     ex_lpc, ex_mid, find_definiteness, finite_support, second_order)
from hamspec.classify import check_real_count, kind_for


@pytest.mark.parametrize("sys, kind, d", [
    (ex_lcc(), CaseKind.LIMIT_CIRCLE, 2),
    (ex_lpc(), CaseKind.LIMIT_POINT, 1),
    (ex_mid(), CaseKind.INTERMEDIATE, 3),
])
def test_reference_classification(sys, kind, d):
    label = classify(sys)
    assert label.kind is kind
    assert label.d == d
    assert not label.finite_dim_space


def test_finite_support_is_limit_circle_and_finite():
    label = classify(finite_support())
    assert label.as_dict() == {"kind": "LimitCircle", "d": 2, "finite_dim_space": True}


def test_finite_support_without_tag_detected_by_exact_tail():
    base = finite_support(5)
    untagged = SystemCoefficients(1, 0, base.provider, {}, "untagged")
    label = classify(untagged)
    assert label.d == 2 and label.finite_dim_space


def test_direct_sum_counts_add():
    sys = direct_sum(ex_lcc(), ex_lcc())
    assert classify(sys).d == 4
    assert count_l2_solutions(direct_sum(ex_lpc(), ex_lpc()), 1j).count == 2


def test_real_point_count_for_intermediate():
    assert check_real_count(ex_mid(), -1.0, 3)


def test_slower_weight_decay_still_limit_circle():
    # Σ t² w(t) < ∞ for w = (t+1)^-4
    sys = second_order(1.0, 0.0, lambda t: (t + 1.0) ** -4)
    assert classify(sys).kind is CaseKind.LIMIT_CIRCLE


def test_definiteness_window():
    w = find_definiteness(ex_lcc())
    assert w.s0 == 0 and w.t0 >= 1 and w.min_eig > 0
    # a single weighted point cannot make the 2x2 Gram definite
    assert find_definiteness(finite_support(2)).t0 == 1


def test_zero_weight_has_no_definiteness_window():
    sys = second_order(1.0, 0.0, 0.0)
    with pytest.raises(DefinitenessNotFound):
        find_definiteness(sys, max_window=256)


def test_undecided_count_is_ambiguous():
    with pytest.raises(ClassificationAmbiguous) as info:
        count_l2_solutions(ex_lpc(), 1j, max_doublings=1)
    assert "horizons" in info.value.evidence


def test_forced_labels():
    assert classify(ex_lpc(), force="LimitCircle").d == 2
    label = classify(ex_mid(), force=("Intermediate", 3))
    assert label.evidence == {"forced": True}
    with pytest.raises(ValueError):
        CaseLabel(CaseKind.INTERMEDIATE, 2, 1)


def test_kind_for():
    assert kind_for(2, 1) is CaseKind.LIMIT_CIRCLE
    assert kind_for(1, 1) is CaseKind.LIMIT_POINT
    assert kind_for(3, 2) is CaseKind.INTERMEDIATE


def test_gram_evidence_is_monotone():
    count = count_l2_solutions(ex_lcc(), 1j)
    traces = [np.sum(e) for e in count.gram_eigs]
    assert all(b >= a - 1e-12 for a, b in zip(traces, traces[1:]))
