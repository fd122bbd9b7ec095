"""Property-based checks of the scalar selection rules and small invariants."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from efrsim import max_admissible_relax_weight

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
vectors = st.lists(finite, min_size=2, max_size=12)


def rule_inputs(w, wb):
    w = np.asarray(w)
    wb = np.asarray(wb)
    a = float(np.sum((wb - w) ** 2))
    b = float(w @ wb - w @ w)
    return a, b, float(w @ w), float(wb @ wb)


@given(vectors, vectors)
@settings(max_examples=300, deadline=None)
def test_selected_weight_is_admissible(w, wb):
    # the returned weight never pushes the blended norm above the base norm,
    # apart from the degenerate all-equal case where equality holds
    n = min(len(w), len(wb))
    w, wb = np.asarray(w[:n]), np.asarray(wb[:n])
    a, b, sq_w, sq_wb = rule_inputs(w, wb)
    chi = max_admissible_relax_weight(a, b, sq_w, sq_wb)
    assert 0.0 <= chi <= 1.0
    blended = (1 - chi) * w + chi * wb
    scale = sq_w + sq_wb + 1.0
    assert blended @ blended <= sq_w + 1e-9 * scale


@given(vectors, vectors, st.floats(min_value=1e-4, max_value=0.2))
@settings(max_examples=300, deadline=None)
def test_selected_weight_is_maximal(w, wb, bump):
    n = min(len(w), len(wb))
    w, wb = np.asarray(w[:n]), np.asarray(wb[:n])
    a, b, sq_w, sq_wb = rule_inputs(w, wb)
    chi = max_admissible_relax_weight(a, b, sq_w, sq_wb)
    if chi >= 1.0 or a <= 1e-12 * (sq_w + sq_wb):
        return
    larger = min(1.0, chi + bump)
    blended = (1 - larger) * w + larger * wb
    scale = sq_w + sq_wb + 1.0
    # anything strictly above the selected weight breaks the constraint
    assert blended @ blended > sq_w - 1e-9 * scale


@given(st.integers(min_value=0, max_value=2 ** 31 - 1))
@settings(max_examples=50, deadline=None)
def test_relax_weight_bounds_for_random_quadratics(seed):
    rng = np.random.Generator(np.random.Philox(seed))
    w = rng.standard_normal(8)
    wb = rng.standard_normal(8) * rng.uniform(0.2, 2.0)
    a, b, sq_w, sq_wb = rule_inputs(w, wb)
    chi = max_admissible_relax_weight(a, b, sq_w, sq_wb)
    if sq_wb <= sq_w:
        assert chi == 1.0
    elif b > 0:
        assert chi == 0.0
    else:
        assert 0.0 <= chi < 1.0
