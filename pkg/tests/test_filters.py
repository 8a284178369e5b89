import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzgd.core import gradient
from byzgd.filters import FilterError, FilterKind, GradientReport, aggregate, filter_aggregate, sort_by_norm


def reports(vectors):
    return [GradientReport(i, np.asarray(v, dtype=float), 0) for i, v in enumerate(vectors)]


def test_sort_examples():
    assert sort_by_norm(reports([[3], [1], [2]])) == [1, 2, 0]
    assert sort_by_norm(reports([[1, 0], [0, 1], [-1, 0], [0, -1]])) == [0, 1, 2, 3]


def test_sort_six_agent_at_origin(six_agents):
    rs = [GradientReport(a.id, gradient(a, np.zeros(2)), 0) for a in six_agents.agents]
    # norms |y_i| ||x_i||: 1, 1.2264, 1.2264, 1, 0.2830, 0.2830
    assert sort_by_norm(rs) == [4, 5, 0, 3, 1, 2]


def test_sort_rejects_bad_ids():
    rs = reports([[1], [2]])
    with pytest.raises(FilterError):
        sort_by_norm(rs + [GradientReport(1, np.ones(1), 0)])
    with pytest.raises(FilterError):
        sort_by_norm([GradientReport(0, np.ones(1), 0), GradientReport(2, np.ones(1), 0)])


G3 = [[1, 0], [0, 2], [3, 0]]


@pytest.mark.parametrize(
    "kind, vectors, f, expected",
    [
        (FilterKind.NORM, G3, 1, [1, 2]),
        (FilterKind.NORM, G3, 0, [4, 2]),
        (FilterKind.NORM_CAP, G3, 1, [3, 2]),
        (FilterKind.NORM_CAP, [[0, 0]] * 3, 1, [0, 0]),
        (FilterKind.NORMALIZE, [[1, 0], [0, 2], [4, 0]], 1, [4, 2]),
        (FilterKind.NONE, G3, 1, [4, 2]),
    ],
)
def test_aggregate_examples(kind, vectors, f, expected):
    np.testing.assert_allclose(aggregate(kind, reports(vectors), f), expected)


def test_aggregate_rejects():
    with pytest.raises(FilterError, match="A3"):
        aggregate(FilterKind.NORM, reports(G3 + [[1, 1]]), 2)
    with pytest.raises(FilterError):
        aggregate(FilterKind.NORM, reports([[np.nan, 0], [1, 0], [0, 1]]), 1)
    # the baseline does not care about f
    aggregate(FilterKind.NONE, reports(G3), 5)


def test_parse_kind():
    assert FilterKind.parse("NORM_CAP") is FilterKind.NORM_CAP
    with pytest.raises(ValueError):
        FilterKind.parse("krum")


def test_normalize_keeps_zero_reports_zero():
    out = filter_aggregate(FilterKind.NORMALIZE, reports([[0, 0], [0, 1], [2, 0]]), 1)
    np.testing.assert_allclose(out.direction, [1, 1])
    assert out.rescaled == (1, 2)


instances = st.integers(min_value=1, max_value=7).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.integers(min_value=0, max_value=(n - 1) // 2),
        st.integers(min_value=1, max_value=4),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
)
KINDS = list(FilterKind)


def _draw(n, d, seed):
    return np.random.default_rng(seed).standard_normal((n, d)) * 10


@settings(max_examples=1000, deadline=None)
@given(instances, st.sampled_from(KINDS))
def test_permutation_invariance(inst, kind):
    n, f, d, seed = inst
    g = _draw(n, d, seed)
    base = aggregate(kind, reports(g), f)
    perm = np.random.default_rng(seed + 1).permutation(n)
    shuffled = [GradientReport(int(i), g[i], 0) for i in perm]
    np.testing.assert_allclose(aggregate(kind, shuffled, f), base, rtol=1e-12, atol=1e-12)


@settings(max_examples=1000, deadline=None)
@given(instances, st.sampled_from(KINDS), st.floats(min_value=1e-3, max_value=1e3))
def test_positive_homogeneity(inst, kind, c):
    n, f, d, seed = inst
    g = _draw(n, d, seed)
    np.testing.assert_allclose(
        aggregate(kind, reports(c * g), f), c * aggregate(kind, reports(g), f), rtol=1e-9, atol=1e-9
    )


@settings(max_examples=1000, deadline=None)
@given(instances, st.sampled_from([FilterKind.NORM, FilterKind.NORM_CAP]))
def test_zero_fixed_point(inst, kind):
    n, f, d, seed = inst
    g = _draw(n, d, seed)
    zero_rows = np.random.default_rng(seed + 2).choice(n, size=n - f, replace=False)
    g[zero_rows] = 0.0
    assert np.all(aggregate(kind, reports(g), f) == 0.0)


@settings(max_examples=300, deadline=None)
@given(instances)
def test_bounded_contribution(inst):
    n, f, d, seed = inst
    g = _draw(n, d, seed)
    cap = np.sort(np.linalg.norm(g, axis=1))[n - f - 1]
    tol = 1e-9 * max(1.0, cap)
    assert np.linalg.norm(aggregate(FilterKind.NORM, reports(g), f)) <= (n - f) * cap + tol
    assert np.linalg.norm(aggregate(FilterKind.NORM_CAP, reports(g), f)) <= n * cap + tol


def test_filter_set_matches_exhaustive_enumeration():
    rng = np.random.default_rng(99)
    for _ in range(300):
        n = int(rng.integers(1, 7))
        f = int(rng.integers(0, (n - 1) // 2 + 1))
        g = rng.standard_normal((n, 3))
        norms = np.linalg.norm(g, axis=1)
        best = min(itertools.combinations(range(n), n - f), key=lambda s: sum(norms[list(s)]))
        kept = filter_aggregate(FilterKind.NORM, reports(g), f).kept
        assert set(kept) == set(best)
        np.testing.assert_allclose(aggregate(FilterKind.NORM, reports(g), f), g[list(best)].sum(axis=0))
