import csv
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayernet.nn import network as N
from bayernet.search import (
    SearchBudget,
    depth_bound,
    enumerate_all,
    load_spec,
    max_hidden,
    progressive_search,
    skip_variants,
)


class TestDepthBound:
    @pytest.mark.parametrize("K,expected", [(32, 40), (64, 40), (128, 38)])
    def test_reference_widths(self, K, expected):
        assert depth_bound(K, 3) == expected

    @pytest.mark.parametrize("K", range(8, 257, 8))
    @pytest.mark.parametrize("C", [2, 3])
    def test_against_search_oracle(self, K, C):
        # largest D with 9(CK + K) + (D - 2) K^2 <= P, found by counting up
        D = 2
        while 9 * (C * K + K) + (D + 1 - 2) * K * K <= 600_000:
            D += 1
        assert depth_bound(K, C) == min(40, D)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            depth_bound(0, 3)


class TestMaxHidden:
    @pytest.mark.parametrize("K,C", [(32, 3), (64, 3), (128, 3), (64, 2), (100, 2)])
    def test_fits_and_is_maximal(self, K, C):
        h = max_hidden(K, C)
        assert N.count_params(N.build_spec("g" if C == 3 else "gr", K, h)) <= 600_000
        assert h + 2 <= depth_bound(K, C)
        if h + 3 <= depth_bound(K, C):
            assert N.count_params(N.build_spec("g" if C == 3 else "gr", K, h + 1)) > 600_000

    def test_reference_values(self):
        assert [max_hidden(K, 3) for K in (32, 64, 128)] == [38, 16, 4]


class TestSkipVariants:
    def test_same_weights_fewer_layers(self):
        spec = N.build_spec("g", 8, 12)
        vs = skip_variants(spec)
        assert vs
        for v in vs:
            assert N.count_params(v) == N.count_params(spec)
            assert v.depth < spec.depth
            assert all(i >= 6 for i, l in enumerate(v.layers) if l.skip_sources)
        depths = [v.depth for v in vs]
        assert depths == sorted(depths, reverse=True)

    def test_first_variant(self):
        # 12 plain hidden layers -> 10 plain + 1 concat layer at 6 reading layer 1
        v = skip_variants(N.build_spec("g", 8, 12))[0]
        assert v.depth == 13 and v.skip_layout() == "6<1"

    def test_shallow_has_none(self):
        assert skip_variants(N.build_spec("g", 8, 4)) == []

    def test_keeps_dilation(self):
        spec = N.build_spec("gr", 8, 10, dilation=3)
        assert all(l.dilation == 3 for v in skip_variants(spec) for l in v.hidden)

    def test_limit(self):
        assert len(skip_variants(N.build_spec("g", 8, 30), limit=5)) == 5


def planted_oracle(K0=32, D0=12, bump_at=15):
    """Scripted validation error with its minimum at width K0, depth D0.

    Any other width costs 100; skip layers cost 5. The bump at depth 15 stops
    the five-layer shrinking at depth 20, so the two-layer phase walks down
    20, 18, 16, 14, 12 and is rejected at 10.
    """

    def oracle(spec):
        err = abs(spec.depth - D0) + (0 if spec.width == K0 else 100)
        if spec.depth == bump_at:
            err += 10
        if any(l.skip_sources for l in spec.layers):
            err += 5
        return float(err)

    return oracle


class TestProgressiveSearch:
    def test_recovers_planted_minimum(self):
        res = progressive_search("g", None, planted_oracle())
        assert (res.width, res.depth) == (32, 12)
        assert res.params == N.count_params(N.build_spec("g", 32, 10))
        depth_phase = [c.spec.depth for c in res.trace if c.phase.startswith("depth")]
        assert depth_phase == [35, 30, 25, 20, 15, 18, 16, 14, 12, 10]

    def test_difference_network_gets_dilation(self):
        res = progressive_search("gr", None, planted_oracle())
        assert res.depth == 12
        assert {l.dilation for l in res.spec.hidden} == {3}
        assert res.params == N.count_params(N.build_spec("gr", 32, 10))

    def test_every_candidate_in_budget(self):
        res = progressive_search("g", None, planted_oracle())
        for c in res.trace:
            assert c.params <= 600_000 and c.spec.depth <= 40

    def test_widths_evaluated_first(self):
        res = progressive_search("g", None, planted_oracle())
        first = res.trace[:3]
        assert [c.phase for c in first] == ["width"] * 3
        assert [(c.spec.width, c.spec.depth) for c in first] == [(32, 40), (64, 18), (128, 6)]

    def test_constant_oracle_shrinks_to_minimum(self):
        # ties keep shrinking, then the shallowest skip variant is taken
        budget = SearchBudget(widths=(16,), min_hidden=1)
        res = progressive_search("g", budget, lambda s: 1.0)
        assert len(res.spec.hidden) == 1

    def test_monotone_oracle_keeps_deepest(self):
        # deeper is always better: nothing shrinks and no skip variant is adopted
        res = progressive_search("g", SearchBudget(widths=(32,)), lambda s: 100.0 - s.depth)
        assert res.depth == 40 and not any(l.skip_sources for l in res.spec.layers)

    def test_skip_variant_adopted_when_not_worse(self):
        def oracle(spec):
            if spec.depth < 12 and not any(l.skip_sources for l in spec.layers):
                return 50.0
            return 1.0

        # shrinking stops at depth 13 (20, 15 pass; 10 and 11 fail)
        res = progressive_search("g", SearchBudget(widths=(32,)), oracle)
        assert any(l.skip_sources for l in res.spec.layers)
        assert res.params == N.count_params(N.build_spec("g", 32, 11))
        assert res.depth < 13

    def test_trace_and_spec_files(self, tmp_path):
        res = progressive_search("gb", None, planted_oracle())
        res.write_trace(tmp_path / "t.csv")
        rows = list(csv.reader(open(tmp_path / "t.csv")))
        assert rows[0] == ["candidate", "phase", "K", "depth", "params", "skips", "val_error"]
        assert len(rows) == len(res.trace) + 1
        res.write_spec(tmp_path / "s.json")
        assert load_spec(tmp_path / "s.json") == res.spec

    @settings(max_examples=15, deadline=None)
    @given(
        P=st.integers(20_000, 600_000),
        widths=st.lists(st.sampled_from([8, 16, 32, 64]), min_size=1, max_size=3, unique=True),
        seed=st.integers(0, 10_000),
    )
    def test_budget_respected_for_any_oracle(self, P, widths, seed):
        budget = SearchBudget(max_params=P, widths=tuple(widths))
        if all(max_hidden(K, 3, budget) < 1 for K in widths):
            return
        rng = random.Random(seed)
        res = progressive_search("g", budget, lambda s: rng.random())
        assert res.params <= P and res.depth <= 40
        for c in res.trace:
            assert c.params <= P and c.spec.depth <= 40


def test_enumerate_all_in_budget():
    for target in ("g", "gr"):
        for spec in enumerate_all(target, SearchBudget(widths=(64, 128))):
            assert N.count_params(spec) <= 600_000 and spec.depth <= 40


def test_budget_file(tmp_path):
    (tmp_path / "b.cfg").write_text("max_params = 6e5\nwidths = 16, 32\n# comment\nsteps = 4 1\n")
    b = SearchBudget.from_file(tmp_path / "b.cfg")
    assert b == SearchBudget(max_params=600_000, widths=(16, 32), steps=(4, 1))
    with pytest.raises(ValueError):
        SearchBudget(max_params=0)
