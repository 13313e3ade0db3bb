import math
from dataclasses import replace
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sparsestream.data import MaskSpec, generate_synthetic, sparsify, stream_columns
from sparsestream.errors import ValidationError
from sparsestream.lfa import FeatureBlock, LfaConfig
from sparsestream.nrs import NeighborhoodSpace
from sparsestream.selector import (
    Admission,
    FuzzyCandidate,
    SelectedFeature,
    SelectionState,
    SelectorConfig,
    Verdict,
    classify_relevance,
    merge_fuzzy,
    process_block,
    redundancy_check_new,
    redundancy_prune_existing,
    relevance_p,
    run,
    score_fuzzy,
    selection_to_dict,
)

FAST = SelectorConfig(lfa=LfaConfig(eta=0.01, lmax=200))


def column_with_p(labels, target_p, seed=0):
    """A column whose Pearson correlation with ``labels`` gives exactly ``target_p``."""
    n = labels.size
    y = labels - labels.mean()
    y /= np.linalg.norm(y)
    e = np.random.default_rng(seed).standard_normal(n)
    e -= e.mean()
    e -= np.dot(e, y) * y
    e /= np.linalg.norm(e)
    stat = NormalDist().inv_cdf(1 - target_p / 2)
    r = math.tanh(stat / math.sqrt(n - 3))
    return r * y + math.sqrt(1 - r * r) * e


def feature(idx, values, block=0, via=Admission.RELEVANCE):
    return SelectedFeature(idx, np.asarray(values, float), block, via, 0.0)


def balanced_labels(n=200):
    return np.repeat([0, 1], n // 2)


# -- verdicts -----------------------------------------------------------------

def test_verdict_examples():
    assert classify_relevance(0.005, 0.05) is Verdict.RELEVANT
    assert classify_relevance(0.07, 0.05) is Verdict.FUZZY_RELEVANT
    for mu in (0.01, 0.05, 0.1):
        assert classify_relevance(0.2, mu) is Verdict.IRRELEVANT


@given(p=st.floats(0, 1), mu=st.floats(0.01, 0.1))
def test_verdict_partition(p, mu):
    v = classify_relevance(p, mu)
    expected = Verdict.RELEVANT if p <= mu else Verdict.FUZZY_RELEVANT if p <= 0.1 else Verdict.IRRELEVANT
    assert v is expected


@given(p=st.floats(0, 1), mu1=st.floats(0.01, 0.1), mu2=st.floats(0.01, 0.1))
def test_raising_mu_never_demotes_relevant(p, mu1, mu2):
    lo, hi = sorted((mu1, mu2))
    if classify_relevance(p, lo) is Verdict.RELEVANT:
        assert classify_relevance(p, hi) is Verdict.RELEVANT


# -- relevance ---------------------------------------------------------------

def test_relevance_of_label_copy():
    y = balanced_labels()
    assert relevance_p(y.astype(float), y) < 1e-12


def test_relevance_of_constant_column():
    assert relevance_p(np.full(200, 4.2), balanced_labels()) == 1.0


def test_noise_columns_mostly_irrelevant():
    # under independence p is uniform, so p > 0.1 has probability 0.9;
    # 100 draws fall below 80 with probability < 1e-3
    y = balanced_labels()
    count = sum(relevance_p(np.random.default_rng(s).standard_normal(200), y) > 0.1 for s in range(100))
    assert count >= 80


def test_discrete_path_uses_g2():
    y = balanced_labels()
    assert relevance_p(y.copy(), y, discrete=True) < 1e-12
    assert relevance_p(np.tile([0, 1], 100), y, discrete=True) > 0.5


# -- redundancy ----------------------------------------------------------------

def test_empty_selected_set_keeps():
    assert redundancy_check_new(np.arange(10.0), [], np.arange(10) % 2, 3) == (True, None)


def test_duplicate_of_selected_feature_discarded():
    rng = np.random.default_rng(0)
    y = balanced_labels()
    x = y + rng.standard_normal(200)
    other = y + rng.standard_normal(200)
    keep, witness = redundancy_check_new(x.copy(), [feature(3, other), feature(7, x)], y, 3)
    assert not keep
    assert witness == (7,)
    p_ref, _ = oracles.fisher_z_p(x, y.astype(float), [x])
    assert p_ref > 0.1


def test_independent_signal_kept():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 300))
    y = (a + b > 0).astype(int)
    keep, _ = redundancy_check_new(b, [feature(0, a)], y, 3)
    assert keep
    p_ref, _ = oracles.fisher_z_p(b, y.astype(float), [a])
    assert p_ref <= 0.1


def test_subsets_searched_smallest_first():
    rng = np.random.default_rng(2)
    y = balanced_labels()
    x = y + rng.standard_normal(200)
    sf = [feature(1, x), feature(2, rng.standard_normal(200)), feature(3, x.copy())]
    assert redundancy_check_new(x, sf, y, 3) == (False, (1,))


def test_prune_removes_one_of_two_duplicates():
    rng = np.random.default_rng(3)
    y = balanced_labels()
    x = y + rng.standard_normal(200)
    pruned, removed = redundancy_prune_existing([feature(0, x), feature(5, x.copy())], y, 3)
    assert len(pruned) == 1 and len(removed) == 1
    assert removed[0][0].column_index == 0 and removed[0][1] == (5,)


def test_prune_respects_protected_member():
    rng = np.random.default_rng(3)
    y = balanced_labels()
    x = y + rng.standard_normal(200)
    pruned, _ = redundancy_prune_existing([feature(0, x), feature(5, x.copy())], y, 3, protect=0)
    assert [f.column_index for f in pruned] == [0]


def test_prune_keeps_independent_informative_features():
    rng = np.random.default_rng(4)
    cols = rng.standard_normal((3, 400))
    y = (cols.sum(axis=0) > 0).astype(int)
    sf = [feature(i, c) for i, c in enumerate(cols)]
    pruned, removed = redundancy_prune_existing(sf, y, 3)
    assert removed == [] and len(pruned) == 3
    for i, c in enumerate(cols):
        others = [cols[j] for j in range(3) if j != i]
        for S in oracles.subsets_by_size(others, 3):
            assert oracles.fisher_z_p(c, y.astype(float), list(S))[0] <= 0.1


def test_prune_single_member_unchanged():
    pruned, removed = redundancy_prune_existing([feature(0, np.arange(10.0))], np.arange(10) % 2, 3)
    assert len(pruned) == 1 and removed == []


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), size=st.integers(2, 6))
def test_prune_reaches_fixed_point(seed, size):
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((3, 150))
    y = (base[0] + base[1] > 0).astype(int)
    cols = [base[rng.integers(0, 3)] * rng.uniform(0.5, 2) + 0.7 * rng.standard_normal(150) for _ in range(size)]
    sf = [feature(i, c) for i, c in enumerate(cols)]
    once, _ = redundancy_prune_existing(sf, y, 2)
    twice, removed = redundancy_prune_existing(once, y, 2)
    assert removed == []
    assert [f.column_index for f in twice] == [f.column_index for f in once]


# -- fuzzy candidates ------------------------------------------------------------

def test_score_fuzzy_matches_nrs():
    x = np.array([0, 0.1, 0.2, 0.25, 1.0, 1.1])
    y = [0, 0, 0, 1, 1, 1]
    assert score_fuzzy(x, y, 0.15) == 0.5
    assert score_fuzzy(x, y, 0.15) == NeighborhoodSpace(x[:, None], 0.15).dependency_degree(y)


def _state(n_sf, gammas):
    state = SelectionState()
    state.selected = [feature(100 + i, np.zeros(3)) for i in range(n_sf)]
    state.fuzzy = [FuzzyCandidate(i, np.zeros(3), 0.05, g) for i, g in enumerate(gammas)]
    return state


def test_merge_with_no_candidates():
    state = merge_fuzzy(_state(3, []))
    assert len(state.selected) == 3


def test_merge_half_of_selected_best_first():
    state = merge_fuzzy(_state(4, [0.1, 0.9, 0.5, 0.7, 0.2]))
    merged = state.selected[4:]
    assert [f.column_index for f in merged] == [1, 3]
    assert all(f.via is Admission.FUZZY_MERGE for f in merged)
    assert state.fuzzy == []


def test_merge_into_empty_selected_takes_one():
    state = merge_fuzzy(_state(0, [0.3, 0.6, 0.1]))
    assert [f.column_index for f in state.selected] == [1]


def test_merge_tie_breaks():
    state = _state(4, [])
    state.fuzzy = [
        FuzzyCandidate(9, np.zeros(3), 0.05, 0.5),
        FuzzyCandidate(4, np.zeros(3), 0.08, 0.5),
        FuzzyCandidate(2, np.zeros(3), 0.05, 0.5),
    ]
    merge_fuzzy(state)
    assert [f.column_index for f in state.selected[4:]] == [2, 9]


# -- blocks and runs ------------------------------------------------------------

def test_constant_block_selects_nothing():
    y = balanced_labels(40)
    block = FeatureBlock(0, np.full((40, 4), 2.0))
    state = process_block(block, SelectionState(), FAST, y)
    assert state.selected == [] and state.fuzzy == []
    assert {r.verdict for r in state.trace} == {"irrelevant"}
    assert state.blocks_processed == 1


def test_fuzzy_band_on_fully_observed_block():
    y = balanced_labels()
    col = column_with_p(y.astype(float), 0.05)
    assert relevance_p(col, y) == pytest.approx(0.05, abs=1e-9)
    rng = np.random.default_rng(5)
    block = FeatureBlock(0, np.column_stack([col, rng.standard_normal(200)]))
    state = SelectionState()
    process_block(block, state, FAST, y)
    rec = state.trace[0]
    assert rec.mu == 0.01
    assert rec.verdict == "fuzzy" and rec.gamma is not None
    # with an empty selected set the anti-starvation rule merges it at block end
    assert [f.via for f in state.selected] == [Admission.FUZZY_MERGE]


def test_short_stream_single_partial_block():
    d, _ = generate_synthetic(60, 7, 2, 0.1, 1)
    state = run(stream_columns(d), d.labels, FAST)
    assert state.blocks_processed == 1
    assert len(state.trace) == 7


def test_partial_final_block_flushed():
    d, _ = generate_synthetic(60, 17, 2, 0.1, 1)
    state = run(stream_columns(d), d.labels, replace(FAST, block_size=5))
    assert state.blocks_processed == 4
    assert [r.index for r in state.trace] == list(range(17))


def test_run_deterministic():
    d, _ = generate_synthetic(120, 30, 3, 0.1, 2)
    d = sparsify(d, MaskSpec(0.2, 2))
    a = run(stream_columns(d), d.labels, FAST)
    b = run(stream_columns(d), d.labels, FAST)
    assert a.indices == b.indices
    assert [r.to_dict() for r in a.trace] == [r.to_dict() for r in b.trace]
    for fa, fb in zip(a.selected, b.selected):
        assert np.array_equal(fa.values, fb.values)


@pytest.mark.parametrize("seed", range(3))
def test_duplicated_stream_never_keeps_both_copies(seed):
    d, _ = generate_synthetic(200, 20, 3, 0.1, seed)
    stream = [(k, d.features[:, k // 2]) for k in range(2 * d.T)]
    state = run(stream, d.labels, FAST)
    sources = [i // 2 for i in state.indices]
    assert len(sources) == len(set(sources)), state.indices


def test_run_rejects_single_class():
    with pytest.raises(ValidationError):
        run([(0, np.arange(5.0))], np.zeros(5, int), FAST)


def test_run_rejects_empty_stream():
    with pytest.raises(ValidationError):
        run([], np.array([0, 1]), FAST)


def test_selection_json_shape():
    d, _ = generate_synthetic(100, 20, 2, 0.1, 3)
    state = run(stream_columns(d), d.labels, FAST)
    out = selection_to_dict(state, FAST)
    assert out["blocks"] == 2
    assert set(out) == {"selected", "blocks", "config"}
    for item in out["selected"]:
        assert set(item) == {"index", "via", "p", "gamma"}
        assert item["via"] in ("relevance", "fuzzy")
        assert (item["gamma"] is None) == (item["via"] == "relevance")
