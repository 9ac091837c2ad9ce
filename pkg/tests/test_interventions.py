import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gnnfair import metrics
from gnnfair.data import SyntheticSpec, generate_synthetic
from gnnfair.errors import GnnFairError
from gnnfair.gnn import PredictionSet
from gnnfair.graph import AttributedGraph, degree_vector, homophily, minmax_scale
from gnnfair.interventions import (GammaSweepResult, PostProcessConfig, flip_count, gamma_sweep,
                                   pfr_a, pfr_attributes, pfr_ax, pfr_x, postprocess,
                                   select_plus_minus, unaware)
from gnnfair.netembed import NetembedConfig
from gnnfair.pfr import PfrConfig, quantile_graph

from oracles import brute_knn_affinity, pfr_oracle, same_columns_up_to_sign

NE = NetembedConfig(volume_convention="standard")


def small_graph(d=5, sensitive_index=2, ranking_index=4, n=12, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    s = np.array([0, 1] * (n // 2))
    X[:, sensitive_index] = s
    y = np.array([0, 0, 1, 1] * (n // 4))
    edges = [(i, (i + 1) % n) for i in range(n)] + [(i, (i + 3) % n) for i in range(0, n, 2)]
    return AttributedGraph.from_edges(edges, X, s, y, sensitive_index, ranking_index)


@pytest.fixture(scope="module")
def synth200():
    return generate_synthetic(SyntheticSpec(n=200, avg_degree=8, seed=3))


# ---- Unaware -------------------------------------------------------------

def test_unaware_drops_sensitive_column():
    g = small_graph()
    u = unaware(g)
    assert u.d == 4
    assert np.array_equal(u.attributes, np.delete(g.attributes, 2, axis=1))
    assert (u.adjacency != g.adjacency).nnz == 0
    assert np.array_equal(u.labels, g.labels) and np.array_equal(u.sensitive, g.sensitive)
    assert u.sensitive_index is None and "x2" not in u.attribute_names


def test_unaware_shifts_ranking_index():
    g = small_graph(sensitive_index=1, ranking_index=3)
    u = unaware(g)
    assert u.ranking_index == 2
    assert np.array_equal(u.attributes[:, 2], g.attributes[:, 3])
    before = unaware(small_graph(sensitive_index=3, ranking_index=1))
    assert before.ranking_index == 1


def test_unaware_needs_a_sensitive_column():
    with pytest.raises(GnnFairError):
        unaware(unaware(small_graph()))


# ---- PFR-X ----------------------------------------------------------------

def test_pfr_attributes_are_orthonormal(synth200):
    Xt = pfr_attributes(synth200, PfrConfig(p=4, out_dims=6))
    assert np.allclose(Xt.T @ Xt, np.eye(6), atol=1e-8)


def test_pfr_x_layout(synth200):
    cfg = PfrConfig(p=4, out_dims=6)
    out = pfr_x(synth200, cfg)
    assert (out.adjacency != synth200.adjacency).nnz == 0
    assert out.d == 7 and out.sensitive_index == 6
    assert np.array_equal(out.attributes[:, -1], synth200.sensitive)
    assert np.allclose(out.attributes[:, :-1], minmax_scale(pfr_attributes(synth200, cfg)))
    assert np.array_equal(out.ranking, synth200.ranking)


def test_pfr_attributes_match_composed_oracle():
    g = small_graph(n=20, seed=5)
    cfg = PfrConfig(k=4, t=2.0, p=2, alpha=0.4, out_dims=3)
    Xs = minmax_scale(np.delete(g.attributes, 2, axis=1))
    WX = brute_knn_affinity(Xs, 4, 2.0)
    WF = quantile_graph(g.ranking, g.sensitive, 2).toarray()
    vals, vecs, _ = pfr_oracle(WX, WF, 0.4, 3)
    got = pfr_attributes(g, cfg)
    assert same_columns_up_to_sign(got, vecs, vals, 1e-6)


# ---- PFR-A / PFR-AX ---------------------------------------------------------

def test_pfr_a_respects_degree_budget(synth200):
    out = pfr_a(synth200, NE, PfrConfig(p=4))
    assert out.m <= synth200.m
    assert np.all(degree_vector(out) <= degree_vector(synth200))
    assert np.array_equal(out.attributes, synth200.attributes)


def test_pfr_a_mixes_groups(synth200):
    # fine quantiles: one coarse bucket is a complete bipartite block whose
    # spectrum separates the two groups instead of joining them
    before = 1 - homophily(synth200, synth200.sensitive)
    out = pfr_a(synth200, NE, PfrConfig(p=20))
    after = 1 - homophily(out, out.sensitive)
    assert after > before


def test_pfr_a_needs_edges():
    g = AttributedGraph.from_edges(np.empty((0, 2)), np.column_stack([[0, 1, 0, 1], np.arange(4.0)]),
                                   [0, 1, 0, 1], [0, 1, 1, 0], 0, 1)
    with pytest.raises(GnnFairError):
        pfr_a(g)


def test_pfr_ax_is_componentwise_composition(synth200):
    cfg = PfrConfig(p=4)
    ax = pfr_ax(synth200, NE, cfg)
    assert np.array_equal(ax.attributes, pfr_x(synth200, cfg).attributes)
    assert (ax.adjacency != pfr_a(synth200, NE, cfg).adjacency).nnz == 0
    again = pfr_ax(synth200, NE, cfg)
    assert ax.same_as(again)


def test_pfr_ax_attribute_override(synth200):
    ax = pfr_ax(synth200, NE, PfrConfig(p=4), attribute_config=PfrConfig(p=10, out_dims=5))
    assert ax.d == 6
    assert np.allclose(ax.attributes[:, :-1],
                       minmax_scale(pfr_attributes(synth200, PfrConfig(p=10, out_dims=5))))


def test_pfr_ax_end_to_end(synth200):
    timings = {}
    ax = pfr_ax(synth200, NE, PfrConfig(p=4, out_dims=6), timings=timings)
    assert ax.n == synth200.n
    assert np.array_equal(ax.labels, synth200.labels)
    assert np.array_equal(ax.sensitive, synth200.sensitive)
    assert ax.m <= synth200.m and np.all(degree_vector(ax) <= degree_vector(synth200))
    Xt = pfr_attributes(synth200, PfrConfig(p=4, out_dims=6))
    assert np.allclose(Xt.T @ Xt, np.eye(6), atol=1e-8)
    assert set(timings) == {"embed", "debias"} and min(timings.values()) >= 0


# ---- PostProcess -------------------------------------------------------------

def preds_fixture():
    # 10 protected negatives, 3 protected positives, 5 unprotected nodes
    logits = np.array([-1.0] * 10 + [0.5, 1.0, 2.0] + [-0.3, 0.2, 0.4, -2.0, 3.0])
    s = np.array([1] * 13 + [0] * 5)
    return PredictionSet(logits), s


def test_gamma_zero_is_identity():
    p, s = preds_fixture()
    out = postprocess(p, s, PostProcessConfig(gamma=0.0))
    assert np.array_equal(out.logits, p.logits)


def test_two_flips_at_max_score():
    p, s = preds_fixture()
    out = postprocess(p, s, PostProcessConfig(gamma=0.2, seed=4))
    changed = np.flatnonzero(out.logits != p.logits)
    assert len(changed) == 2 and np.all(changed < 10)
    assert np.all(out.logits[changed] == 4.0)  # observed max 3.0 plus 1
    assert np.all(out.predicted[changed] == 1)
    fixed = postprocess(p, s, PostProcessConfig(gamma=0.2, seed=4, max_score=9.5))
    assert np.all(fixed.logits[changed] == 9.5)


def test_empty_pool_returns_input():
    p = PredictionSet(np.array([1.0, 2.0, -1.0]))
    out = postprocess(p, np.array([1, 1, 0]), PostProcessConfig(gamma=1.0))
    assert np.array_equal(out.logits, p.logits)


def test_max_score_fallback_and_guard():
    p = PredictionSet(np.array([-1.0, -2.0]))
    out = postprocess(p, np.array([1, 1]), PostProcessConfig(gamma=1.0))
    assert out.logits.tolist() == [1.0, 1.0]
    with pytest.raises(GnnFairError):
        postprocess(p, np.array([1, 1]), PostProcessConfig(gamma=1.0, max_score=-0.5))


def test_config_bounds():
    for bad in (dict(gamma=-0.1), dict(gamma=1.5), dict(trials=0)):
        with pytest.raises(GnnFairError):
            PostProcessConfig(**bad)


def test_flip_count_floor():
    assert flip_count(0.3, 10) == 3
    assert flip_count(0.25, 10) == 2
    assert flip_count(1.0, 7) == 7


@settings(max_examples=150, deadline=None)
@given(logits=st.lists(st.integers(-5, 5), min_size=1, max_size=40),
       s_bits=st.lists(st.integers(0, 1), min_size=40, max_size=40),
       gamma=st.floats(0, 1), seed=st.integers(0, 2**31))
def test_postprocess_invariants(logits, s_bits, gamma, seed):
    z = np.array(logits, dtype=float)
    s = np.array(s_bits[:len(z)])
    p = PredictionSet(z)
    out = postprocess(p, s, PostProcessConfig(gamma=gamma, seed=seed))
    pool = (s == 1) & (p.predicted == 0)
    # do-no-harm
    assert np.all(out.predicted[(s == 1) & (p.predicted == 1)] == 1)
    assert np.array_equal(out.logits[~pool], z[~pool])
    flipped = np.count_nonzero(out.predicted != p.predicted)
    assert flipped == flip_count(gamma, int(pool.sum()))
    if s.sum():
        c0, c1 = metrics.group_counts(p.predicted, s), metrics.group_counts(out.predicted, s)
        n1 = int(s.sum())
        assert (c1[0] - c0[0]) == flipped
        assert c1[2] == c0[2]
        assert np.isclose(c1[0] / n1 - c0[0] / n1, flipped / n1)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 1000))
def test_protected_rate_monotone_in_gamma(seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(60)
    s = (rng.random(60) < 0.4).astype(int)
    p = PredictionSet(z)
    rates = []
    for gamma in np.linspace(0, 1, 11):
        out = postprocess(p, s, PostProcessConfig(gamma=float(gamma), seed=seed))
        c = metrics.group_counts(out.predicted, s)
        rates.append((c[0], c[2]))
    rates = np.array(rates)
    assert np.all(np.diff(rates[:, 0]) >= 0)
    assert np.all(rates[:, 1] == rates[0, 1])


# ---- gamma sweep / selection ------------------------------------------------

def test_sweep_at_zero_matches_unmodified():
    p, s = preds_fixture()
    y = np.array([0, 1] * 9)
    sweep = gamma_sweep(p, s, y, grid=[0.0], trials=3)
    base = metrics.evaluate(p.logits, y, s)
    for k in ("auc", "f1", "dsp", "deo"):
        assert sweep.mean[k][0] == pytest.approx(getattr(base, k), rel=1e-14)
        assert sweep.std[k][0] == pytest.approx(0.0, abs=1e-12)


def test_sweep_disparity_matches_count_decomposition():
    p, s = preds_fixture()
    y = np.array([0, 1] * 9)
    sweep = gamma_sweep(p, s, y, grid=[0.1, 0.3, 0.5], trials=4, seed=7)
    n1, n0 = int(s.sum()), int((s == 0).sum())
    pos0 = int(np.count_nonzero(p.predicted[s == 0]))
    pos1 = int(np.count_nonzero(p.predicted[s == 1]))
    for i, gamma in enumerate(sweep.grid):
        k = flip_count(gamma, 10)
        # the same flip count every trial, so the mean equals each trial's gap
        expected = 100 * abs((pos1 + k) / n1 - pos0 / n0)
        assert sweep.mean["dsp"][i] == pytest.approx(expected, abs=1e-12)
        assert sweep.std["dsp"][i] == pytest.approx(0.0, abs=1e-12)


def inflection_fixture(n=2000, protected=0.2, seed=0):
    """Protected group strongly under-predicted: rate 0.1 vs 0.5 elsewhere."""
    rng = np.random.default_rng(seed)
    s = (np.arange(n) < int(protected * n)).astype(int)
    pos = np.where(s == 1, rng.random(n) < 0.1, rng.random(n) < 0.5)
    logits = np.where(pos, rng.uniform(0.1, 3, n), rng.uniform(-3, -0.1, n))
    labels = (rng.random(n) < 0.4).astype(int)
    return PredictionSet(logits), s, labels


def test_sweep_overcorrects_past_parity():
    p, s, y = inflection_fixture()
    grid = np.round(np.arange(0.05, 0.601, 0.05), 2)
    sweep = gamma_sweep(p, s, y, grid=grid, trials=20, seed=1)
    dsp = sweep.mean["dsp"]
    i = int(np.argmin(dsp))
    assert 0 < i < len(grid) - 1
    assert np.all(np.diff(dsp[:i + 1]) < 0) and np.all(np.diff(dsp[i:]) > 0)


def test_sweep_csv_round_trip(tmp_path):
    p, s, y = inflection_fixture(n=300)
    sweep = gamma_sweep(p, s, y, trials=5)
    sweep.to_csv(tmp_path / "sweep.csv")
    header = (tmp_path / "sweep.csv").read_text().splitlines()[0]
    assert header == "gamma,auc_mean,auc_std,f1_mean,f1_std,dsp_mean,dsp_std,deo_mean,deo_std"
    again = GammaSweepResult.from_csv(tmp_path / "sweep.csv", trials=5)
    assert again.grid == sweep.grid
    for k in sweep.mean:
        assert np.array_equal(again.mean[k], sweep.mean[k])
        assert np.array_equal(again.std[k], sweep.std[k])


def test_sweep_rejects_bad_grid():
    p, s, y = inflection_fixture(n=100)
    with pytest.raises(GnnFairError):
        gamma_sweep(p, s, y, grid=[])
    with pytest.raises(GnnFairError):
        gamma_sweep(p, s, y, grid=[0.3, 0.1])


def fake_sweep(dsp, grid=(0.1, 0.2, 0.3, 0.4)):
    zeros = np.zeros(len(grid))
    mean = {"auc": zeros, "f1": zeros, "dsp": np.array(dsp, float), "deo": zeros}
    return GammaSweepResult(tuple(grid), mean, dict(mean), 1)


def test_select_plus_minus():
    assert select_plus_minus(fake_sweep([5, 3, 1, 2]), 5.0) == (0.3, 0.2)
    assert select_plus_minus(fake_sweep([4, 3, 2, 1]), 5.0)[0] == 0.4
    assert select_plus_minus(fake_sweep([2, 1, 1, 3]), 5.0)[0] == 0.2
    # midpoint 3.0 is equidistant from 2 and 4: the smaller gamma wins
    assert select_plus_minus(fake_sweep([4, 2, 1, 5]), 5.0) == (0.3, 0.1)
