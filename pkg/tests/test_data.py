import numpy as np
import pytest

from gnnfair.data import (DatasetSpec, SyntheticSpec, binarize, build_similarity_graph,
                          generate_synthetic, load_dataset, write_dataset)
from gnnfair.errors import GnnFairError, InfeasibleSpec, MissingColumn, ParseError
from gnnfair.graph import homophily
from gnnfair import metrics


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def spec_for(tmp_path, csv_text, edges_text="0 1\n1 2\n", **kw):
    write(tmp_path, "a.csv", csv_text)
    write(tmp_path, "a.edges", edges_text)
    return DatasetSpec.from_dict({"attributes": "a.csv", "edges": "a.edges", "sensitive": "sex",
                                  "label": "good", "ranking": "score", **kw}, base=tmp_path)


def test_three_rows_two_edges(tmp_path):
    g = load_dataset(spec_for(tmp_path, "sex,score,age,good\n0,1.5,30,1\n1,2.5,40,0\n0,0.5,50,1\n"))
    assert (g.n, g.m) == (3, 2)
    assert g.attribute_names == ("sex", "score", "age")
    assert g.labels.tolist() == [1, 0, 1]
    assert g.attribute_names[g.ranking_index] == "score"


def test_label_one_two_binarized(tmp_path):
    g = load_dataset(spec_for(tmp_path, "sex,score,good\n0,1,1\n1,2,2\n0,3,1\n"))
    # most frequent value (1) maps to 0
    assert g.labels.tolist() == [0, 1, 0]


def test_binarize_override_and_ties():
    assert binarize(["a", "b", "b"]).tolist() == [1, 0, 0]
    assert binarize(["x", "y"]).tolist() == [0, 1]
    assert binarize(["m", "f", "f"], positive=["m"]).tolist() == [1, 0, 0]
    assert binarize([0, 1, 1]).tolist() == [0, 1, 1]


def test_tab_delimited_and_categorical(tmp_path):
    g = load_dataset(spec_for(tmp_path, "sex\tscore\tjob\tgood\nm\t1\ta\t1\nf\t2\tb\t0\nf\t3\ta\t1\n"))
    assert g.attribute_names == ("sex", "score", "job=a", "job=b")
    assert g.sensitive.tolist() == [1, 0, 0]


def test_edge_out_of_range(tmp_path):
    with pytest.raises(ParseError, match="line 2"):
        load_dataset(spec_for(tmp_path, "sex,score,good\n0,1,1\n1,2,0\n0,3,1\n", "0 1\n1 3\n"))


def test_bad_rows_and_missing_columns(tmp_path):
    with pytest.raises(ParseError, match="row 3"):
        load_dataset(spec_for(tmp_path, "sex,score,good\n0,1,1\n1,2\n"))
    with pytest.raises(MissingColumn):
        load_dataset(spec_for(tmp_path, "sex,rank,good\n0,1,1\n1,2,0\n0,3,1\n"))
    with pytest.raises(ParseError, match="ranking"):
        load_dataset(spec_for(tmp_path, "sex,score,good\n0,1,1\n1,x,0\n0,3,1\n"))


def test_spec_needs_exactly_one_edge_source():
    with pytest.raises(GnnFairError):
        DatasetSpec("d", "a.csv", "s", "y", "z")
    with pytest.raises(GnnFairError):
        DatasetSpec("d", "a.csv", "s", "y", "z", edge_file="e", similarity_threshold=0.5)


def test_similarity_examples():
    A = build_similarity_graph(np.array([[1.0, 2.0], [1.0, 2.0]]), 0.9)
    assert A[0, 1] == 1
    A = build_similarity_graph(np.array([[1.0, 0.0], [0.0, 1.0]]), 0.1)
    assert A.nnz == 0


def brute_similarity(X, thr):
    n = len(X)
    out = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            nu, nv = np.linalg.norm(X[u]), np.linalg.norm(X[v])
            sim = X[u] @ X[v] / (nu * nv) if nu > 0 and nv > 0 else 0.0
            out[u, v] = float(u != v and sim > thr)
    return out


def test_similarity_hand_rows():
    X = np.array([[1, 0, 0], [0.9, 0.1, 0], [0, 1, 1], [0, 0.8, 1.0]])
    A = build_similarity_graph(X, 0.8)
    assert np.array_equal(A.toarray(), brute_similarity(X, 0.8))


@pytest.mark.parametrize("seed", range(5))
def test_similarity_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((int(rng.integers(2, 200)), 4))
    X[rng.random(len(X)) < 0.05] = 0.0
    thr = float(rng.uniform(0.5, 0.95))
    A = build_similarity_graph(X, thr, block=37)
    assert np.array_equal(A.toarray(), brute_similarity(X, thr))
    assert (A != A.T).nnz == 0


def test_inverse_euclidean_similarity():
    X = np.array([[0.0, 0.0], [0.0, 0.5], [3.0, 3.0]])
    A = build_similarity_graph(X, 0.6, "inverse_euclidean")
    assert A.toarray().tolist() == [[0, 1, 0], [1, 0, 0], [0, 0, 0]]


def test_round_trip(tmp_path):
    g = generate_synthetic(SyntheticSpec(n=120, avg_degree=4, seed=2))
    spec_path = write_dataset(g, tmp_path, "syn")
    again = load_dataset(DatasetSpec.from_file(spec_path))
    assert g.same_as(again)


def test_synthetic_homophily_target():
    g = generate_synthetic(SyntheticSpec(n=2000, h_s=0.9, seed=0))
    assert 0.85 <= homophily(g, g.sensitive) <= 0.95
    assert abs(homophily(g, g.labels) - 0.6) <= 0.05


def test_synthetic_equal_rates_have_no_label_disparity():
    g = generate_synthetic(SyntheticSpec(n=1000, protected_fraction=0.5, pos_rate_protected=0.5,
                                         pos_rate_unprotected=0.5, seed=1))
    assert metrics.statistical_disparity(g.labels, g.sensitive) <= 3.0


def test_synthetic_deterministic():
    a = generate_synthetic(SyntheticSpec(n=300, seed=7))
    b = generate_synthetic(SyntheticSpec(n=300, seed=7))
    assert np.array_equal(a.edges(), b.edges())
    assert a.same_as(b)


def test_synthetic_homophily_monotone():
    vals = [homophily(g, g.sensitive) for g in
            (generate_synthetic(SyntheticSpec(n=1000, h_s=h, seed=3)) for h in (0.3, 0.6, 0.9))]
    assert vals[0] < vals[1] < vals[2]


def test_synthetic_infeasible():
    # 3 protected nodes allow only 3 * 97 cross pairs, fewer than 396 requested
    with pytest.raises(InfeasibleSpec):
        generate_synthetic(SyntheticSpec(n=100, protected_fraction=0.03, h_s=0.01,
                                         avg_degree=8, seed=0))


def test_synthetic_spec_file(tmp_path):
    p = write(tmp_path, "s.cfg", "synthetic.n = 50\nsynthetic.h_s = 0.5\nseed = 4\n")
    spec = SyntheticSpec.from_file(p)
    assert (spec.n, spec.h_s, spec.seed) == (50, 0.5, 4)
    with pytest.raises(GnnFairError):
        SyntheticSpec(h_s=1.0)
