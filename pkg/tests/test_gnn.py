import numpy as np
import pytest
import scipy.sparse as sp

from gnnfair.errors import DimensionMismatch, GnnFairError, NonFiniteLoss
from gnnfair.gnn import (GNN, GraphOperators, ModelConfig, PredictionSet, gradient_check,
                         load_model, normalize_adjacency, save_model, train)
from gnnfair.graph import Split, adjacency_from_edges

ARCHS = ("GCN", "GraphSAGE", "GIN")


def test_normalize_examples():
    assert normalize_adjacency(sp.csr_matrix((1, 1))).toarray().tolist() == [[1.0]]
    assert np.allclose(normalize_adjacency(adjacency_from_edges(2, [(0, 1)])).toarray(), 0.5)
    K3 = normalize_adjacency(adjacency_from_edges(3, [(0, 1), (1, 2), (0, 2)])).toarray()
    assert np.allclose(K3, 1 / 3)


def test_normalized_spectrum_bounded():
    rng = np.random.default_rng(0)
    dense = np.triu((rng.random((40, 40)) < 0.1).astype(float), 1)
    A = normalize_adjacency(sp.csr_matrix(dense + dense.T)).toarray()
    assert np.allclose(A, A.T)
    assert np.linalg.eigvalsh(A).max() <= 1 + 1e-9


def zero_model(arch, in_dim, layers=2):
    m = GNN(ModelConfig(architecture=arch, layers=layers, hidden=4), in_dim)
    for v in m.params.values():
        v[...] = 0.0
    return m


@pytest.mark.parametrize("arch", ARCHS)
def test_zero_network_predicts_all_positive(arch):
    ops = GraphOperators(adjacency_from_edges(3, [(0, 1)]))
    pred = zero_model(arch, 2).predict(ops, np.ones((3, 2)))
    assert np.all(pred.logits == 0) and np.all(pred.predicted == 1)


def test_single_node_gcn_identity():
    m = GNN(ModelConfig(layers=1), 1)
    m.params["W0"][...] = 2.5
    logits, _ = m.forward(GraphOperators(sp.csr_matrix((1, 1))), np.array([[1.0]]))
    assert logits.tolist() == [2.5]


def test_two_node_hand_calculation():
    ops = GraphOperators(adjacency_from_edges(2, [(0, 1)]))
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    gcn = GNN(ModelConfig(layers=2, hidden=2), 2)
    W0 = np.array([[1.0, -1.0], [0.5, 2.0]])
    W1 = np.array([[1.0], [-2.0]])
    gcn.params.update(W0=W0, b0=np.array([0.1, -0.2]), W1=W1, b1=np.array([0.3]))
    Ahat = np.full((2, 2), 0.5)
    H = np.maximum(Ahat @ X @ W0 + [0.1, -0.2], 0)
    expected = (Ahat @ H @ W1 + 0.3)[:, 0]
    assert np.allclose(gcn.forward(ops, X)[0], expected, atol=1e-14)

    sage = GNN(ModelConfig(architecture="GraphSAGE", layers=1), 2)
    sage.params.update(Ws0=np.array([[1.0], [0.0]]), Wn0=np.array([[0.0], [1.0]]), b0=np.array([0.5]))
    # own first feature plus the neighbour's second feature
    assert np.allclose(sage.forward(ops, X)[0], [1 + -1 + 0.5, 3 + 2 + 0.5])

    gin = GNN(ModelConfig(architecture="GIN", layers=1, hidden=1), 2)
    gin.params.update(eps0=np.array([0.5]), W1_0=np.array([[1.0], [1.0]]), b1_0=np.zeros(1),
                      W2_0=np.array([[2.0]]), b2_0=np.array([-1.0]))
    S = 1.5 * X + X[::-1]
    assert np.allclose(gin.forward(ops, X)[0], 2 * np.maximum(S.sum(axis=1), 0) - 1)


def test_dimension_mismatch():
    m = GNN(ModelConfig(), 3)
    with pytest.raises(DimensionMismatch):
        m.forward(GraphOperators(sp.csr_matrix((2, 2))), np.ones((2, 2)))


def tiny_problem(n=8, seed=0):
    rng = np.random.default_rng(seed)
    dense = np.triu((rng.random((n, n)) < 0.4).astype(int), 1)
    A = sp.csr_matrix(dense + dense.T)
    X = rng.standard_normal((n, 3))
    y = np.array([0, 1] * (n // 2))
    return A, X, y


@pytest.mark.parametrize("arch", ARCHS)
def test_gradient_check(arch):
    A, X, y = tiny_problem()
    err = gradient_check(ModelConfig(architecture=arch, layers=2, hidden=5, seed=1,
                                     weight_decay=1e-2), A, X, y)
    assert err < 1e-4


def test_gradient_check_size_limit():
    A, X, y = tiny_problem(n=22)
    with pytest.raises(GnnFairError):
        gradient_check(ModelConfig(), A, X, y)


def separable(n=20):
    rng = np.random.default_rng(3)
    y = np.array([0, 1] * (n // 2))
    X = rng.standard_normal((n, 2)) * 0.3 + np.where(y[:, None] == 1, 1.0, -1.0)
    return sp.csr_matrix((n, n)), X, y


def test_gin_fits_separable_data():
    A, X, y = separable()
    idx = np.arange(20)
    split = Split(idx, idx[:0], idx, (1.0, 0.0, 0.0), 0)
    cfg = ModelConfig(architecture="GIN", epochs=200, dropout=0.0, seed=0)
    model, pred = train(cfg, A, X, split, labels=y)
    assert model.params["eps0"][0] != 0.0  # learnable, started at 0
    assert np.mean(pred.predicted == y) == 1.0


@pytest.mark.parametrize("arch", ARCHS)
def test_training_is_deterministic(arch):
    A, X, y = tiny_problem(n=12, seed=4)
    idx = np.arange(12)
    split = Split(idx[:8], idx[:0], idx[8:], (0.6, 0.2, 0.2), 0)
    cfg = ModelConfig(architecture=arch, epochs=30, seed=7)
    m1, p1 = train(cfg, A, X, split, labels=y)
    m2, p2 = train(cfg, A, X, split, labels=y)
    for k in m1.params:
        assert np.array_equal(m1.params[k], m2.params[k])
    assert np.array_equal(p1.logits, p2.logits)


def test_zero_learning_rate_keeps_weights():
    A, X, y = tiny_problem(n=12)
    idx = np.arange(12)
    split = Split(idx[:8], idx[:0], idx[8:], (0.6, 0.2, 0.2), 0)
    cfg = ModelConfig(lr=0.0, epochs=10, seed=2)
    model, _ = train(cfg, A, X, split, labels=y)
    fresh = GNN(cfg, 3)
    for k in fresh.params:
        assert np.array_equal(model.params[k], fresh.params[k])


def test_non_finite_loss_reports_epoch():
    A, X, y = tiny_problem(n=12)
    X = X.copy()
    X[0, 0] = np.nan
    idx = np.arange(12)
    split = Split(idx[:8], idx[:0], idx[8:], (0.6, 0.2, 0.2), 0)
    with pytest.raises(NonFiniteLoss) as exc:
        with np.errstate(all="ignore"):
            train(ModelConfig(epochs=5), A, X, split, labels=y)
    assert exc.value.epoch == 1


@pytest.mark.parametrize("arch", ARCHS)
def test_permutation_equivariance(arch):
    A, X, y = tiny_problem(n=10, seed=6)
    perm = np.random.default_rng(1).permutation(10)
    m = GNN(ModelConfig(architecture=arch, seed=3), 3)
    ops = GraphOperators(A)
    ops_p = GraphOperators(A[perm][:, perm])
    z = m.forward(ops, X)[0]
    zp = m.forward(ops_p, X[perm])[0]
    assert np.allclose(zp, z[perm], atol=1e-9)


def test_prediction_set_threshold_rule():
    p = PredictionSet(np.array([-0.5, 0.0, 0.7]))
    assert p.predicted.tolist() == [0, 1, 1]
    with pytest.raises(GnnFairError):
        PredictionSet(np.array([1.0]), predicted=np.array([0]))


def test_config_validation():
    with pytest.raises(GnnFairError):
        ModelConfig(architecture="MLP")
    with pytest.raises(GnnFairError):
        ModelConfig(layers=0)


@pytest.mark.parametrize("arch", ARCHS)
def test_weights_round_trip(tmp_path, arch):
    m = GNN(ModelConfig(architecture=arch, seed=9, layers=3), 4)
    save_model(tmp_path / "w.bin", m)
    again = load_model(tmp_path / "w.bin")
    assert again.config == m.config
    for k in m.params:
        assert np.array_equal(m.params[k], again.params[k])
