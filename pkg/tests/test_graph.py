import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import sparse

from momentumgl import graph as G
from momentumgl.ingest import make_blobs
from momentumgl.schemes import SchemeParams, SchemeState, run


def test_knn_equilateral_weights_half():
    sigma = 0.7
    d = sigma * math.sqrt(2 * math.log(2))
    pts = np.array([[0, 0], [d, 0], [d / 2, d * math.sqrt(3) / 2]])
    W = G.build_knn_graph(pts, 2, sigma).weights.toarray()
    off = W[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 0.5, atol=1e-12)
    assert np.all(np.diag(W) == 0)


def test_knn_duplicate_points_weight_one():
    W = G.build_knn_graph(np.array([[1.0, 2.0], [1.0, 2.0]]), 1, 0.5).weights.toarray()
    assert W[0, 1] == 1.0 and W[1, 0] == 1.0


def test_knn_asymmetric_edge_halved():
    # A's nearest is B, B's nearest is C
    pts = np.array([[0.0], [1.0], [1.5]])
    sigma = 1.0
    W = G.build_knn_graph(pts, 1, sigma).weights.toarray()
    gauss = math.exp(-1.0 / (2 * sigma ** 2))
    assert W[0, 1] == pytest.approx(0.5 * gauss, rel=1e-14)
    assert W[1, 2] == pytest.approx(math.exp(-0.25 / 2), rel=1e-14)


def test_knn_rejects_large_k():
    with pytest.raises(ValueError):
        G.build_knn_graph(np.zeros((3, 2)), 3, 1.0)
    with pytest.raises(ValueError):
        G.build_knn_graph(np.random.rand(5, 2), 2, 0.0)


def test_full_graph_examples():
    W = G.build_full_graph(np.array([[0.0], [0.0], [100.0]]), 0.2).weights.toarray()
    assert W[0, 1] == 1.0 and W[0, 2] == 0.0
    pts = np.random.default_rng(0).standard_normal((20, 3))
    K = G.build_full_graph(pts, 0.9, cutoff=0.0).weights.toarray()
    d2 = ((pts[:, None] - pts[None]) ** 2).sum(-1)
    exact = np.exp(-d2 / (2 * 0.81))
    np.fill_diagonal(exact, 0)
    assert np.allclose(K, exact, atol=1e-14)


def test_full_graph_memory_limit():
    with pytest.raises(MemoryError):
        G.build_full_graph(np.zeros((100, 2)), 1.0, max_bytes=1000)


def _random_graph(seed, N=30):
    pts = np.random.default_rng(seed).standard_normal((N, 2))
    return G.build_knn_graph(pts, 4, 1.0)


@given(st.integers(0, 1000))
def test_laplacian_kernel_and_psd(seed):
    L = _random_graph(seed).laplacian()
    assert np.all(np.abs(L @ np.ones(L.shape[0])) < 1e-14)
    x = np.random.default_rng(seed).standard_normal(L.shape[0])
    assert x @ (L @ x) >= -1e-12


def _problem(seed=0, N=30, k=3, n_lab=6, eps=1.0):
    g = _random_graph(seed, N)
    rng = np.random.default_rng(seed)
    lab = np.sort(rng.choice(N, n_lab, replace=False))
    return G.LabeledProblem(g, lab, rng.integers(0, k, n_lab), k, eps)


@given(st.integers(0, 1000))
def test_block_identity(seed):
    p = _problem(seed)
    L = p.graph.laplacian()
    rng = np.random.default_rng(seed)
    U_int = rng.standard_normal((p.N_int, p.k))
    U = p.assemble(U_int)
    whole = float(np.sum(U * (L @ U)))
    blocks = G.GraphBackend(p).dirichlet(U_int)
    assert blocks == pytest.approx(whole, rel=1e-12, abs=1e-12)
    assert G.graph_energy(p, U, normalized=False) == pytest.approx(
        p.eps * G.GraphBackend(p).energy(U_int, p.eps), rel=1e-10)


def test_problem_validation():
    g = _random_graph(0, 5)
    with pytest.raises(ValueError):
        G.LabeledProblem(g, [0, 1], [0], 2)
    with pytest.raises(ValueError):
        G.LabeledProblem(g, [0, 0], [0, 1], 2)
    with pytest.raises(ValueError):
        G.LabeledProblem(g, [0], [2], 2)
    with pytest.raises(ValueError):
        G.LabeledProblem(g, np.arange(5), np.zeros(5, int), 2)


def test_boundary_rows_one_hot():
    p = _problem()
    assert np.all(p.U_bd.sum(1) == 1) and set(np.unique(p.U_bd)) == {0.0, 1.0}


def _two_vertex(eps=1.0):
    g = G.WeightedGraph.from_edges(2, [0, 1], [1, 0], [1.0, 1.0])
    return G.LabeledProblem(g, [], [], 2, eps)


def test_implicit_solve_isolated_vertices():
    g = G.WeightedGraph(sparse.csr_matrix((4, 4)))
    p = G.LabeledProblem(g, [0], [1], 2, eps=0.5)
    rhs = np.random.default_rng(0).standard_normal((3, 2))
    h = 0.3
    out = G.GraphBackend(p).solve_unconstrained(rhs, h, 0.5)
    assert np.allclose(out, rhs / (1 + 2 * h / 0.25), atol=1e-15)


def test_implicit_solve_two_vertex_closed_form():
    h, m = 0.7, 1 + 2 * 0.7
    rhs = np.array([[1.0, 2.0], [3.0, -1.0]])
    inv = np.array([[m + h, h], [h, m + h]]) / (m * (m + 2 * h))
    out = G.GraphBackend(_two_vertex()).solve_unconstrained(rhs, h, 1.0)
    assert np.allclose(out, inv @ rhs, atol=1e-14)


@pytest.mark.parametrize("dense_limit", [10 ** 6, 0])
def test_implicit_solve_inverse_consistency(dense_limit):
    p = _problem(3, N=60)
    be = G.GraphBackend(p, dense_limit=dense_limit)
    rhs = np.random.default_rng(1).standard_normal((p.N_int, p.k))
    h = 2.0
    out = be.solve_unconstrained(rhs, h, 1.0)
    back = (1 + 2 * h) * out + h * (p.L_int @ out)
    assert np.max(np.abs(back - rhs)) < 1e-9


def test_cg_failure_reports_residual():
    p = _problem(3, N=60)
    be = G.GraphBackend(p, dense_limit=0, cg_maxiter=1, cg_tol=1e-15)
    with pytest.raises(G.LinearSolveError) as err:
        be.solve_unconstrained(np.random.default_rng(0).standard_normal((p.N_int, 3)), 50.0, 0.1)
    assert err.value.residual > 0


def test_simplex_projection_examples():
    assert np.allclose(G.simplex_project_rows(np.array([[0.2, 0.8]])), [[0.2, 0.8]])
    assert np.allclose(G.simplex_project_rows(np.zeros((1, 5))), 0.2)
    assert np.allclose(G.simplex_project_rows(np.array([[0.5, 0.9]])), [[0.3, 0.7]])
    with pytest.raises(ValueError):
        G.simplex_project_rows(np.zeros((2, 1)))


def test_classify_examples():
    assert G.classify(np.eye(5)[[3]])[0] == 3
    assert G.classify(np.full((1, 5), 0.2))[0] == 0
    assert G.classify(np.array([[0.4, 0.39, 0.21]]))[0] == 0


def test_accuracy_examples():
    t = np.array([0, 1, 2, 3])
    assert G.accuracy(t, t) == 1.0
    assert G.accuracy((t + 1) % 4, t) == 0.0
    assert G.accuracy(np.array([0, 1, 0, 0]), t) == 0.5
    assert G.accuracy(np.array([9, 1, 2, 3]), t, exclude=[0]) == 1.0
    with pytest.raises(ValueError):
        G.accuracy(t, t[:2])


def test_graph_energy_examples():
    g = _random_graph(0, 10)
    p = G.LabeledProblem(g, [0], [0], 2)
    assert G.graph_energy(p, np.eye(2)[np.zeros(10, int)]) == pytest.approx(0.0, abs=1e-14)
    two = _two_vertex()
    U = np.eye(2)
    assert float(np.sum(U * (two.graph.laplacian() @ U))) == 2.0


def _blob_problem(n=200, seed=0):
    ds = make_blobs(n, 5, seed=seed)
    lab = np.arange(0, n, 10)
    p = G.LabeledProblem(G.build_full_graph(ds.points, 1.0), lab, ds.labels[lab], 5, 1.0)
    return ds, p


@pytest.mark.parametrize("scheme", ["gd", "fista"])
def test_row_sums_and_boundary_preserved(scheme):
    ds, p = _blob_problem()
    be = G.GraphBackend(p)
    params = SchemeParams(tau=10.0, eta=10.0 if scheme == "gd" else None, rho=0.4,
                          eps=1.0, scheme=scheme)
    seen = []
    res = run(SchemeState.at_rest(p.uniform_start()), params, be, 15,
              callback=lambda s: seen.append(s.u.copy()))
    for U in seen:
        assert np.max(np.abs(U.sum(1) - 1)) < 1e-12
        full = p.assemble(U)
        assert np.array_equal(full[p.labeled], p.U_bd)
    assert res.status == "ok"


@pytest.mark.parametrize("h", [1, 10, 100, 1e3, 1e4])
def test_gd_energy_monotone(h):
    _, p = _blob_problem()
    be = G.GraphBackend(p)
    res = run(SchemeState.at_rest(p.uniform_start()), SchemeParams(tau=h, eta=h, eps=1.0,
                                                                   scheme="gd"), be, 30)
    E = res.trace["gl_energy"]
    assert np.all(np.diff(E) <= 1e-10 * abs(E[0]))


def test_relabeling_equivariance():
    ds, p = _blob_problem(100)
    perm = np.random.default_rng(4).permutation(100)
    inv = np.argsort(perm)
    W = p.graph.weights.toarray()[np.ix_(perm, perm)]
    g2 = G.WeightedGraph(sparse.csr_matrix(W))
    lab2 = inv[p.labeled]
    p2 = G.LabeledProblem(g2, lab2, ds.labels[p.labeled], 5, 1.0)
    params = SchemeParams(tau=10.0, rho=0.4, eps=1.0, scheme="fista")
    U1 = p.assemble(run(SchemeState.at_rest(p.uniform_start()), params, G.GraphBackend(p),
                        10).state.u)
    U2 = p2.assemble(run(SchemeState.at_rest(p2.uniform_start()), params, G.GraphBackend(p2),
                         10).state.u)
    assert np.allclose(U2, U1[perm], atol=1e-10)


def test_disconnected_vertex_ties_to_class_zero():
    pts = np.array([[0.0, 0], [0.1, 0], [0.2, 0], [50, 50]])
    g = G.build_full_graph(pts, 0.2)
    p = G.LabeledProblem(g, [0], [2], 3, 1.0)
    res = run(SchemeState.at_rest(p.uniform_start()),
              SchemeParams(tau=1.0, eta=1.0, eps=1.0, scheme="gd"), G.GraphBackend(p), 50)
    U = p.assemble(res.state.u)
    assert np.allclose(U[3], 1 / 3) and G.classify(U)[3] == 0
    assert G.classify(U)[1] == 2
    assert list(G.reachable_from(g, [0])) == [True, True, True, False]


def test_from_edges_one_direction_is_averaged():
    W = G.WeightedGraph.from_edges(2, [0], [1], [1.0]).weights.toarray()
    assert W[0, 1] == W[1, 0] == 0.5
