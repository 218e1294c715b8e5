"""Graph backend: weighted graphs, the unnormalized Laplacian and labeled problems.

For semi-supervised classification the state is an ``N_int x k`` matrix whose
rows live on the simplex sum_j U_ij = 1; labeled vertices are fixed one-hot
rows that enter the interior equations through f_bd = L_x U_bd.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import LinearOperator, cg
from sklearn.neighbors import NearestNeighbors

from .potentials import DoubleWell, Wells

log = logging.getLogger(__name__)

DENSE_SOLVE_LIMIT = 4096
BRUTE_KNN_LIMIT = 20000


class LinearSolveError(RuntimeError):
    def __init__(self, iterations, residual):
        super().__init__(f"conjugate gradients did not converge after {iterations} "
                         f"iterations (relative residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class WeightedGraph:
    """Symmetric non-negative weights with zero diagonal, stored as CSR."""

    weights: sparse.csr_matrix
    provenance: tuple = ("explicit",)

    @property
    def N(self):
        return self.weights.shape[0]

    def laplacian(self):
        W = self.weights
        return (sparse.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()

    @classmethod
    def from_edges(cls, N, i, j, w):
        """Directed entries averaged with their transpose; list both directions for w_ij."""
        W = sparse.coo_matrix((w, (i, j)), shape=(N, N)).tocsr()
        W = 0.5 * (W + W.T) if (W != W.T).nnz else W
        W.setdiag(0)
        W.eliminate_zeros()
        return cls(W.tocsr(), ("explicit",))


def _gaussian(d2, sigma):
    return np.exp(-d2 / (2.0 * sigma * sigma))


def build_knn_graph(points, k, sigma):
    """Gaussian-weighted k-nearest-neighbour graph, symmetrized as (W + W^T)/2.

    An edge present in only one direction keeps half its Gaussian weight.
    """
    X = np.asarray(points, dtype=float)
    N = X.shape[0]
    if not 0 < k < N:
        raise ValueError(f"need 0 < k < N, got k={k}, N={N}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    algorithm = "brute" if N <= BRUTE_KNN_LIMIT else "auto"
    nn = NearestNeighbors(n_neighbors=k + 1, algorithm=algorithm).fit(X)
    dist, idx = nn.kneighbors(X)
    rows = np.empty((N, k), dtype=np.int64)
    d = np.empty((N, k))
    for i in range(N):
        keep = idx[i] != i
        if keep.all():  # duplicates pushed i out of its own list
            keep[-1] = False
        rows[i] = idx[i][keep][:k]
        d[i] = dist[i][keep][:k]
    W = sparse.csr_matrix((_gaussian(d.ravel() ** 2, sigma),
                           (np.repeat(np.arange(N), k), rows.ravel())), shape=(N, N))
    W = (0.5 * (W + W.T)).tocsr()
    W.eliminate_zeros()
    return WeightedGraph(W, ("knn", k, sigma))


def build_full_graph(points, sigma, cutoff=1e-3, max_bytes=2 * 1024 ** 3):
    """All-pairs Gaussian weights; entries below ``cutoff`` are dropped."""
    X = np.asarray(points, dtype=float)
    N = X.shape[0]
    need = 8 * N * N
    if need > max_bytes:
        raise MemoryError(f"dense {N}x{N} kernel needs {need / 1024 ** 2:.0f} MiB, "
                          f"limit is {max_bytes / 1024 ** 2:.0f} MiB")
    sq = np.sum(X * X, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    K = _gaussian(d2, sigma)
    np.fill_diagonal(K, 0.0)
    K[K < cutoff] = 0.0
    W = sparse.csr_matrix(K)
    return WeightedGraph(W, ("full", sigma, cutoff))


def one_hot(labels, k):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


class LabeledProblem:
    """A graph with prescribed one-hot rows on the labeled set.

    Partitions L into interior, cross and boundary blocks and precomputes
    f_bd = L_x U_bd and c_bd = tr(U_bd^T L_bd U_bd)/2.
    """

    def __init__(self, graph, labeled, labels, k, eps=1.0):
        self.graph = graph
        self.k = int(k)
        self.eps = float(eps)
        N = graph.N
        labeled = np.asarray(labeled, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if labeled.shape != labels.shape:
            raise ValueError("labeled indices and labels differ in length")
        if labeled.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError("labels out of range")
        if len(np.unique(labeled)) != labeled.size:
            raise ValueError("duplicate labeled indices")
        mask = np.zeros(N, dtype=bool)
        mask[labeled] = True
        if mask.all():
            raise ValueError("at least one vertex must be unlabeled")
        self.labeled = labeled
        self.interior = np.flatnonzero(~mask)
        self.U_bd = one_hot(labels, self.k)
        L = graph.laplacian()
        self.L_int = L[self.interior][:, self.interior].tocsr()
        self.L_x = L[self.interior][:, labeled].tocsr()
        self.L_bd = L[labeled][:, labeled].tocsr()
        self.f_bd = np.asarray(self.L_x @ self.U_bd)
        self.c_bd = 0.5 * float(np.sum(self.U_bd * (self.L_bd @ self.U_bd)))

    @property
    def N(self):
        return self.graph.N

    @property
    def N_int(self):
        return self.interior.size

    def assemble(self, U_int):
        """Full ``N x k`` matrix from interior rows and the fixed boundary rows."""
        U = np.empty((self.N, self.k))
        U[self.interior] = U_int
        U[self.labeled] = self.U_bd
        return U

    def uniform_start(self):
        return np.full((self.N_int, self.k), 1.0 / self.k)


def simplex_project_rows(U):
    """Shift each row by a constant so that it sums to one."""
    U = np.asarray(U, dtype=float)
    k = U.shape[-1]
    if k < 2:
        raise ValueError("simplex projection needs k >= 2")
    return U + ((1.0 - U.sum(axis=-1)) / k)[..., None]


def classify(U):
    """Row-wise argmax; ties go to the lowest class index."""
    return np.argmax(np.asarray(U), axis=-1)


def accuracy(predicted, truth, exclude=None):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError("predicted and truth differ in length")
    keep = np.ones(truth.shape, dtype=bool)
    if exclude is not None:
        keep[np.asarray(exclude, dtype=np.int64)] = False
    if not keep.any():
        return float("nan")
    return float(np.mean(predicted[keep] == truth[keep]))


def reachable_from(graph, sources):
    """Mask of vertices whose connected component contains one of ``sources``."""
    _, comp = csgraph.connected_components(graph.weights, directed=False)
    return np.isin(comp, comp[np.asarray(sources, dtype=np.int64)])


def graph_energy(problem, U, R=2.0, normalized=True):
    """(eps/2) tr(U^T L U) + (1/eps) sum_i W(U_i), divided by N if ``normalized``."""
    U = np.asarray(U, dtype=float)
    L = problem.graph.laplacian()
    W = DoubleWell(R, Wells.ZERO_ONE, k=problem.k)
    eps = problem.eps
    val = 0.5 * eps * float(np.sum(U * (L @ U))) + float(np.sum(W(U))) / eps
    return val / problem.N if normalized else val


class GraphBackend:
    """Scheme backend for interior rows of a ``LabeledProblem``.

    Implicit solves use a dense Cholesky factorization while N_int <= 4096,
    otherwise Jacobi-preconditioned conjugate gradients per class column.
    """

    def __init__(self, problem, R=2.0, truth=None, dense_limit=DENSE_SOLVE_LIMIT,
                 cg_tol=1e-10, cg_maxiter=5000):
        self.problem = problem
        self.potential = DoubleWell(R, Wells.ZERO_ONE, k=problem.k)
        self.truth = None if truth is None else np.asarray(truth)
        self.dense = problem.N_int <= dense_limit
        self.cg_tol = cg_tol
        self.cg_maxiter = cg_maxiter
        self._factors = {}
        self.cg_iterations = 0

    def _solver(self, step, eps):
        key = (step, eps)
        solver = self._factors.get(key)
        if solver is not None:
            return solver
        mass = 1.0 + 2.0 * step / eps ** 2
        L = self.problem.L_int
        if self.dense:
            S = step * L.toarray()
            S[np.diag_indices_from(S)] += mass
            factor = linalg.cho_factor(S, lower=True, check_finite=False)
            solver = lambda rhs: linalg.cho_solve(factor, rhs, check_finite=False)
        else:
            S = (step * L + mass * sparse.identity(L.shape[0])).tocsr()
            inv_diag = 1.0 / S.diagonal()
            M = LinearOperator(S.shape, matvec=lambda x: inv_diag * x)

            def solver(rhs):
                out = np.empty_like(rhs)
                for j in range(rhs.shape[1]):
                    b = rhs[:, j]
                    iters = [0]

                    def count(_):
                        iters[0] += 1

                    x, info = cg(S, b, x0=inv_diag * b, rtol=self.cg_tol,
                                 maxiter=self.cg_maxiter, M=M, callback=count)
                    self.cg_iterations += iters[0]
                    if info != 0:
                        res = np.linalg.norm(S @ x - b) / max(np.linalg.norm(b), 1e-300)
                        raise LinearSolveError(iters[0], res)
                    out[:, j] = x
                return out
        if len(self._factors) > 8:
            self._factors.clear()
        self._factors[key] = solver
        return solver

    def solve_unconstrained(self, rhs, step, eps):
        return self._solver(step, eps)(np.asarray(rhs, dtype=float))

    def implicit_solve(self, rhs, step, eps):
        return simplex_project_rows(self.solve_unconstrained(rhs, step, eps))

    def concave_grad(self, U, eps):
        return self.potential.concave_prime(U) / eps ** 2 + self.problem.f_bd

    def full_grad(self, U, eps):
        return self.problem.L_int @ U + 2.0 * U / eps ** 2 + self.concave_grad(U, eps)

    def dirichlet(self, U):
        """tr(U^T L U) of the assembled matrix, from the blocks."""
        p = self.problem
        return (float(np.sum(U * (p.L_int @ U))) + 2.0 * float(np.sum(U * p.f_bd))
                + 2.0 * p.c_bd)

    def energy(self, U, eps):
        return 0.5 * self.dirichlet(U) + float(np.sum(self.potential(U))) / eps ** 2

    def gl_energy(self, U, eps):
        return eps * self.energy(U, eps)

    def norm2(self, V):
        return float(np.sum(np.square(V)))

    def mean(self, U):
        return float(np.mean(U))

    def diagnostics(self, U):
        out = {"gl_energy_scaled": self.gl_energy(U, self.problem.eps) / self.problem.N,
               "max_row_sum_error": float(np.max(np.abs(U.sum(axis=1) - 1.0)))}
        if self.truth is not None:
            pred = classify(U)
            out["accuracy"] = float(np.mean(pred == self.truth[self.problem.interior]))
        return out
