"""Orthonormal Legendre chaos on [-1, 1]^d.

Multi-index bookkeeping, tensor Gauss-Legendre quadrature and the
triple-product tensor ``e_ijk`` that every Galerkin contraction goes through.
The density is uniform (``2**-d``), so ``Phi_i`` are products of
``sqrt(2n+1) P_n`` and quadrature weights sum to one.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

DROP_TOL = 1e-14


@dataclass(frozen=True, order=True)
class MultiIndex:
    degrees: tuple[int, ...]

    def __post_init__(self):
        if len(self.degrees) < 1:
            raise ValueError("multi-index needs at least one dimension")
        if any(k < 0 for k in self.degrees):
            raise ValueError(f"negative degree in {self.degrees}")

    @property
    def total(self) -> int:
        return sum(self.degrees)

    @property
    def dim(self) -> int:
        return len(self.degrees)


def _graded(d: int, p: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(p + 1):
        # reverse-lexicographic within a degree: (1,0) before (0,1)
        level = [c for c in itertools.product(range(total + 1), repeat=d) if sum(c) == total]
        level.sort(reverse=True)
        out.extend(level)
    return out


@dataclass(frozen=True)
class MultiIndexSet:
    """Total-degree index set ordered by degree, so the resolved set F is a prefix."""

    dim: int
    order: int
    resolved_order: int
    indices: tuple[MultiIndex, ...] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def n_resolved(self) -> int:
        return sum(1 for ix in self.indices if ix.total <= self.resolved_order)

    @property
    def resolved(self) -> slice:
        return slice(0, self.n_resolved)

    @property
    def unresolved(self) -> slice:
        return slice(self.n_resolved, self.size)

    @functools.cached_property
    def degree_array(self) -> np.ndarray:
        """(n, d) integer array of per-dimension degrees."""
        return np.array([ix.degrees for ix in self.indices], dtype=int)

    def position(self, degrees) -> int:
        return self._lookup[tuple(degrees)]

    @functools.cached_property
    def _lookup(self) -> dict[tuple[int, ...], int]:
        return {ix.degrees: k for k, ix in enumerate(self.indices)}

    def axis_index(self, dim: int, degree: int) -> int:
        """Position of ``degree * e_dim``."""
        deg = [0] * self.dim
        deg[dim] = degree
        return self.position(deg)

    def restrict(self, resolved_order: int) -> "MultiIndexSet":
        return multi_index_set(self.dim, self.order, resolved_order)


@functools.lru_cache(maxsize=None)
def multi_index_set(d: int, p: int, p_r: int | None = None) -> MultiIndexSet:
    if p_r is None:
        p_r = p
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if p < 0 or p_r < 0:
        raise ValueError("orders must be non-negative")
    if p_r > p:
        raise ValueError(f"resolved order {p_r} exceeds full order {p}")
    idx = tuple(MultiIndex(c) for c in _graded(d, p))
    assert len(idx) == math.comb(p + d, d)
    return MultiIndexSet(d, p, p_r, idx)


def legendre_1d(n_max: int, x) -> np.ndarray:
    """Orthonormal Legendre values ``sqrt(2n+1) P_n(x)`` for n = 0..n_max.

    Returns an array of shape ``(n_max + 1,) + x.shape``; uses the three-term
    recurrence. Points outside [-1, 1] are not clamped.
    """
    x = np.asarray(x, dtype=float)
    P = np.empty((n_max + 1,) + x.shape)
    P[0] = 1.0
    if n_max >= 1:
        P[1] = x
    for n in range(1, n_max):
        P[n + 1] = ((2 * n + 1) * x * P[n] - n * P[n - 1]) / (n + 1)
    scale = np.sqrt(2 * np.arange(n_max + 1) + 1.0)
    return P * scale.reshape((-1,) + (1,) * x.ndim)


def legendre_eval(index: MultiIndex | tuple[int, ...], point) -> float:
    degrees = index.degrees if isinstance(index, MultiIndex) else tuple(index)
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.shape != (len(degrees),):
        raise ValueError(f"point has shape {point.shape}, expected ({len(degrees)},)")
    val = 1.0
    for n, x in zip(degrees, point):
        val *= legendre_1d(n, x)[n]
    return float(val)


def basis_matrix(iset: MultiIndexSet, points: np.ndarray) -> np.ndarray:
    """Evaluate every basis function at ``points`` (shape (q, d)); returns (q, n)."""
    points = np.atleast_2d(points)
    table = [legendre_1d(iset.order, points[:, k]) for k in range(iset.dim)]
    degs = iset.degree_array
    out = np.ones((points.shape[0], iset.size))
    for k in range(iset.dim):
        out *= table[k][degs[:, k]].T
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule on [-1, 1]^d; weights include the 1/2 density."""

    dim: int
    n_points: int
    nodes_1d: np.ndarray = field(repr=False)
    weights_1d: np.ndarray = field(repr=False)

    @property
    def exact_degree(self) -> int:
        return 2 * self.n_points - 1

    @functools.cached_property
    def points(self) -> np.ndarray:
        grids = np.meshgrid(*([self.nodes_1d] * self.dim), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @functools.cached_property
    def weights(self) -> np.ndarray:
        w = self.weights_1d
        for _ in range(self.dim - 1):
            w = np.multiply.outer(w, self.weights_1d)
        return np.ravel(w)


@functools.lru_cache(maxsize=None)
def gauss_legendre(dim: int, n_points: int) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(n_points)
    x.setflags(write=False)
    w = w / 2.0
    w.setflags(write=False)
    return QuadratureRule(dim, n_points, x, w)


def points_for_triple(p_f: int) -> int:
    return math.ceil((3 * p_f + 1) / 2)


def _symmetric_1d(V: np.ndarray, w: np.ndarray) -> np.ndarray:
    # each sorted triple is integrated once and copied, so symmetry is exact
    m = V.shape[0]
    e1 = np.zeros((m, m, m))
    for a, b, c in itertools.combinations_with_replacement(range(m), 3):
        val = float(np.sum(V[a] * V[b] * V[c] * w))
        if abs(val) < DROP_TOL:
            continue
        for perm in set(itertools.permutations((a, b, c))):
            e1[perm] = val
    return e1


class TripleProductTensor:
    """Sparse symmetric ``e_ijk = E[Phi_i Phi_j Phi_k]`` over a multi-index set.

    Entries are stored once for ``i <= j <= k``; ``dense`` and the contraction
    operator are derived views. Instances are immutable and shared between
    elements.
    """

    def __init__(self, iset: MultiIndexSet, rule: QuadratureRule | None = None):
        if rule is None:
            rule = gauss_legendre(iset.dim, points_for_triple(iset.order))
        if rule.dim != iset.dim:
            raise ValueError("quadrature dimension does not match the index set")
        if rule.exact_degree < 3 * iset.order:
            raise ValueError(
                f"quadrature with {rule.n_points} points/dim is exact to degree "
                f"{rule.exact_degree}, need {3 * iset.order}"
            )
        self.iset = iset
        self.rule = rule
        n = iset.size
        # tensor structure: e_ijk factorises over dimensions
        q1 = gauss_legendre(1, rule.n_points)
        V = legendre_1d(iset.order, q1.nodes_1d)  # (p+1, q)
        e1 = _symmetric_1d(V, q1.weights_1d)
        degs = iset.degree_array
        dense = np.ones((n, n, n))
        for k in range(iset.dim):
            dk = degs[:, k]
            dense *= e1[np.ix_(dk, dk, dk)]
        dense[np.abs(dense) < DROP_TOL] = 0.0
        dense.setflags(write=False)
        self._dense = dense
        i, j, k = np.nonzero(dense)
        keep = (i <= j) & (j <= k)
        self.entries = {
            (int(a), int(b), int(c)): float(dense[a, b, c])
            for a, b, c in zip(i[keep], j[keep], k[keep])
        }
        # (n*n, n) operator: (a outer b).ravel() @ op -> B(a, b)
        flat = dense.reshape(n * n, n)
        self._op_dense = flat
        self._op_sparse = sparse.csr_matrix(flat)
        self._use_sparse = n > 20

    @property
    def order(self) -> int:
        return self.iset.order

    @property
    def dim(self) -> int:
        return self.iset.dim

    @property
    def size(self) -> int:
        return self.iset.size

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self._dense))

    @property
    def dense(self) -> np.ndarray:
        return self._dense

    def __getitem__(self, ijk) -> float:
        key = tuple(sorted(int(v) for v in ijk))
        return self.entries.get(key, 0.0)

    def bilinear(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Galerkin product ``B(a, b)_k = sum_ij a_i b_j e_ijk`` over leading batch axes."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        shape = np.broadcast_shapes(a.shape, b.shape)
        n = self.size
        if shape[-1] != n:
            raise ValueError(f"coefficient length {shape[-1]} != basis size {n}")
        a2 = np.broadcast_to(a, shape).reshape(-1, n)
        b2 = np.broadcast_to(b, shape).reshape(-1, n)
        outer = (a2[:, :, None] * b2[:, None, :]).reshape(-1, n * n)
        if self._use_sparse:
            out = (self._op_sparse.T @ outer.T).T
        else:
            out = outer @ self._op_dense
        return np.asarray(out).reshape(shape)

    def trilinear(self, f: np.ndarray, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        """``<B(f, g), h>``."""
        return np.sum(self.bilinear(f, g) * h, axis=-1)


@functools.lru_cache(maxsize=None)
def triple_product_tensor(d: int, p_f: int) -> TripleProductTensor:
    """Cached tensor per (d, p_f); the resolved order does not affect entries."""
    return TripleProductTensor(multi_index_set(d, p_f, p_f))


def project(iset: MultiIndexSet, func, rule: QuadratureRule | None = None) -> np.ndarray:
    """Coefficients of ``func`` (vectorised over (q, d) points) on the orthonormal basis."""
    if rule is None:
        rule = gauss_legendre(iset.dim, iset.order + 2)
    V = basis_matrix(iset, rule.points)
    vals = np.asarray(func(rule.points), dtype=float)
    return snap((rule.weights * vals) @ V)


def snap(c: np.ndarray, rel: float = DROP_TOL) -> np.ndarray:
    """Zero entries below ``rel`` times the largest magnitude along the last axis.

    Removes quadrature round-off from structurally zero coefficients.
    """
    c = np.array(c, dtype=float, copy=True)
    scale = np.max(np.abs(c), axis=-1, keepdims=True) if c.size else 0.0
    c[np.abs(c) < rel * scale] = 0.0
    return c


def evaluate(iset: MultiIndexSet, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate expansions ``coeffs[..., n]`` at ``points (q, d)``; returns (..., q)."""
    V = basis_matrix(iset, points)
    return np.asarray(coeffs) @ V.T
