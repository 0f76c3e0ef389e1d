"""Quadratic stochastic ODEs and their Galerkin / t-model right-hand sides.

A system is written over the extended field vector ``Z = params (+) states``::

    dy_m/dt = c_m + sum_a L[m, a] Z_a + sum_ab Q[m, a, b] Z_a Z_b

Every field is a gPC coefficient vector on an element-local basis, so the
Galerkin projection of each product goes through the triple-product tensor.
All functions accept arbitrary leading batch axes (one entry per element).
Coefficients are real; conjugation in the energy rates is the identity.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .basis import MultiIndexSet, TripleProductTensor


@dataclass(frozen=True)
class QuadraticSystem:
    const: np.ndarray  # (ns,)
    linear: np.ndarray  # (ns, nz)
    quadratic: np.ndarray  # (ns, nz, nz), symmetric in the last two axes
    params: np.ndarray  # (np, n)
    initial: np.ndarray  # (ns, n)
    state_names: tuple[str, ...] = ()
    param_names: tuple[str, ...] = ()

    def __post_init__(self):
        ns = self.const.shape[0]
        nz = ns + self.params.shape[0]
        if self.linear.shape != (ns, nz):
            raise ValueError(f"linear part has shape {self.linear.shape}, expected {(ns, nz)}")
        if self.quadratic.shape != (ns, nz, nz):
            raise ValueError(f"quadratic part has shape {self.quadratic.shape}")
        if self.initial.shape[0] != ns or self.initial.shape[-1] != self.params.shape[-1]:
            raise ValueError("initial/param coefficient shapes are inconsistent")
        sym = 0.5 * (self.quadratic + self.quadratic.transpose(0, 2, 1))
        object.__setattr__(self, "quadratic", sym)
        for name in ("const", "linear", "quadratic", "params", "initial"):
            getattr(self, name).setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.const.shape[0]

    @property
    def n_params(self) -> int:
        return self.params.shape[0]

    @property
    def n_modes(self) -> int:
        return self.initial.shape[-1]

    @functools.cached_property
    def _pairs(self) -> list[tuple[int, int, np.ndarray]]:
        # (a, b, weight per state) for a <= b with a nonzero quadratic coefficient
        out = []
        nz = self.quadratic.shape[1]
        for a in range(nz):
            for b in range(a, nz):
                wt = self.quadratic[:, a, b] * (1.0 if a == b else 2.0)
                if np.any(wt != 0.0):
                    out.append((a, b, wt))
        return out

    def with_params(self, params: np.ndarray) -> "QuadraticSystem":
        return QuadraticSystem(self.const, self.linear, self.quadratic, np.asarray(params, float),
                               self.initial, self.state_names, self.param_names)


@dataclass
class GalerkinState:
    t: float
    coeffs: np.ndarray  # (ns, n)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficients in Galerkin state")


def _extended(sys: QuadraticSystem, y: np.ndarray, params) -> np.ndarray:
    p = sys.params if params is None else np.asarray(params, dtype=float)
    p = np.broadcast_to(p, y.shape[:-2] + p.shape[-2:])
    return np.concatenate([p, y], axis=-2)


def _check_shapes(sys: QuadraticSystem, y: np.ndarray, tensor: TripleProductTensor):
    if y.shape[-2:] != (sys.n_states, tensor.size):
        raise ValueError(
            f"state shape {y.shape[-2:]} does not match ({sys.n_states}, {tensor.size})"
        )


def galerkin_full_rhs(sys: QuadraticSystem, y, tensor: TripleProductTensor, params=None) -> np.ndarray:
    """Projected right-hand side over F u G for states ``y[..., ns, n]``."""
    y = np.asarray(y, dtype=float)
    _check_shapes(sys, y, tensor)
    Z = _extended(sys, y, params)
    ns = sys.n_states
    out = np.einsum("ma,...an->...mn", sys.linear, Z)
    out[..., 0] += sys.const
    for a, b, wt in sys._pairs:
        prod = tensor.bilinear(Z[..., a, :], Z[..., b, :])
        out += wt[:, None] * prod[..., None, :]
    assert out.shape[-2] == ns
    return out


def jacobian_apply(sys: QuadraticSystem, y, w, tensor: TripleProductTensor, params=None) -> np.ndarray:
    """Directional derivative of the projected RHS at ``y`` along state perturbation ``w``."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    Z = _extended(sys, y, params)
    W = np.concatenate([np.zeros_like(Z[..., : sys.n_params, :]), w], axis=-2)
    out = np.einsum("ma,...an->...mn", sys.linear, W)
    npar = sys.n_params
    for a, b, wt in sys._pairs:
        terms = []
        if b >= npar:
            terms.append(tensor.bilinear(Z[..., a, :], W[..., b, :]))
        if a >= npar:
            terms.append(tensor.bilinear(W[..., a, :], Z[..., b, :]))
        for prod in terms:
            out += wt[:, None] * prod[..., None, :]
    return out


def resolved_part(y: np.ndarray, basis: MultiIndexSet) -> np.ndarray:
    """Copy of ``y`` with every unresolved (G) coefficient set to zero."""
    out = np.array(y, dtype=float, copy=True)
    out[..., basis.unresolved] = 0.0
    return out


class ContractedMemoryTensor:
    """Precomputed ``D[i, s, t, k] = sum_{j in G} e_stj e_ijk`` for i, s, t, k in F.

    With F-supported fields the t-model memory term is the cubic form
    ``P B(Z_a, (I - P) B(Z_c, Z_d))``; folding that through ``D`` replaces the
    two sweeps over the full basis with one dense contraction on F.
    """

    def __init__(self, tensor: TripleProductTensor, basis: MultiIndexSet):
        if basis.order != tensor.order or basis.dim != tensor.dim:
            raise ValueError("basis and tensor disagree on order/dimension")
        self.basis = basis
        nF = basis.n_resolved
        E = tensor.dense
        EF = E[:nF, :nF, nF:]  # e_{s,t,j}, j in G
        EG = E[:nF, nF:, :nF]  # e_{i,j,k}
        D = np.einsum("stj,ijk->stik", EF, EG)
        self.nF = nF
        self.D = D
        self._op = D.reshape(nF * nF, nF * nF)
        self._op.setflags(write=False)

    def supports(self, sys: QuadraticSystem, params=None) -> bool:
        """True when every parameter field is F-supported (the contraction is then exact)."""
        p = sys.params if params is None else np.asarray(params)
        return p.shape[-2] == 0 or not np.any(p[..., self.nF:])

    def memory(self, sys: QuadraticSystem, y, params=None) -> np.ndarray:
        """``P J_R(y) (I - P) R(y)`` restricted to F, for F-supported ``y``."""
        nF = self.nF
        Z = _extended(sys, np.asarray(y, float), params)[..., :nF]
        npar = sys.n_params
        Qs = sys.quadratic[:, :, :]  # (ns, nz, nz)
        batch = Z.shape[:-2]
        # Gb[e, b, s, t] = sum_cd Q[b, c, d] Z_c[s] Z_d[t]
        Gb = np.einsum("bcd,...cs,...dt->...bst", Qs, Z, Z)
        H = (Gb.reshape(-1, nF * nF) @ self._op).reshape(batch + (sys.n_states, nF, nF))
        # J w = sum_ab 2 Q[m,a,b] B(Z_a, w_b); w lives only on states
        Qstate = 2.0 * sys.quadratic[:, :, npar:]
        return np.einsum("mab,...ai,...bik->...mk", Qstate, Z, H)


def t_model_terms(
    sys: QuadraticSystem,
    y,
    tensor: TripleProductTensor,
    basis: MultiIndexSet,
    memory: ContractedMemoryTensor | None = None,
    params=None,
    check: bool = True,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Markovian term ``P R(y)`` and memory kernel ``P J_R(y) (I - P) R(y)`` on F.

    The kernel is ``None`` when G is empty.
    """
    y = np.asarray(y, dtype=float)
    _check_shapes(sys, y, tensor)
    G = basis.unresolved
    if check and np.any(y[..., G]):
        raise ValueError("t-model state has nonzero unresolved (G) coefficients")
    nF = basis.n_resolved
    R = galerkin_full_rhs(sys, y, tensor, params)
    markov = R[..., :nF].copy()
    if nF == tensor.size:
        return markov, None
    if memory is not None and memory.supports(sys, params):
        return markov, memory.memory(sys, y, params)
    w = R
    w[..., :nF] = 0.0
    return markov, jacobian_apply(sys, y, w, tensor, params)[..., :nF]


def t_model_rhs(
    sys: QuadraticSystem,
    y,
    t: float,
    tensor: TripleProductTensor,
    basis: MultiIndexSet,
    memory: ContractedMemoryTensor | None = None,
    params=None,
    check: bool = True,
) -> np.ndarray:
    """t-model right-hand side on F for an F-supported state.

    ``dy/dt = P R(y) + t P J_R(y) (I - P) R(y)``; returns ``(..., ns, |F|)``.
    ``t`` may be an array broadcasting against the leading batch axes.
    """
    if np.ndim(t) == 0 and t == 0.0:
        y = np.asarray(y, dtype=float)
        _check_shapes(sys, y, tensor)
        if check and np.any(y[..., basis.unresolved]):
            raise ValueError("t-model state has nonzero unresolved (G) coefficients")
        return galerkin_full_rhs(sys, y, tensor, params)[..., : basis.n_resolved]
    markov, mem = t_model_terms(sys, y, tensor, basis, memory, params, check)
    if mem is None:
        return markov
    return markov + t * mem


def energy(y, index_range: slice | None = None) -> np.ndarray:
    """Sum of squared coefficients over ``index_range`` and all state variables."""
    y = np.asarray(y, dtype=float)
    if index_range is not None:
        y = y[..., index_range]
    return np.sum(y * y, axis=(-2, -1))


def energy_rate(
    sys: QuadraticSystem,
    y,
    t: float,
    tensor: TripleProductTensor,
    basis: MultiIndexSet,
    model: str = "reduced",
    memory: ContractedMemoryTensor | None = None,
    params=None,
    over: str = "resolved",
) -> np.ndarray:
    """``d/dt`` of the energy, evaluated from the right-hand side (no differencing).

    ``model="reduced"`` uses the t-model on the F-supported ``y`` (the rate
    ``dE'/dt``); ``model="memory"`` keeps only the memory-term share of that
    rate, i.e. the transfer between F and G; ``model="full"`` uses the Galerkin
    system, and ``over="all"`` sums over F u G instead of F.
    """
    y = np.asarray(y, dtype=float)
    nF = basis.n_resolved
    if model in ("reduced", "memory"):
        if model == "reduced":
            R = t_model_rhs(sys, y, t, tensor, basis, memory, params)
        else:
            _, mem = t_model_terms(sys, y, tensor, basis, memory, params)
            if mem is None:
                return np.zeros(y.shape[:-2])
            R = t * mem
        return 2.0 * np.sum(R * y[..., :nF], axis=(-2, -1))
    if model != "full":
        raise ValueError(f"unknown model {model!r}")
    R = galerkin_full_rhs(sys, y, tensor, params)
    sl = slice(0, nF) if over == "resolved" else slice(None)
    return 2.0 * np.sum(R[..., sl] * y[..., sl], axis=(-2, -1))


def directional_indicators(
    sys: QuadraticSystem,
    y,
    t: float,
    tensor: TripleProductTensor,
    basis: MultiIndexSet,
    memory: ContractedMemoryTensor | None = None,
    params=None,
    reduced_rhs: np.ndarray | None = None,
) -> np.ndarray:
    """``s_i = |d |y_{p_r e_i}|^2 / dt|`` for every random dimension; shape (..., d).

    ``reduced_rhs`` may carry an already evaluated t-model RHS for ``y``.
    """
    y = np.asarray(y, dtype=float)
    if basis.resolved_order < 1:
        return np.zeros(y.shape[:-2] + (basis.dim,))
    R = reduced_rhs
    if R is None:
        R = t_model_rhs(sys, y, t, tensor, basis, memory, params)
    ks = [basis.axis_index(i, basis.resolved_order) for i in range(basis.dim)]
    return np.abs(2.0 * np.sum(R[..., ks] * y[..., ks], axis=-2))


def directional_indicator(sys, y, t, dim, tensor, basis, memory=None, params=None) -> float:
    return float(directional_indicators(sys, y, t, tensor, basis, memory, params)[..., dim])
