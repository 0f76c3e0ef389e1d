"""Executable checks of the energy-rate identity and structural tensor facts."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .basis import basis_matrix, gauss_legendre, multi_index_set, triple_product_tensor
from .problems import ProblemSpec, build
from .system import ContractedMemoryTensor, energy_rate


@dataclass(frozen=True)
class CheckReport:
    name: str
    max_abs: float
    max_rel: float
    tolerance: float
    trials: int
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: max_abs={self.max_abs:.3e} max_rel={self.max_rel:.3e} "
                f"tol={self.tolerance:.0e} trials={self.trials}")

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _ko_system(dim: int, p_r: int, p_f: int):
    spec = ProblemSpec.named({1: "ko1d", 2: "ko2d", 3: "ko3d"}[dim])
    basis = multi_index_set(dim, p_f, p_r)
    return build(spec, basis), basis, triple_product_tensor(dim, p_f)


def gamma_by_quadrature(y: np.ndarray, basis) -> np.ndarray:
    """G-components of the K-O right-hand side for an F-supported state ``y (3, n)``.

    Independent of the triple-product tensor: the three fields are evaluated on
    a tensor Gauss rule, multiplied pointwise and projected on the G modes.
    """
    p_r, p_f = basis.resolved_order, basis.order
    rule = gauss_legendre(basis.dim, math.ceil((2 * p_r + p_f + 1) / 2))
    V = basis_matrix(basis, rule.points)  # (q, n)
    y1, y2, y3 = y[:, : basis.n_resolved] @ V[:, : basis.n_resolved].T
    prods = np.stack([y1 * y3, -y2 * y3, -y1 * y1 + y2 * y2])
    VG = V[:, basis.unresolved]
    return (prods * rule.weights) @ VG


def _rel(a, b) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def check_rate_identity(p_r: int, p_f: int, trials: int = 100, seed: int = 0, dim: int = 1,
                        tol: float = 1e-11) -> CheckReport:
    """Reduced energy rate against ``-2 t |Gamma|^2`` on random F-supported states."""
    if not p_r < p_f:
        raise ValueError("need p_r < p_f")
    sys, basis, tensor = _ko_system(dim, p_r, p_f)
    memory = ContractedMemoryTensor(tensor, basis)
    rng = np.random.default_rng(seed)
    nF = basis.n_resolved
    worst_abs = worst_rel = 0.0
    for _ in range(trials):
        y = np.zeros((3, basis.size))
        y[:, :nF] = rng.standard_normal((3, nF))
        t = float(rng.uniform(0.0, 10.0))
        lhs = float(energy_rate(sys, y, t, tensor, basis, "reduced", memory))
        gam = gamma_by_quadrature(y, basis)
        rhs = -2.0 * t * float(np.sum(gam * gam))
        worst_abs = max(worst_abs, abs(lhs - rhs))
        worst_rel = max(worst_rel, _rel(lhs, rhs))
    return CheckReport(f"rate_identity(p_r={p_r},p_f={p_f},d={dim})", worst_abs, worst_rel, tol,
                       trials, worst_rel <= tol)


def check_conservation(p_f: int, trials: int = 100, seed: int = 0, dim: int = 1,
                       tol: float = 1e-11) -> CheckReport:
    """Full Galerkin K-O energy rate over F u G vanishes on random states.

    The discrepancy is ``|rate| / max(1, |y|^3)``, since the rate is cubic in ``y``.
    """
    sys, basis, tensor = _ko_system(dim, p_f, p_f)
    rng = np.random.default_rng(seed)
    worst_abs = worst_rel = 0.0
    for _ in range(trials):
        y = rng.standard_normal((3, basis.size))
        rate = float(energy_rate(sys, y, 0.0, tensor, basis, "full", over="all"))
        norm = float(np.sqrt(np.sum(y * y)))
        worst_abs = max(worst_abs, abs(rate))
        worst_rel = max(worst_rel, abs(rate) / max(1.0, norm**3))
    return CheckReport(f"conservation(p_f={p_f},d={dim})", worst_abs, worst_rel, tol, trials,
                       worst_rel <= tol)


def legendre_triple_exact(a: int, b: int, c: int) -> Fraction:
    """``(1/2) int P_a P_b P_c dx`` for classical Legendre polynomials, as an exact fraction."""
    s2 = a + b + c
    if s2 % 2 or a > b + c or b > a + c or c > a + b:
        return Fraction(0)
    s = s2 // 2

    def A(n):
        return Fraction(math.comb(2 * n, n), 2**n)

    return Fraction(1, s2 + 1) * A(s - a) * A(s - b) * A(s - c) / A(s)


def check_tensor(p_f: int, d: int = 1, tol: float = 1e-12) -> CheckReport:
    """Symmetry, ``e_ij0 = delta_ij``, parity zeros and analytic agreement of ``e_ijk``."""
    basis = multi_index_set(d, p_f, p_f)
    tensor = triple_product_tensor(d, p_f)
    E = tensor.dense
    errs = [
        np.max(np.abs(E - E.transpose(perm)))
        for perm in ((0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))
    ]
    errs.append(np.max(np.abs(E[:, :, 0] - np.eye(basis.size))))
    degs = basis.degree_array
    par = (degs[:, None, None, :] + degs[None, :, None, :] + degs[None, None, :, :]) % 2
    odd = np.any(par == 1, axis=-1)
    errs.append(np.max(np.abs(E[odd])) if odd.any() else 0.0)
    # analytic per-dimension product for every entry
    m = p_f + 1
    e1 = np.zeros((m, m, m))
    for a in range(m):
        for b in range(m):
            for c in range(m):
                e1[a, b, c] = float(legendre_triple_exact(a, b, c)) * math.sqrt(
                    (2 * a + 1) * (2 * b + 1) * (2 * c + 1))
    exact = np.ones_like(E)
    for k in range(d):
        dk = degs[:, k]
        exact *= e1[np.ix_(dk, dk, dk)]
    errs.append(np.max(np.abs(E - exact)))
    worst = float(max(errs))
    return CheckReport(f"tensor(p_f={p_f},d={d})", worst, worst, tol, 1, worst <= tol)


def default_battery(seed: int = 0) -> list[CheckReport]:
    out = [check_rate_identity(p_r, p_f, 100, seed) for p_r, p_f in ((1, 2), (3, 7), (5, 11))]
    out.append(check_rate_identity(2, 4, 20, seed, dim=2))
    out.append(check_conservation(7, 100, seed))
    out.append(check_conservation(4, 20, seed, dim=3))
    out.extend(check_tensor(p, d) for p, d in ((7, 1), (11, 1), (4, 2), (4, 3)))
    return out
