"""Benchmark problems: the random linear decay ODE and Kraichnan-Orszag."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import MultiIndexSet, gauss_legendre, project
from .system import QuadraticSystem

KINDS = ("linear-decay", "kraichnan-orszag")

# name -> (kind, dim, variant)
NAMED = {
    "ode": ("linear-decay", 1, None),
    "ko1d": ("kraichnan-orszag", 1, "1d"),
    "ko2d": ("kraichnan-orszag", 2, "2d"),
    "ko3d": ("kraichnan-orszag", 3, "3d"),
}


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    dim: int
    variant: str | None = None
    u0: float = 1.0

    def __post_init__(self):
        ok = (self.kind == "linear-decay" and self.dim == 1) or (
            self.kind == "kraichnan-orszag"
            and (self.dim, self.variant) in {(1, "1d"), (2, "2d"), (3, "3d")}
        )
        if not ok:
            raise ValueError(f"unsupported problem: {self.kind} d={self.dim} variant={self.variant}")

    @classmethod
    def named(cls, name: str, u0: float = 1.0) -> "ProblemSpec":
        try:
            kind, dim, variant = NAMED[name]
        except KeyError:
            raise ValueError(f"unknown problem {name!r}; expected one of {sorted(NAMED)}") from None
        return cls(kind, dim, variant, u0)

    @property
    def n_states(self) -> int:
        return 1 if self.kind == "linear-decay" else 3

    @property
    def state_names(self) -> tuple[str, ...]:
        return ("u",) if self.kind == "linear-decay" else ("y1", "y2", "y3")

    def initial_values(self, xi: np.ndarray) -> np.ndarray:
        """Initial state at global random points ``xi (q, d)``; returns (ns, q)."""
        xi = np.atleast_2d(xi)
        q = xi.shape[0]
        one, zero = np.ones(q), np.zeros(q)
        if self.kind == "linear-decay":
            return np.full((1, q), float(self.u0))
        if self.variant == "1d":
            return np.stack([one, 0.1 * xi[:, 0], zero])
        if self.variant == "2d":
            return np.stack([one, 0.1 * xi[:, 0], xi[:, 1]])
        return np.stack([xi[:, 0], xi[:, 1], xi[:, 2]])

    def param_values(self, xi: np.ndarray) -> np.ndarray:
        xi = np.atleast_2d(xi)
        if self.kind == "linear-decay":
            return xi[:, :1].T.copy()  # kappa = xi
        return np.zeros((0, xi.shape[0]))

    def rhs(self, y: np.ndarray, params: np.ndarray) -> np.ndarray:
        """Pointwise right-hand side; ``y (ns, ...)``, ``params (np, ...)``."""
        if self.kind == "linear-decay":
            return -params[0:1] * y
        y1, y2, y3 = y
        return np.stack([y1 * y3, -y2 * y3, -y1 * y1 + y2 * y2])


def _structure(spec: ProblemSpec):
    if spec.kind == "linear-decay":
        Q = np.zeros((1, 2, 2))
        Q[0, 0, 1] = -1.0  # -kappa * u; Z = (kappa, u)
        return np.zeros(1), np.zeros((1, 2)), Q, ("kappa",)
    Q = np.zeros((3, 3, 3))
    Q[0, 0, 2] = 1.0
    Q[1, 1, 2] = -1.0
    # dy3/dt = -y1^2 + y2^2 conserves y1^2 + y2^2 + y3^2
    Q[2, 0, 0] = -1.0
    Q[2, 1, 1] = 1.0
    return np.zeros(3), np.zeros((3, 3)), Q, ()


def element_map(bounds: np.ndarray):
    """Affine map from local [-1, 1]^d to the element ``bounds (d, 2)``."""
    bounds = np.asarray(bounds, dtype=float)
    mid = 0.5 * (bounds[:, 0] + bounds[:, 1])
    half = 0.5 * (bounds[:, 1] - bounds[:, 0])
    return lambda x: mid + half * x


def build(spec: ProblemSpec, basis: MultiIndexSet, bounds=None) -> QuadraticSystem:
    """Quadratic system with parameters and ICs projected on the element-local basis."""
    if basis.dim != spec.dim:
        raise ValueError(f"basis dimension {basis.dim} != problem dimension {spec.dim}")
    if bounds is None:
        bounds = np.array([[-1.0, 1.0]] * spec.dim)
    to_global = element_map(bounds)
    rule = gauss_legendre(spec.dim, basis.order + 2)
    y0 = project(basis, lambda x: spec.initial_values(to_global(x)), rule)
    par = project(basis, lambda x: spec.param_values(to_global(x)), rule)
    c, L, Q, pnames = _structure(spec)
    return QuadraticSystem(c, L, Q, np.asarray(par).reshape(len(pnames), basis.size), y0,
                           spec.state_names, pnames)


def exact_linear_stats(u0: float, t: float) -> tuple[float, float]:
    """Closed-form mean and variance of ``u0 exp(-kappa t)``, kappa ~ U(-1, 1)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0.0:
        return float(u0), 0.0
    if t < 1e-3:
        # sinh(t)/t and the variance formula as Taylor series in t
        t2 = t * t
        mean = 1.0 + t2 / 6 + t2**2 / 120 + t2**3 / 5040 + t2**4 / 362880 + t2**5 / 39916800
        # var = sinh(2t)/(2t) - (sinh(t)/t)^2 = sum_k a_k t^(2k)
        var = (t2 / 3 + 4 * t2**2 / 45 + t2**3 / 105 + 8 * t2**4 / 14175
               + 2 * t2**5 / 93555 + 8 * t2**6 / 14189175)
        return u0 * mean, u0 * u0 * var
    # same closed forms written with sinh, which loses far less to cancellation
    s1 = math.sinh(t) / t
    mean = u0 * s1
    var = u0 * u0 * (math.sinh(2 * t) / (2 * t) - s1 * s1)
    return mean, var
