"""Multi-element decomposition of [-1, 1]^d.

Element data is kept as stacked arrays so the solver can advance every
element in one batched right-hand-side call. ``Element`` objects are
read-only views built on demand.
"""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .basis import MultiIndexSet, gauss_legendre, legendre_1d, snap


@dataclass(frozen=True)
class Element:
    id: int
    bounds: np.ndarray  # (d, 2), half-open [a, b)
    coeffs: np.ndarray  # (ns, n)
    params: np.ndarray  # (np, n)
    birth_time: float = 0.0
    reduced: np.ndarray | None = None  # (ns, |F|) in dual-evolution runs

    @property
    def probability(self) -> float:
        return float(np.prod((self.bounds[:, 1] - self.bounds[:, 0]) / 2.0))


class SplitTransfer:
    """Exact re-expansion of a degree-p polynomial onto halved children.

    For a child that halves the parent along ``dims``, the parent-local
    variable is ``x = x'/2 -+ 1/2`` on split axes and ``x = x'`` elsewhere. The
    transfer matrix is integrated with p+1 Gauss points per axis, which is
    exact for the degree-2p integrand.
    """

    def __init__(self, basis: MultiIndexSet):
        self.basis = basis
        p = basis.order
        rule = gauss_legendre(1, p + 1)
        x, w = rule.nodes_1d, rule.weights_1d
        Vc = legendre_1d(p, x)  # child test functions
        self._one_d = {}
        for side, shift in ((0, -0.5), (1, 0.5)):
            Vp = legendre_1d(p, 0.5 * x + shift)
            self._one_d[side] = snap((Vc * w) @ Vp.T)  # [k, j]
        self._one_d[None] = np.eye(p + 1)

    @functools.lru_cache(maxsize=None)
    def matrix(self, sides: tuple) -> np.ndarray:
        """``sides[i]`` is 0 (lower half), 1 (upper half) or None (not split)."""
        degs = self.basis.degree_array
        n = self.basis.size
        T = np.ones((n, n))
        for axis, side in enumerate(sides):
            T *= self._one_d[side][np.ix_(degs[:, axis], degs[:, axis])]
        T.setflags(write=False)
        return T

    def children(self, dims) -> list[tuple[tuple, np.ndarray]]:
        dims = sorted(set(dims))
        out = []
        for combo in itertools.product((0, 1), repeat=len(dims)):
            sides = [None] * self.basis.dim
            for axis, side in zip(dims, combo):
                sides[axis] = side
            sides = tuple(sides)
            out.append((sides, self.matrix(sides)))
        return out


def _child_bounds(bounds: np.ndarray, sides: tuple) -> np.ndarray:
    out = np.array(bounds, dtype=float, copy=True)
    for axis, side in enumerate(sides):
        if side is None:
            continue
        a, b = bounds[axis]
        mid = 0.5 * (a + b)
        out[axis] = (a, mid) if side == 0 else (mid, b)
    return out


def split_element(elem: Element, dims, transfer: SplitTransfer, next_id: int = 0,
                  t: float | None = None) -> list[Element]:
    """Halve ``elem`` along every axis in ``dims``; returns 2**len(dims) children."""
    dims = sorted(set(dims))
    if not dims:
        raise ValueError("split needs at least one dimension")
    nF = transfer.basis.n_resolved
    kids = []
    for offset, (sides, T) in enumerate(transfer.children(dims)):
        red = None
        if elem.reduced is not None:
            red = elem.reduced @ T[:nF, :nF].T
        kids.append(Element(
            id=next_id + offset,
            bounds=_child_bounds(elem.bounds, sides),
            coeffs=elem.coeffs @ T.T,
            params=elem.params @ T.T,
            birth_time=elem.birth_time if t is None else t,
            reduced=red,
        ))
    return kids


@dataclass
class Mesh:
    """Disjoint cover of [-1, 1]^d by rectangular elements (structure of arrays)."""

    dim: int
    bounds: np.ndarray  # (N, d, 2)
    coeffs: np.ndarray  # (N, ns, n)
    params: np.ndarray  # (N, np, n)
    ids: np.ndarray  # (N,)
    birth: np.ndarray  # (N,)
    reduced: np.ndarray | None = None  # (N, ns, |F|)
    time: float = 0.0
    log: list = field(default_factory=list)
    next_id: int = 0

    @classmethod
    def single(cls, dim: int, coeffs: np.ndarray, params: np.ndarray, reduced=None) -> "Mesh":
        bounds = np.array([[[-1.0, 1.0]] * dim])
        red = None if reduced is None else np.asarray(reduced, float)[None]
        return cls(dim, bounds, np.asarray(coeffs, float)[None], np.asarray(params, float)[None],
                   np.array([0]), np.array([0.0]), red, 0.0, [], 1)

    def __len__(self) -> int:
        return self.bounds.shape[0]

    @property
    def probabilities(self) -> np.ndarray:
        return np.prod((self.bounds[:, :, 1] - self.bounds[:, :, 0]) / 2.0, axis=1)

    def element(self, k: int) -> Element:
        red = None if self.reduced is None else self.reduced[k]
        return Element(int(self.ids[k]), self.bounds[k], self.coeffs[k], self.params[k],
                       float(self.birth[k]), red)

    @property
    def elements(self) -> list[Element]:
        return [self.element(k) for k in range(len(self))]

    def replace(self, splits: dict[int, list[int]], transfer: SplitTransfer, t: float) -> list[dict]:
        """Split element positions ``k -> dims``; children take the parent's slot in order."""
        if not splits:
            return []
        new = []
        events = []
        for k in range(len(self)):
            elem = self.element(k)
            if k not in splits:
                new.append(elem)
                continue
            kids = split_element(elem, splits[k], transfer, self.next_id, t)
            self.next_id += len(kids)
            new.extend(kids)
            events.append({"time": t, "parent": elem.id, "dims": sorted(splits[k]),
                           "children": [c.id for c in kids]})
        self._load(new)
        self.log.extend(events)
        return events

    def _load(self, elems: list[Element]):
        self.bounds = np.stack([e.bounds for e in elems])
        self.coeffs = np.stack([e.coeffs for e in elems])
        self.params = np.stack([e.params for e in elems])
        self.ids = np.array([e.id for e in elems])
        self.birth = np.array([e.birth_time for e in elems])
        if self.reduced is not None:
            self.reduced = np.stack([e.reduced for e in elems])

    # -- moments --------------------------------------------------------------

    def mean(self) -> np.ndarray:
        return np.einsum("k,km->m", self.probabilities, self.coeffs[:, :, 0])

    def mean_var(self) -> tuple[np.ndarray, np.ndarray]:
        """Global mean and variance per state variable.

        The variance is assembled as sum_k Pr_k (local variance + (local mean -
        mean)^2), which equals moment2 - mean^2 without the cancellation.
        """
        pr = self.probabilities
        mu = self.mean()
        local_var = np.sum(self.coeffs[:, :, 1:] ** 2, axis=2)
        dev = self.coeffs[:, :, 0] - mu
        return mu, np.einsum("k,km->m", pr, local_var + dev * dev)

    def energy(self) -> float:
        """Probability-weighted energy over F u G summed over elements."""
        return float(np.sum(self.probabilities * np.sum(self.coeffs**2, axis=(1, 2))))

    # -- serialisation --------------------------------------------------------

    def to_dict(self, state_names=None) -> dict:
        ns = self.coeffs.shape[1]
        names = list(state_names) if state_names else [f"y{m + 1}" for m in range(ns)]
        elems = []
        for k in range(len(self)):
            rec = {
                "id": int(self.ids[k]),
                "bounds": self.bounds[k].tolist(),
                "probability": float(self.probabilities[k]),
                "birth_time": float(self.birth[k]),
                "coefficients": {nm: self.coeffs[k, m].tolist() for m, nm in enumerate(names)},
                "params": self.params[k].tolist(),
            }
            if self.reduced is not None:
                rec["reduced"] = self.reduced[k].tolist()
            elems.append(rec)
        return {"time": self.time, "dimension": self.dim, "next_id": self.next_id,
                "variables": names, "elements": elems, "log": list(self.log)}

    @classmethod
    def from_dict(cls, doc: dict) -> "Mesh":
        names = doc["variables"]
        elems = doc["elements"]
        n = len(elems[0]["coefficients"][names[0]])
        has_red = "reduced" in elems[0]

        def params_of(e):
            return np.array(e["params"], dtype=float).reshape(-1, n)

        return cls(
            dim=int(doc["dimension"]),
            bounds=np.array([e["bounds"] for e in elems], dtype=float),
            coeffs=np.array([[e["coefficients"][nm] for nm in names] for e in elems], dtype=float),
            params=np.stack([params_of(e) for e in elems]),
            ids=np.array([e["id"] for e in elems], dtype=int),
            birth=np.array([e["birth_time"] for e in elems], dtype=float),
            reduced=np.array([e["reduced"] for e in elems], dtype=float) if has_red else None,
            time=float(doc["time"]),
            log=list(doc["log"]),
            next_id=int(doc["next_id"]),
        )

    def dumps(self, state_names=None) -> str:
        return json.dumps(self.to_dict(state_names), indent=1)

    @classmethod
    def loads(cls, text: str) -> "Mesh":
        return cls.from_dict(json.loads(text))


def global_moment(mesh: Mesh, m: int, order: int) -> float:
    """First or second raw moment of state variable ``m`` over the whole mesh."""
    pr = mesh.probabilities
    if order == 1:
        return float(np.sum(pr * mesh.coeffs[:, m, 0]))
    if order == 2:
        return float(np.sum(pr * np.sum(mesh.coeffs[:, m, :] ** 2, axis=1)))
    raise ValueError(f"moment order must be 1 or 2, got {order}")


@dataclass
class RefineReport:
    time: float
    splits: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)  # ids where TOL1 fired with all s_i = 0


def refine_step(mesh: Mesh, t: float, indicator, tol1: float, tol2: float,
                transfer: SplitTransfer) -> RefineReport:
    """One pass of the refinement rule over every element.

    ``indicator(mesh, t)`` returns ``(rate (N,), s (N, d))`` with ``rate`` the
    reduced-model energy rate ``dE'/dt`` and ``s`` the directional indicators.
    An element splits when ``|rate| * Pr >= tol1``, along every axis with
    ``s_i >= tol2 * max_j s_j``.
    """
    report = RefineReport(t)
    rate, s = indicator(mesh, t)
    weighted = np.abs(rate) * mesh.probabilities
    splits = {}
    for k in np.flatnonzero(weighted >= tol1):
        smax = float(np.max(s[k]))
        if not smax > 0.0:
            report.degenerate.append(int(mesh.ids[k]))
            continue
        splits[int(k)] = [int(i) for i in np.flatnonzero(s[k] >= tol2 * smax)]
    report.splits = mesh.replace(splits, transfer, t)
    return report
