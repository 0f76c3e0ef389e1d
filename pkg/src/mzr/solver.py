"""Time integration of all elements with interleaved refinement."""
from __future__ import annotations

import io
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import multi_index_set, triple_product_tensor
from .mesh import Mesh, SplitTransfer, refine_step
from .problems import ProblemSpec, build
from .system import (
    ContractedMemoryTensor,
    directional_indicators,
    galerkin_full_rhs,
    t_model_rhs,
    t_model_terms,
)

log = logging.getLogger(__name__)

INDICATOR_MODES = ("full-state", "dual-evolution")
MEMORY_TIME_MODES = ("global", "element")
INDICATOR_RATES = ("memory", "total")


class IntegrationError(RuntimeError):
    pass


class RefinementRunaway(RuntimeError):
    pass


@dataclass(frozen=True)
class RefinementConfig:
    p_r: int = 3
    p_f: int = 7
    tol1: float = 1e-2
    tol2: float = 0.1
    dt: float = 1e-2
    t_end: float = 10.0
    indicator_mode: str = "full-state"
    refine_stride: int = 1
    memory_time: str = "global"
    sample_every: float = 0.1
    max_elements: int = 10000
    indicator_rate: str = "memory"

    def __post_init__(self):
        if not self.tol1 > 0:
            raise ValueError(f"tol1 must be positive, got {self.tol1}")
        if not 0 < self.tol2 <= 1:
            raise ValueError(f"tol2 must be in (0, 1], got {self.tol2}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if self.p_r < 0 or self.p_r > self.p_f:
            raise ValueError(f"need 0 <= p_r <= p_f, got p_r={self.p_r}, p_f={self.p_f}")
        if self.refines and not 0 < self.p_r < self.p_f:
            raise ValueError("refinement needs 0 < p_r < p_f")
        if self.indicator_mode not in INDICATOR_MODES:
            raise ValueError(f"indicator_mode must be one of {INDICATOR_MODES}")
        if self.memory_time not in MEMORY_TIME_MODES:
            raise ValueError(f"memory_time must be one of {MEMORY_TIME_MODES}")
        if self.indicator_rate not in INDICATOR_RATES:
            raise ValueError(f"indicator_rate must be one of {INDICATOR_RATES}")
        if self.refine_stride < 1:
            raise ValueError("refine_stride must be >= 1")
        if not self.sample_every > 0:
            raise ValueError("sample_every must be positive")
        if self.max_elements < 1:
            raise ValueError("max_elements must be >= 1")

    @property
    def refines(self) -> bool:
        return math.isfinite(self.tol1)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    mean: np.ndarray  # (T, ns)
    var: np.ndarray  # (T, ns)
    n_elements: np.ndarray  # (T,)
    mesh: Mesh
    state_names: tuple[str, ...] = ()
    reports: list = field(default_factory=list)
    config: RefinementConfig | None = None

    def to_csv(self) -> str:
        ns = self.mean.shape[1]
        cols = ["t"] + [f"mean_{m + 1}" for m in range(ns)] + [f"var_{m + 1}" for m in range(ns)]
        buf = io.StringIO()
        buf.write(",".join(cols + ["n_elements"]) + "\n")
        for i, t in enumerate(self.times):
            vals = [t, *self.mean[i], *self.var[i]]
            buf.write(",".join(repr(float(v)) for v in vals) + f",{int(self.n_elements[i])}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        lines = [ln for ln in text.strip().splitlines() if ln]
        head = lines[0].split(",")
        ns = sum(1 for h in head if h.startswith("mean_"))
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        return cls(data[:, 0], data[:, 1:1 + ns], data[:, 1 + ns:1 + 2 * ns],
                   data[:, -1].astype(int), mesh=None)

    def max_relative_error(self, ref, field_name="var", t_min=0.0) -> np.ndarray:
        """Max over samples with ``t > t_min`` of |x - ref| / |ref| per variable."""
        x = getattr(self, field_name)
        mask = self.times > t_min
        ref = np.asarray(ref, dtype=float).reshape(len(self.times), -1)[mask]
        return np.max(np.abs(x[mask] - ref) / np.abs(ref), axis=0)


def rk4_step(rhs, y, t, dt):
    """Classical four-stage Runge-Kutta update of ``dy/dt = rhs(t, y)``."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_finite(y: np.ndarray, ids, t: float):
    if np.all(np.isfinite(y)):
        return
    bad = np.flatnonzero(~np.all(np.isfinite(y.reshape(y.shape[0], -1)), axis=1))
    raise IntegrationError(f"non-finite state in element {int(ids[bad[0]])} at t={t:.6g}")


class AdaptiveSolver:
    """Holds the shared basis objects for one (problem, config) pair."""

    def __init__(self, problem: ProblemSpec, config: RefinementConfig):
        self.problem = problem
        self.config = config
        d = problem.dim
        self.basis = multi_index_set(d, config.p_f, config.p_r)
        self.tensor = triple_product_tensor(d, config.p_f)
        self.memory = ContractedMemoryTensor(self.tensor, self.basis)
        self.transfer = SplitTransfer(self.basis)
        self.system = build(problem, self.basis)
        self.nF = self.basis.n_resolved

    def initial_mesh(self) -> Mesh:
        red = None
        if self.config.indicator_mode == "dual-evolution":
            red = self.system.initial[:, : self.nF]
        return Mesh.single(self.problem.dim, self.system.initial, self.system.params, red)

    def memory_time(self, mesh: Mesh, t: float):
        if self.config.memory_time == "global":
            return t
        return (t - mesh.birth)[:, None, None]

    def _pad(self, reduced: np.ndarray) -> np.ndarray:
        out = np.zeros(reduced.shape[:-1] + (self.basis.size,))
        out[..., : self.nF] = reduced
        return out

    def reduced_rhs(self, mesh: Mesh, yF: np.ndarray, tm) -> np.ndarray:
        return t_model_rhs(self.system, yF, tm, self.tensor, self.basis, self.memory,
                           params=mesh.params, check=False)

    def indicators(self, mesh: Mesh, t: float):
        """Reduced energy rate and directional indicators for every element.

        With ``indicator_rate="memory"`` the rate keeps only the memory-term
        share of ``dE'/dt``, the energy exchanged between F and G. For an
        energy-conserving system the Markovian share is zero and both choices
        agree; for the linear decay problem the Markovian share is the
        physical growth of the solution and says nothing about resolution.
        """
        if mesh.reduced is not None:
            yF = self._pad(mesh.reduced)
        else:
            yF = mesh.coeffs.copy()
            yF[..., self.nF:] = 0.0
        tm = self.memory_time(mesh, t)
        markov, mem = t_model_terms(self.system, yF, self.tensor, self.basis, self.memory,
                                    params=mesh.params, check=False)
        R = markov if mem is None else markov + tm * mem
        if self.config.indicator_rate == "memory":
            driver = np.zeros_like(markov) if mem is None else tm * mem
        else:
            driver = R
        rate = 2.0 * np.sum(driver * yF[..., : self.nF], axis=(-2, -1))
        s = directional_indicators(self.system, yF, tm, self.tensor, self.basis, reduced_rhs=R)
        return rate, s

    def step(self, mesh: Mesh, t: float, dt: float):
        params = mesh.params

        def full(tt, y):
            return galerkin_full_rhs(self.system, y, self.tensor, params=params)

        new = rk4_step(full, mesh.coeffs, t, dt)
        _check_finite(new, mesh.ids, t + dt)
        if mesh.reduced is not None:
            birth = mesh.birth[:, None, None]
            local = self.config.memory_time == "element"

            def red(tt, yr):
                tm = tt - birth if local else tt
                return self.reduced_rhs(mesh, self._pad(yr), tm)

            newr = rk4_step(red, mesh.reduced, t, dt)
            _check_finite(newr, mesh.ids, t + dt)
            mesh.reduced = newr
        mesh.coeffs = new

    def run(self) -> Trajectory:
        cfg = self.config
        mesh = self.initial_mesh()
        n_steps = cfg.n_steps
        sample_stride = max(1, int(round(cfg.sample_every / cfg.dt)))
        times, means, vars_, counts, reports = [], [], [], [], []

        def record(t):
            mu, var = mesh.mean_var()
            times.append(t)
            means.append(mu)
            vars_.append(var)
            counts.append(len(mesh))

        record(0.0)
        for step in range(1, n_steps + 1):
            t_prev = (step - 1) * cfg.dt
            t = step * cfg.dt
            self.step(mesh, t_prev, cfg.dt)
            mesh.time = t
            if cfg.refines and step % cfg.refine_stride == 0:
                rep = refine_step(mesh, t, self.indicators, cfg.tol1, cfg.tol2, self.transfer)
                if rep.splits or rep.degenerate:
                    reports.append(rep)
                if len(mesh) > cfg.max_elements:
                    raise RefinementRunaway(
                        f"refinement runaway: {len(mesh)} elements at t={t:.6g} "
                        f"(ceiling {cfg.max_elements})"
                    )
            if step % sample_stride == 0 or step == n_steps:
                record(t)
        log.info("finished %s: %d elements", self.problem, len(mesh))
        return Trajectory(np.array(times), np.array(means), np.array(vars_), np.array(counts),
                          mesh, self.system.state_names, reports, cfg)


def run_adaptive(problem: ProblemSpec, config: RefinementConfig) -> Trajectory:
    return AdaptiveSolver(problem, config).run()


def run_global_gpc(problem: ProblemSpec, order: int, t_end: float, dt: float,
                   sample_every: float = 0.1) -> Trajectory:
    """Single-element Galerkin run of total order ``order`` with no refinement."""
    cfg = RefinementConfig(p_r=order, p_f=order, tol1=math.inf, dt=dt, t_end=t_end,
                           sample_every=sample_every)
    return AdaptiveSolver(problem, cfg).run()


def config_dict(cfg: RefinementConfig) -> dict:
    return asdict(cfg)
