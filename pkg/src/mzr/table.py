"""Error tables: N and max relative errors of a (p_r, p_f, TOL1) sweep."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .problems import exact_linear_stats
from .solver import Trajectory, run_adaptive, run_global_gpc


@dataclass
class TableRow:
    label: str
    p_r: int
    p_f: int
    tol1: float
    n_elements: int
    err_mean: np.ndarray
    err_var: np.ndarray


def relative_errors(traj: Trajectory, ref_mean: np.ndarray, ref_var: np.ndarray):
    """Max over sample times t > 0 of the relative mean and variance errors."""
    return (traj.max_relative_error(ref_mean, "mean"), traj.max_relative_error(ref_var, "var"))


def reference(cfg):
    """Reference (mean, var) on the sample grid and a label describing it."""
    spec = cfg.problem_spec()
    if spec.kind == "linear-decay":
        stride = max(1, int(round(cfg.sample_every / cfg.dt)))
        n = int(round(cfg.t_end / cfg.dt))
        steps = list(range(0, n + 1, stride))
        if steps[-1] != n:
            steps.append(n)
        stats = np.array([exact_linear_stats(spec.u0, s * cfg.dt) for s in steps])
        return stats[:, :1], stats[:, 1:], "closed form"
    if cfg.ref_p_r is None:
        raise ValueError(f"problem {cfg.problem!r} needs ref_p_r, ref_p_f and ref_tol1")
    ref = run_adaptive(spec, cfg.refinement(p_r=cfg.ref_p_r, p_f=cfg.ref_p_f, tol1=cfg.ref_tol1))
    label = f"ME-gPC p_r={cfg.ref_p_r} p_f={cfg.ref_p_f} TOL1={cfg.ref_tol1:g} (N={ref.n_elements[-1]})"
    return ref.mean, ref.var, label


def build_table(cfg) -> tuple[list[TableRow], str]:
    spec = cfg.problem_spec()
    ref_mean, ref_var, label = reference(cfg)
    rows = []
    for p in cfg.table_gpc:
        tr = run_global_gpc(spec, p, cfg.t_end, cfg.dt, cfg.sample_every)
        em, ev = relative_errors(tr, ref_mean, ref_var)
        rows.append(TableRow(f"gPC p={p}", p, p, float("inf"), 1, em, ev))
    for tol in cfg.table_tols:
        for p_r, p_f in cfg.table_orders:
            tr = run_adaptive(spec, cfg.refinement(p_r=p_r, p_f=p_f, tol1=tol))
            em, ev = relative_errors(tr, ref_mean, ref_var)
            rows.append(TableRow("ME-gPC", p_r, p_f, tol, int(tr.n_elements[-1]), em, ev))
    return rows, label


def table_csv(rows: list[TableRow]) -> str:
    ns = len(rows[0].err_var) if rows else 0
    cols = (["method", "p_r", "p_f", "tol1", "N"] + [f"err_mean_{m + 1}" for m in range(ns)]
            + [f"err_var_{m + 1}" for m in range(ns)])
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for r in rows:
        vals = [r.label, str(r.p_r), str(r.p_f), repr(r.tol1), str(r.n_elements)]
        vals += [repr(float(v)) for v in (*r.err_mean, *r.err_var)]
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()


def format_table(rows: list[TableRow], label: str) -> str:
    lines = [f"reference: {label}"]
    for r in rows:
        tol = "-" if not np.isfinite(r.tol1) else f"{r.tol1:.0e}"
        errs = " ".join(f"{v:.1e}" for v in r.err_var)
        means = " ".join(f"{v:.1e}" for v in r.err_mean)
        lines.append(f"{r.label:8s} p_r={r.p_r:<2d} p_f={r.p_f:<2d} TOL1={tol:>6s} N={r.n_elements:<5d} "
                     f"mean_err=[{means}] var_err=[{errs}]")
    return "\n".join(lines)
