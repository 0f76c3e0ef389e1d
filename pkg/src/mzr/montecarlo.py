"""Monte Carlo reference statistics.

Random inputs come from numpy's Philox counter-based generator. Sample ``i``
under seed ``s`` reads the Philox block at key ``s`` and counter ``i``, so
every sample has its own substream and the draws do not depend on how the
sample range is chunked or which thread integrates a chunk. Moments are
accumulated per chunk as central sums and merged in chunk order, which makes
the result bit-identical for any thread count.
"""
from __future__ import annotations

import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .problems import ProblemSpec

_BLOCK = 4  # uint64 words per Philox counter value


class SampleIntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 100_000
    seed: int = 0
    dt: float = 1e-2
    t_end: float = 10.0
    sample_every: float = 0.1
    chunk_size: int = 10_000
    threads: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if not self.sample_every > 0:
            raise ValueError("sample_every must be positive")
        if self.chunk_size < 1 or self.threads < 1:
            raise ValueError("chunk_size and threads must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def stride(self) -> int:
        return max(1, int(round(self.sample_every / self.dt)))

    def sample_steps(self) -> np.ndarray:
        steps = list(range(0, self.n_steps + 1, self.stride))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return np.array(steps)


def draw_inputs(seed: int, start: int, count: int, dim: int) -> np.ndarray:
    """Uniform [-1, 1) inputs for samples ``start .. start+count-1``; shape (count, dim)."""
    if dim > _BLOCK:
        raise ValueError(f"at most {_BLOCK} random dimensions per sample")
    bg = np.random.Philox(key=seed)
    bg.advance(start)
    raw = bg.random_raw(_BLOCK * count).reshape(count, _BLOCK)[:, :dim]
    u = (raw >> np.uint64(11)).astype(float) * 2.0**-53
    return 2.0 * u - 1.0


@dataclass
class _Sums:
    """Count, mean and central power sums M2..M4 per (time, variable)."""

    n: int
    mean: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    m4: np.ndarray

    @classmethod
    def of(cls, x: np.ndarray) -> "_Sums":
        # x: (T, ns, m)
        mean = x.mean(axis=-1)
        d = x - mean[..., None]
        d2 = d * d
        return cls(x.shape[-1], mean, d2.sum(-1), (d2 * d).sum(-1), (d2 * d2).sum(-1))

    def merge(self, o: "_Sums") -> "_Sums":
        na, nb = self.n, o.n
        n = na + nb
        delta = o.mean - self.mean
        d2 = delta * delta
        mean = self.mean + delta * (nb / n)
        m2 = self.m2 + o.m2 + d2 * (na * nb / n)
        m3 = (self.m3 + o.m3 + d2 * delta * (na * nb * (na - nb) / n**2)
              + 3.0 * delta * (na * o.m2 - nb * self.m2) / n)
        m4 = (self.m4 + o.m4 + d2 * d2 * (na * nb * (na * na - na * nb + nb * nb) / n**3)
              + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / n**2
              + 4.0 * delta * (na * o.m3 - nb * self.m3) / n)
        return _Sums(n, mean, m2, m3, m4)


@dataclass
class McResult:
    times: np.ndarray
    mean: np.ndarray  # (T, ns)
    var: np.ndarray  # unbiased
    stderr_mean: np.ndarray
    stderr_var: np.ndarray
    n_samples: int
    state_names: tuple[str, ...] = ()

    def to_csv(self) -> str:
        ns = self.mean.shape[1]
        idx = range(1, ns + 1)
        cols = (["t"] + [f"mean_{m}" for m in idx] + [f"var_{m}" for m in idx]
                + [f"stderr_{m}" for m in idx] + [f"var_stderr_{m}" for m in idx])
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for i, t in enumerate(self.times):
            vals = [t, *self.mean[i], *self.var[i], *self.stderr_mean[i], *self.stderr_var[i]]
            buf.write(",".join(repr(float(v)) for v in vals) + "\n")
        return buf.getvalue()


def _rk4(spec: ProblemSpec, y, p, dt):
    k1 = spec.rhs(y, p)
    k2 = spec.rhs(y + 0.5 * dt * k1, p)
    k3 = spec.rhs(y + 0.5 * dt * k2, p)
    k4 = spec.rhs(y + dt * k3, p)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _run_chunk(spec: ProblemSpec, cfg: McConfig, start: int, count: int) -> _Sums:
    xi = draw_inputs(cfg.seed, start, count, spec.dim)
    y = spec.initial_values(xi)
    p = spec.param_values(xi)
    record = set(cfg.sample_steps().tolist())
    out = np.empty((len(record), spec.n_states, count))
    slot = 0
    if 0 in record:
        out[slot] = y
        slot += 1
    for step in range(1, cfg.n_steps + 1):
        y = _rk4(spec, y, p, cfg.dt)
        if step in record:
            if not np.all(np.isfinite(y)):
                bad = int(np.flatnonzero(~np.all(np.isfinite(y), axis=0))[0])
                raise SampleIntegrationError(
                    f"non-finite trajectory for sample {start + bad} with inputs {xi[bad].tolist()} "
                    f"by t={step * cfg.dt:.6g}"
                )
            out[slot] = y
            slot += 1
    return _Sums.of(out)


def resolve_threads(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("MZR_THREADS")
    return max(1, int(env)) if env else 1


def mc_stats(spec: ProblemSpec, cfg: McConfig) -> McResult:
    """Sample mean, unbiased variance and their standard errors at the sample times."""
    starts = list(range(0, cfg.n_samples, cfg.chunk_size))
    counts = [min(cfg.chunk_size, cfg.n_samples - s) for s in starts]
    if cfg.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(lambda sc: _run_chunk(spec, cfg, *sc), zip(starts, counts)))
    else:
        parts = [_run_chunk(spec, cfg, s, c) for s, c in zip(starts, counts)]
    acc = parts[0]
    for part in parts[1:]:
        acc = acc.merge(part)
    n = acc.n
    if n > 1:
        var = acc.m2 / (n - 1)
        mu4 = acc.m4 / n
        se_var = np.sqrt(np.maximum(mu4 - (n - 3) / (n - 1) * var * var, 0.0) / n)
    else:
        var = np.zeros_like(acc.m2)
        se_var = np.zeros_like(acc.m2)
    times = cfg.sample_steps() * cfg.dt
    return McResult(times, acc.mean, var, np.sqrt(var / n), se_var, n, spec.state_names)
