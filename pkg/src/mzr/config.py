"""Run configuration: flat TOML documents with strict keys and per-problem defaults."""
from __future__ import annotations

import json
import math
import re
import sys
from dataclasses import asdict, dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .montecarlo import McConfig
from .problems import NAMED, ProblemSpec
from .solver import INDICATOR_MODES, INDICATOR_RATES, MEMORY_TIME_MODES, RefinementConfig

MODES = ("adaptive", "global", "mc", "verify", "table")


class ConfigError(ValueError):
    pass


# problem -> defaults that differ between problems
PROBLEM_DEFAULTS = {
    "ode": dict(p_r=3, p_f=7, tol1=1e-2, dt=1e-2, t_end=10.0, p=5,
                table_orders=[[2, 5], [3, 7]], table_tols=[1e-1, 1e-2], table_gpc=[5],
                ref_p_r=None, ref_p_f=None, ref_tol1=None),
    "ko1d": dict(p_r=3, p_f=7, tol1=1e-3, dt=1e-3, t_end=30.0, p=3,
                 table_orders=[[3, 7], [4, 9], [5, 11]], table_tols=[1e-3, 1e-6], table_gpc=[3],
                 ref_p_r=5, ref_p_f=11, ref_tol1=1e-9),
    "ko2d": dict(p_r=3, p_f=7, tol1=1e-1, dt=1e-3, t_end=10.0, p=3,
                 table_orders=[[2, 5], [3, 7], [4, 7]], table_tols=[1e-1], table_gpc=[],
                 ref_p_r=3, ref_p_f=7, ref_tol1=1e-3),
    "ko3d": dict(p_r=2, p_f=4, tol1=1e-1, dt=1e-3, t_end=3.0, p=2,
                 table_orders=[[2, 4], [3, 5]], table_tols=[1e-1], table_gpc=[],
                 ref_p_r=3, ref_p_f=5, ref_tol1=1e-2),
}


@dataclass(frozen=True)
class RunConfig:
    problem: str
    mode: str = "adaptive"
    p_r: int = 3
    p_f: int = 7
    p: int = 5
    tol1: float = 1e-2
    tol2: float = 0.1
    dt: float = 1e-2
    t_end: float = 10.0
    u0: float = 1.0
    indicator_mode: str = "full-state"
    indicator_rate: str = "memory"
    memory_time: str = "global"
    refine_stride: int = 1
    sample_every: float = 0.1
    max_elements: int = 10000
    seed: int = 0
    n_samples: int = 100_000
    threads: int = 1
    out: str = "out"
    table_orders: list = field(default_factory=list)
    table_tols: list = field(default_factory=list)
    table_gpc: list = field(default_factory=list)
    ref_p_r: int | None = None
    ref_p_f: int | None = None
    ref_tol1: float | None = None

    def problem_spec(self) -> ProblemSpec:
        return ProblemSpec.named(self.problem, self.u0)

    def refinement(self, **over) -> RefinementConfig:
        kw = dict(p_r=self.p_r, p_f=self.p_f, tol1=self.tol1, tol2=self.tol2, dt=self.dt,
                  t_end=self.t_end, indicator_mode=self.indicator_mode,
                  refine_stride=self.refine_stride, memory_time=self.memory_time,
                  sample_every=self.sample_every, max_elements=self.max_elements,
                  indicator_rate=self.indicator_rate)
        kw.update(over)
        return RefinementConfig(**kw)

    def monte_carlo(self) -> McConfig:
        return McConfig(self.n_samples, self.seed, self.dt, self.t_end, self.sample_every,
                        threads=self.threads)

    def to_dict(self) -> dict:
        return asdict(self)


_INT = {"p_r", "p_f", "p", "refine_stride", "max_elements", "seed", "n_samples", "threads",
        "ref_p_r", "ref_p_f"}
_FLOAT = {"tol1", "tol2", "dt", "t_end", "u0", "sample_every", "ref_tol1"}
_STR = {"problem", "mode", "indicator_mode", "indicator_rate", "memory_time", "out"}
_LIST = {"table_orders", "table_tols", "table_gpc"}
KEYS = tuple(f.name for f in fields(RunConfig))


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf'^\s*"?{re.escape(key)}"?\s*=')
    for n, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return n
    return None


def _where(text: str, key: str) -> str:
    n = _line_of(text, key)
    return f"key '{key}'" + (f" (line {n})" if n else "")


def _coerce(key: str, val, where: str):
    if key in _INT:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{where}: expected an integer, got {val!r}")
        return val
    if key in _FLOAT:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {val!r}")
        return float(val)
    if key in _STR:
        if not isinstance(val, str):
            raise ConfigError(f"{where}: expected a string, got {val!r}")
        return val
    if not isinstance(val, list):
        raise ConfigError(f"{where}: expected a list, got {val!r}")
    if key == "table_orders":
        if not all(isinstance(v, list) and len(v) == 2 and all(type(x) is int for x in v) for v in val):
            raise ConfigError(f"{where}: expected a list of [p_r, p_f] integer pairs")
        return [list(v) for v in val]
    if key == "table_gpc":
        if not all(type(v) is int for v in val):
            raise ConfigError(f"{where}: expected a list of integers")
        return list(val)
    if not all(type(v) in (int, float) for v in val):
        raise ConfigError(f"{where}: expected a list of numbers")
    return [float(v) for v in val]


def _validate(cfg: RunConfig, text: str):
    def fail(key, msg):
        raise ConfigError(f"{_where(text, key)}: {msg}")

    if cfg.mode not in MODES:
        fail("mode", f"must be one of {MODES}")
    if not cfg.tol1 > 0:
        fail("tol1", f"must be positive, got {cfg.tol1}")
    if not 0 < cfg.tol2 <= 1:
        fail("tol2", f"must be in (0, 1], got {cfg.tol2}")
    if not cfg.dt > 0:
        fail("dt", f"must be positive, got {cfg.dt}")
    if not cfg.t_end >= 0:
        fail("t_end", f"must be non-negative, got {cfg.t_end}")
    if not cfg.sample_every > 0:
        fail("sample_every", "must be positive")
    for key in ("p_r", "p_f", "p"):
        if getattr(cfg, key) < 0:
            fail(key, "must be non-negative")
    if cfg.mode == "adaptive" and not 0 < cfg.p_r < cfg.p_f:
        fail("p_r", f"need 0 < p_r < p_f for adaptive runs, got p_r={cfg.p_r}, p_f={cfg.p_f}")
    if cfg.indicator_mode not in INDICATOR_MODES:
        fail("indicator_mode", f"must be one of {INDICATOR_MODES}")
    if cfg.indicator_rate not in INDICATOR_RATES:
        fail("indicator_rate", f"must be one of {INDICATOR_RATES}")
    if cfg.memory_time not in MEMORY_TIME_MODES:
        fail("memory_time", f"must be one of {MEMORY_TIME_MODES}")
    for key in ("refine_stride", "max_elements", "n_samples", "threads"):
        if getattr(cfg, key) < 1:
            fail(key, "must be >= 1")
    if not 0 <= cfg.seed < 2**64:
        fail("seed", "must fit in an unsigned 64-bit integer")
    if any(not t > 0 for t in cfg.table_tols):
        fail("table_tols", "tolerances must be positive")
    if any(not 0 < a < b for a, b in cfg.table_orders):
        fail("table_orders", "each pair needs 0 < p_r < p_f")
    if cfg.ref_tol1 is not None and not cfg.ref_tol1 > 0:
        fail("ref_tol1", "must be positive")


def parse_config(text: str) -> RunConfig:
    """Parse a flat TOML document; omitted keys take the problem's defaults."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for key, val in doc.items():
        if isinstance(val, dict):
            raise ConfigError(f"{_where(text, key)}: tables are not supported")
        if key not in KEYS:
            raise ConfigError(f"{_where(text, key)}: unknown key")
    if "problem" not in doc:
        raise ConfigError("missing required key 'problem'")
    problem = doc["problem"]
    if not isinstance(problem, str) or problem not in NAMED:
        raise ConfigError(f"{_where(text, 'problem')}: expected one of {sorted(NAMED)}, got {problem!r}")
    values = dict(PROBLEM_DEFAULTS[problem])
    for key, val in doc.items():
        values[key] = _coerce(key, val, _where(text, key))
    cfg = RunConfig(**values)
    _validate(cfg, text)
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _toml_value(val) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, int):
        return str(val)
    if isinstance(val, float):
        if math.isinf(val):
            return "inf" if val > 0 else "-inf"
        if math.isnan(val):
            return "nan"
        return repr(val)
    if isinstance(val, str):
        return json.dumps(val)
    if isinstance(val, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in val) + "]"
    raise TypeError(f"cannot serialise {val!r}")


def serialize(cfg: RunConfig) -> str:
    """TOML text that parses back to an equal config (``None`` entries are omitted)."""
    lines = [f"{k} = {_toml_value(v)}" for k, v in asdict(cfg).items() if v is not None]
    return "\n".join(lines) + "\n"
