"""Plain ``key=value`` run configuration."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .spectral import ProblemSpec

COMMANDS = ("simulate", "spectrum", "charroots", "decay", "verify")


# name -> (u(x), u'(x)); derivatives give acoustic-mode fluxes exactly
DATA: Dict[str, Tuple[Callable, Callable]] = {
    "zero": (lambda x: 0.0 * x, lambda x: 0.0 * x),
    "one": (lambda x: 1.0 + 0.0 * x, lambda x: 0.0 * x),
    "sin1": (lambda x: np.sin(np.pi * x), lambda x: np.pi * np.cos(np.pi * x)),
    "sin2": (lambda x: np.sin(2 * np.pi * x), lambda x: 2 * np.pi * np.cos(2 * np.pi * x)),
    "sin3_5": (
        lambda x: np.sin(3 * np.pi * x) + 0.5 * np.sin(5 * np.pi * x),
        lambda x: 3 * np.pi * np.cos(3 * np.pi * x) + 2.5 * np.pi * np.cos(5 * np.pi * x),
    ),
    "cos1": (lambda x: np.cos(np.pi * x), lambda x: -np.pi * np.sin(np.pi * x)),
    "quad": (lambda x: x * (1 - x), lambda x: 1 - 2 * x),
    "gauss": (
        lambda x: np.exp(-(((x - 0.45) / 0.1) ** 2)),
        lambda x: -2 * (x - 0.45) / 0.01 * np.exp(-(((x - 0.45) / 0.1) ** 2)),
    ),
    "ramp": (
        lambda x: 1 + 0.1 * x + 0.3 * np.cos(2 * np.pi * x),
        lambda x: 0.1 - 0.6 * np.pi * np.sin(2 * np.pi * x),
    ),
}

SPEC_KEYS = (
    "alpha0", "alpha1", "beta0", "beta1",
    "damp_c0", "damp_c1", "damp_ct0", "damp_ct1",
    "ac_p0", "ac_p1", "ac_q0", "ac_q1", "ac_r0", "ac_r1",
)  # fmt: skip

# preset -> parameter overrides; the pipelines live in presets.py
PRESET_PARAMS: Dict[str, dict] = {
    "prop73_3": {"f": "sin3_5", "g": "sin2", "T": 2.0},
    "prop73_2": {
        "alpha0": 1.0, "alpha1": -1.0, "beta0": -1.0, "beta1": -1.0,
        "f": "one", "T": 50.0, "stride": 20,
    },  # fmt: skip
    "prop71_decay": {"p": 2.0},
    "charroots_match": {"alpha0": 1.0, "alpha1": -1.0, "beta0": -1.0, "beta1": -1.0},
    "blockformula": {"T": 1.0},
    "acoustic1d": {
        "coupling": "normal_derivative", "ac_q0": -2.0, "ac_q1": -2.0,
        "ac_r0": -0.5, "ac_r1": -0.5, "f": "ramp", "T": 50.0, "stride": 20,
    },  # fmt: skip
    "miyadera": {"alpha0": 2.0, "alpha1": -5.0, "f": "sin1", "N": 4000},
    "factorization": {"alpha0": 1.0, "alpha1": -1.0, "beta0": -1.0, "beta1": -1.0},
}


@dataclass
class RunConfig:
    """Resolved configuration of one CLI run. ``dt = None`` means ``h / 2``."""

    command: str = "verify"
    preset: Optional[str] = None
    N: int = 200
    T: float = 10.0
    dt: Optional[float] = None
    output: Optional[str] = None
    coupling: str = "trace"
    p: float = 2.0
    q: float = 0.0
    r: float = 0.0
    alpha0: float = 0.0
    alpha1: float = 0.0
    beta0: float = 0.0
    beta1: float = 0.0
    damp_c0: float = 0.0
    damp_c1: float = 0.0
    damp_ct0: float = 0.0
    damp_ct1: float = 0.0
    ac_p0: float = 0.0
    ac_p1: float = 0.0
    ac_q0: float = 0.0
    ac_q1: float = 0.0
    ac_r0: float = 0.0
    ac_r1: float = 0.0
    f: str = "sin1"
    g: str = "zero"
    stride: int = 1
    seed: int = 0
    n_directions: int = 16
    decay_cells: int = 20000
    lam_min: float = -50.0
    lam_max: float = 0.0
    spec: ProblemSpec = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.spec = self.build_spec()

    def build_spec(self) -> ProblemSpec:
        return ProblemSpec(
            coupling=self.coupling,
            lp_exponent=self.p,
            q_coef=self.q or None,
            r_coef=self.r or None,
            **{k: getattr(self, k) for k in SPEC_KEYS},
        )

    @property
    def time_step(self) -> float:
        return 0.5 / self.N if self.dt is None else self.dt

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("spec", None)
        d["dt_resolved"] = self.time_step
        return d


_INT_KEYS = {"N", "stride", "seed", "n_directions", "decay_cells"}
_STR_KEYS = {"command", "preset", "output", "coupling", "f", "g"}
_KEYS = {f for f in RunConfig.__dataclass_fields__ if f != "spec"}


def _convert(key: str, raw: str, lineno: int):
    if key in _STR_KEYS:
        return raw
    try:
        if key in _INT_KEYS:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        value = float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse {key}={raw!r} as a number") from None
    if not math.isfinite(value):
        raise ConfigError(f"line {lineno}: {key} must be finite")
    return value


def _validate(values: dict, where: dict) -> None:
    def fail(key, msg):
        raise ConfigError(f"line {where.get(key, '?')}: {key} {msg}")

    if values["command"] not in COMMANDS:
        fail("command", f"must be one of {', '.join(COMMANDS)}")
    if values.get("preset") is not None and values["preset"] not in PRESET_PARAMS:
        fail("preset", f"must be one of {', '.join(PRESET_PARAMS)}")
    if values["N"] < 4:
        fail("N", "must be >= 4")
    if values["N"] > 5000:
        fail("N", "must be <= 5000")
    if values["T"] <= 0:
        fail("T", "must be positive")
    dt = values.get("dt")
    if dt is not None and not (0 < dt <= 0.5 / values["N"] * (1 + 1e-12)):
        fail("dt", f"must lie in (0, h/2] = (0, {0.5 / values['N']:.6g}]")
    if values["p"] < 1:
        fail("p", "must be >= 1")
    if values["coupling"] not in ("trace", "normal_derivative"):
        fail("coupling", "must be 'trace' or 'normal_derivative'")
    for key in ("f", "g"):
        if values[key] not in DATA:
            fail(key, f"must name initial data from {', '.join(DATA)}")
    if values["stride"] < 1:
        fail("stride", "must be >= 1")
    if values["n_directions"] < 8:
        fail("n_directions", "must be >= 8")
    if values["decay_cells"] < 4:
        fail("decay_cells", "must be >= 4")
    if not values["lam_min"] < values["lam_max"] <= 0:
        fail("lam_min", "and lam_max must satisfy lam_min < lam_max <= 0")


def parse_config(text: str) -> RunConfig:
    """Parse ``key=value`` lines; ``#`` starts a comment.

    Later lines override earlier ones, and explicit keys override the
    parameters implied by ``preset``.
    """
    explicit: dict = {}
    where: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key=value, got {body!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        explicit[key] = _convert(key, raw, lineno)
        where[key] = lineno

    values = {k: RunConfig.__dataclass_fields__[k].default for k in _KEYS}
    preset = explicit.get("preset")
    if preset is not None:
        if preset not in PRESET_PARAMS:
            raise ConfigError(f"line {where['preset']}: unknown preset {preset!r}")
        values.update(PRESET_PARAMS[preset])
    values.update(explicit)
    _validate(values, where)
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
