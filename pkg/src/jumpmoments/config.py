"""Run configuration: JSON parsing, validation, and canonical emission.

Complex numbers are encoded as two-element ``[re, im]`` arrays throughout;
generator matrices are given row-major as 2n x 2n arrays of such pairs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, JumpMomentsError
from .propagator import ChannelSet
from .states import COHERENT, FOCK, GAUSSIAN_PURE, VACUUM, StateSpec
from .symplectic import validate_generator

_ORACLE_DEFAULTS = {"cutoff": 40, "strict": False}
_MC_DEFAULTS = {"trajectories": 10000, "seed": 0}


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Everything a batch run needs; construct with :func:`parse_config`."""

    n: int
    channels: ChannelSet
    state: StateSpec
    order: int
    t_max: float
    steps: int
    cutoff: int
    strict: bool
    trajectories: int
    seed: int

    @property
    def t_grid(self) -> tuple[float, ...]:
        return tuple(self.t_max * j / self.steps for j in range(self.steps + 1))

    def override(self, **kwargs) -> "RunConfig":
        """A copy with the given scalar fields replaced."""
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def _fail(path: str, message: str):
    raise ConfigurationError(f"{path}: {message}")


def _get(data: dict, key: str, path: str, required: bool = True, default=None):
    if key not in data:
        if required:
            _fail(path, f"missing required field {key!r}")
        return default
    return data[key]


def _as_int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        _fail(path, f"expected an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        _fail(path, f"must be >= {minimum}, got {value}")
    return value


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _as_complex(value, path: str) -> complex:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        _fail(path, f"expected an [re, im] pair, got {value!r}")
    return complex(_as_float(value[0], path + "[0]"), _as_float(value[1], path + "[1]"))


def _as_complex_matrix(value, n: int, path: str) -> np.ndarray:
    d = 2 * n
    if not isinstance(value, list) or len(value) != d:
        _fail(path, f"expected a {d}x{d} row-major matrix of [re, im] pairs")
    out = np.empty((d, d), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != d:
            _fail(f"{path}[{i}]", f"expected {d} entries")
        for j, entry in enumerate(row):
            out[i, j] = _as_complex(entry, f"{path}[{i}][{j}]")
    return out


def parse_raw_channels(data: dict) -> tuple[int, list[tuple[float, np.ndarray]]]:
    """Mode count and (rate, H) pairs without generator validation; used by
    the reporting-only validate workflow."""
    n = _as_int(_get(data, "modes", "config"), "modes", minimum=1)
    raw = _get(data, "channels", "config")
    if not isinstance(raw, list) or not raw:
        _fail("channels", "expected a nonempty list")
    channels = []
    for k, item in enumerate(raw):
        path = f"channels[{k}]"
        if not isinstance(item, dict):
            _fail(path, "expected an object with 'rate' and 'H'")
        rate = _as_float(_get(item, "rate", path), f"{path}.rate")
        H = _as_complex_matrix(_get(item, "H", path), n, f"{path}.H")
        channels.append((rate, H))
    return n, channels


def _parse_state(data: dict, n: int) -> StateSpec:
    path = "initial_state"
    if not isinstance(data, dict):
        _fail(path, "expected an object")
    kind = _get(data, "kind", path)
    known = {"kind", "alpha", "occupations", "squeeze_H"}
    for key in data:
        if key not in known:
            _fail(f"{path}.{key}", "unknown field")
    if kind == VACUUM:
        return StateSpec(kind=VACUUM, n=n)
    if kind in (COHERENT, GAUSSIAN_PURE):
        raw_alpha = _get(data, "alpha", path)
        if not isinstance(raw_alpha, list) or len(raw_alpha) != n:
            _fail(f"{path}.alpha", f"expected {n} [re, im] pairs")
        alpha = np.array(
            [_as_complex(a, f"{path}.alpha[{i}]") for i, a in enumerate(raw_alpha)]
        )
        squeeze = None
        if kind == GAUSSIAN_PURE and data.get("squeeze_H") is not None:
            H = _as_complex_matrix(data["squeeze_H"], n, f"{path}.squeeze_H")
            try:
                squeeze = validate_generator(n, H)
            except JumpMomentsError as exc:
                raise type(exc)(f"{path}.squeeze_H: {exc}") from exc
        if kind == COHERENT:
            return StateSpec(kind=COHERENT, n=n, alpha=alpha)
        return StateSpec(kind=GAUSSIAN_PURE, n=n, alpha=alpha, squeeze=squeeze)
    if kind == FOCK:
        raw_occ = _get(data, "occupations", path)
        if not isinstance(raw_occ, list) or len(raw_occ) != n:
            _fail(f"{path}.occupations", f"expected {n} integers")
        occ = tuple(
            _as_int(m, f"{path}.occupations[{i}]", minimum=0) for i, m in enumerate(raw_occ)
        )
        return StateSpec(kind=FOCK, n=n, occupations=occ)
    _fail(f"{path}.kind", f"unknown state kind {kind!r}")


def parse_config_dict(data: dict) -> RunConfig:
    """Validate a parsed JSON object into a :class:`RunConfig`."""
    if not isinstance(data, dict):
        raise ConfigurationError("config root must be an object")
    n, raw_channels = parse_raw_channels(data)
    channels = []
    for k, (rate, H) in enumerate(raw_channels):
        try:
            gen = validate_generator(n, H)
        except JumpMomentsError as exc:
            raise type(exc)(f"channels[{k}].H: {exc}") from exc
        channels.append((rate, gen))
    channel_set = ChannelSet(channels)

    state = _parse_state(_get(data, "initial_state", "config"), n)
    order = _as_int(_get(data, "order", "config"), "order", minimum=1)

    time_block = _get(data, "time", "config")
    if not isinstance(time_block, dict):
        _fail("time", "expected an object with 't_max' and 'steps'")
    t_max = _as_float(_get(time_block, "t_max", "time"), "time.t_max")
    if not np.isfinite(t_max) or t_max <= 0.0:
        _fail("time.t_max", f"must be positive and finite, got {t_max}")
    steps = _as_int(_get(time_block, "steps", "time"), "time.steps", minimum=1)

    oracle = _get(data, "oracle", "config", required=False, default={})
    if not isinstance(oracle, dict):
        _fail("oracle", "expected an object")
    cutoff = _as_int(
        oracle.get("cutoff", _ORACLE_DEFAULTS["cutoff"]), "oracle.cutoff", minimum=1
    )
    strict = oracle.get("strict", _ORACLE_DEFAULTS["strict"])
    if not isinstance(strict, bool):
        _fail("oracle.strict", f"expected a boolean, got {strict!r}")

    mc = _get(data, "mc", "config", required=False, default={})
    if not isinstance(mc, dict):
        _fail("mc", "expected an object")
    trajectories = _as_int(
        mc.get("trajectories", _MC_DEFAULTS["trajectories"]), "mc.trajectories", minimum=1
    )
    seed = _as_int(mc.get("seed", _MC_DEFAULTS["seed"]), "mc.seed", minimum=0)

    return RunConfig(
        n=n,
        channels=channel_set,
        state=state,
        order=order,
        t_max=t_max,
        steps=steps,
        cutoff=cutoff,
        strict=strict,
        trajectories=trajectories,
        seed=seed,
    )


def parse_config(path: str) -> RunConfig:
    """Load and validate a JSON run configuration from disk."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"config {path!r} is not valid JSON: line {exc.lineno}, column "
            f"{exc.colno}: {exc.msg}"
        ) from exc
    return parse_config_dict(data)


def _pair(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _matrix_pairs(H: np.ndarray) -> list[list[list[float]]]:
    return [[_pair(z) for z in row] for row in np.asarray(H)]


def emit_config(cfg: RunConfig) -> dict:
    """The canonical JSON-ready form of a configuration; parsing it back
    reproduces the configuration."""
    state: dict = {"kind": cfg.state.kind}
    if cfg.state.alpha is not None:
        state["alpha"] = [_pair(a) for a in cfg.state.alpha]
    if cfg.state.occupations is not None:
        state["occupations"] = list(cfg.state.occupations)
    if cfg.state.squeeze is not None:
        state["squeeze_H"] = _matrix_pairs(cfg.state.squeeze.H)
    return {
        "modes": cfg.n,
        "channels": [
            {"rate": rate, "H": _matrix_pairs(gen.H)} for rate, gen in cfg.channels
        ],
        "initial_state": state,
        "order": cfg.order,
        "time": {"t_max": cfg.t_max, "steps": cfg.steps},
        "oracle": {"cutoff": cfg.cutoff, "strict": cfg.strict},
        "mc": {"trajectories": cfg.trajectories, "seed": cfg.seed},
    }


def config_hash(cfg: RunConfig) -> str:
    """Stable short hash identifying a configuration."""
    canonical = json.dumps(emit_config(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
