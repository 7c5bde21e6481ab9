"""Scenario configuration and its JSON form (kebab-case keys)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from ..channel import KINDS
from ..combining import MODES, SCHEMES

__all__ = [
    "ConfigError",
    "ChannelSpec",
    "FrontEndSpec",
    "Sweep",
    "ScenarioConfig",
    "METRICS",
    "HARDWARE_CASES",
    "SWEEP_VARIABLES",
    "load_config",
]

METRICS = ("se", "se-cdf", "csi-sinr", "distortion", "eigenvalues", "directivity", "quant-correlation")
HARDWARE_CASES = ("ideal", "ue-only", "bs-only", "ue+bs")
SWEEP_VARIABLES = ("K", "M", "b", "snr-db", "channel")
FRONT_END_KINDS = ("identity", "third-order", "quantizer", "composite")
CORRELATION_MODES = ("corr", "uncorr", "both")
SE_METRICS = ("se", "se-cdf")
ANGLE_LIMIT = 60.0


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


def _kebab(name):
    return name.replace("_", "-")


def _snake(name):
    return name.replace("-", "_")


def _from_mapping(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = _snake(key)
        if name not in known:
            raise ConfigError(f"{where}.{key}: unknown field")
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _to_mapping(obj):
    return {_kebab(k): v for k, v in asdict(obj).items()}


@dataclass(frozen=True)
class ChannelSpec:
    """Channel model parameters; ``ue_angles`` is a list or ``"random"``.

    ``"random"`` draws every UE angle uniformly in [-60, 60] degrees for each
    realization.
    """

    kind: str = "iid-rayleigh"
    M: int = 100
    K: int = 1
    angular_std: float = 10.0
    antenna_spacing: float = 0.5
    ue_angles: object = "random"


@dataclass(frozen=True)
class FrontEndSpec:
    """BS receiver chain; ``backoff_db`` in dB, ``bits`` for the ADC."""

    kind: str = "third-order"
    alpha: float = 1.0 / 3.0
    backoff_db: float = 7.0
    bits: int = 6


@dataclass(frozen=True)
class Sweep:
    variable: str
    values: tuple


@dataclass(frozen=True)
class ScenarioConfig:
    """One numerical experiment.

    ``snr_db`` is a scalar common to all UEs or a ``[low, high]`` pair from
    which every UE SNR is drawn uniformly (in dB) per realization.
    ``hardware_cases`` overrides ``front_end``/``kappa`` with the ideal,
    UE-only, BS-only and UE+BS combinations when non-empty.
    """

    channel: ChannelSpec
    front_end: FrontEndSpec
    sweep: Sweep
    seed: int
    kappa: float = 0.99
    snr_db: object = 0.0
    schemes: tuple = ("da-mmse", "da-mr")
    correlation_mode: str = "both"
    realizations: int = 1000
    mc_samples: int = 100_000
    metric: str = "se"
    hardware_cases: tuple = ()
    name: str = "custom"
    defaults: tuple = field(default=(), compare=False)

    def __post_init__(self):
        validate(self)

    # -- serialization -------------------------------------------------------
    def to_dict(self):
        out = {
            "name": self.name,
            "metric": self.metric,
            "channel": _to_mapping(self.channel),
            "front-end": _to_mapping(self.front_end),
            "kappa": self.kappa,
            "snr-db": list(self.snr_db) if isinstance(self.snr_db, (list, tuple)) else self.snr_db,
            "schemes": list(self.schemes),
            "correlation-mode": self.correlation_mode,
            "realizations": self.realizations,
            "mc-samples": self.mc_samples,
            "seed": self.seed,
            "sweep": {"variable": self.sweep.variable, "values": list(self.sweep.values)},
            "hardware-cases": list(self.hardware_cases),
        }
        if isinstance(self.channel.ue_angles, tuple):
            out["channel"]["ue-angles"] = list(self.channel.ue_angles)
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    def config_hash(self):
        """Short SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config: expected a JSON object")
        data = dict(data)
        for required in ("channel", "front-end", "sweep", "seed"):
            if required not in data:
                raise ConfigError(f"{required}: missing required field")
        channel = _from_mapping(ChannelSpec, data.pop("channel"), "channel")
        front_end = _from_mapping(FrontEndSpec, data.pop("front-end"), "front-end")
        sweep_data = data.pop("sweep")
        if not isinstance(sweep_data, dict) or set(sweep_data) != {"variable", "values"}:
            raise ConfigError("sweep: expected an object with exactly 'variable' and 'values'")
        values = sweep_data["values"]
        if not isinstance(values, list):
            raise ConfigError("sweep.values: expected a list")
        sweep = Sweep(sweep_data["variable"], tuple(values))
        kwargs = {}
        known = {f.name for f in fields(cls)} - {"channel", "front_end", "sweep", "defaults"}
        for key, value in data.items():
            name = _snake(key)
            if name not in known:
                raise ConfigError(f"{key}: unknown field")
            kwargs[name] = tuple(value) if isinstance(value, list) and name != "snr_db" else value
        return cls(channel=channel, front_end=front_end, sweep=sweep, **kwargs)

    def with_overrides(self, **changes):
        """Copy with top-level fields replaced (``None`` values are ignored)."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def load_config(path):
    """Read a scenario from a JSON file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return ScenarioConfig.from_dict(data)


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate(cfg: ScenarioConfig):
    ch, fe, sw = cfg.channel, cfg.front_end, cfg.sweep

    if cfg.metric not in METRICS:
        raise ConfigError(f"metric: unknown value {cfg.metric!r}; expected one of {METRICS}")
    if ch.kind not in KINDS:
        raise ConfigError(f"channel.kind: unknown value {ch.kind!r}; expected one of {KINDS}")
    for name in ("M", "K"):
        v = getattr(ch, name)
        if not _is_int(v) or v < 1:
            raise ConfigError(f"channel.{name}: must be a positive integer, got {v!r}")
    if not _number(ch.angular_std) or ch.angular_std < 0:
        raise ConfigError(f"channel.angular-std: must be >= 0, got {ch.angular_std!r}")
    if not _number(ch.antenna_spacing) or ch.antenna_spacing <= 0:
        raise ConfigError(f"channel.antenna-spacing: must be > 0, got {ch.antenna_spacing!r}")
    if ch.ue_angles != "random":
        angles = ch.ue_angles
        if not isinstance(angles, (list, tuple)) or not all(_number(a) for a in angles):
            raise ConfigError("channel.ue-angles: expected a list of degrees or 'random'")
        if len(angles) != ch.K:
            raise ConfigError(f"channel.ue-angles: expected {ch.K} angles, got {len(angles)}")
        if any(abs(a) > ANGLE_LIMIT for a in angles):
            raise ConfigError(f"channel.ue-angles: angles must lie in [-{ANGLE_LIMIT:g}, {ANGLE_LIMIT:g}]")
        object.__setattr__(ch, "ue_angles", tuple(float(a) for a in angles))

    if fe.kind not in FRONT_END_KINDS:
        raise ConfigError(f"front-end.kind: unknown value {fe.kind!r}; expected one of {FRONT_END_KINDS}")
    if not _number(fe.alpha) or not 0 < fe.alpha <= 1 / 3 + 1e-12:
        raise ConfigError(f"front-end.alpha: must lie in (0, 1/3], got {fe.alpha!r}")
    if not _number(fe.backoff_db) or fe.backoff_db < 0:
        raise ConfigError(f"front-end.backoff-db: must be >= 0 dB, got {fe.backoff_db!r}")
    if not _is_int(fe.bits) or not 1 <= fe.bits <= 12:
        raise ConfigError(f"front-end.bits: must be an integer in [1, 12], got {fe.bits!r}")

    if not _number(cfg.kappa) or not 0 <= cfg.kappa <= 1:
        raise ConfigError(f"kappa: must lie in [0, 1], got {cfg.kappa!r}")
    snr = cfg.snr_db
    if isinstance(snr, (list, tuple)):
        if len(snr) != 2 or not all(_number(s) for s in snr) or snr[0] > snr[1]:
            raise ConfigError("snr-db: a range must be [low, high] with low <= high")
        object.__setattr__(cfg, "snr_db", (float(snr[0]), float(snr[1])))
    elif not _number(snr):
        raise ConfigError(f"snr-db: expected a number or [low, high], got {snr!r}")

    if not cfg.schemes or any(s not in SCHEMES for s in cfg.schemes):
        raise ConfigError(f"schemes: expected a non-empty subset of {SCHEMES}, got {list(cfg.schemes)}")
    if cfg.correlation_mode not in CORRELATION_MODES:
        raise ConfigError(f"correlation-mode: expected one of {CORRELATION_MODES}, got {cfg.correlation_mode!r}")
    if "da-zf" in cfg.schemes and cfg.correlation_mode != "corr":
        raise ConfigError("schemes: da-zf cannot null a full-rank diagonal distortion; use correlation-mode 'corr'")
    if cfg.metric == "csi-sinr" and any(s not in ("mr", "da-mr") for s in cfg.schemes):
        raise ConfigError("schemes: csi-sinr supports mr and da-mr only")

    if not _is_int(cfg.realizations) or cfg.realizations < 2:
        raise ConfigError(f"realizations: must be an integer >= 2, got {cfg.realizations!r}")
    if cfg.metric in SE_METRICS and cfg.realizations < 100:
        raise ConfigError(f"realizations: SE outputs need at least 100, got {cfg.realizations}")
    if not _is_int(cfg.mc_samples) or cfg.mc_samples < 1000:
        raise ConfigError(f"mc-samples: must be an integer >= 1000, got {cfg.mc_samples!r}")
    if not _is_int(cfg.seed) or not 0 <= cfg.seed < 2**64:
        raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {cfg.seed!r}")

    if any(c not in HARDWARE_CASES for c in cfg.hardware_cases):
        raise ConfigError(f"hardware-cases: expected a subset of {HARDWARE_CASES}")
    object.__setattr__(cfg, "hardware_cases", tuple(cfg.hardware_cases))
    object.__setattr__(cfg, "schemes", tuple(cfg.schemes))

    if sw.variable not in SWEEP_VARIABLES:
        raise ConfigError(f"sweep.variable: expected one of {SWEEP_VARIABLES}, got {sw.variable!r}")
    if not sw.values:
        raise ConfigError("sweep.values: must not be empty")
    for v in sw.values:
        if sw.variable in ("K", "M") and (not _is_int(v) or v < 1):
            raise ConfigError(f"sweep.values: {sw.variable} values must be positive integers, got {v!r}")
        if sw.variable == "b" and (not _is_int(v) or not 1 <= v <= 12):
            raise ConfigError(f"sweep.values: bit values must be integers in [1, 12], got {v!r}")
        if sw.variable == "snr-db" and not _number(v):
            raise ConfigError(f"sweep.values: snr values must be numbers, got {v!r}")
        if sw.variable == "channel" and v not in KINDS:
            raise ConfigError(f"sweep.values: unknown channel kind {v!r}")
    if sw.variable == "K" and ch.ue_angles != "random":
        raise ConfigError("channel.ue-angles: a K sweep needs 'random' angles")
    if sw.variable == "b" and fe.kind not in ("quantizer", "composite") and cfg.metric != "distortion":
        raise ConfigError("sweep.variable: a bit sweep needs a quantizer or composite front-end")
    if cfg.metric == "quant-correlation" and fe.kind != "quantizer":
        raise ConfigError("front-end.kind: quant-correlation needs a quantizer front-end")
    if cfg.metric == "distortion" and sw.variable not in ("K", "M"):
        raise ConfigError("sweep.variable: the distortion metric sweeps K or M")
    if cfg.metric in ("directivity",) and "da-zf" not in cfg.schemes:
        raise ConfigError("schemes: directivity compares DA-ZF against other combiners; include da-zf")
