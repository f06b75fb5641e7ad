"""Experiment configuration: JSON loading and validation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .rssi_model import ChannelParams, channel_problems

MODES = ("fkf", "skf", "both")
BETA_RULES = ("equal", "adaptive")


class ConfigError(ValueError):
    """Every validation failure found in a config, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class Node:
    id: str
    x: float
    y: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class FilterParams:
    A: float = 1.0
    C: float = 1.0
    Q: float = 2.0
    R: float = 4.0
    x0: float = -60.0
    P0: float = 100.0


@dataclass(frozen=True)
class ExperimentConfig:
    fogs: tuple[Node, ...]
    edges: tuple[Node, ...]
    trusted_ids: tuple[str, ...]
    mode: str = "both"
    rounds: int = 500
    seed: int = 1
    channel: ChannelParams = field(default_factory=ChannelParams)
    filter: FilterParams = field(default_factory=FilterParams)
    betas: str | tuple[float, ...] = "equal"
    burn_in: int = 20
    master: bool = False
    refine: bool = False

    @property
    def modes(self) -> list[str]:
        return ["fkf", "skf"] if self.mode == "both" else [self.mode]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "rounds": self.rounds,
            "seed": self.seed,
            "fogs": [{"id": f.id, "x": f.x, "y": f.y} for f in self.fogs],
            "edges": [{"id": e.id, "x": e.x, "y": e.y} for e in self.edges],
            "channel": self.channel.to_dict(),
            "filter": dict(vars(self.filter)),
            "betas": self.betas if isinstance(self.betas, str) else list(self.betas),
            "burn_in": self.burn_in,
            "trusted_ids": list(self.trusted_ids),
            "master": self.master,
            "refine": self.refine,
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; recorded in output files."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        data = self.to_dict()
        data.update(changes)
        return from_dict(data)


def _number(data: dict, key: str, errors: list, prefix: str = "", default=None, kind=float):
    name = prefix + key
    if key not in data:
        if default is None:
            errors.append(f"{name}: missing")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{name}: expected a number, got {value!r}")
        return default
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            errors.append(f"{name}: expected an integer, got {value!r}")
            return default
        return int(value)
    if not math.isfinite(value):
        errors.append(f"{name}: must be finite")
        return default
    return float(value)


def _nodes(data: dict, key: str, errors: list) -> list[Node]:
    raw = data.get(key)
    if not isinstance(raw, list):
        errors.append(f"{key}: expected a list of {{id, x, y}} objects")
        return []
    nodes = []
    for i, item in enumerate(raw):
        where = f"{key}[{i}]."
        if not isinstance(item, dict):
            errors.append(f"{key}[{i}]: expected an object")
            continue
        node_id = item.get("id")
        if not isinstance(node_id, str) or not node_id:
            errors.append(f"{where}id: expected a non-empty string")
            node_id = None
        x = _number(item, "x", errors, where)
        y = _number(item, "y", errors, where)
        if node_id is not None and x is not None and y is not None:
            nodes.append(Node(node_id, x, y))
    return nodes


def from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a config, collecting every problem found."""
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object")
    errors: list[str] = []

    mode = str(data.get("mode", "both")).lower()
    if mode not in MODES:
        errors.append(f"mode: expected one of {MODES}, got {data.get('mode')!r}")
    rounds = _number(data, "rounds", errors, default=500, kind=int)
    burn_in = _number(data, "burn_in", errors, default=20, kind=int)
    seed = _number(data, "seed", errors, default=1, kind=int)
    if rounds is not None and rounds <= 0:
        errors.append(f"rounds: must be positive, got {rounds}")
    if burn_in is not None and burn_in < 0:
        errors.append(f"burn_in: must be non-negative, got {burn_in}")
    if rounds is not None and burn_in is not None and rounds <= burn_in:
        errors.append(f"rounds: must exceed burn_in ({rounds} <= {burn_in})")
    if seed is not None and not 0 <= seed < 2**64:
        errors.append(f"seed: must be an unsigned 64-bit integer, got {seed}")

    fogs = _nodes(data, "fogs", errors)
    edges = _nodes(data, "edges", errors)
    if "fogs" in data and isinstance(data["fogs"], list) and not data["fogs"]:
        errors.append("fogs: need at least one fog node")
    if "edges" in data and isinstance(data["edges"], list) and not data["edges"]:
        errors.append("edges: need at least one edge device")
    ids = [n.id for n in fogs + edges]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        errors.append(f"fogs/edges: duplicate node ids {dupes}")
    anchors = [f.position for f in fogs]
    if len(set(anchors)) != len(anchors):
        errors.append("fogs: anchor positions must be distinct")

    channel_raw = data.get("channel", {})
    channel = None
    if not isinstance(channel_raw, dict):
        errors.append("channel: expected an object")
    else:
        defaults = ChannelParams()
        values = {
            k: _number(channel_raw, k, errors, "channel.", getattr(defaults, k))
            for k in ("n", "A", "sigma", "spike_prob", "spike_mag")
        }
        unknown = set(channel_raw) - set(values)
        if unknown:
            errors.append(f"channel: unknown keys {sorted(unknown)}")
        if all(v is not None for v in values.values()):
            problems = channel_problems(**values)
            if problems:
                errors.extend(problems)
            else:
                channel = ChannelParams(**values)

    filter_raw = data.get("filter", {})
    filt = None
    if not isinstance(filter_raw, dict):
        errors.append("filter: expected an object")
    else:
        defaults = FilterParams()
        values = {
            k: _number(filter_raw, k, errors, "filter.", getattr(defaults, k))
            for k in ("A", "C", "Q", "R", "x0", "P0")
        }
        unknown = set(filter_raw) - set(values)
        if unknown:
            errors.append(f"filter: unknown keys {sorted(unknown)}")
        if values["Q"] is not None and values["Q"] < 0:
            errors.append(f"filter.Q: must be >= 0, got {values['Q']}")
        if values["R"] is not None and values["R"] <= 0:
            errors.append(f"filter.R: must be > 0, got {values['R']}")
        if values["P0"] is not None and values["P0"] <= 0:
            errors.append(f"filter.P0: must be > 0, got {values['P0']}")
        if all(v is not None for v in values.values()):
            filt = FilterParams(**values)

    betas = data.get("betas", "equal")
    if isinstance(betas, str):
        if betas not in BETA_RULES:
            errors.append(f"betas: expected {BETA_RULES} or a list, got {betas!r}")
    elif isinstance(betas, list):
        if not all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in betas):
            errors.append("betas: list entries must be numbers")
        else:
            betas = tuple(float(b) for b in betas)
            if fogs and len(betas) != len(fogs):
                errors.append(f"betas: {len(betas)} weights for {len(fogs)} fogs")
            if any(b <= 0 for b in betas):
                errors.append("betas: weights must be positive")
            if abs(sum(betas) - 1.0) > 1e-9:
                errors.append(f"betas: weights must sum to 1, got {sum(betas)!r}")
    else:
        errors.append("betas: expected 'equal', 'adaptive' or a list of numbers")

    trusted = data.get("trusted_ids", [])
    if not isinstance(trusted, list) or not all(isinstance(t, str) and t for t in trusted):
        errors.append("trusted_ids: expected a list of non-empty strings")
        trusted = []
    elif len(set(trusted)) != len(trusted):
        errors.append("trusted_ids: duplicate entries")

    flags = {}
    for key in ("master", "refine"):
        value = data.get(key, False)
        if not isinstance(value, bool):
            errors.append(f"{key}: expected true or false")
        flags[key] = bool(value)

    known = {
        "mode", "rounds", "seed", "fogs", "edges", "channel", "filter",
        "betas", "burn_in", "trusted_ids", "master", "refine",
    }
    unknown = set(data) - known
    if unknown:
        errors.append(f"unknown top-level keys {sorted(unknown)}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        fogs=tuple(fogs),
        edges=tuple(edges),
        trusted_ids=tuple(trusted),
        mode=mode,
        rounds=rounds,
        seed=seed,
        channel=channel,
        filter=filt,
        betas=betas,
        burn_in=burn_in,
        **flags,
    )


def loads_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return from_dict(data)


def load_config(path) -> ExperimentConfig:
    return loads_config(Path(path).read_text(encoding="utf-8"))


def preset_path(name: str = "paper"):
    return resources.files("fedkf") / "presets" / f"{name}.json"


def load_preset(name: str = "paper") -> ExperimentConfig:
    return loads_config(preset_path(name).read_text(encoding="utf-8"))
