"""Lockstep simulation of the cloud / fog / edge topology.

Each round, in a fixed order:

1. every edge device emits one noisy RSSI reading to every fog node;
2. each fog looks the edge up in its ledger copy and drops unknown devices;
3. each fog runs its local filter step (FKF: from the cloud's last share,
   SKF: from its own previous posterior) and sends ``(filter_id, k, x, P)``;
4. the cloud drops messages from fogs missing from its ledger copy;
5. the cloud fuses the accepted packets and updates its share;
6. filtered RSSIs become distances and each edge is trilaterated.

In FKF mode the fused state for an edge stacks one RSSI component per
cloud-authorised fog; fog ``j`` measures only component ``j``. Raw
readings never leave the fog: the wire message has exactly the four
fields above, and :class:`PrivacyAudit` scans every serialized message
for the bytes of any raw reading seen so far.
"""

from __future__ import annotations

import struct
import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import ledger
from .config import ExperimentConfig, FilterParams
from .federation import (
    FusionShare,
    LocalPacket,
    MasterEstimate,
    adaptive_betas,
    equal_betas,
    fuse,
    local_step,
    master_step,
    share,
)
from .filter_core import KfModel, StateEstimate, step
from .localization import AnchorSet, DegenerateGeometryError, PositionFix, trilaterate
from .rssi_model import ChannelParams, distance_from_rssi, rssi_from_distance, sample_noisy_rssi

MODES = ("fkf", "skf")


class AuthorizationError(RuntimeError):
    """Every fog that reported in a round was rejected by the cloud."""


# --- wire format ----------------------------------------------------------

MESSAGE_FIELDS = ("filter_id", "k", "x", "P")


@dataclass(frozen=True)
class FogMessage:
    """Fog to cloud message. Only these four fields exist on the wire."""

    filter_id: int
    k: int
    x: np.ndarray
    P: np.ndarray

    def serialize(self) -> bytes:
        x = np.asarray(self.x, dtype=">f8")
        P = np.asarray(self.P, dtype=">f8")
        payloads = (
            struct.pack(">q", self.filter_id),
            struct.pack(">q", self.k),
            struct.pack(">I", x.size) + x.tobytes(),
            struct.pack(">II", *P.shape) + P.tobytes(),
        )
        out = [struct.pack(">I", len(MESSAGE_FIELDS))]
        for name, payload in zip(MESSAGE_FIELDS, payloads):
            raw_name = name.encode("ascii")
            out.append(struct.pack(">H", len(raw_name)) + raw_name)
            out.append(struct.pack(">I", len(payload)) + payload)
        return b"".join(out)

    @classmethod
    def deserialize(cls, data: bytes) -> "FogMessage":
        (count,) = struct.unpack_from(">I", data, 0)
        pos = 4
        fields = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from(">H", data, pos)
            pos += 2
            name = data[pos : pos + name_len].decode("ascii")
            pos += name_len
            (size,) = struct.unpack_from(">I", data, pos)
            pos += 4
            fields[name] = data[pos : pos + size]
            pos += size
        if tuple(fields) != MESSAGE_FIELDS or pos != len(data):
            raise ValueError(f"malformed fog message with fields {tuple(fields)}")
        (n,) = struct.unpack_from(">I", fields["x"], 0)
        x = np.frombuffer(fields["x"], dtype=">f8", count=n, offset=4).astype(float)
        rows, cols = struct.unpack_from(">II", fields["P"], 0)
        P = np.frombuffer(fields["P"], dtype=">f8", offset=8).astype(float).reshape(rows, cols)
        return cls(
            struct.unpack(">q", fields["filter_id"])[0],
            struct.unpack(">q", fields["k"])[0],
            x,
            P,
        )

    def to_packet(self) -> LocalPacket:
        return LocalPacket(self.filter_id, self.x, self.P, self.k)


class PrivacyAudit:
    """Checks that no raw RSSI reading appears in any fog-to-cloud message."""

    def __init__(self):
        self.raw_values: set[float] = set()
        self._patterns: set[bytes] = set()
        self.messages = 0
        self.violations: list[tuple[int, float]] = []

    def record_raw(self, value: float) -> None:
        if value not in self.raw_values:
            self.raw_values.add(value)
            self._patterns.add(struct.pack(">d", value))

    def inspect(self, k: int, payload: bytes) -> None:
        self.messages += 1
        for pattern in self._patterns:
            if pattern in payload:
                self.violations.append((k, struct.unpack(">d", pattern)[0]))

    @property
    def clean(self) -> bool:
        return not self.violations


# --- topology -------------------------------------------------------------


@dataclass
class EdgeNode:
    id: str
    position: np.ndarray
    channel: ChannelParams


@dataclass
class FogNode:
    id: str
    filter_id: int
    anchor: np.ndarray
    chain: ledger.Chain
    params: FilterParams
    skf_states: dict = field(default_factory=dict)

    def accepts(self, device_id: str) -> bool:
        return ledger.is_authorized(self.chain, device_id)

    def scalar_model(self) -> KfModel:
        p = self.params
        return KfModel.scalar(A=p.A, C=p.C, Q=p.Q, R=p.R)

    def own_state(self, edge_id: str) -> StateEstimate:
        if edge_id not in self.skf_states:
            self.skf_states[edge_id] = StateEstimate([self.params.x0], [[self.params.P0]], 0)
        return self.skf_states[edge_id]


@dataclass
class CloudNode:
    chain: ledger.Chain
    members: list[str]
    params: FilterParams
    betas_rule: str | tuple
    master: bool
    shares: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.members)

    def stacked_model(self, position: int | None = None) -> KfModel:
        """Model over the stacked member state; ``position`` selects the measured component."""
        m, p = self.dim, self.params
        C = np.zeros((1, m))
        if position is not None:
            C[0, position] = p.C
        return KfModel(A=p.A * np.eye(m), C=C, Q=p.Q * np.eye(m), R=[[p.R]])

    def initial_betas(self) -> np.ndarray:
        if isinstance(self.betas_rule, str):
            return equal_betas(self.dim)
        return np.asarray(self.betas_rule, dtype=float)

    def share_for(self, edge_id: str) -> FusionShare:
        if edge_id not in self.shares:
            p, m = self.params, self.dim
            self.shares[edge_id] = FusionShare(
                np.full(m, p.x0), p.P0 * np.eye(m), self.initial_betas(), p.Q * np.eye(m), 0
            )
        return self.shares[edge_id]


@dataclass
class Topology:
    cloud: CloudNode
    fogs: list[FogNode]
    edges: list[EdgeNode]
    config: ExperimentConfig
    mode: str = "fkf"
    anchors: AnchorSet | None = None


def build_topology(config: ExperimentConfig, mode: str = "fkf") -> Topology:
    """Create nodes and hand every node a copy of the same trusted-ID ledger."""
    from .config import ConfigError

    mode = mode.lower()
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not config.fogs:
        raise ConfigError("fogs: need at least one fog node")
    anchors = [f.position for f in config.fogs]
    if len(set(anchors)) != len(anchors):
        raise ConfigError("fogs: anchor positions must be distinct")
    if isinstance(config.betas, tuple) and len(config.betas) != len(config.fogs):
        raise ConfigError(f"betas: {len(config.betas)} weights for {len(config.fogs)} fogs")

    master_copy = ledger.build_chain(config.trusted_ids)
    text = master_copy.dumps()
    fogs = [
        FogNode(f.id, i, np.array(f.position, dtype=float), ledger.Chain.loads(text), config.filter)
        for i, f in enumerate(config.fogs, start=1)
    ]
    cloud_chain = ledger.Chain.loads(text)
    members = [f.id for f in fogs if ledger.is_authorized(cloud_chain, f.id)]
    betas_rule = config.betas
    if isinstance(betas_rule, tuple) and len(members) != len(fogs):
        # explicit weights only make sense for the full fog set; renormalise over members
        kept = [b for f, b in zip(fogs, betas_rule) if f.id in members]
        betas_rule = tuple(b / sum(kept) for b in kept)
    cloud = CloudNode(cloud_chain, members, config.filter, betas_rule, config.master)
    edges = [EdgeNode(e.id, np.array(e.position, dtype=float), config.channel) for e in config.edges]
    try:
        anchor_set = AnchorSet(np.array(anchors, dtype=float))
    except DegenerateGeometryError:
        anchor_set = None
    return Topology(cloud, fogs, edges, config, mode, anchor_set)


# --- round ----------------------------------------------------------------


@dataclass(frozen=True)
class LinkRecord:
    fog_id: str
    edge_id: str
    raw_rssi: float
    filtered_rssi: float
    est_distance: float
    true_distance: float
    theoretical_rssi: float


@dataclass(frozen=True)
class Rejection:
    device_id: str
    node_id: str
    reason: str

    def __str__(self) -> str:
        return f"{self.device_id}@{self.node_id}:{self.reason}"


@dataclass
class RoundTrace:
    k: int
    mode: str
    links: list[LinkRecord] = field(default_factory=list)
    fused: dict = field(default_factory=dict)
    fixes: dict = field(default_factory=dict)
    rejections: list[Rejection] = field(default_factory=list)

    def raw_readings(self) -> list[float]:
        return [l.raw_rssi for l in self.links]


@contextmanager
def _timed(timings, key):
    if timings is None:
        yield
        return
    start = time.perf_counter()
    yield
    timings[key] += time.perf_counter() - start


def _next_betas(cloud: CloudNode, current: np.ndarray, packets: list[LocalPacket]) -> np.ndarray:
    if cloud.betas_rule == "adaptive" and len(packets) == cloud.dim:
        return adaptive_betas([p.P for p in packets])
    return current


def run_round(topology: Topology, k: int, rng: np.random.Generator, audit: PrivacyAudit | None = None,
              timings: dict | None = None) -> RoundTrace:
    """Advance the whole topology by one lockstep round."""
    if k < 0:
        raise ValueError("round index must be non-negative")
    cloud, mode = topology.cloud, topology.mode
    trace = RoundTrace(k, mode)
    member_pos = {fog_id: j for j, fog_id in enumerate(cloud.members)}

    for edge in topology.edges:
        readings = {}
        for fog in topology.fogs:
            d = float(np.linalg.norm(fog.anchor - edge.position))
            readings[fog.id] = sample_noisy_rssi(d, edge.channel, rng)
            if audit is not None:
                audit.record_raw(readings[fog.id])

        accepting = []
        for fog in topology.fogs:
            if fog.accepts(edge.id):
                accepting.append(fog)
            else:
                trace.rejections.append(Rejection(edge.id, fog.id, "unauthorized-edge"))
        if not accepting:
            continue

        fkf = mode == "fkf" and cloud.dim > 0
        prior = cloud.share_for(edge.id) if fkf else None
        inits = share(prior) if fkf else None

        # (3) local filter steps; each fog keeps its posterior private
        local_estimates = {}
        wire = []
        with _timed(timings, "local"):
            for fog in accepting:
                z = readings[fog.id]
                if fkf and fog.id in member_pos:
                    j = member_pos[fog.id]
                    est = local_step(inits[j], cloud.stacked_model(j), [z], prior.k)
                else:
                    est = step(fog.own_state(edge.id), fog.scalar_model(), [z])
                    fog.skf_states[edge.id] = est
                local_estimates[fog.id] = est
                msg = FogMessage(fog.filter_id, est.k, est.x, est.P).serialize()
                if audit is not None:
                    audit.inspect(k, msg)
                wire.append((fog.id, msg))

        # (4) cloud-side gate, (5) fusion
        with _timed(timings, "global"):
            packets = []
            for fog_id, msg in wire:
                if ledger.is_authorized(cloud.chain, fog_id):
                    packets.append(FogMessage.deserialize(msg).to_packet())
                else:
                    trace.rejections.append(Rejection(fog_id, "cloud", "unauthorized-fog"))
            if not packets:
                raise AuthorizationError(f"round {k}: cloud rejected every fog reporting on {edge.id}")

            if fkf:
                master = MasterEstimate.absent()
                if cloud.master:
                    master = master_step(MasterEstimate(True, prior.x_f, prior.P_f), cloud.stacked_model())
                fused = fuse(packets, master)
                betas = _next_betas(cloud, prior.betas, packets)
                cloud.shares[edge.id] = FusionShare(fused.x, fused.P, betas, prior.Q_global, prior.k + 1)
                fused_components = {fid: fused.x[j] for fid, j in member_pos.items()}
            else:
                # one contributor per link: fusion of a single packet is that packet
                by_id = {f.filter_id: f.id for f in topology.fogs}
                parts = {by_id[p.filter_id]: fuse([p]) for p in packets}
                ordered = [parts[f] for f in cloud.members if f in parts]
                fused = StateEstimate(
                    [e.x[0] for e in ordered] or [np.nan],
                    np.diag([e.P[0, 0] for e in ordered] or [np.nan]),
                    k + 1,
                )
                fused_components = {}
            trace.fused[edge.id] = fused

        # (6) filtered RSSI -> distance -> position
        with _timed(timings, "localization"):
            used_anchors, used_dists = [], []
            for fog in accepting:
                if fog.id in fused_components:
                    filtered = float(fused_components[fog.id])
                else:
                    filtered = float(local_estimates[fog.id].x[0])
                true_d = float(np.linalg.norm(fog.anchor - edge.position))
                est_d = distance_from_rssi(filtered, edge.channel)
                trace.links.append(
                    LinkRecord(fog.id, edge.id, readings[fog.id], filtered, est_d, true_d,
                               rssi_from_distance(true_d, edge.channel))
                )
                used_anchors.append(fog.anchor)
                used_dists.append(est_d)
            trace.fixes[edge.id] = _locate(used_anchors, used_dists, topology.config.refine)

    return trace


def _locate(anchors, distances, refine: bool) -> PositionFix | None:
    if len(anchors) < 3:
        return None
    try:
        return trilaterate(AnchorSet(np.array(anchors)), distances, refine=refine)
    except DegenerateGeometryError:
        return None


def run_experiment(config: ExperimentConfig, mode: str, audit: PrivacyAudit | None = None,
                   timings: dict | None = None, rounds: int | None = None) -> list[RoundTrace]:
    """Run ``config.rounds`` lockstep rounds in one mode from a fresh topology."""
    topology = build_topology(config, mode)
    rng = np.random.default_rng(config.seed)
    n = config.rounds if rounds is None else rounds
    return [run_round(topology, k, rng, audit, timings) for k in range(n)]


def new_timings() -> dict:
    return defaultdict(float)
