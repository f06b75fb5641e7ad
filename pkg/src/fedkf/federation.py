"""Federated Kalman filter coordination: information sharing and fusion.

The global filter holds the fused estimate ``(x_f, P_f)`` and a set of
sharing weights ``betas`` (positive, summing to one). Each round it hands
every local filter ``x_f``, ``P_f / beta_i`` and ``Q / beta_i``; the locals
run predict + update on their own measurement and return ``(x_i, P_i)``;
the global filter then fuses in information space::

    P_f^-1 = sum_i P_i^-1 + P_M^-1
    x_f    = P_f (sum_i P_i^-1 x_i + P_M^-1 x_M)

where the master term ``(x_M, P_M)`` is optional.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .filter_core import KfModel, ShapeMismatchError, StateEstimate, predict, update

WEIGHT_TOL = 1e-9


class InvalidWeightsError(ValueError):
    """Sharing weights are not all positive or do not sum to one."""


class StalenessError(ValueError):
    """Local packets handed to fusion carry different time indices."""


class SingularCovarianceError(np.linalg.LinAlgError):
    """A covariance handed to fusion cannot be inverted."""

    def __init__(self, message: str, filter_id=None):
        super().__init__(message)
        self.filter_id = filter_id


def check_betas(betas) -> np.ndarray:
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    if betas.ndim != 1 or betas.size == 0:
        raise InvalidWeightsError("need at least one sharing weight")
    if np.any(~np.isfinite(betas)) or np.any(betas <= 0.0):
        raise InvalidWeightsError(f"sharing weights must be positive, got {betas.tolist()}")
    if abs(betas.sum() - 1.0) > WEIGHT_TOL:
        raise InvalidWeightsError(f"sharing weights must sum to 1, got {betas.sum()!r}")
    return betas


def equal_betas(n: int) -> np.ndarray:
    if n < 1:
        raise InvalidWeightsError("need at least one local filter")
    return np.full(n, 1.0 / n)


def adaptive_betas(covariances: Sequence[np.ndarray]) -> np.ndarray:
    """Weights proportional to each local's information, ``1 / trace(P_i)``."""
    inv_traces = np.array([1.0 / np.trace(np.atleast_2d(P)) for P in covariances])
    return inv_traces / inv_traces.sum()


@dataclass(frozen=True)
class FusionShare:
    """What the global filter broadcasts to the locals each round."""

    x_f: np.ndarray
    P_f: np.ndarray
    betas: np.ndarray
    Q_global: np.ndarray
    k: int = 0

    def __post_init__(self):
        x_f = np.atleast_1d(np.asarray(self.x_f, dtype=float))
        P_f = np.atleast_2d(np.asarray(self.P_f, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q_global, dtype=float))
        n = x_f.size
        if P_f.shape != (n, n) or Q.shape != (n, n):
            raise ShapeMismatchError(
                f"P_f {P_f.shape} and Q_global {Q.shape} must be {n}x{n}"
            )
        object.__setattr__(self, "x_f", x_f)
        object.__setattr__(self, "P_f", P_f)
        object.__setattr__(self, "Q_global", Q)
        object.__setattr__(self, "betas", check_betas(self.betas))

    @property
    def n_locals(self) -> int:
        return self.betas.size

    @property
    def estimate(self) -> StateEstimate:
        return StateEstimate(self.x_f, self.P_f, self.k)


@dataclass(frozen=True)
class LocalInit:
    x: np.ndarray
    P: np.ndarray
    Q: np.ndarray


@dataclass(frozen=True)
class LocalPacket:
    """A local filter's posterior as sent to the global filter."""

    filter_id: int
    x: np.ndarray
    P: np.ndarray
    k: int

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "P", np.atleast_2d(np.asarray(self.P, dtype=float)))

    @classmethod
    def from_estimate(cls, filter_id: int, est: StateEstimate) -> "LocalPacket":
        return cls(filter_id, est.x, est.P, est.k)


@dataclass(frozen=True)
class MasterEstimate:
    """Optional global-side estimate; ``present=False`` drops it from fusion."""

    present: bool = False
    x: np.ndarray = field(default=None)
    P: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.present:
            if self.x is None or self.P is None:
                raise ValueError("a present master estimate needs x and P")
            object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
            object.__setattr__(self, "P", np.atleast_2d(np.asarray(self.P, dtype=float)))

    @classmethod
    def absent(cls) -> "MasterEstimate":
        return cls(False)


def share(fusion: FusionShare) -> list[LocalInit]:
    """Split the fused estimate among the locals by their sharing weights."""
    return [
        LocalInit(fusion.x_f.copy(), fusion.P_f / b, fusion.Q_global / b)
        for b in fusion.betas
    ]


def _inverse(P: np.ndarray, filter_id) -> np.ndarray:
    # covariances here must be SPD; Cholesky fails fast otherwise
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            f"covariance of filter {filter_id} is not positive definite", filter_id
        ) from None
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def information_sum(locals_: Sequence[LocalPacket], master: MasterEstimate | None = None):
    """Return ``(sum of P^-1, sum of P^-1 x)`` over the packets and master."""
    info = None
    vec = None
    for pkt in locals_:
        Pinv = _inverse(pkt.P, pkt.filter_id)
        info = Pinv if info is None else info + Pinv
        vec = Pinv @ pkt.x if vec is None else vec + Pinv @ pkt.x
    if master is not None and master.present:
        Pinv = _inverse(master.P, "master")
        info = info + Pinv
        vec = vec + Pinv @ master.x
    return info, vec


def fuse(locals_: Sequence[LocalPacket], master: MasterEstimate | None = None) -> StateEstimate:
    """Information-weighted fusion of local posteriors (plus optional master).

    Packets are summed in ``filter_id`` order so the result does not depend
    on the order they arrive in.
    """
    if not locals_:
        raise ValueError("fusion needs at least one local packet")
    ks = {pkt.k for pkt in locals_}
    if len(ks) != 1:
        raise StalenessError(f"local packets carry mixed time indices {sorted(ks)}")
    ordered = sorted(locals_, key=lambda p: p.filter_id)
    dims = {pkt.x.size for pkt in ordered}
    if master is not None and master.present:
        dims.add(master.x.size)
    if len(dims) != 1:
        raise ShapeMismatchError(f"packets have mismatched state dimensions {sorted(dims)}")
    if len(ordered) == 1 and (master is None or not master.present):
        only = ordered[0]
        _inverse(only.P, only.filter_id)
        return StateEstimate(only.x.copy(), only.P.copy(), only.k)
    info, vec = information_sum(ordered, master)
    P_f = np.linalg.inv(info)
    P_f = 0.5 * (P_f + P_f.T)
    return StateEstimate(P_f @ vec, P_f, ks.pop())


def master_step(master: MasterEstimate, model: KfModel) -> MasterEstimate:
    """Prediction-only step for the master estimate; no-op when absent."""
    if not master.present:
        return master
    est = predict(StateEstimate(master.x, master.P), model)
    return MasterEstimate(True, est.x, est.P)


def local_step(init: LocalInit, model: KfModel, z, k: int) -> StateEstimate:
    """Run one local filter from its shared initialisation."""
    prior = StateEstimate(init.x, init.P, k)
    return update(predict(prior, model.with_noise(Q=init.Q)), model, z)


@dataclass
class RoundResult:
    share: FusionShare
    packets: list[LocalPacket]
    master: MasterEstimate


def fkf_round(
    measurements: Sequence,
    prior: FusionShare,
    models: Sequence[KfModel],
    master: MasterEstimate | None = None,
    master_model: KfModel | None = None,
    betas: str | Sequence[float] | None = None,
) -> RoundResult:
    """One broadcast, local update, fuse cycle.

    ``measurements[i]`` and ``models[i]`` belong to local filter ``i + 1``.
    ``betas`` picks next round's weights: ``None`` keeps the prior weights,
    ``"equal"`` or ``"adaptive"`` recompute them, a sequence sets them.
    When a master is given it is propagated with ``master_model`` (defaults
    to the first local model) before fusion.
    """
    n = prior.n_locals
    if len(measurements) != n or len(models) != n:
        raise ShapeMismatchError(
            f"expected {n} measurements and models, got {len(measurements)} and {len(models)}"
        )
    k = prior.k + 1
    packets = []
    for i, (init, model, z) in enumerate(zip(share(prior), models, measurements), start=1):
        packets.append(LocalPacket.from_estimate(i, local_step(init, model, z, prior.k)))

    master = master if master is not None else MasterEstimate.absent()
    master = master_step(master, master_model or models[0])
    fused = fuse(packets, master)

    if betas is None:
        new_betas = prior.betas
    elif isinstance(betas, str):
        if betas == "equal":
            new_betas = equal_betas(n)
        elif betas == "adaptive":
            new_betas = adaptive_betas([p.P for p in packets])
        else:
            raise InvalidWeightsError(f"unknown weight rule {betas!r}")
    else:
        new_betas = betas
    new_share = FusionShare(fused.x, fused.P, new_betas, prior.Q_global, k)
    return RoundResult(new_share, packets, master)
