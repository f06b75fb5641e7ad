"""Log-distance path-loss channel.

    rssi(d) = -(10 n log10(d) + A)

with ``n`` the path-loss exponent and ``A`` the system loss constant, i.e.
the RSSI magnitude at one metre. Values are signed dBm throughout.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


class ChannelDomainError(ValueError):
    pass


def channel_problems(n, A, sigma, spike_prob, spike_mag) -> list[str]:
    errors = []
    if not n > 0:
        errors.append(f"channel.n must be > 0, got {n}")
    if not A >= 0:
        errors.append(f"channel.A must be >= 0, got {A}")
    if not sigma >= 0:
        errors.append(f"channel.sigma must be >= 0, got {sigma}")
    if not 0 <= spike_prob <= 1:
        errors.append(f"channel.spike_prob must be in [0, 1], got {spike_prob}")
    if not spike_mag >= 0:
        errors.append(f"channel.spike_mag must be >= 0, got {spike_mag}")
    return errors


@dataclass(frozen=True)
class ChannelParams:
    n: float = 2.0
    A: float = 57.0
    sigma: float = 2.0
    spike_prob: float = 0.05
    spike_mag: float = 8.0

    def __post_init__(self):
        errors = channel_problems(self.n, self.A, self.sigma, self.spike_prob, self.spike_mag)
        if errors:
            raise ValueError("; ".join(errors))

    def to_dict(self) -> dict:
        return asdict(self)


def rssi_from_distance(d: float, params: ChannelParams) -> float:
    """Noiseless RSSI (dBm) at distance ``d`` metres."""
    if not d > 0:
        raise ChannelDomainError(f"distance must be positive, got {d}")
    return -(10.0 * params.n * math.log10(d) + params.A)


def distance_from_rssi(rssi: float, params: ChannelParams) -> float:
    """Invert :func:`rssi_from_distance`."""
    return 10.0 ** ((-rssi - params.A) / (10.0 * params.n))


def sample_noisy_rssi(d: float, params: ChannelParams, rng: np.random.Generator) -> float:
    """Draw one integer-valued RSSI reading.

    Gaussian shadowing plus, with probability ``spike_prob``, an impulse of
    ``+/- spike_mag`` dB with equiprobable sign. Three draws are consumed per
    call regardless of the parameters, so the stream stays aligned when
    noise settings change.
    """
    mean = rssi_from_distance(d, params)
    shadow = rng.normal(0.0, 1.0)
    hit = rng.random() < params.spike_prob
    sign = 1.0 if rng.random() < 0.5 else -1.0
    value = mean + params.sigma * shadow + (sign * params.spike_mag if hit else 0.0)
    return float(np.rint(value))
