"""Per-phase timing of the standard and federated configurations."""

from __future__ import annotations

import time
import timeit

import numpy as np

from .config import ExperimentConfig
from .filter_core import KfModel, StateEstimate, step
from .simnet import build_topology, new_timings, run_round

PHASES = ("local", "global", "localization", "total")


def time_mode(config: ExperimentConfig, mode: str, rounds: int) -> dict[str, float]:
    """Mean seconds per round spent in each phase over ``rounds`` rounds."""
    topology = build_topology(config, mode)
    rng = np.random.default_rng(config.seed)
    timings = new_timings()
    for k in range(rounds):
        start = time.perf_counter()
        run_round(topology, k, rng, timings=timings)
        timings["total"] += time.perf_counter() - start
    return {phase: timings[phase] / rounds for phase in PHASES}


def time_local_steps(dims, number: int = 300, repeat: int = 15) -> dict[int, float]:
    """Best-of-``repeat`` seconds per predict + update for each state size.

    Sizes are timed interleaved so background load hits them evenly.
    """
    calls = {}
    for n_x in dims:
        C = np.zeros((1, n_x))
        C[0, 0] = 1.0
        model = KfModel(A=np.eye(n_x), C=C, Q=0.5 * np.eye(n_x), R=[[4.0]])
        est = StateEstimate(np.zeros(n_x), np.eye(n_x))
        calls[n_x] = lambda est=est, model=model: step(est, model, [0.3])
    best = {n_x: float("inf") for n_x in dims}
    for _ in range(repeat):
        for n_x, fn in calls.items():
            best[n_x] = min(best[n_x], timeit.timeit(fn, number=number))
    return {n_x: t / number for n_x, t in best.items()}


def run_bench(config: ExperimentConfig, rounds: int = 10_000) -> dict:
    results = {mode: time_mode(config, mode, rounds) for mode in ("skf", "fkf")}
    results["local_step"] = time_local_steps(sorted({1, 4, len(config.fogs)}))
    return results


def format_bench(results: dict, rounds: int) -> str:
    lines = [f"rounds={rounds}", "mode,phase,mean_us_per_round"]
    for mode in ("skf", "fkf"):
        for phase in PHASES:
            lines.append(f"{mode},{phase},{results[mode][phase] * 1e6:.2f}")
    ratio = results["fkf"]["total"] / results["skf"]["total"]
    lines.append(f"fkf/skf total ratio: {ratio:.3f}")
    for n_x, t in results["local_step"].items():
        lines.append(f"local step n_x={n_x}: {t * 1e6:.2f} us")
    return "\n".join(lines)
