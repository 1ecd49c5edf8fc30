"""Defender-side procedures: the test-rate search and the pruning baseline.

The search fixes a trained model and an attacker, then walks the test
dropout rate upward from zero.  Each grid point regenerates adversarial
examples under that rate (the white-box attacker sees it) and measures
test accuracy; the walk stops once accuracy falls more than the allowed
budget below the trained baseline, and the chosen rate is the last one
that stayed within budget.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .attacks import SinglePass
from .campaign import attack_campaign
from .network import Deterministic, ModelParams, Sap, TestDropout, init_params
from .rng import SeedStream
from .training import TrainConfig, evaluate_accuracy, train

__all__ = [
    "DefenseSearchConfig",
    "DefenseSearchTrace",
    "TraceRow",
    "defensive_dropout_search",
    "sap_defense_eval",
    "select_train_rate",
    "write_trace_csv",
    "write_trace_summary_json",
    "write_trace_table_csv",
]


@dataclass
class DefenseSearchConfig:
    attack: object
    max_accuracy_drop: float = 0.01
    step_size: float = 0.1
    n_images: int = 100
    n_accuracy: int = 1000
    passes_per_example: int = 10
    policy: object = SinglePass()
    seed: int = 0

    def __post_init__(self):
        if self.max_accuracy_drop <= 0:
            raise ValueError("max_accuracy_drop must be > 0")
        if not 0 < self.step_size < 1:
            raise ValueError(f"step_size must be in (0, 1), got {self.step_size}")


@dataclass
class TraceRow:
    test_rate: float
    accuracy: float
    attack_success_rate: float | None
    mean_l2: float | None


@dataclass
class DefenseSearchTrace:
    rows: list[TraceRow]
    baseline_accuracy: float
    chosen_rate: float
    train_rate: float | None = None
    campaigns: list = field(default_factory=list, repr=False)


def _default_evaluate_point(params, X, y, cfg: DefenseSearchConfig):
    root = SeedStream(cfg.seed)
    Xa, ya = X[: cfg.n_accuracy], y[: cfg.n_accuracy]

    def evaluate(rate):
        mode = TestDropout(rate) if rate > 0 else Deterministic()
        passes = cfg.passes_per_example if rate > 0 else 1
        acc = evaluate_accuracy(
            params, Xa, ya, mode, passes, root.child(f"acc/r{rate:g}")
        )
        camp = attack_campaign(
            params, cfg.attack, X, y, cfg.n_images, mode,
            root.child(f"attack/r{rate:g}"), cfg.policy,
        )
        return acc, camp.attack_success_rate, camp.mean_l2, camp

    return evaluate


def defensive_dropout_search(params: ModelParams, X, y, cfg: DefenseSearchConfig,
                             baseline_accuracy: float | None = None,
                             evaluate_point=None) -> DefenseSearchTrace:
    """Search the largest test dropout rate whose accuracy stays in budget.

    Returns the full (rate, accuracy, success rate, mean L2) trace; the
    trace starts at rate 0, whose success rate is the undefended attack.
    ``evaluate_point(rate) -> (accuracy, asr, mean_l2[, campaign])`` may be
    injected for testing.
    """
    evaluate = evaluate_point or _default_evaluate_point(params, X, y, cfg)
    rows = []
    campaigns = []

    def run_point(rate):
        out = evaluate(rate)
        acc, asr, mean_l2 = out[:3]
        if len(out) > 3:
            campaigns.append((rate, out[3]))
        rows.append(TraceRow(rate, acc, asr, mean_l2))
        return acc

    acc = run_point(0.0)
    baseline = acc if baseline_accuracy is None else baseline_accuracy
    rate = 0.0
    while acc > baseline - cfg.max_accuracy_drop:
        rate = round(rate + cfg.step_size, 12)
        if rate >= 1.0:
            break
        acc = run_point(rate)
    chosen = max(
        (r.test_rate for r in rows if r.accuracy > baseline - cfg.max_accuracy_drop),
        default=0.0,
    )
    return DefenseSearchTrace(rows, baseline, chosen, campaigns=campaigns)


def select_train_rate(arch, X, y, test_X, test_y, grid,
                      base_cfg: TrainConfig) -> tuple[float, ModelParams, float]:
    """Train one model per grid rate; keep the best deterministic test
    accuracy, breaking ties toward the smaller rate."""
    if not len(grid):
        raise ValueError("training rate grid is empty")
    best = None
    for rate in grid:
        cfg = replace(base_cfg, dropout_rate=float(rate))
        params0 = init_params(arch, SeedStream(cfg.seed).child(f"init/r{rate:g}"))
        trained, _ = train(params0, X, y, cfg)
        acc = evaluate_accuracy(trained, test_X, test_y)
        if best is None or acc > best[2] or (acc == best[2] and rate < best[0]):
            best = (float(rate), trained, acc)
    return best


def sap_defense_eval(params: ModelParams, attack, X, y, sap_mode: Sap,
                     n_images: int, n_accuracy: int = 1000,
                     passes_per_example: int = 10, policy=SinglePass(),
                     seed: int = 0):
    """Evaluate stochastic activation pruning exactly as a dropout point:
    (test accuracy, attack success rate, mean L2, campaign)."""
    root = SeedStream(seed)
    acc = evaluate_accuracy(
        params, X[:n_accuracy], y[:n_accuracy], sap_mode,
        passes_per_example, root.child("acc/sap"),
    )
    camp = attack_campaign(
        params, attack, X, y, n_images, sap_mode, root.child("attack/sap"), policy
    )
    return acc, camp.attack_success_rate, camp.mean_l2, camp


# ---------------------------------------------------------------------------
# artifacts


def write_trace_csv(trace: DefenseSearchTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["test_rate", "accuracy", "attack_success_rate", "mean_l2"])
        for r in trace.rows:
            writer.writerow([
                r.test_rate, r.accuracy,
                "" if r.attack_success_rate is None else r.attack_success_rate,
                "" if r.mean_l2 is None else r.mean_l2,
            ])


def write_trace_table_csv(trace: DefenseSearchTrace, path) -> None:
    """Wide layout mirroring the result tables: one row per train rate,
    one success-rate column per test rate."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["train_rate"] + [f"test_{r.test_rate:g}" for r in trace.rows])
        label = "" if trace.train_rate is None else f"{trace.train_rate:g}"
        writer.writerow([label] + [
            "" if r.attack_success_rate is None else r.attack_success_rate
            for r in trace.rows
        ])


def write_trace_summary_json(trace: DefenseSearchTrace, path) -> None:
    summary = {
        "train_rate": trace.train_rate,
        "test_rate": trace.chosen_rate,
        "baseline_accuracy": trace.baseline_accuracy,
        "rows": [
            {
                "test_rate": r.test_rate,
                "accuracy": r.accuracy,
                "attack_success_rate": r.attack_success_rate,
                "mean_l2": r.mean_l2,
            }
            for r in trace.rows
        ],
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
