"""Attack campaigns: the (image, target) sweep behind every reported rate.

A campaign takes the first N test images the deterministic model classifies
correctly (originally misclassified images are excluded and counted), sweeps
every wrong label as the attack target, and judges each result under the
declared policy.  The attack success rate is successful pairs over attacked
pairs; the mean L2 is taken over the successful pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackResult, SinglePass
from .exceptions import ZeroActivationError
from .network import Deterministic, ModelParams, forward
from .rng import SeedStream

__all__ = ["CampaignResult", "attack_campaign"]


@dataclass
class CampaignResult:
    records: list = field(repr=False)          # JSON-lines rows, one per pair
    results: list = field(repr=False)          # AttackResult per attacked pair
    n_pairs: int = 0
    n_success: int = 0
    excluded_misclassified: int = 0
    skipped_errors: int = 0

    @property
    def attack_success_rate(self):
        return self.n_success / self.n_pairs if self.n_pairs else None

    @property
    def mean_l2(self):
        l2s = [r.l2 for r in self.results if r.success]
        return float(np.mean(l2s)) if l2s else None


def _eligible_images(params, X, y, n_images):
    """First n correctly classified images (deterministic pass) and the
    count of misclassified ones passed over."""
    picked, excluded = [], 0
    for start in range(0, X.shape[0], 256):
        if len(picked) >= n_images:
            break
        stop = min(start + 256, X.shape[0])
        preds = forward(params, X[start:stop]).labels
        for i, ok in enumerate(preds == y[start:stop], start=start):
            if len(picked) == n_images:
                break
            if ok:
                picked.append(i)
            else:
                excluded += 1
    return picked, excluded


def attack_campaign(params: ModelParams, attack, X, y, n_images, mode,
                    rng: SeedStream, policy=SinglePass(),
                    batch_size: int = 128) -> CampaignResult:
    """Attack the first eligible images on every wrong target label."""
    n_classes = params.arch.n_classes
    picked, excluded = _eligible_images(params, X, y, n_images)
    pairs = [
        (i, t) for i in picked for t in range(n_classes) if t != y[i]
    ]
    out = CampaignResult(records=[], results=[], excluded_misclassified=excluded)

    if hasattr(attack, "run_batch"):
        chunks = [pairs[s : s + batch_size] for s in range(0, len(pairs), batch_size)]
        for ci, chunk in enumerate(chunks):
            xs = np.stack([X[i] for i, _ in chunk])
            ts = [t for _, t in chunk]
            crng = rng.child(f"chunk{ci}")
            try:
                results = attack.run_batch(params, xs, ts, mode, crng, policy)
            except ZeroActivationError:
                results = []
                for j, (i, t) in enumerate(chunk):
                    prng = rng.child(f"pair/{i}/{t}")
                    try:
                        results.append(attack.run(params, X[i], t, mode, prng, policy))
                    except ZeroActivationError:
                        results.append(None)
            for (i, t), res in zip(chunk, results):
                _record(out, i, t, res)
    else:
        for i, t in pairs:
            prng = rng.child(f"pair/{i}/{t}")
            try:
                res = attack.run(params, X[i], t, mode, prng, policy)
            except ZeroActivationError:
                res = None
            _record(out, i, t, res)
    return out


def _record(out: CampaignResult, image_id, target, res: AttackResult | None):
    if res is None:
        out.skipped_errors += 1
        out.records.append({
            "image_id": int(image_id), "target": int(target),
            "success": False, "skipped": "zero-activation layer",
        })
        return
    out.n_pairs += 1
    out.n_success += int(res.success)
    out.results.append(res)
    out.records.append(res.record(int(image_id)))
