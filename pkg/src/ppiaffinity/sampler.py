"""PMID-homogeneous batch planning.

The rank term of the training objective compares predictions within a
batch, so every batch is drawn from a single study (PMID) to keep
study-wise measurement offsets from polluting the pairwise signal. Ids are
grouped by PMID, each group and the group order are shuffled per epoch with
a seeded generator, and each group is chunked into batches of at most
``batch_size``. Partial trailing chunks are kept: small studies dominate
affinity data, and dropping them would bias coverage. Singleton batches
train through the Huber term alone (no pairs, no rank signal).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetValidationError

DEFAULT_BATCH_SIZE = 8


@dataclass
class BatchPlan:
    """Per-epoch batch schedule; every batch shares one PMID.

    ``epochs[e]`` is an ordered list of batches, each a list of complex ids.
    ``pmid_of`` is retained for audits (homogeneity checks, histograms).
    """

    epochs: list[list[list[str]]]
    seed: int
    batch_size: int
    pmid_of: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "pmid_of": self.pmid_of,
        }


def plan_batches(
    train_ids: list[str],
    pmid_of: dict[str, str],
    batch_size: int = DEFAULT_BATCH_SIZE,
    epochs: int = 1,
    seed: int = 0,
) -> BatchPlan:
    """Build a deterministic PMID-homogeneous batch plan.

    Within one epoch every training id appears exactly once across all
    batches. Ids missing from ``pmid_of`` raise: ingest guarantees
    placeholder PMIDs, so a gap here signals a wiring bug.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    missing = [cid for cid in train_ids if cid not in pmid_of]
    if missing:
        raise DatasetValidationError(
            f"ids without a PMID (wiring bug upstream of the sampler): {missing[:5]}"
        )
    groups: dict[str, list[str]] = {}
    for cid in train_ids:
        groups.setdefault(pmid_of[cid], []).append(cid)
    group_keys = sorted(groups)
    rng = np.random.default_rng(seed)
    plan_epochs = []
    for _ in range(epochs):
        order = [group_keys[k] for k in rng.permutation(len(group_keys))]
        batches = []
        for pmid in order:
            members = groups[pmid]
            shuffled = [members[k] for k in rng.permutation(len(members))]
            for start in range(0, len(shuffled), batch_size):
                batches.append(shuffled[start : start + batch_size])
        plan_epochs.append(batches)
    relevant = {cid: pmid_of[cid] for cid in train_ids}
    return BatchPlan(
        epochs=plan_epochs, seed=seed, batch_size=batch_size, pmid_of=relevant
    )


def batch_coverage_report(plan: BatchPlan) -> dict:
    """Per-epoch audit counts.

    Singleton batches receive zero rank-loss signal, so their fraction is
    the headline number; the histogram gives ids and batches per PMID.
    """
    epochs = []
    for batches in plan.epochs:
        n_batches = len(batches)
        singletons = sum(1 for b in batches if len(b) == 1)
        histogram: dict[str, dict[str, int]] = {}
        for batch in batches:
            pmid = plan.pmid_of.get(batch[0], "?")
            entry = histogram.setdefault(pmid, {"ids": 0, "batches": 0})
            entry["ids"] += len(batch)
            entry["batches"] += 1
        epochs.append(
            {
                "batches": n_batches,
                "singleton_fraction": (singletons / n_batches) if n_batches else 0.0,
                "pmid_histogram": dict(sorted(histogram.items())),
            }
        )
    return {"seed": plan.seed, "batch_size": plan.batch_size, "epochs": epochs}


def save_plan(plan: BatchPlan, path) -> None:
    """Serialize the plan to JSON for audit."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan(path) -> BatchPlan:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return BatchPlan(
        epochs=[[list(b) for b in epoch] for epoch in doc["epochs"]],
        seed=doc["seed"],
        batch_size=doc["batch_size"],
        pmid_of=dict(doc.get("pmid_of", {})),
    )
