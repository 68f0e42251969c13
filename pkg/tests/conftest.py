"""Shared synthetic fixtures and oracles for the test suite."""

from __future__ import annotations

import numpy as np

from ppiaffinity import (
    Complex,
    Dataset,
    EmbeddingTable,
    SplitAssignment,
)
from ppiaffinity.splitter import SplitParams

AMINO = "ACDEFGHIKLMNPQRSTVWY"


def random_chain(rng: np.random.Generator, length: int) -> str:
    return "".join(AMINO[k] for k in rng.integers(0, len(AMINO), size=length))


def mutate_chain(rng: np.random.Generator, seq: str, n_mutations: int) -> str:
    out = list(seq)
    if n_mutations:
        for pos in rng.choice(len(out), size=min(n_mutations, len(out)), replace=False):
            out[pos] = AMINO[rng.integers(0, len(AMINO))]
    return "".join(out)


def family_dataset(
    seed: int = 0,
    n_families: int = 25,
    members_per_family: int = 4,
    chains_per_complex: int = 2,
    chain_length: int = 45,
    max_mutations: int = 3,
    n_pmids: int = 6,
    name: str = "families",
) -> Dataset:
    """Planted near-duplicate families.

    Members of one family sit within a few edits of a shared base complex,
    while distinct families are independent random sequences (pairwise edit
    distance far above any realistic threshold), so the similarity graph at
    moderate tau has exactly one component per family.
    """
    rng = np.random.default_rng(seed)
    complexes = []
    idx = 0
    for fam in range(n_families):
        base = [random_chain(rng, chain_length) for _ in range(chains_per_complex)]
        pmid = f"PM{fam % n_pmids}"
        for _ in range(members_per_family):
            chains = [
                mutate_chain(rng, c, int(rng.integers(0, max_mutations + 1)))
                for c in base
            ]
            pkd = float(np.clip(rng.normal(7.0, 2.0), 1.0, 14.0))
            complexes.append(
                Complex(id=f"c{idx:03d}", chains=chains, pkd=pkd, pmid=pmid)
            )
            idx += 1
    return Dataset(complexes=complexes, name=name)


def write_dataset_csv(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,chains,pkd,kd_molar,pmid\n")
        for c in dataset.complexes:
            fh.write(f"{c.id},{';'.join(c.chains)},{c.pkd!r},,{c.pmid}\n")


def make_index_split(
    ids: list[str],
    seed: int = 0,
    train_fraction: float = 0.6,
    val_fraction: float = 0.15,
) -> SplitAssignment:
    """Plain random index split (no similarity logic) for training tests."""
    rng = np.random.default_rng(seed)
    order = [ids[k] for k in rng.permutation(len(ids))]
    n_train = int(round(train_fraction * len(ids)))
    n_val = int(round(val_fraction * len(ids)))
    return SplitAssignment(
        train=order[:n_train],
        validation=order[n_train : n_train + n_val],
        test=order[n_train + n_val :],
        params=SplitParams(tau=None, test_ratio=1 - train_fraction - val_fraction,
                           cap_factor=1.2, val_fraction=val_fraction),
    )


def linear_regression_problem(
    seed: int = 0,
    n: int = 500,
    dim: int = 8,
    noise: float = 0.05,
    n_pmids: int = 10,
    table_name: str = "emb",
):
    """Labels are a noisy linear readout of the embedding vectors.

    Returns (dataset, table, weights, bias); the generator itself is the
    oracle for learnability checks.
    """
    rng = np.random.default_rng(seed)
    ids = [f"s{k:04d}" for k in range(n)]
    X = rng.normal(size=(n, dim))
    w = rng.normal(size=dim) / np.sqrt(dim)
    b = 7.0
    y = X @ w + b + noise * rng.normal(size=n)
    complexes = [
        Complex(
            id=cid,
            chains=[random_chain(rng, 12)],
            pkd=float(y[k]),
            pmid=f"P{k % n_pmids}",
        )
        for k, cid in enumerate(ids)
    ]
    table = EmbeddingTable(
        name=table_name, dim=dim, vectors={cid: X[k] for k, cid in enumerate(ids)}
    )
    return Dataset(complexes=complexes, name="synthetic-linear"), table, w, b


def two_source_problem(
    seed: int = 0,
    n: int = 400,
    dim_each: int = 4,
    noise: float = 0.05,
    n_pmids: int = 8,
):
    """Signal split evenly across two embedding sources.

    Either source alone explains half the label variance (Pearson ceiling
    around sqrt(0.5)); together they explain nearly all of it, so a fused
    model must beat both single-source models by a wide margin.
    """
    rng = np.random.default_rng(seed)
    ids = [f"t{k:04d}" for k in range(n)]
    XA = rng.normal(size=(n, dim_each))
    XB = rng.normal(size=(n, dim_each))
    wa = rng.normal(size=dim_each)
    wb = rng.normal(size=dim_each)
    wa /= np.linalg.norm(wa)
    wb /= np.linalg.norm(wb)
    y = XA @ wa + XB @ wb + 7.0 + noise * rng.normal(size=n)
    complexes = [
        Complex(
            id=cid,
            chains=[random_chain(rng, 12)],
            pkd=float(y[k]),
            pmid=f"P{k % n_pmids}",
        )
        for k, cid in enumerate(ids)
    ]
    table_a = EmbeddingTable(
        name="structemb", dim=dim_each, vectors={cid: XA[k] for k, cid in enumerate(ids)}
    )
    table_b = EmbeddingTable(
        name="seqemb", dim=dim_each, vectors={cid: XB[k] for k, cid in enumerate(ids)}
    )
    return Dataset(complexes=complexes, name="two-source"), table_a, table_b


def central_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Elementwise central finite differences of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for k in range(xf.size):
        bump = np.zeros_like(xf)
        bump[k] = h
        flat[k] = (f((xf + bump).reshape(x.shape)) - f((xf - bump).reshape(x.shape))) / (
            2 * h
        )
    return grad


def assert_close_grad(analytic: np.ndarray, numeric: np.ndarray, rtol: float) -> None:
    """Mixed absolute/relative gradient agreement check."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(1.0, np.abs(numeric))
    worst = np.max(np.abs(analytic - numeric) / scale)
    assert worst <= rtol, f"gradient mismatch: worst relative error {worst:.3e} > {rtol}"
