"""Leakage-safe dataset partitioning via a sequence-similarity graph.

Two complexes are linked whenever the chain-averaged minimum edit distance
in either direction falls at or below a threshold tau. Connected components
of that graph then move between splits as indivisible units, so no pair of
near-duplicate complexes can ever straddle a split boundary.

The component-to-split assignment is a greedy fill: components are visited
in a fixed order (largest first, ties broken by smallest member id) and a
component joins the test side while the test set is still below its target
ratio r and adding the component would not overshoot cap_factor * r of the
dataset. Everything else lands in train. An optional second pass carves a
validation set out of the train side with the same rule.

The pairwise distance is asymmetric: D(a, b) averages, over the chains of
a, the minimum Levenshtein distance to any chain of b. The edge rule uses
either direction, matching an ordered-pair scan that inserts undirected
edges.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetValidationError, ParseError
from .ingest import Complex, Dataset

DEFAULT_TAU = 20.0
DEFAULT_TEST_RATIO = 0.40
DEFAULT_CAP_FACTOR = 1.2
DEFAULT_VAL_FRACTION = 0.15


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance (insert, delete, substitute each cost 1).

    Row-vectorized dynamic program. The deletion chain inside a row is a
    min-plus prefix relaxation, computed exactly in one pass as
    ``minimum.accumulate(base - j) + j``.
    """
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    ca = np.fromiter((ord(c) for c in a), dtype=np.int64, count=la)
    cb = np.fromiter((ord(c) for c in b), dtype=np.int64, count=lb)
    offsets = np.arange(lb + 1)
    prev = offsets.copy()
    base = np.empty(lb + 1, dtype=np.int64)
    for i in range(la):
        base[0] = i + 1
        np.minimum(prev[1:] + 1, prev[:-1] + (cb != ca[i]), out=base[1:])
        prev = np.minimum.accumulate(base - offsets) + offsets
    return int(prev[-1])


def complex_distance(a: Complex, b: Complex) -> float:
    """Mean over chains of ``a`` of the minimum edit distance to ``b``.

    Asymmetric in (a, b): the average runs over a's chains only.
    """
    if not a.chains or not b.chains:
        raise ValueError("complex_distance requires at least one chain on each side")
    total = 0
    for chain_a in a.chains:
        total += min(levenshtein(chain_a, chain_b) for chain_b in b.chains)
    return total / len(a.chains)


@dataclass
class DistanceMatrix:
    """Dense pairwise distances; entry (i, j) is D(ids[i], ids[j]).

    Not assumed symmetric. Stored as float32, the same dtype as the disk
    cache, so a computed and a cache-loaded matrix are bit-identical.
    """

    ids: list[str]
    values: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.shape != (n, n):
            raise DatasetValidationError(
                f"distance matrix shape {self.values.shape} does not match {n} ids"
            )
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise DatasetValidationError("distances must be finite and non-negative")
        if np.any(np.diagonal(self.values) != 0):
            raise DatasetValidationError("distance matrix diagonal must be zero")

    def lookup(self) -> dict[str, int]:
        return {cid: k for k, cid in enumerate(self.ids)}


def dataset_content_hash(dataset: Dataset) -> str:
    """Hash of the (id, chains) content that distances depend on."""
    payload = json.dumps(
        [[c.id, c.chains] for c in dataset.complexes], separators=(",", ":")
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def save_distance_matrix(matrix: DistanceMatrix, path) -> None:
    """Write a matrix cache: one JSON header line, then row-major <f4 bytes."""
    header = json.dumps(
        {"ids": matrix.ids, "dtype": "<f4", "shape": list(matrix.values.shape)},
        sort_keys=True,
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f4").tobytes())


def load_distance_matrix(path) -> DistanceMatrix:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad distance cache header: {exc}", path=path, line=1)
        blob = fh.read()
    ids = header["ids"]
    n = len(ids)
    values = np.frombuffer(blob, dtype="<f4")
    if values.size != n * n:
        raise ParseError(
            f"distance cache holds {values.size} floats, expected {n * n}", path=path
        )
    return DistanceMatrix(ids=ids, values=values.reshape(n, n).copy())


def compute_distance_matrix(dataset: Dataset, cache_dir=None) -> DistanceMatrix:
    """All-pairs complex distances, deduplicating repeated chain sequences.

    The chain-level edit distances dominate the O(n^2) cost, so they are
    computed once per unique unordered chain pair. When ``cache_dir`` is
    given the finished matrix is cached on disk keyed by the dataset's
    content hash, making repeat splits cheap.
    """
    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"distmat_{dataset_content_hash(dataset)}.f4"
        if cache_path.exists():
            cached = load_distance_matrix(cache_path)
            if cached.ids == dataset.ids():
                return cached
    ids = dataset.ids()
    chain_lists = [c.chains for c in dataset.complexes]
    for cid, chains in zip(ids, chain_lists):
        if not chains:
            raise DatasetValidationError(f"complex {cid!r} has no chains")
    unique = sorted({ch for chains in chain_lists for ch in chains})
    index = {ch: k for k, ch in enumerate(unique)}
    u = len(unique)
    chain_d = np.zeros((u, u), dtype=np.float64)
    for i in range(u):
        for j in range(i + 1, u):
            d = levenshtein(unique[i], unique[j])
            chain_d[i, j] = chain_d[j, i] = d
    members = [np.array([index[ch] for ch in chains]) for chains in chain_lists]
    n = len(ids)
    values = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        rows = chain_d[members[i]]
        for j in range(n):
            if i == j:
                continue
            values[i, j] = rows[:, members[j]].min(axis=1).mean()
    matrix = DistanceMatrix(ids=ids, values=values.astype(np.float32))
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        save_distance_matrix(matrix, cache_path)
    return matrix


def build_similarity_graph(
    dataset: Dataset, tau: float, matrix: DistanceMatrix | None = None
) -> dict[str, set[str]]:
    """Undirected graph over ids with an edge where either direction is near.

    Edge {i, j} exists iff D(i, j) <= tau or D(j, i) <= tau; the ordered-pair
    scan inserts an undirected edge whenever one direction qualifies.
    """
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    if matrix is None:
        matrix = compute_distance_matrix(dataset)
    ids = matrix.ids
    near = matrix.values <= tau
    np.fill_diagonal(near, False)
    near |= near.T
    adjacency: dict[str, set[str]] = {cid: set() for cid in ids}
    for i, j in zip(*np.nonzero(near)):
        adjacency[ids[i]].add(ids[j])
    return adjacency


def connected_components(graph: dict[str, set[str]]) -> list[list[str]]:
    """Maximal connected vertex sets; isolated vertices come out as singletons.

    Union-find with path compression. Members are sorted within each
    component and components are ordered by their smallest member, so the
    output is deterministic for a given graph.
    """
    parent = {v: v for v in graph}

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for v, neighbors in graph.items():
        for w in neighbors:
            if w not in parent:
                raise DatasetValidationError(f"edge endpoint {w!r} is not a vertex")
            rv, rw = find(v), find(w)
            if rv != rw:
                parent[max(rv, rw)] = min(rv, rw)

    groups: dict[str, list[str]] = {}
    for v in sorted(graph):
        groups.setdefault(find(v), []).append(v)
    return sorted(groups.values(), key=lambda comp: comp[0])


@dataclass
class SplitParams:
    tau: float | None
    test_ratio: float
    cap_factor: float
    val_fraction: float = 0.0

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "test_ratio": self.test_ratio,
            "cap_factor": self.cap_factor,
            "val_fraction": self.val_fraction,
        }


@dataclass
class SplitAssignment:
    """Disjoint train/validation/test partition with component provenance.

    ``components`` lists every connected component in the deterministic
    order the greedy pass visited them; each component's members occupy
    exactly one of the three splits.
    """

    train: list[str]
    test: list[str]
    params: SplitParams
    validation: list[str] = field(default_factory=list)
    components: list[list[str]] = field(default_factory=list)
    min_cross_split_distance: float | None = None

    def all_ids(self) -> list[str]:
        return self.train + self.validation + self.test

    def validate(self) -> None:
        splits = [self.train, self.validation, self.test]
        union: set[str] = set()
        total = 0
        for part in splits:
            union.update(part)
            total += len(part)
        if total != len(union):
            raise DatasetValidationError("splits are not disjoint")
        members = {cid for comp in self.components for cid in comp}
        if self.components and union != members:
            raise DatasetValidationError("split union differs from component members")
        for comp in self.components:
            homes = {
                name
                for name, part in zip(("train", "validation", "test"), splits)
                if any(cid in set(part) for cid in comp)
            }
            if len(homes) > 1:
                raise DatasetValidationError(
                    f"component {comp[:3]}... straddles splits {sorted(homes)}"
                )

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "train": self.train,
            "validation": self.validation,
            "test": self.test,
            "components": self.components,
            "min_cross_split_distance": self.min_cross_split_distance,
        }


def _ordered_components(components: list[list[str]]) -> list[list[str]]:
    # Greedy visiting order: descending size, ties by smallest member id.
    # Large-first keeps one giant component from starving the test set.
    return sorted(components, key=lambda comp: (-len(comp), min(comp)))


def _greedy_fill(
    components: list[list[str]], n_total: int, ratio: float, cap_factor: float
) -> tuple[list[str], list[str]]:
    """One greedy pass: returns (selected, remainder) id lists."""
    selected: list[str] = []
    remainder: list[str] = []
    target = ratio * n_total
    cap = cap_factor * ratio * n_total
    for comp in components:
        if len(selected) < target and len(selected) + len(comp) <= cap:
            selected.extend(comp)
        else:
            remainder.extend(comp)
    return selected, remainder


def assign_splits(
    components: list[list[str]],
    n_total: int,
    r: float = DEFAULT_TEST_RATIO,
    cap_factor: float = DEFAULT_CAP_FACTOR,
    tau: float | None = None,
) -> SplitAssignment:
    """Greedy component-to-split assignment.

    A component joins the test set iff the test set is still smaller than
    r * n_total and would stay within cap_factor * r * n_total after the
    addition; otherwise it joins train.
    """
    if not components:
        raise DatasetValidationError("cannot assign splits with no components")
    if not (0 < r < 1):
        raise ValueError(f"test ratio must lie in (0, 1), got {r}")
    if cap_factor < 1:
        raise ValueError(f"cap_factor must be >= 1, got {cap_factor}")
    ordered = [sorted(comp) for comp in _ordered_components(components)]
    test, train = _greedy_fill(ordered, n_total, r, cap_factor)
    assignment = SplitAssignment(
        train=train,
        test=test,
        params=SplitParams(tau=tau, test_ratio=r, cap_factor=cap_factor),
        components=ordered,
    )
    assignment.validate()
    return assignment


def _min_cross_distance(
    matrix: DistanceMatrix, assignment: SplitAssignment
) -> float | None:
    pos = matrix.lookup()
    groups = [assignment.train, assignment.validation, assignment.test]
    best = None
    for gi in groups:
        for gj in groups:
            if gi is gj or not gi or not gj:
                continue
            sub = matrix.values[
                np.ix_([pos[a] for a in gi], [pos[b] for b in gj])
            ]
            low = float(sub.min())
            if best is None or low < best:
                best = low
    return best


def make_split(
    dataset: Dataset,
    tau: float = DEFAULT_TAU,
    r: float = DEFAULT_TEST_RATIO,
    cap_factor: float = DEFAULT_CAP_FACTOR,
    val_fraction: float = DEFAULT_VAL_FRACTION,
    cache_dir=None,
) -> SplitAssignment:
    """Distance matrix -> similarity graph -> components -> greedy splits.

    When ``val_fraction`` > 0 a second greedy pass over the train-side
    components carves out a validation set with the same rule, preserving
    the no-near-duplicates-across-splits guarantee for all three splits.
    The minimum distance across any ordered cross-split pair is attached
    as metadata (None when some split is empty).
    """
    if not (0 <= val_fraction < 1):
        raise ValueError(f"val_fraction must lie in [0, 1), got {val_fraction}")
    matrix = compute_distance_matrix(dataset, cache_dir=cache_dir)
    graph = build_similarity_graph(dataset, tau, matrix=matrix)
    components = connected_components(graph)
    assignment = assign_splits(components, len(dataset), r, cap_factor, tau=tau)
    assignment.params.val_fraction = val_fraction
    if val_fraction > 0 and assignment.train:
        train_members = set(assignment.train)
        train_comps = [c for c in assignment.components if c[0] in train_members]
        validation, train = _greedy_fill(
            train_comps, len(assignment.train), val_fraction, cap_factor
        )
        assignment.train = train
        assignment.validation = validation
        assignment.validate()
    assignment.min_cross_split_distance = _min_cross_distance(matrix, assignment)
    return assignment


def save_split(assignment: SplitAssignment, path) -> None:
    """Serialize to the split JSON document (stable key order, 2-space indent)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(assignment.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_split(path) -> SplitAssignment:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    params = doc.get("params", {})
    assignment = SplitAssignment(
        train=list(doc["train"]),
        test=list(doc["test"]),
        validation=list(doc.get("validation", [])),
        components=[list(c) for c in doc.get("components", [])],
        params=SplitParams(
            tau=params.get("tau"),
            test_ratio=params.get("test_ratio", DEFAULT_TEST_RATIO),
            cap_factor=params.get("cap_factor", DEFAULT_CAP_FACTOR),
            val_fraction=params.get("val_fraction", 0.0),
        ),
        min_cross_split_distance=doc.get("min_cross_split_distance"),
    )
    assignment.validate()
    return assignment


def audit_split(dataset: Dataset, assignment: SplitAssignment, tau: float) -> dict:
    """Exhaustive post-hoc leakage scan, independent of the split pipeline.

    Recomputes every ordered cross-split distance directly with
    :func:`complex_distance` (no matrix reuse) and counts pairs at or below
    tau. Quadratic in the dataset; intended for audits at benchmark scale.
    """
    by_id = dataset.by_id()
    splits = {
        "train": assignment.train,
        "validation": assignment.validation,
        "test": assignment.test,
    }
    n_leaky = 0
    minimum = None
    for name_a, ids_a in splits.items():
        for name_b, ids_b in splits.items():
            if name_a == name_b:
                continue
            for ida in ids_a:
                for idb in ids_b:
                    d = complex_distance(by_id[ida], by_id[idb])
                    if minimum is None or d < minimum:
                        minimum = d
                    if d <= tau:
                        n_leaky += 1
    return {
        "tau": tau,
        "min_cross_split_distance": minimum,
        "n_leaky_ordered_pairs": n_leaky,
        "split_sizes": {name: len(ids) for name, ids in splits.items()},
    }
