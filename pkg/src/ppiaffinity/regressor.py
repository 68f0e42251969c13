"""He-initialized MLP affinity head over precomputed embeddings.

Complex embeddings arrive as opaque tables (one per source model, e.g. a
structure-derived table and a sequence-derived table); this module never
runs the models that produced them. A single-source model is an MLP head
mapping one table's vectors to pKd. A combined model concatenates the
vectors of several tables in declared order and applies a trained linear
projection, optionally routed through an MLP head.

Training is minibatch descent (SGD or Adam) on the composite
Huber-plus-rank objective, following a PMID-homogeneous batch plan. Model
selection keeps the parameters with the best validation Spearman seen
during the run. Per-dimension z-scoring of the inputs, fit on the train
split only, is applied by default: concatenated sources with different
scales would otherwise bias the projection.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    DatasetValidationError,
    ParseError,
    TrainingDivergedError,
)
from .ingest import Dataset
from .losses import LossConfig, composite_loss
from .metrics import evaluate
from .sampler import BatchPlan
from .seeding import substream_seed
from .splitter import SplitAssignment

OPTIMIZERS = ("sgd", "adam")
FUSION_MODES = ("linear", "mlp")


# ---------------------------------------------------------------------------
# Embedding tables
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingTable:
    """Map from complex id to a fixed-dimension real vector for one source."""

    name: str
    dim: int
    vectors: dict[str, np.ndarray]

    def __post_init__(self):
        if self.dim <= 0:
            raise DatasetValidationError(f"embedding dim must be positive, got {self.dim}")
        coerced = {}
        for cid, vec in self.vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise DatasetValidationError(
                    f"table {self.name!r}: vector for {cid!r} has shape {arr.shape}, "
                    f"expected ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise DatasetValidationError(
                    f"table {self.name!r}: non-finite entries in vector for {cid!r}"
                )
            coerced[cid] = arr
        self.vectors = coerced

    def __len__(self) -> int:
        return len(self.vectors)


def save_embedding_table(table: EmbeddingTable, path) -> None:
    """Binary table format: JSON header line, then row-major <f4 vectors."""
    ids = list(table.vectors)
    header = json.dumps(
        {"name": table.name, "dim": table.dim, "count": len(ids), "ids": ids},
        sort_keys=True,
    )
    stacked = (
        np.stack([table.vectors[cid] for cid in ids])
        if ids
        else np.empty((0, table.dim))
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(stacked, dtype="<f4").tobytes())


def _load_embedding_binary(path, name):
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad embedding header: {exc}", path=path, line=1)
        blob = fh.read()
    dim = int(header["dim"])
    ids = list(header["ids"])
    values = np.frombuffer(blob, dtype="<f4")
    if values.size != len(ids) * dim:
        raise ParseError(
            f"embedding blob holds {values.size} floats, expected {len(ids) * dim}",
            path=path,
        )
    rows = values.reshape(len(ids), dim).astype(np.float64)
    return EmbeddingTable(
        name=name or header.get("name") or Path(path).stem,
        dim=dim,
        vectors={cid: rows[k] for k, cid in enumerate(ids)},
    )


def _load_embedding_csv(path, name):
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, newline="", encoding="utf-8") as fh:
        for line_num, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            cells = [cell.strip() for cell in row]
            try:
                values = [float(cell) for cell in cells[1:]]
            except ValueError:
                if line_num == 1:
                    continue  # header row
                raise ParseError("unparseable embedding values", path=path, line=line_num)
            if len(values) == 0:
                raise ParseError("row has no embedding values", path=path, line=line_num)
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ParseError(
                    f"row has {len(values)} values, expected {dim}", path=path, line=line_num
                )
            if cells[0] in vectors:
                raise ParseError(f"duplicate id {cells[0]!r}", path=path, line=line_num)
            vectors[cells[0]] = np.array(values)
    if dim is None:
        raise ParseError("no embedding rows found", path=path)
    return EmbeddingTable(name=name or Path(path).stem, dim=dim, vectors=vectors)


def load_embedding_table(path, name: str | None = None, format: str | None = None) -> EmbeddingTable:
    """Load a table from the binary format or CSV (id, v0..v_{dim-1})."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"embedding table not found: {path}")
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "binary"
    if format == "csv":
        return _load_embedding_csv(path, name)
    if format == "binary":
        return _load_embedding_binary(path, name)
    raise ValueError(f"unknown embedding format {format!r}")


def fuse(tables: list[EmbeddingTable], complex_id: str) -> np.ndarray:
    """Concatenate one id's vectors across tables in declared order."""
    parts = []
    for table in tables:
        vec = table.vectors.get(complex_id)
        if vec is None:
            raise AlignmentError(
                f"id {complex_id!r} missing from embedding table {table.name!r}"
            )
        parts.append(vec)
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# Heads
# ---------------------------------------------------------------------------


@dataclass
class MlpHead:
    """Affine-ReLU chain ending in a single affine scalar output.

    ``weights[l]`` has shape (fan_in, fan_out); forward is x @ W + b.
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"


def he_init(layer_dims, seed: int) -> MlpHead:
    """Weights i.i.d. normal with variance 2 / fan_in per layer, zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError("layer_dims needs at least an input and an output entry")
    if any(d <= 0 for d in dims):
        raise ValueError(f"layer dims must be positive, got {dims}")
    if dims[-1] != 1:
        raise ValueError(f"final output dimension must be 1, got {dims[-1]}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = math.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpHead(layer_dims=dims, weights=weights, biases=biases)


def forward_batch(head: MlpHead, X: np.ndarray) -> tuple[np.ndarray, dict]:
    """Predictions for a batch of rows plus the cache needed by backward."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != head.layer_dims[0]:
        raise ValueError(
            f"input has shape {X.shape}, head expects (*, {head.layer_dims[0]})"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input to forward pass")
    inputs = []
    preacts = []
    h = X
    last = len(head.weights) - 1
    for l, (w, b) in enumerate(zip(head.weights, head.biases)):
        inputs.append(h)
        z = h @ w + b
        preacts.append(z)
        h = z if l == last else np.maximum(z, 0.0)
    cache = {"kind": "mlp", "inputs": inputs, "preacts": preacts}
    return h[:, 0], cache


def backward_batch(
    head: MlpHead, cache: dict, dl_dpreds: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Parameter gradients and the input gradient for a batch.

    ReLU takes subgradient 0 at 0. Returns (dweights, dbiases, dX).
    """
    n_layers = len(head.weights)
    if (
        cache.get("kind") != "mlp"
        or len(cache.get("inputs", ())) != n_layers
        or len(cache.get("preacts", ())) != n_layers
    ):
        raise ValueError("stale or mismatched forward cache")
    inputs = cache["inputs"]
    preacts = cache["preacts"]
    delta = np.asarray(dl_dpreds, dtype=np.float64).reshape(-1, 1)
    if delta.shape[0] != inputs[0].shape[0]:
        raise ValueError("gradient batch size does not match the cached forward pass")
    dweights: list[np.ndarray] = [np.empty(0)] * n_layers
    dbiases: list[np.ndarray] = [np.empty(0)] * n_layers
    for l in range(n_layers - 1, -1, -1):
        dweights[l] = inputs[l].T @ delta
        dbiases[l] = delta.sum(axis=0)
        delta = delta @ head.weights[l].T
        if l > 0:
            delta = delta * (preacts[l - 1] > 0)
    return dweights, dbiases, delta


def forward(head: MlpHead, x: np.ndarray) -> tuple[float, dict]:
    """Single-vector forward pass; returns (prediction, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward expects a 1-D vector; use forward_batch for matrices")
    preds, cache = forward_batch(head, x[None, :])
    return float(preds[0]), cache


def backward(head: MlpHead, cache: dict, dl_dpred: float) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Single-prediction chain rule; returns (dweights, dbiases)."""
    dweights, dbiases, _ = backward_batch(head, cache, np.array([dl_dpred]))
    return dweights, dbiases


@dataclass
class FusionHead:
    """Concatenation fusion: linear projection, optionally into an MLP head.

    With ``downstream`` None the projection maps straight to the scalar
    prediction (output dim 1); otherwise its output feeds the MLP.
    """

    sources: list[str]
    proj_w: np.ndarray
    proj_b: np.ndarray
    downstream: MlpHead | None = None

    def __post_init__(self):
        out_dim = self.proj_w.shape[1]
        if self.downstream is None:
            if out_dim != 1:
                raise ValueError("direct-output fusion projection must have out dim 1")
        elif self.downstream.layer_dims[0] != out_dim:
            raise ValueError(
                f"projection out dim {out_dim} does not match downstream input "
                f"{self.downstream.layer_dims[0]}"
            )


def init_fusion(
    sources: list[str],
    input_dim: int,
    seed: int,
    mode: str = "linear",
    proj_dim: int = 64,
    hidden_dims: tuple[int, ...] = (64, 64),
) -> FusionHead:
    """He-initialized fusion head over the concatenated input."""
    if len(sources) < 2:
        raise ValueError("fusion requires at least two embedding sources")
    if mode not in FUSION_MODES:
        raise ValueError(f"fusion mode must be one of {FUSION_MODES}, got {mode!r}")
    rng = np.random.default_rng(seed)
    out_dim = 1 if mode == "linear" else proj_dim
    scale = math.sqrt(2.0 / input_dim)
    proj_w = rng.normal(0.0, scale, size=(input_dim, out_dim))
    proj_b = np.zeros(out_dim)
    downstream = None
    if mode == "mlp":
        downstream = he_init(
            [out_dim, *hidden_dims, 1], seed=substream_seed(seed, "fusion-downstream")
        )
    return FusionHead(
        sources=list(sources), proj_w=proj_w, proj_b=proj_b, downstream=downstream
    )


def fusion_forward_batch(head: FusionHead, X: np.ndarray) -> tuple[np.ndarray, dict]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != head.proj_w.shape[0]:
        raise ValueError(
            f"input has shape {X.shape}, projection expects (*, {head.proj_w.shape[0]})"
        )
    z = X @ head.proj_w + head.proj_b
    if head.downstream is None:
        return z[:, 0], {"kind": "fusion", "x": X, "inner": None}
    preds, inner = forward_batch(head.downstream, z)
    return preds, {"kind": "fusion", "x": X, "inner": inner}


def fusion_backward_batch(head: FusionHead, cache: dict, dl_dpreds: np.ndarray):
    if cache.get("kind") != "fusion":
        raise ValueError("stale or mismatched forward cache")
    X = cache["x"]
    delta = np.asarray(dl_dpreds, dtype=np.float64).reshape(-1, 1)
    down_grads: list[np.ndarray] = []
    if head.downstream is None:
        dz = delta
    else:
        dweights, dbiases, dz = backward_batch(head.downstream, cache["inner"], dl_dpreds)
        for dw, db in zip(dweights, dbiases):
            down_grads.extend((dw, db))
    dproj_w = X.T @ dz
    dproj_b = dz.sum(axis=0)
    return [dproj_w, dproj_b, *down_grads]


# ---------------------------------------------------------------------------
# Standardization and the trained-model wrapper
# ---------------------------------------------------------------------------


@dataclass
class Standardizer:
    """Per-dimension z-score transform fit on the train split only."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


def fit_standardizer(X: np.ndarray) -> Standardizer:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # constant dimensions map to zero instead of dividing by zero
    std = np.where(std > 0, std, 1.0)
    return Standardizer(mean=mean, std=std)


@dataclass
class AffinityModel:
    """A trained head plus everything needed to reproduce its inputs."""

    head: MlpHead | FusionHead
    sources: list[str]
    source_dims: list[int]
    standardizer: Standardizer | None = None


def _model_params(head) -> list[np.ndarray]:
    if isinstance(head, MlpHead):
        params = []
        for w, b in zip(head.weights, head.biases):
            params.extend((w, b))
        return params
    params = [head.proj_w, head.proj_b]
    if head.downstream is not None:
        params.extend(_model_params(head.downstream))
    return params


def _model_forward(head, X):
    if isinstance(head, MlpHead):
        return forward_batch(head, X)
    return fusion_forward_batch(head, X)


def _model_backward(head, cache, dl_dpreds) -> list[np.ndarray]:
    if isinstance(head, MlpHead):
        dweights, dbiases, _ = backward_batch(head, cache, dl_dpreds)
        grads = []
        for dw, db in zip(dweights, dbiases):
            grads.extend((dw, db))
        return grads
    return fusion_backward_batch(head, cache, dl_dpreds)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    """Optimization settings; the root seed feeds named substreams."""

    lr: float = 1e-3
    epochs: int = 50
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    batch_size: int = 8
    hidden_dims: tuple[int, ...] = (64, 64)
    standardize: bool = True
    fusion_mode: str = "linear"
    proj_dim: int = 64

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(
                f"fusion_mode must be one of {FUSION_MODES}, got {self.fusion_mode!r}"
            )
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")


class _Optimizer:
    """Plain SGD or Adam over a flat parameter list, updated in place."""

    def __init__(self, config: TrainConfig, params: list[np.ndarray]):
        self.config = config
        self.t = 0
        if config.optimizer == "adam":
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        cfg = self.config
        self.t += 1
        for k, (p, g) in enumerate(zip(params, grads)):
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p
            if cfg.optimizer == "sgd":
                p -= cfg.lr * g
            else:
                m = self.m[k]
                v = self.v[k]
                m *= cfg.beta1
                m += (1 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1 - cfg.beta2) * g * g
                m_hat = m / (1 - cfg.beta1**self.t)
                v_hat = v / (1 - cfg.beta2**self.t)
                p -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)


def _design_matrix(tables, ids, standardizer=None) -> np.ndarray:
    if not ids:
        return np.empty((0, sum(t.dim for t in tables)))
    X = np.stack([fuse(tables, cid) for cid in ids])
    if standardizer is not None:
        X = standardizer.transform(X)
    return X


def _check_plan_coverage(plan: BatchPlan, train_ids: list[str]) -> None:
    expected = sorted(train_ids)
    for e, batches in enumerate(plan.epochs):
        flat = sorted(cid for batch in batches for cid in batch)
        if flat != expected:
            raise DatasetValidationError(
                f"batch plan epoch {e} does not cover the train split exactly"
            )


def train(
    dataset: Dataset,
    split: SplitAssignment,
    tables: list[EmbeddingTable] | EmbeddingTable,
    config: TrainConfig,
    plan: BatchPlan,
) -> tuple[AffinityModel, list[dict]]:
    """Minibatch descent on the composite loss over the given batch plan.

    Logs train loss and validation Pearson/Spearman/RMSE per epoch and
    returns the parameters with the best validation Spearman seen
    (final-epoch parameters when there is no usable validation signal).
    Weight init draws from the "init" substream of ``config.seed``.
    """
    if isinstance(tables, EmbeddingTable):
        tables = [tables]
    tables = list(tables)
    if not tables:
        raise ValueError("at least one embedding table is required")
    if config.loss.rank_variant == "verbatim" and config.loss.lam == 0.0:
        warnings.warn(
            "the verbatim rank objective has zero gradient almost everywhere; "
            "with lam=0 parameters will not update",
            stacklevel=2,
        )
    labels = dataset.labels()
    train_ids = list(split.train)
    val_ids = list(split.validation)
    if not train_ids:
        raise DatasetValidationError("train split is empty")
    for cid in train_ids + val_ids:
        if cid not in labels:
            raise AlignmentError(f"split id {cid!r} is not in the dataset")
    _check_plan_coverage(plan, train_ids)

    raw_train = _design_matrix(tables, train_ids)
    standardizer = fit_standardizer(raw_train) if config.standardize else None
    X_train = standardizer.transform(raw_train) if standardizer else raw_train
    X_val = _design_matrix(tables, val_ids, standardizer)
    y_train = np.array([labels[cid] for cid in train_ids])
    y_val = np.array([labels[cid] for cid in val_ids])
    row_of = {cid: k for k, cid in enumerate(train_ids)}

    input_dim = sum(t.dim for t in tables)
    init_seed = substream_seed(config.seed, "init")
    if len(tables) == 1:
        head: MlpHead | FusionHead = he_init(
            [input_dim, *config.hidden_dims, 1], seed=init_seed
        )
    else:
        head = init_fusion(
            [t.name for t in tables],
            input_dim,
            seed=init_seed,
            mode=config.fusion_mode,
            proj_dim=config.proj_dim,
            hidden_dims=config.hidden_dims,
        )
    params = _model_params(head)
    optimizer = _Optimizer(config, params)

    log: list[dict] = []
    best_spearman = None
    best_params = None
    for epoch, batches in enumerate(plan.epochs):
        loss_sum = 0.0
        n_seen = 0
        for b_idx, batch in enumerate(batches):
            rows = [row_of[cid] for cid in batch]
            Xb = X_train[rows]
            yb = y_train[rows]
            preds, cache = _model_forward(head, Xb)
            if not np.all(np.isfinite(preds)):
                raise TrainingDivergedError(
                    f"non-finite predictions at epoch {epoch}, batch {b_idx} "
                    f"(pmid {plan.pmid_of.get(batch[0], '?')}, size {len(batch)})"
                )
            out = composite_loss(yb, preds, config.loss)
            if not np.isfinite(out.total):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {b_idx} "
                    f"(pmid {plan.pmid_of.get(batch[0], '?')}, size {len(batch)})"
                )
            grads = _model_backward(head, cache, out.grad)
            optimizer.step(params, grads)
            loss_sum += out.total * len(batch)
            n_seen += len(batch)
        entry = {
            "epoch": epoch,
            "train_loss": loss_sum / n_seen if n_seen else float("nan"),
            "val_pearson": None,
            "val_spearman": None,
            "val_rmse": None,
        }
        if val_ids:
            val_preds, _ = _model_forward(head, X_val)
            if not np.all(np.isfinite(val_preds)):
                raise TrainingDivergedError(
                    f"non-finite validation predictions at epoch {epoch}"
                )
            report = evaluate(
                dict(zip(val_ids, val_preds)), dict(zip(val_ids, y_val))
            )
            entry["val_pearson"] = report.pearson
            entry["val_spearman"] = report.spearman
            entry["val_rmse"] = report.rmse
            if report.spearman is not None and (
                best_spearman is None or report.spearman > best_spearman
            ):
                best_spearman = report.spearman
                best_params = [p.copy() for p in params]
        log.append(entry)
    if best_params is not None:
        for p, snapshot in zip(params, best_params):
            p[:] = snapshot
    model = AffinityModel(
        head=head,
        sources=[t.name for t in tables],
        source_dims=[t.dim for t in tables],
        standardizer=standardizer,
    )
    return model, log


def predict(
    model: AffinityModel, tables: list[EmbeddingTable] | EmbeddingTable, ids: list[str]
) -> dict[str, float]:
    """Deterministic forward pass per id, aligned to the model's sources."""
    if isinstance(tables, EmbeddingTable):
        tables = [tables]
    by_name = {t.name: t for t in tables}
    ordered = []
    for src, dim in zip(model.sources, model.source_dims):
        table = by_name.get(src)
        if table is None:
            raise AlignmentError(f"model needs embedding table {src!r}, not supplied")
        if table.dim != dim:
            raise AlignmentError(
                f"table {src!r} has dim {table.dim}, model was trained with {dim}"
            )
        ordered.append(table)
    ids = list(ids)
    if not ids:
        return {}
    X = _design_matrix(ordered, ids, model.standardizer)
    preds, _ = _model_forward(model.head, X)
    return {cid: float(p) for cid, p in zip(ids, preds)}


# ---------------------------------------------------------------------------
# Checkpoints (JSON header line + <f8 parameter blob)
# ---------------------------------------------------------------------------


def _named_arrays(model: AffinityModel) -> list[tuple[str, np.ndarray]]:
    arrays: list[tuple[str, np.ndarray]] = []
    head = model.head
    if isinstance(head, MlpHead):
        for l, (w, b) in enumerate(zip(head.weights, head.biases)):
            arrays.append((f"w{l}", w))
            arrays.append((f"b{l}", b))
    else:
        arrays.append(("proj_w", head.proj_w))
        arrays.append(("proj_b", head.proj_b))
        if head.downstream is not None:
            for l, (w, b) in enumerate(
                zip(head.downstream.weights, head.downstream.biases)
            ):
                arrays.append((f"down_w{l}", w))
                arrays.append((f"down_b{l}", b))
    if model.standardizer is not None:
        arrays.append(("scale_mean", model.standardizer.mean))
        arrays.append(("scale_std", model.standardizer.std))
    return arrays


def save_model(model: AffinityModel, path) -> None:
    arrays = _named_arrays(model)
    head = model.head
    meta = {
        "format": "ppiaffinity-model-v1",
        "kind": "mlp" if isinstance(head, MlpHead) else "fusion",
        "sources": model.sources,
        "source_dims": model.source_dims,
        "standardized": model.standardizer is not None,
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
        "dtype": "<f8",
    }
    if isinstance(head, MlpHead):
        meta["layer_dims"] = head.layer_dims
    else:
        meta["downstream_dims"] = (
            head.downstream.layer_dims if head.downstream is not None else None
        )
    with open(path, "wb") as fh:
        fh.write(json.dumps(meta, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> AffinityModel:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            meta = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad checkpoint header: {exc}", path=path, line=1)
        blob = fh.read()
    if meta.get("format") != "ppiaffinity-model-v1":
        raise ParseError(f"unrecognized checkpoint format {meta.get('format')!r}", path=path)
    flat = np.frombuffer(blob, dtype="<f8")
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for spec in meta["arrays"]:
        size = int(np.prod(spec["shape"])) if spec["shape"] else 1
        arrays[spec["name"]] = (
            flat[offset : offset + size].reshape(spec["shape"]).copy()
        )
        offset += size
    if offset != flat.size:
        raise ParseError(
            f"checkpoint blob holds {flat.size} floats, expected {offset}", path=path
        )
    if meta["kind"] == "mlp":
        dims = meta["layer_dims"]
        n_layers = len(dims) - 1
        head: MlpHead | FusionHead = MlpHead(
            layer_dims=dims,
            weights=[arrays[f"w{l}"] for l in range(n_layers)],
            biases=[arrays[f"b{l}"] for l in range(n_layers)],
        )
    else:
        downstream = None
        if meta.get("downstream_dims"):
            dims = meta["downstream_dims"]
            n_layers = len(dims) - 1
            downstream = MlpHead(
                layer_dims=dims,
                weights=[arrays[f"down_w{l}"] for l in range(n_layers)],
                biases=[arrays[f"down_b{l}"] for l in range(n_layers)],
            )
        head = FusionHead(
            sources=list(meta["sources"]),
            proj_w=arrays["proj_w"],
            proj_b=arrays["proj_b"],
            downstream=downstream,
        )
    standardizer = None
    if meta.get("standardized"):
        standardizer = Standardizer(mean=arrays["scale_mean"], std=arrays["scale_std"])
    return AffinityModel(
        head=head,
        sources=list(meta["sources"]),
        source_dims=list(meta["source_dims"]),
        standardizer=standardizer,
    )
