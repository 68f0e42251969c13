"""Load, validate, and normalize binding-affinity datasets.

The canonical record is a :class:`Complex`: an identifier, one or more
amino-acid chain sequences, a pKd affinity label, and the PubMed id (PMID)
of the study that measured it. Affinities may arrive either directly in pKd
units or as a dissociation constant in molar units; the latter is converted
with :func:`kd_to_pkd`. Records lacking a PMID receive a per-complex
placeholder so that PMID-grouped batching downstream degrades to singleton
batches instead of failing.

Accepted file formats (column contract):

* CSV with header ``id, chains, pkd, kd_molar, pmid``, where ``chains`` is a
  ``;``-separated list of sequences. Either ``pkd`` or ``kd_molar`` may be
  empty if the other is present. Extra columns are kept as free-form tags.
* JSONL with the same field names, one object per line, ``chains`` as an
  array of strings.

Exclusion lists are plain text, one id per line, ``#`` starts a comment.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DatasetValidationError, DataWarning, ParseError

# 20 canonical residues plus X for unknown; lowercase input is uppercased.
AMINO_ALPHABET = frozenset("ACDEFGHIKLMNPQRSTVWYX")

# Biophysically typical pKd range; violations warn but do not fail.
PKD_WARN_LOW = 0.0
PKD_WARN_HIGH = 20.0

# When a row carries both pkd and kd_molar they must agree to this tolerance.
PKD_AGREEMENT_TOL = 1e-6

REQUIRED_COLUMNS = ("id", "chains", "pkd", "kd_molar", "pmid")


def kd_to_pkd(kd_molar: float) -> float:
    """Convert a dissociation constant in molar units to pKd.

    pKd = -log10(Kd). Higher pKd means tighter binding.

    Raises ValueError unless ``kd_molar`` is a positive finite number.
    """
    kd = float(kd_molar)
    if math.isnan(kd) or math.isinf(kd) or kd <= 0.0:
        raise ValueError(f"kd_molar must be positive and finite, got {kd_molar!r}")
    return -math.log10(kd)


@dataclass
class Complex:
    """One protein-protein entry with an affinity label.

    ``chains`` are uppercase amino-acid strings over the 20-letter alphabet
    plus X. ``pkd`` is -log10 of Kd in molar. ``pmid`` identifies the source
    study and is never empty (a placeholder is synthesized when missing).
    """

    id: str
    chains: list[str]
    pkd: float
    pmid: str
    tags: dict[str, str] = field(default_factory=dict)


@dataclass
class Dataset:
    """A validated collection of complexes with unique ids."""

    complexes: list[Complex]
    name: str = ""

    def __len__(self) -> int:
        return len(self.complexes)

    def __iter__(self):
        return iter(self.complexes)

    def ids(self) -> list[str]:
        return [c.id for c in self.complexes]

    def by_id(self) -> dict[str, Complex]:
        return {c.id: c for c in self.complexes}

    def labels(self) -> dict[str, float]:
        return {c.id: c.pkd for c in self.complexes}

    def pmid_of(self) -> dict[str, str]:
        return {c.id: c.pmid for c in self.complexes}


def placeholder_pmid(complex_id: str) -> str:
    """Synthetic PMID for records missing one; unique per complex."""
    return f"UNKNOWN:{complex_id}"


def _validate_chains(chains: list[str], row: int, path) -> list[str]:
    if not chains:
        raise ParseError("complex has no chains", path=path, line=row)
    cleaned = []
    for chain in chains:
        seq = chain.strip().upper()
        if not seq:
            raise ParseError("empty chain sequence", path=path, line=row)
        for ch in seq:
            if ch not in AMINO_ALPHABET:
                raise ParseError(
                    f"invalid residue character {ch!r} in chain {seq!r}",
                    path=path,
                    line=row,
                )
        cleaned.append(seq)
    return cleaned


def _resolve_pkd(pkd_raw, kd_raw, row: int, path) -> float:
    """Pick the affinity label from the pkd / kd_molar columns.

    Both present: they must agree within PKD_AGREEMENT_TOL pKd units,
    otherwise the row is rejected (source datasets mix conventions and a
    disagreement signals a unit error).
    """
    has_pkd = pkd_raw is not None and str(pkd_raw).strip() != ""
    has_kd = kd_raw is not None and str(kd_raw).strip() != ""
    if not has_pkd and not has_kd:
        raise ParseError("row carries neither pkd nor kd_molar", path=path, line=row)
    pkd = None
    if has_pkd:
        try:
            pkd = float(pkd_raw)
        except (TypeError, ValueError):
            raise ParseError(f"unparseable pkd value {pkd_raw!r}", path=path, line=row)
        if not math.isfinite(pkd):
            raise ParseError(f"non-finite pkd value {pkd_raw!r}", path=path, line=row)
    if has_kd:
        try:
            converted = kd_to_pkd(float(kd_raw))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad kd_molar value {kd_raw!r}: {exc}", path=path, line=row)
        if pkd is not None:
            if abs(pkd - converted) > PKD_AGREEMENT_TOL:
                raise ParseError(
                    f"pkd ({pkd}) and kd_molar ({kd_raw}, i.e. pKd {converted:.6f}) "
                    f"disagree beyond {PKD_AGREEMENT_TOL}",
                    path=path,
                    line=row,
                )
        else:
            pkd = converted
    return pkd


def _make_complex(record: dict, row: int, path) -> Complex:
    cid = str(record.get("id") or "").strip()
    if not cid:
        raise ParseError("missing id", path=path, line=row)
    chains = record.get("chains")
    if isinstance(chains, str):
        chains = [part for part in chains.split(";") if part.strip()]
    elif chains is None:
        chains = []
    chains = _validate_chains(list(chains), row, path)
    pkd = _resolve_pkd(record.get("pkd"), record.get("kd_molar"), row, path)
    if not (PKD_WARN_LOW < pkd < PKD_WARN_HIGH):
        warnings.warn(
            f"complex {cid!r}: pkd {pkd} outside typical range "
            f"({PKD_WARN_LOW}, {PKD_WARN_HIGH})",
            DataWarning,
            stacklevel=3,
        )
    pmid = str(record.get("pmid") or "").strip()
    if not pmid:
        pmid = placeholder_pmid(cid)
    tags = {
        str(k): str(v)
        for k, v in record.items()
        if k not in REQUIRED_COLUMNS and v is not None and str(v).strip() != ""
    }
    return Complex(id=cid, chains=chains, pkd=pkd, pmid=pmid, tags=tags)


def _iter_csv_records(path: Path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError("empty file, expected a header row", path=path, line=1)
        header = [name.strip() for name in reader.fieldnames]
        missing = [col for col in REQUIRED_COLUMNS if col not in header]
        if missing:
            raise ParseError(
                f"missing required column(s): {', '.join(missing)}", path=path, line=1
            )
        for record in reader:
            if None in record:
                raise ParseError(
                    "row has more fields than the header", path=path, line=reader.line_num
                )
            yield reader.line_num, {k.strip(): v for k, v in record.items()}


def _iter_jsonl_records(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=line_num)
            if not isinstance(record, dict):
                raise ParseError("expected a JSON object", path=path, line=line_num)
            yield line_num, record


def parse_dataset(path, format: str | None = None, name: str | None = None) -> Dataset:
    """Parse and validate a dataset file into a :class:`Dataset`.

    ``format`` is ``"csv"`` or ``"jsonl"``; when omitted it is inferred from
    the file suffix. Rows failing validation raise :class:`ParseError` with
    the 1-based line number; duplicate ids raise an error naming both rows.
    Parsing is deterministic: identical bytes yield an identical Dataset.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    if format is None:
        format = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "csv"
    if format == "csv":
        records = _iter_csv_records(path)
    elif format == "jsonl":
        records = _iter_jsonl_records(path)
    else:
        raise ValueError(f"unknown dataset format {format!r} (expected csv or jsonl)")

    complexes = []
    seen_rows: dict[str, int] = {}
    for row, record in records:
        cpx = _make_complex(record, row, path)
        if cpx.id in seen_rows:
            raise DatasetValidationError(
                f"{path}: duplicate id {cpx.id!r} on rows {seen_rows[cpx.id]} and {row}"
            )
        seen_rows[cpx.id] = row
        complexes.append(cpx)
    return Dataset(complexes=complexes, name=name if name is not None else path.stem)


def load_exclusions(path) -> list[str]:
    """Read an exclusion list: one id per line, ``#`` comments allowed."""
    ids = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            entry = line.split("#", 1)[0].strip()
            if entry:
                ids.append(entry)
    return ids


def default_exclusions_path() -> Path:
    """Path of the bundled TCR3d exclusion list (peptide-agnostic binders)."""
    return Path(resources.files("ppiaffinity").joinpath("data/tcr3d_exclusions.txt"))


def apply_exclusions(dataset: Dataset, exclude_ids: list[str]) -> Dataset:
    """Return a dataset with the listed ids removed, preserving order.

    Ids absent from the dataset are reported as warnings rather than errors
    so that one exclusion list stays portable across dataset revisions.
    """
    exclude = set(exclude_ids)
    present = {c.id for c in dataset.complexes}
    for missing in sorted(exclude - present):
        warnings.warn(
            f"exclusion id {missing!r} not found in dataset {dataset.name!r}",
            DataWarning,
            stacklevel=2,
        )
    survivors = [c for c in dataset.complexes if c.id not in exclude]
    return Dataset(complexes=survivors, name=dataset.name)
