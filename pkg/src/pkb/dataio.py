"""File ingestion and emission: expression/clinical/outcome CSVs, GMT gene
sets, prediction and weight tables, and the reproducibility manifest.

CSV dialect: comma-separated UTF-8 with a mandatory header row and '.'
decimals. The expression file carries sample ids in its first column and gene
symbols in the header; the outcome file has columns (sample, y),
(sample, label), or (sample, time, status) depending on outcome type.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .data import CLASSIFICATION, REGRESSION, SURVIVAL, ExpressionDataset, Outcome, PathwayCollection
from .errors import DataError, OutcomeTypeMismatch, SchemaError


def parse_gmt(path) -> PathwayCollection:
    """Parse a GMT file: one pathway per line, ``NAME<TAB>DESC<TAB>gene...``.

    Duplicate genes within a line are removed; lines with fewer than three
    tab-separated fields are rejected with their line number.
    """
    pathways = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) < 3:
                raise SchemaError(
                    f"{path}:{lineno}: expected NAME<TAB>DESCRIPTION<TAB>gene..., "
                    f"got {len(fields)} field(s)"
                )
            name = fields[0].strip()
            genes = [g.strip() for g in fields[2:] if g.strip()]
            if not genes:
                raise SchemaError(f"{path}:{lineno}: pathway {name!r} lists no genes")
            pathways.append((name, genes))
    return PathwayCollection(pathways)


def write_gmt(pathways: PathwayCollection, path, description: str = "na") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for name, genes in pathways.items():
            fh.write("\t".join([name, description, *genes]) + "\n")


def _read_table(path, what: str) -> pd.DataFrame:
    try:
        # round_trip parsing keeps emitted doubles bit-exact when re-read
        df = pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise SchemaError(f"could not parse {what} file {path}: {exc}") from exc
    if df.shape[1] < 2:
        raise SchemaError(f"{what} file {path} needs a sample-id column plus data columns")
    df = df.rename(columns={df.columns[0]: "sample"})
    df["sample"] = df["sample"].astype(str)
    if df["sample"].duplicated().any():
        dupes = df["sample"][df["sample"].duplicated()].tolist()
        raise SchemaError(f"{what} file {path} has duplicate sample ids: {dupes[:5]}")
    return df.set_index("sample")


def read_expression(path) -> tuple[np.ndarray, list[str], list[str]]:
    """Expression CSV -> (matrix, gene ids, sample ids)."""
    df = _read_table(path, "expression")
    try:
        matrix = df.to_numpy(dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"expression file {path} has non-numeric cells: {exc}") from exc
    if not np.all(np.isfinite(matrix)):
        raise SchemaError(f"expression file {path} contains missing or non-finite values")
    return matrix, [str(c) for c in df.columns], list(df.index)


def encode_clinical(df: pd.DataFrame) -> tuple[np.ndarray, list[str], list[str]]:
    """One-hot encode categorical clinical columns (first level dropped).

    Returns (matrix, encoded column names, raw column names). Indicator
    columns are named ``column=level`` with levels in sorted order.
    """
    columns, names = [], []
    for col in df.columns:
        series = df[col]
        numeric = pd.to_numeric(series, errors="coerce")
        if numeric.notna().all():
            if not np.all(np.isfinite(numeric.to_numpy(dtype=float))):
                raise SchemaError(f"clinical column {col!r} contains non-finite values")
            columns.append(numeric.to_numpy(dtype=float))
            names.append(str(col))
        else:
            if series.isna().any():
                raise SchemaError(f"clinical column {col!r} has missing values")
            levels = sorted(series.astype(str).unique())
            for level in levels[1:]:  # first level is the reference
                columns.append((series.astype(str) == level).to_numpy(dtype=float))
                names.append(f"{col}={level}")
    matrix = np.column_stack(columns) if columns else np.zeros((len(df), 0))
    return matrix, names, [str(c) for c in df.columns]


def read_clinical(path) -> pd.DataFrame:
    df = _read_table(path, "clinical")
    if df.isna().any().any():
        raise SchemaError(f"clinical file {path} has missing values")
    return df


def read_outcome(path, outcome_type: str) -> tuple[Outcome, list[str]]:
    """Outcome CSV -> (Outcome, sample ids), dropping rows with missing values."""
    df = _read_table(path, "outcome")
    expected = {
        REGRESSION: ["y"],
        CLASSIFICATION: ["label"],
        SURVIVAL: ["time", "status"],
    }[outcome_type]
    missing = [c for c in expected if c not in df.columns]
    if missing:
        raise OutcomeTypeMismatch(
            f"outcome file {path} lacks column(s) {missing} required for "
            f"outcome type {outcome_type!r} (found: {list(df.columns)})"
        )
    sub = df[expected].apply(pd.to_numeric, errors="coerce")
    keep = sub.notna().all(axis=1)
    if not keep.all():
        warnings.warn(f"outcome file {path}: dropped {int((~keep).sum())} row(s) with missing values")
    sub = sub[keep]
    ids = list(sub.index)
    if outcome_type == REGRESSION:
        return Outcome.regression(sub["y"].to_numpy(dtype=float)), ids
    if outcome_type == SURVIVAL:
        return Outcome.survival(sub["time"].to_numpy(dtype=float), sub["status"].to_numpy(dtype=float)), ids
    labels = sub["label"].to_numpy(dtype=float)
    if np.all(np.isin(labels, (0.0, 1.0))):
        labels = 2.0 * labels - 1.0
    return Outcome.classification(labels), ids


@dataclass
class IngestReport:
    """Counts of what survived ingestion."""

    n_samples: int
    n_genes: int
    n_clinical_columns: int
    pathways_kept: int
    pathways_dropped: int
    samples_dropped: int

    def summary(self) -> str:
        return (
            f"{self.n_samples} samples ({self.samples_dropped} dropped in join), "
            f"{self.n_genes} genes, {self.n_clinical_columns} clinical columns, "
            f"{self.pathways_kept} pathways kept ({self.pathways_dropped} dropped)"
        )


def ingest(
    expression_path,
    clinical_path,
    outcome_path,
    pathways: PathwayCollection,
    outcome_type: str,
) -> tuple[ExpressionDataset, PathwayCollection, IngestReport]:
    """Align the three input files on sample id (inner join), encode clinical
    features, and intersect pathways with the available genes.

    Pathways retaining fewer than two genes are dropped with a warning. The
    clinical matrix is one-hot encoded but not scaled; standardization is
    owned by the fit so that training and prediction share one transform.
    """
    matrix, gene_ids, expr_samples = read_expression(expression_path)
    clin_df = read_clinical(clinical_path)
    outcome_all, outcome_samples = read_outcome(outcome_path, outcome_type)

    order = {s: i for i, s in enumerate(expr_samples)}
    common = [s for s in expr_samples if s in set(clin_df.index) and s in set(outcome_samples)]
    n_universe = len(set(expr_samples) | set(clin_df.index) | set(outcome_samples))
    if not common:
        raise DataError("no sample ids are shared by the expression, clinical, and outcome files")

    matrix = matrix[[order[s] for s in common]]
    clin_df = clin_df.loc[common]
    outcome_pos = {s: i for i, s in enumerate(outcome_samples)}
    outcome = outcome_all.subset(np.array([outcome_pos[s] for s in common]))
    clinical, clin_names, _ = encode_clinical(clin_df)

    kept = pathways.restrict_to(gene_ids, min_genes=2)
    report = IngestReport(
        n_samples=len(common),
        n_genes=len(gene_ids),
        n_clinical_columns=len(clin_names),
        pathways_kept=len(kept),
        pathways_dropped=len(pathways) - len(kept),
        samples_dropped=n_universe - len(common),
    )
    dataset = ExpressionDataset(
        expression=matrix,
        gene_ids=gene_ids,
        clinical=clinical,
        clinical_names=clin_names,
        sample_ids=common,
        outcome=outcome,
    )
    return dataset, kept, report


def align_encoded_clinical(matrix, names, raw_columns, wanted) -> tuple[np.ndarray, list[str]]:
    """Zero-fill indicator columns the model expects but the new data lacks.

    A one-hot column ``col=level`` is legitimately absent when no new sample
    carries that level; it is reconstructed as zeros as long as the raw
    column exists. Genuinely missing columns are left to the caller's strict
    alignment to reject.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    names = list(names)
    present = set(names)
    raw = set(raw_columns)
    added = []
    for name in wanted:
        if name not in present and "=" in name and name.split("=", 1)[0] in raw:
            added.append(name)
    if added:
        matrix = np.column_stack([matrix, np.zeros((matrix.shape[0], len(added)))])
        names.extend(added)
    return matrix, names


def read_gene_weights(path) -> dict[str, float]:
    """CSV with columns (gene, weight) -> weight mapping."""
    df = pd.read_csv(path)
    if df.shape[1] < 2:
        raise SchemaError(f"gene-weight file {path} needs columns gene,weight")
    genes = df.iloc[:, 0].astype(str)
    weights = pd.to_numeric(df.iloc[:, 1], errors="coerce")
    if weights.isna().any():
        raise SchemaError(f"gene-weight file {path} has non-numeric weights")
    if (weights < 0).any():
        raise SchemaError(f"gene-weight file {path} has negative weights")
    return dict(zip(genes, weights.astype(float)))


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------


def write_expression_csv(path, matrix, gene_ids, sample_ids) -> None:
    df = pd.DataFrame(np.asarray(matrix, dtype=float), columns=gene_ids)
    df.insert(0, "sample", sample_ids)
    df.to_csv(path, index=False)


def write_clinical_csv(path, frame_or_matrix, names=None, sample_ids=None) -> None:
    if isinstance(frame_or_matrix, pd.DataFrame):
        df = frame_or_matrix.copy()
        df.insert(0, "sample", df.index if sample_ids is None else sample_ids)
    else:
        df = pd.DataFrame(np.asarray(frame_or_matrix, dtype=float), columns=names)
        df.insert(0, "sample", sample_ids)
    df.to_csv(path, index=False)


def write_outcome_csv(path, outcome: Outcome, sample_ids) -> None:
    if outcome.kind == SURVIVAL:
        df = pd.DataFrame(
            {"sample": sample_ids, "time": outcome.time, "status": outcome.event.astype(int)}
        )
    elif outcome.kind == CLASSIFICATION:
        df = pd.DataFrame({"sample": sample_ids, "label": outcome.y.astype(int)})
    else:
        df = pd.DataFrame({"sample": sample_ids, "y": outcome.y})
    df.to_csv(path, index=False)


def write_predictions_csv(path, sample_ids, scores, predictions, outcome_type: str) -> None:
    value_name = {REGRESSION: "prediction", CLASSIFICATION: "probability", SURVIVAL: "risk"}[
        outcome_type
    ]
    pd.DataFrame({"sample": sample_ids, "score": scores, value_name: predictions}).to_csv(
        path, index=False
    )


def write_weights_csv(path, weights: dict[str, float]) -> None:
    pd.DataFrame({"pathway": list(weights), "weight": list(weights.values())}).to_csv(
        path, index=False
    )


# ---------------------------------------------------------------------------
# run manifest
# ---------------------------------------------------------------------------


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, command: str, config: dict, inputs: dict, seed: int | None) -> None:
    """Record the resolved configuration and input digests next to every output."""
    from . import __version__

    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "inputs": {str(p): file_digest(p) for p in inputs.values() if p is not None},
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
