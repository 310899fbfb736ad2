"""Core data containers: outcomes, pathway collections, expression datasets."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError

REGRESSION = "regression"
CLASSIFICATION = "classification"
SURVIVAL = "survival"
OUTCOME_TYPES = (REGRESSION, CLASSIFICATION, SURVIVAL)


@dataclass(frozen=True)
class Outcome:
    """Training outcome: continuous values, labels in {-1,+1}, or (time, event).

    Use the ``regression`` / ``classification`` / ``survival`` constructors;
    they validate the arrays. ``event`` is 1 for an observed endpoint and 0
    for censoring.
    """

    kind: str
    y: np.ndarray | None = None
    time: np.ndarray | None = None
    event: np.ndarray | None = None

    @classmethod
    def regression(cls, y) -> "Outcome":
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise DataError("regression outcome must be a non-empty 1-d vector")
        if not np.all(np.isfinite(y)):
            raise DataError("regression outcome contains non-finite values")
        return cls(REGRESSION, y=y)

    @classmethod
    def classification(cls, labels) -> "Outcome":
        labels = np.asarray(labels, dtype=float)
        if labels.ndim != 1 or labels.size == 0:
            raise DataError("classification outcome must be a non-empty 1-d vector")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise DataError("classification labels must be coded -1/+1")
        return cls(CLASSIFICATION, y=labels)

    @classmethod
    def survival(cls, time, event) -> "Outcome":
        time = np.asarray(time, dtype=float)
        event = np.asarray(event, dtype=float)
        if time.ndim != 1 or time.size == 0 or time.shape != event.shape:
            raise DataError("survival outcome needs matching 1-d time and event vectors")
        if not np.all(np.isfinite(time)) or not np.all(time > 0):
            raise DataError("survival times must be finite and positive")
        if not np.all(np.isin(event, (0.0, 1.0))):
            raise DataError("event indicators must be 0 (censored) or 1 (event)")
        return cls(SURVIVAL, time=time, event=event)

    @property
    def n(self) -> int:
        return int(self.y.size if self.kind != SURVIVAL else self.time.size)

    def subset(self, idx) -> "Outcome":
        if self.kind == SURVIVAL:
            return Outcome(SURVIVAL, time=self.time[idx], event=self.event[idx])
        return Outcome(self.kind, y=self.y[idx])


class PathwayCollection:
    """Ordered, named gene sets. Genes within a pathway keep insertion order."""

    def __init__(self, pathways):
        self._pathways: dict[str, tuple[str, ...]] = {}
        items = pathways.items() if isinstance(pathways, dict) else pathways
        for name, genes in items:
            if name in self._pathways:
                raise DataError(f"duplicate pathway name {name!r}")
            seen: dict[str, None] = {}
            for g in genes:
                seen.setdefault(str(g))
            self._pathways[name] = tuple(seen)

    @property
    def names(self) -> list[str]:
        return list(self._pathways)

    def genes(self, name: str) -> tuple[str, ...]:
        return self._pathways[name]

    def items(self):
        return self._pathways.items()

    def __len__(self) -> int:
        return len(self._pathways)

    def __iter__(self):
        return iter(self._pathways)

    def __contains__(self, name) -> bool:
        return name in self._pathways

    def restrict_to(self, available_genes, min_genes: int = 1) -> "PathwayCollection":
        """Intersect every pathway with the available genes.

        Genes missing from the data are dropped from the pathway; pathways
        left with fewer than ``min_genes`` genes are dropped entirely. Both
        kinds of drop emit a warning.
        """
        available = set(available_genes)
        kept = []
        for name, genes in self._pathways.items():
            present = [g for g in genes if g in available]
            if len(present) < len(genes):
                warnings.warn(
                    f"pathway {name!r}: {len(genes) - len(present)} gene(s) absent "
                    "from the expression data were dropped"
                )
            if len(present) < min_genes:
                warnings.warn(f"pathway {name!r} dropped: fewer than {min_genes} gene(s) present")
                continue
            kept.append((name, present))
        return PathwayCollection(kept)

    def column_indices(self, gene_ids) -> dict[str, np.ndarray]:
        """Map each pathway to column indices into ``gene_ids``."""
        lookup = {g: i for i, g in enumerate(gene_ids)}
        out = {}
        for name, genes in self._pathways.items():
            missing = [g for g in genes if g not in lookup]
            if missing:
                raise DataError(f"pathway {name!r}: genes {missing[:5]} not in expression data")
            out[name] = np.array([lookup[g] for g in genes], dtype=int)
        return out


@dataclass
class ExpressionDataset:
    """Sample-major expression matrix plus clinical features and an outcome."""

    expression: np.ndarray
    gene_ids: list[str]
    clinical: np.ndarray
    clinical_names: list[str]
    sample_ids: list[str]
    outcome: Outcome

    def __post_init__(self):
        self.expression = np.asarray(self.expression, dtype=float)
        self.clinical = np.asarray(self.clinical, dtype=float)
        n = self.expression.shape[0]
        if self.clinical.ndim != 2:
            self.clinical = self.clinical.reshape(n, -1)
        if self.expression.ndim != 2 or self.expression.shape[1] != len(self.gene_ids):
            raise DataError("expression matrix does not match the gene id list")
        if self.clinical.shape[0] != n or self.clinical.shape[1] != len(self.clinical_names):
            raise DataError("clinical matrix does not match sample count or column names")
        if len(self.sample_ids) != n or self.outcome.n != n:
            raise DataError("sample ids and outcome must match the expression row count")

    @property
    def n_samples(self) -> int:
        return self.expression.shape[0]

    def subset(self, idx) -> "ExpressionDataset":
        idx = np.asarray(idx)
        ids = [self.sample_ids[i] for i in np.flatnonzero(idx)] if idx.dtype == bool else [
            self.sample_ids[i] for i in idx
        ]
        return ExpressionDataset(
            expression=self.expression[idx],
            gene_ids=list(self.gene_ids),
            clinical=self.clinical[idx],
            clinical_names=list(self.clinical_names),
            sample_ids=ids,
            outcome=self.outcome.subset(idx),
        )
