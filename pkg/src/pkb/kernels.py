"""Pathway-restricted kernels: weighted RBF and polynomial.

Both kernels normalize their gene weights by the weight sum, so scaling all
weights by a positive constant leaves the kernel unchanged. With equal
weights the RBF exponent is the mean squared coordinate difference, which
fixes the bandwidth; there is no free length-scale parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

# max scratch elements when forming pairwise difference blocks
_CHUNK_ELEMENTS = 2_000_000


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus optional per-gene weights.

    kind : "rbf" or "poly"
    degree : polynomial degree (ignored for RBF)
    gene_weights : optional mapping gene id -> nonnegative weight; genes
        absent from the mapping default to weight 1.
    """

    kind: str = "rbf"
    degree: int = 3
    gene_weights: dict[str, float] | None = None

    def __post_init__(self):
        if self.kind not in ("rbf", "poly"):
            raise DataError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "poly" and int(self.degree) < 1:
            raise DataError("polynomial degree must be >= 1")
        if self.gene_weights is not None:
            bad = sorted(g for g, w in self.gene_weights.items() if not w >= 0)
            if bad:
                raise DataError(f"negative gene weights for: {bad[:5]}")

    def weights_for(self, genes) -> np.ndarray:
        if self.gene_weights is None:
            return np.ones(len(genes))
        return np.array([float(self.gene_weights.get(g, 1.0)) for g in genes])


def _checked_pair(u, v, w):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (u.ndim == v.ndim == w.ndim == 1) or not (u.size == v.size == w.size >= 1):
        raise DataError("kernel inputs must be 1-d vectors of equal, nonzero length")
    weight_sum = float(w.sum())
    if not weight_sum > 0:
        raise DataError("gene weights sum to zero; at least one weight must be positive")
    return u, v, w, weight_sum


def rbf_kernel(u, v, w) -> float:
    """Weighted RBF kernel: exp(-sum_j w_j (u_j - v_j)^2 / sum_j w_j)."""
    u, v, w, weight_sum = _checked_pair(u, v, w)
    return float(np.exp(-float((w * (u - v) ** 2).sum()) / weight_sum))


def poly_kernel(u, v, w, degree: int = 3) -> float:
    """Weighted polynomial kernel: (1 + sum_j w_j u_j v_j / sum_j w_j) ** degree."""
    u, v, w, weight_sum = _checked_pair(u, v, w)
    if int(degree) < 1:
        raise DataError("polynomial degree must be >= 1")
    # w * (u * v) keeps the product exactly commutative in (u, v)
    return float((1.0 + float((w * (u * v)).sum()) / weight_sum) ** int(degree))


def kernel_matrix(eval_x, ref_x, spec: KernelSpec, weights=None) -> np.ndarray:
    """Kernel matrix between two sample sets already restricted to one pathway.

    Rows index evaluation samples, columns reference samples. RBF distances
    are accumulated from direct coordinate differences (chunked over rows), so
    a self-kernel (``eval_x is ref_x``) is exactly symmetric with unit
    diagonal, and swapping the two sets yields the exact transpose.
    """
    same = eval_x is ref_x
    eval_x = np.atleast_2d(np.asarray(eval_x, dtype=float))
    ref_x = np.atleast_2d(np.asarray(ref_x, dtype=float))
    if eval_x.shape[1] != ref_x.shape[1] or eval_x.shape[1] == 0:
        raise DataError("evaluation and reference sets must share a nonzero gene count")
    p = eval_x.shape[1]
    w = np.ones(p) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (p,):
        raise DataError("weight vector length does not match the gene count")
    weight_sum = float(w.sum())
    if not weight_sum > 0:
        raise DataError("gene weights sum to zero; at least one weight must be positive")

    if spec.kind == "poly":
        k = (1.0 + (eval_x * w) @ ref_x.T / weight_sum) ** int(spec.degree)
        if same:
            k = 0.5 * (k + k.T)
        return k

    n_eval, n_ref = eval_x.shape[0], ref_x.shape[0]
    dist = np.empty((n_eval, n_ref))
    rows = max(1, _CHUNK_ELEMENTS // max(1, n_ref * p))
    for start in range(0, n_eval, rows):
        stop = min(start + rows, n_eval)
        diff = eval_x[start:stop, None, :] - ref_x[None, :, :]
        dist[start:stop] = (diff * diff) @ w
    return np.exp(-dist / weight_sum)


def pathway_kernel(eval_x, eval_genes, ref_x, ref_genes, genes, spec: KernelSpec) -> np.ndarray:
    """Kernel matrix restricted to ``genes``, located by id in each sample set.

    Every pathway gene must be present in both gene indexes; pathways emptied
    by upstream filtering are rejected here rather than silently skipped.
    """
    genes = list(genes)
    if not genes:
        raise DataError("pathway has no genes present in the data")
    cols_eval = _gene_columns(eval_genes, genes, "evaluation")
    cols_ref = _gene_columns(ref_genes, genes, "reference")
    same = eval_x is ref_x and np.array_equal(cols_eval, cols_ref)
    eval_x = np.atleast_2d(np.asarray(eval_x, dtype=float))[:, cols_eval]
    ref_x = eval_x if same else np.atleast_2d(np.asarray(ref_x, dtype=float))[:, cols_ref]
    return kernel_matrix(eval_x, ref_x, spec, spec.weights_for(genes))


def _gene_columns(gene_ids, genes, side: str) -> np.ndarray:
    lookup = {g: i for i, g in enumerate(gene_ids)}
    missing = [g for g in genes if g not in lookup]
    if missing:
        raise DataError(f"{side} data is missing pathway genes: {missing[:5]}")
    return np.array([lookup[g] for g in genes], dtype=int)
