"""Regularized second-order subproblem: reduce, solve, recover, select.

The quadratic model of the loss restricted to one pathway's base-learner
space is reduced to a penalized linear regression through a whitening by
H^{1/2} and a projection that eliminates the unpenalized clinical
coefficients. The reduced problem is ridge regression (L2) or a LASSO solved
by coordinate descent (L1); clinical coefficients are recovered in closed
form afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .losses import LossDerivatives

# jitter relative to trace(H)/N, escalated x10 on factorization failure
JITTER_START = 1e-8
JITTER_MAX = 1e-4

L1_TOL = 1e-7
L1_MAX_SWEEPS = 10_000

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Penalty:
    """Penalty on the dual coefficients: ``lam * ||beta||_1`` or ``lam * ||beta||_2^2``."""

    kind: str
    lam: float

    def __post_init__(self):
        if self.kind not in ("l1", "l2"):
            raise DataError(f"unknown penalty kind {self.kind!r}")
        if not self.lam > 0:
            raise DataError("penalty level must be positive")

    def value(self, beta: np.ndarray) -> float:
        if self.kind == "l1":
            return self.lam * float(np.abs(beta).sum())
        return self.lam * float(beta @ beta)


@dataclass
class IncrementSolution:
    """One pathway's solved increment: dual and clinical coefficients plus
    the regularized loss value used for pathway selection."""

    pathway_index: int
    beta: np.ndarray
    gamma: np.ndarray
    regularized_loss: float


class SubproblemReducer:
    """Hessian- and clinical-dependent pieces shared by every pathway.

    Holds the jittered H^{1/2} and H^{-1} actions and the clinical projector
    U = I - Z (Z'HZ)^{-1} Z'H. The Hessian may be a 1-d diagonal or a dense
    symmetric matrix; these pieces do not depend on the gradient, so one
    reducer serves a whole iteration (or, for an iteration-invariant Hessian,
    a whole boosting process).
    """

    def __init__(self, hessian, z):
        hessian = np.asarray(hessian, dtype=float)
        n = hessian.shape[0]
        self.z = np.atleast_2d(np.asarray(z, dtype=float)) if np.size(z) else np.zeros((n, 0))
        if self.z.shape[0] != n:
            raise DataError("clinical matrix row count does not match the Hessian")
        self.n = n
        self.q = self.z.shape[1]
        eps = 0.0  # well-conditioned Hessians need no jitter at all
        while True:
            try:
                self._build(hessian, eps)
                break
            except np.linalg.LinAlgError:
                eps = JITTER_START if eps == 0.0 else eps * 10.0
                if eps > JITTER_MAX * 1.0000001:
                    raise NumericError(
                        "Hessian factorization failed even at maximum jitter; "
                        "clinical matrix may be ill-conditioned"
                    ) from None

    def _build(self, hessian, eps):
        n = self.n
        # numerically singular below 1e-12 of the mean eigenvalue: escalate
        if hessian.ndim == 1:
            scale = float(hessian.sum()) / n
            d = hessian + eps * scale
            if not np.all(d > 1e-12 * scale):
                raise np.linalg.LinAlgError("numerically singular diagonal")
            self._diag = d
            self._root_diag = np.sqrt(d)
            self._dense = None
        else:
            scale = float(np.trace(hessian)) / n
            hj = hessian + (eps * scale) * np.eye(n) if eps else hessian
            vals, vecs = np.linalg.eigh(hj)
            # negative eigenvalues would be clamped for the root; for H^{-1}
            # to exist they must clear the singularity floor
            if not np.all(vals > 1e-12 * scale):
                raise np.linalg.LinAlgError("numerically singular eigenvalue")
            self._dense = (vecs, vals)
            self._root_dense = (vecs * np.sqrt(vals)) @ vecs.T
            self._diag = None
        if self.q:
            hz = self.apply_h(self.z)
            zhz = self.z.T @ hz
            self._proj_factor = np.linalg.solve(zhz, hz.T)  # (q, n): (Z'HZ)^{-1} (HZ)'
        else:
            self._proj_factor = None

    def apply_h(self, m):
        if self._diag is not None:
            return m * self._diag[:, None] if m.ndim == 2 else m * self._diag
        vecs, vals = self._dense
        return vecs @ ((vecs.T @ m) * (vals[:, None] if m.ndim == 2 else vals))

    def apply_hinv(self, m):
        if self._diag is not None:
            return m / self._diag[:, None] if m.ndim == 2 else m / self._diag
        vecs, vals = self._dense
        return vecs @ ((vecs.T @ m) / (vals[:, None] if m.ndim == 2 else vals))

    def apply_root(self, m):
        if self._diag is not None:
            return m * self._root_diag[:, None] if m.ndim == 2 else m * self._root_diag
        return self._root_dense @ m

    def project(self, m):
        """Apply U = I - Z (Z'HZ)^{-1} Z'H."""
        if not self.q:
            return m
        return m - self.z @ (self._proj_factor @ m)

    def eta_tilde(self, grad) -> np.ndarray:
        return self.apply_root(self.project(self.apply_hinv(grad))) / SQRT2

    def k_tilde(self, kernel) -> np.ndarray:
        return self.apply_root(self.project(kernel)) / SQRT2

    def gamma_for(self, kernel, beta, grad) -> np.ndarray:
        """Clinical coefficients given the dual coefficients of one pathway."""
        if not self.q:
            return np.zeros(0)
        v = kernel @ beta + self.apply_hinv(grad)
        return -(self._proj_factor @ v)


def transform(hessian, z, grad, kernel):
    """Reduce one pathway's subproblem to ``min ||eta + K~ b||^2 + lam Omega(b)``.

    Returns the transformed gradient vector and kernel matrix.
    """
    reducer = SubproblemReducer(hessian, z)
    grad = np.asarray(grad, dtype=float)
    return reducer.eta_tilde(grad), reducer.k_tilde(np.asarray(kernel, dtype=float))


def recover_gamma(hessian, z, kernel, beta, grad) -> np.ndarray:
    """Closed-form clinical coefficients for a solved ``beta``."""
    reducer = SubproblemReducer(hessian, z)
    return reducer.gamma_for(
        np.asarray(kernel, dtype=float),
        np.asarray(beta, dtype=float),
        np.asarray(grad, dtype=float),
    )


def solve_beta(eta_tilde, k_tilde, penalty: Penalty, warm_start=None) -> np.ndarray:
    """Minimize ``||eta + K~ b||^2 + lam * Omega(b)`` over the dual coefficients."""
    eta_tilde = np.asarray(eta_tilde, dtype=float)
    k_tilde = np.asarray(k_tilde, dtype=float)
    if k_tilde.shape[0] != eta_tilde.size:
        raise DataError("transformed kernel and gradient have inconsistent shapes")
    if penalty.kind == "l2":
        m = k_tilde.T @ k_tilde
        m[np.diag_indices_from(m)] += penalty.lam
        return -np.linalg.solve(m, k_tilde.T @ eta_tilde)
    return _lasso_cd(eta_tilde, k_tilde, penalty.lam, warm_start)


def _lasso_cd(eta, k, lam, warm_start=None, tol=L1_TOL, max_sweeps=L1_MAX_SWEEPS):
    """Cyclic coordinate descent for ``||eta + K b||^2 + lam ||b||_1``."""
    n_coef = k.shape[1]
    beta = np.zeros(n_coef) if warm_start is None else np.array(warm_start, dtype=float)
    col_sq = np.einsum("ij,ij->j", k, k)
    resid = eta + k @ beta
    for _ in range(max_sweeps):
        max_delta = 0.0
        for i in range(n_coef):
            old = beta[i]
            if col_sq[i] == 0.0:
                if old != 0.0:
                    resid -= k[:, i] * old
                    beta[i] = 0.0
                    max_delta = max(max_delta, abs(old))
                continue
            if old != 0.0:
                resid -= k[:, i] * old
            b = 2.0 * (k[:, i] @ resid)
            if abs(b) <= lam:
                new = 0.0
            else:
                new = -(b - math.copysign(lam, b)) / (2.0 * col_sq[i])
                resid += k[:, i] * new
            beta[i] = new
            delta = abs(new - old)
            if delta > max_delta:
                max_delta = delta
        if max_delta <= tol:
            return beta
    raise NumericError(f"L1 coordinate descent did not converge in {max_sweeps} sweeps")


def lambda_max(eta_tilde, k_tilde) -> float:
    """Smallest L1 penalty for which the all-zero solution is optimal."""
    return 2.0 * float(np.abs(k_tilde.T @ eta_tilde).max())


def auto_lambda(derivs: LossDerivatives, z, kernels) -> float:
    """Data-driven anchor for the penalty level.

    Median over pathways of the all-zero L1 threshold at the current
    derivatives. This is deliberately the strong end of the useful range
    (under L1 it zeroes roughly half the pathways' first increments), so the
    user-facing penalty multiplier softens it, typically with values <= 1.
    """
    reducer = SubproblemReducer(derivs.hessian, z)
    eta = reducer.eta_tilde(derivs.gradient)
    lams = [lambda_max(eta, reducer.k_tilde(np.asarray(k, dtype=float))) for k in kernels]
    return max(float(np.median(lams)), 1e-12)


class IncrementSolver:
    """Solves the per-pathway subproblems of one boosting process.

    Pathway kernels are stacked so the reduction and the L2 solves run
    batched across pathways. With ``static=True`` the Hessian is
    iteration-invariant (regression), and the reduced kernels plus their L2
    factorizations are computed once and reused for every iteration.
    """

    def __init__(self, z, kernels, penalty: Penalty, static: bool = False):
        if not kernels:
            raise DataError("at least one pathway kernel is required")
        self.z = z
        self.kernels = [np.asarray(k, dtype=float) for k in kernels]
        self.n = self.kernels[0].shape[0]
        self.m = len(self.kernels)
        self.penalty = penalty
        self.static = static
        self._stack = np.concatenate(self.kernels, axis=1)  # (n, m*n)
        self._reducer = None
        self._kt = None      # (m, n, n) transformed kernels
        self._l2_inv = None  # (m, n, n) inverses of K~'K~ + lam I (static only)
        self._gram = None
        self._warm: dict[int, np.ndarray] = {}

    def _prepare(self, derivs: LossDerivatives):
        if self.static and self._reducer is not None:
            return
        self._reducer = SubproblemReducer(derivs.hessian, self.z)
        kt_flat = self._reducer.k_tilde(self._stack)
        self._kt = np.ascontiguousarray(
            kt_flat.reshape(self.n, self.m, self.n).transpose(1, 0, 2)
        )
        if self.penalty.kind == "l2":
            gram = np.matmul(self._kt.transpose(0, 2, 1), self._kt)
            gram[:, np.arange(self.n), np.arange(self.n)] += self.penalty.lam
            try:
                if self.static:
                    self._l2_inv = np.linalg.inv(gram)
                else:
                    self._gram = gram
            except np.linalg.LinAlgError as exc:
                raise NumericError(f"L2 subproblem factorization failed: {exc}") from exc

    def best_increment(self, derivs: LossDerivatives) -> IncrementSolution:
        """Solve every pathway's subproblem and return the lowest regularized loss."""
        self._prepare(derivs)
        reducer = self._reducer
        eta = reducer.eta_tilde(derivs.gradient)
        if self.penalty.kind == "l2":
            rhs = np.matmul(self._kt.transpose(0, 2, 1), eta)
            if self.static:
                betas = -np.matmul(self._l2_inv, rhs[:, :, None])[:, :, 0]
            else:
                try:
                    betas = -np.linalg.solve(self._gram, rhs[:, :, None])[:, :, 0]
                except np.linalg.LinAlgError as exc:
                    raise NumericError(f"L2 subproblem solve failed: {exc}") from exc
            resid = np.matmul(self._kt, betas[:, :, None])[:, :, 0] + eta
            objs = np.einsum("mi,mi->m", resid, resid) + self.penalty.lam * np.einsum(
                "mi,mi->m", betas, betas
            )
            best = int(np.argmin(objs))
            beta = betas[best]
            obj = float(objs[best])
        else:
            best, beta, obj = self._best_l1(eta)
        gamma = reducer.gamma_for(self.kernels[best], beta, derivs.gradient)
        return IncrementSolution(best, beta, gamma, obj)

    def _best_l1(self, eta):
        best, best_beta, best_obj = -1, None, np.inf
        failures = []
        for m in range(self.m):
            kt = self._kt[m]
            try:
                beta = _lasso_cd(eta, kt, self.penalty.lam, self._warm.get(m))
            except NumericError as exc:
                failures.append(exc)
                continue
            self._warm[m] = beta
            resid = eta + kt @ beta
            obj = float(resid @ resid) + self.penalty.value(beta)
            if obj < best_obj:
                best, best_beta, best_obj = m, beta, obj
        if best < 0:
            raise NumericError(f"all {self.m} pathway subproblems failed: {failures[0]}")
        return best, best_beta, best_obj


def best_increment(derivs: LossDerivatives, z, kernels, penalty: Penalty) -> IncrementSolution:
    """One-shot pathway selection; see :class:`IncrementSolver` for the loop form."""
    return IncrementSolver(z, kernels, penalty).best_increment(derivs)
