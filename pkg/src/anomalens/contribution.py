"""Sparse per-dimension contribution degrees for flagged anomalies.

Given an anomalous record x and a trained detector, find a sparse vector
eta such that subtracting eta from the normalized record brings the
reconstruction MSE back under the detection threshold:

    min over eta of  MSE(x_norm - eta) + lambda * ||eta||_1

solved by proximal gradient iteration (gradient step on the smooth MSE
term, then soft-thresholding). Dimensions with large |eta| are the ones
that had to change to make the record look normal again, i.e. the
dimensions that contributed to the anomaly.

Several lambda values are tried from largest to smallest and the largest
one that reaches the MSE stopping level wins, so the sparsest sufficient
explanation is preferred. This selection rule, and the adaptive step-size
scheme below, are implementation choices; only the objective and the
stopping level are fixed by the method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detector import AEDetector
from .errors import DataError, NumericalError
from .neuralnet import grad_input, reconstruction_mse_batch

DEFAULT_LAMBDAS = tuple(float(v) for v in np.geomspace(1e-1, 1e-4, 8))


def soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    """Proximal operator of t * l1: sign(v) * max(|v| - t, 0)."""
    if t < 0:
        raise DataError("threshold must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass
class ContributionConfig:
    lambdas: tuple = DEFAULT_LAMBDAS
    step_size: float | str = "backtracking"
    max_iters: int = 500
    mse_stop: float | None = None  # None: use the detector threshold

    def __post_init__(self):
        lams = tuple(float(v) for v in self.lambdas)
        if not lams or any(v <= 0 for v in lams):
            raise DataError("lambdas must be non-empty and strictly positive")
        # sweep order is fixed: largest (sparsest) first
        self.lambdas = tuple(sorted(lams, reverse=True))
        if self.max_iters < 1:
            raise DataError("max_iters must be at least 1")
        if isinstance(self.step_size, str):
            if self.step_size != "backtracking":
                raise DataError("step_size must be a positive number or 'backtracking'")
        elif self.step_size <= 0:
            raise DataError("step_size must be positive")
        if self.mse_stop is not None and self.mse_stop < 0:
            raise DataError("mse_stop must be non-negative")


@dataclass
class ContributionResult:
    eta: np.ndarray  # in normalized units
    lambda_used: float
    iterations: int
    final_mse: float
    converged: bool


def _iterate(smooth_fn, grad_fn, x_norm, lam, cfg):
    """Proximal-gradient loop for one lambda. Returns (eta, iters, mse, hit).

    smooth_fn(v) evaluates the reconstruction error at the amended record
    v = x_norm - eta; grad_fn(v) is its gradient with respect to v. The
    chain rule flips the sign for the step on eta.
    """
    eta = np.zeros_like(x_norm)
    smooth = smooth_fn(x_norm - eta)
    backtracking = cfg.step_size == "backtracking"
    # the growth factor doubles this before the first candidate, so the
    # first step actually tried is 1.0
    step = 0.5 if backtracking else float(cfg.step_size)

    for it in range(1, cfg.max_iters + 1):
        v = x_norm - eta
        grad = -grad_fn(v)
        if not np.all(np.isfinite(grad)):
            raise NumericalError(
                f"non-finite gradient at lambda={lam}, iteration={it}"
            )

        if backtracking:
            # grow first, then halve while the local quadratic model is
            # violated; the loss surface through the network has no usable
            # global Lipschitz bound, so the step adapts both ways
            step *= 2.0
            while True:
                cand = soft_threshold(eta - step * grad, step * lam)
                d = cand - eta
                cand_smooth = smooth_fn(x_norm - cand)
                model = smooth + float(grad @ d) + float(d @ d) / (2.0 * step)
                if cand_smooth <= model + 1e-15 or step < 1e-12:
                    break
                step *= 0.5
            if __debug__:
                before = smooth + lam * float(np.abs(eta).sum())
                after = cand_smooth + lam * float(np.abs(cand).sum())
                assert after <= before + 1e-10, "composite objective increased"
            eta, smooth = cand, cand_smooth
        else:
            eta = soft_threshold(eta - step * grad, step * lam)
            smooth = smooth_fn(x_norm - eta)

        if not np.isfinite(smooth):
            raise NumericalError(
                f"non-finite objective at lambda={lam}, iteration={it}"
            )
        if smooth < cfg.mse_stop:
            return eta, it, smooth, True
    return eta, cfg.max_iters, smooth, False


def sweep_lambdas(smooth_fn, grad_fn, x_norm, cfg, lambdas) -> ContributionResult:
    """Run the iteration for each lambda, largest first; first success wins.

    cfg.mse_stop must already be resolved to a number. Shared by the plain
    and multimodal contribution paths so both select identically.
    """
    entry = smooth_fn(x_norm)
    if entry <= cfg.mse_stop:
        return ContributionResult(np.zeros_like(x_norm), lambdas[0], 0, entry, True)

    best = None
    for lam in lambdas:
        eta, iters, final, hit = _iterate(smooth_fn, grad_fn, x_norm, lam, cfg)
        if hit:
            return ContributionResult(eta, lam, iters, final, True)
        if best is None or final < best.final_mse:
            best = ContributionResult(eta, lam, iters, final, False)
    return best


def _estimate(det: AEDetector, x: np.ndarray, cfg: ContributionConfig, lambdas):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("contribution estimation takes a single record")
    x_norm = det.normalizer.normalize(x)

    if cfg.mse_stop is None:
        cfg = ContributionConfig(cfg.lambdas, cfg.step_size, cfg.max_iters, det.threshold)

    def smooth_fn(v):
        return float(reconstruction_mse_batch(det.net, v)[0])

    def grad_fn(v):
        return grad_input(det.net, v)

    return sweep_lambdas(smooth_fn, grad_fn, x_norm, cfg, lambdas)


def estimate_contribution(
    det: AEDetector, x: np.ndarray, cfg: ContributionConfig | None = None
) -> ContributionResult:
    """Sparse contribution degrees for a raw record.

    Sweeps cfg.lambdas from largest to smallest and returns the result of
    the largest lambda whose iteration drove the amended MSE below the
    stopping level. When no lambda succeeds within max_iters the result
    with the lowest final MSE is returned with converged=False.
    """
    cfg = cfg or ContributionConfig()
    return _estimate(det, x, cfg, cfg.lambdas)


def contribution_without_l1(
    det: AEDetector, x: np.ndarray, cfg: ContributionConfig | None = None
) -> ContributionResult:
    """Same gradient iteration without the sparsity term (lambda = 0).

    The resulting eta is dense; it serves as a baseline for how much the
    l1 term concentrates the explanation.
    """
    cfg = cfg or ContributionConfig()
    return _estimate(det, x, cfg, (0.0,))


def top_k_dimensions(
    result: ContributionResult | np.ndarray, k: int
) -> tuple[list[tuple[int, float]], bool]:
    """Top-k dimensions by |eta|, descending; ties broken by lower index.

    Returns (entries, includes_zeros). When fewer than k entries are
    nonzero the list is padded with zero-valued dimensions and the flag
    is set, so callers can tell "weak contributor" from "no contributor".
    """
    eta = result.eta if isinstance(result, ContributionResult) else np.asarray(result)
    if k < 0:
        raise DataError("k must be non-negative")
    mag = np.abs(eta)
    k = min(k, mag.shape[0])
    order = np.lexsort((np.arange(mag.shape[0]), -mag))
    picked = order[:k]
    includes_zeros = bool(np.any(mag[picked] == 0.0)) if k else False
    return [(int(i), float(mag[i])) for i in picked], includes_zeros


def estimated_dimension_set(metric: ContributionResult | np.ndarray) -> set[int]:
    """Indices whose |value| strictly exceeds the mean absolute value.

    Works on a contribution result or on any per-dimension metric vector
    (outlier degrees, signed reconstruction errors), so every method is
    scored by the same rule.
    """
    vec = metric.eta if isinstance(metric, ContributionResult) else np.asarray(metric)
    mag = np.abs(np.asarray(vec, dtype=np.float64))
    return {int(i) for i in np.nonzero(mag > mag.mean())[0]}


def recall_precision(estimated: set, actual: set) -> tuple[float, float]:
    """Fraction of actual dimensions found, and of estimates that are real.

    An empty estimated set scores (0, 0); precision is never NaN.
    """
    if not estimated:
        return 0.0, 0.0
    hits = len(set(estimated) & set(actual))
    recall = hits / len(actual) if actual else 0.0
    return recall, hits / len(estimated)
