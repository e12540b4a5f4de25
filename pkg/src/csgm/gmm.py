"""Full-covariance Gaussian mixtures fitted by expectation-maximization.

All densities are handled in log space. Covariances are factored with a
Cholesky decomposition; the log-determinant comes from the factor diagonal
and the Mahalanobis term from a triangular solve.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import DegenerateComponentError, NumericalError

logger = logging.getLogger(__name__)

MIN_COMPONENT_MASS = 1e-10
REG_SCALE = 1e-6  # default ridge, relative to the mean data variance
MAX_REG_SCALE = 1e-2  # ceiling for ridge escalation on factorization failure


@dataclass(frozen=True)
class GmmParams:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        mu = np.atleast_2d(np.array(self.means, dtype=float))
        cov = np.array(self.covariances, dtype=float)
        if cov.ndim == 2 and mu.shape[1] == 1 and cov.shape[1] == 1:
            cov = cov[:, :, None]
        k, d = mu.shape
        if w.shape != (k,) or cov.shape != (k, d, d):
            raise ValueError(f"inconsistent shapes: weights {w.shape}, means {mu.shape}, "
                             f"covariances {cov.shape}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be non-negative and sum to one")
        if not np.allclose(cov, np.swapaxes(cov, 1, 2), rtol=0.0, atol=1e-9):
            raise ValueError("covariance matrices must be symmetric")
        for arr in (w, mu, cov):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GmmParams":
        return cls(doc["weights"], doc["means"], doc["covariances"])

    def to_json(self) -> str:
        # json emits floats with repr(), which round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GmmParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class EmConfig:
    """EM settings. ``reg_eps=None`` means 1e-6 times the mean data variance."""

    n_components: int = 1
    max_iter: int = 500
    rel_tol: float = 1e-6
    reg_eps: float | None = None
    n_restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_components < 1 or self.max_iter < 1 or self.n_restarts < 1:
            raise ValueError("n_components, max_iter and n_restarts must be positive")
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.reg_eps is not None and not self.reg_eps > 0:
            raise ValueError("reg_eps must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class FitReport:
    log_likelihood_trace: list
    converged: bool
    iterations: int
    best_restart: int
    reg_eps: float = 0.0
    restart_log_likelihoods: list = field(default_factory=list)
    restart_traces: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "log_likelihood_trace": list(self.log_likelihood_trace),
            "converged": self.converged,
            "iterations": self.iterations,
            "best_restart": self.best_restart,
            "reg_eps": self.reg_eps,
            "restart_log_likelihoods": list(self.restart_log_likelihoods),
        }


# --------------------------------------------------------------------------
# densities
# --------------------------------------------------------------------------


def regularized_cholesky(cov, reg_eps: float, max_reg: float):
    """Lower Cholesky factor of ``cov``, adding a growing ridge if needed.

    Returns ``(chol, cov_used)``. The ridge starts at ``reg_eps`` and grows
    tenfold per failure until it passes ``max_reg``.
    """
    cov = np.asarray(cov, dtype=float)
    try:
        return np.linalg.cholesky(cov), cov
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(cov.shape[0])
    eps = reg_eps
    while eps <= max_reg * (1 + 1e-12):
        trial = cov + eps * eye
        try:
            chol = np.linalg.cholesky(trial)
        except np.linalg.LinAlgError:
            eps *= 10.0
            continue
        logger.warning("covariance not positive definite; added ridge %.3g", eps)
        return chol, trial
    raise NumericalError(f"Cholesky factorization failed even with ridge {max_reg:.3g}")


def log_gaussian_pdf(x, mean, cov, reg_eps: float = 1e-12, max_reg: float = 1e-2) -> float:
    """Log density of a single point under N(mean, cov)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    chol, _ = regularized_cholesky(cov, reg_eps, max_reg)
    return float(_kernels.kernels.component_log_density(x[None, :], mean, chol)[0])


def _factorize(params: GmmParams, reg_eps: float, max_reg: float):
    chols = np.empty_like(params.covariances)
    covs = None
    for k, cov in enumerate(params.covariances):
        chol, used = regularized_cholesky(cov, reg_eps, max_reg)
        chols[k] = chol
        if used is not cov:
            if covs is None:
                covs = params.covariances.copy()
            covs[k] = used
    if covs is not None:
        params = replace(params, covariances=covs)
    return chols, params


def weighted_log_densities(X, params: GmmParams, chols=None) -> np.ndarray:
    """N x K matrix of log(w_k) + log phi(x_n | mu_k, Sigma_k)."""
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    if X.shape[1] != params.n_features:
        raise ValueError(f"data has {X.shape[1]} features, mixture has {params.n_features}")
    if chols is None:
        chols, _ = _factorize(params, 1e-12, MAX_REG_SCALE)
    with np.errstate(divide="ignore"):
        log_w = np.log(params.weights)
    return _kernels.kernels.weighted_log_density(
        X, np.ascontiguousarray(params.means), np.ascontiguousarray(chols), log_w
    )


def _normalize(log_prob):
    resp, log_norm = _kernels.kernels.log_normalize_rows(log_prob)
    bad = ~np.isfinite(log_norm)
    if np.any(bad):
        raise NumericalError(f"all components have zero density at row {int(np.argmax(bad))}")
    return resp, log_norm


def e_step(X, params: GmmParams, chols=None):
    """Responsibilities (N x K) and the total log-likelihood."""
    resp, log_norm = _normalize(weighted_log_densities(X, params, chols))
    return resp, float(log_norm.sum())


def m_step(X, resp, reg_eps: float = 1e-6) -> GmmParams:
    """Closed-form weight, mean and covariance updates, plus a ridge of ``reg_eps``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    resp = np.atleast_2d(np.asarray(resp, dtype=float))
    n, d = X.shape
    mass = resp.sum(axis=0)
    low = np.flatnonzero(mass < MIN_COMPONENT_MASS)
    if low.size:
        raise DegenerateComponentError(f"component {int(low[0])} has mass {mass[low[0]]:.3g}")
    weights = mass / n
    means = (resp.T @ X) / mass[:, None]
    covs = np.empty((resp.shape[1], d, d))
    eye = np.eye(d)
    for k in range(resp.shape[1]):
        centered = X - means[k]
        cov = (resp[:, k, None] * centered).T @ centered / mass[k]
        covs[k] = 0.5 * (cov + cov.T) + reg_eps * eye
    return GmmParams(weights, means, covs)


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------


def _data_scale(X) -> float:
    scale = float(np.mean(np.var(X, axis=0)))
    return scale if scale > 0 and math.isfinite(scale) else 1.0


def _kmeanspp_means(X, k, rng):
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    closest = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            idx = int(rng.integers(n))
        chosen.append(idx)
        closest = np.minimum(closest, ((X - X[idx]) ** 2).sum(axis=1))
    return X[chosen].copy()


def _initialize(X, k, reg_eps, rng) -> GmmParams:
    d = X.shape[1]
    global_cov = np.atleast_2d(np.cov(X, rowvar=False, bias=True))
    cov = 0.5 * (global_cov + global_cov.T) + reg_eps * np.eye(d)
    return GmmParams(np.full(k, 1.0 / k), _kmeanspp_means(X, k, rng), np.repeat(cov[None], k, axis=0))


def _restart_rng(seed, n_components, restart):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(n_components), int(restart)]))


def _run_restart(X, cfg: EmConfig, reg_eps, max_reg, rng):
    params = _initialize(X, cfg.n_components, reg_eps, rng)
    chols, params = _factorize(params, reg_eps, max_reg)
    resp, ll = e_step(X, params, chols)
    trace = [ll]
    converged = False
    for _ in range(cfg.max_iter):
        candidate = m_step(X, resp, reg_eps)
        chols, candidate = _factorize(candidate, reg_eps, max_reg)
        new_resp, ll_new = e_step(X, candidate, chols)
        if ll_new < ll:
            # Improvement has stopped: at the fixed point the ridge and
            # rounding can cost ~1e-11 relative; keep the previous iterate.
            converged = True
            break
        params, resp = candidate, new_resp
        trace.append(ll_new)
        if ll_new - ll <= cfg.rel_tol * abs(ll):
            converged = True
            break
        ll = ll_new
    return params, trace, converged


def fit_em(X, cfg: EmConfig):
    """Fit a mixture with ``cfg.n_restarts`` seeded restarts; keep the best.

    Each restart draws from its own stream derived from
    ``(cfg.seed, cfg.n_components, restart)``, so the result is a pure
    function of the data and the config.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    n = X.shape[0]
    if n <= cfg.n_components:
        raise ValueError(f"need more samples ({n}) than components ({cfg.n_components})")
    if not np.all(np.isfinite(X)):
        raise ValueError("data contain non-finite values")
    scale = _data_scale(X)
    reg_eps = cfg.reg_eps if cfg.reg_eps is not None else REG_SCALE * scale
    max_reg = max(MAX_REG_SCALE * scale, reg_eps)

    best = None
    finals, traces = [], []
    for r in range(cfg.n_restarts):
        try:
            params, trace, converged = _run_restart(X, cfg, reg_eps, max_reg,
                                                    _restart_rng(cfg.seed, cfg.n_components, r))
        except NumericalError as exc:
            logger.info("restart %d of %d-component fit failed: %s", r, cfg.n_components, exc)
            finals.append(None)
            traces.append(None)
            continue
        finals.append(trace[-1])
        traces.append(trace)
        if best is None or trace[-1] > best[1][-1]:
            best = (params, trace, converged, r)
    if best is None:
        raise NumericalError(
            f"all {cfg.n_restarts} restarts of the {cfg.n_components}-component fit collapsed",
            stage="fit_em",
        )
    params, trace, converged, r = best
    report = FitReport(trace, converged, len(trace) - 1, r, reg_eps, finals, traces)
    return params, report


# --------------------------------------------------------------------------
# model selection
# --------------------------------------------------------------------------


def param_count(n_components: int, d: int) -> int:
    """Free parameters: weights (minus one), means, symmetric covariances."""
    return (n_components - 1) + n_components * d + n_components * d * (d + 1) // 2


def aic(log_lik: float, k: int) -> float:
    return 2.0 * k - 2.0 * log_lik


def bic(log_lik: float, k: int, n: int) -> float:
    return k * math.log(n) - 2.0 * log_lik


@dataclass(frozen=True)
class SelectionRow:
    n_components: int
    log_likelihood: float
    aic: float
    bic: float


def _select(X, n_range, cfg: EmConfig, criterion: str):
    lo, hi = n_range
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid component range [{lo}, {hi}]")
    if n <= hi:
        raise ValueError(f"need more samples ({n}) than the largest candidate ({hi})")
    criterion = criterion.lower()
    if criterion not in ("aic", "bic"):
        raise ValueError("criterion must be 'aic' or 'bic'")

    rows, fits = [], {}
    for k in range(lo, hi + 1):
        try:
            params, report = fit_em(X, replace(cfg, n_components=k))
        except NumericalError as exc:
            logger.warning("no valid fit with %d components: %s", k, exc)
            rows.append(SelectionRow(k, math.nan, math.nan, math.nan))
            continue
        ll = report.log_likelihood_trace[-1]
        p = param_count(k, d)
        rows.append(SelectionRow(k, ll, aic(ll, p), bic(ll, p, n)))
        fits[k] = (params, report)
    scores = [getattr(r, criterion) for r in rows]
    finite = [(s, r.n_components) for s, r in zip(scores, rows) if math.isfinite(s)]
    if not finite:
        raise NumericalError("every candidate component count failed to fit", stage="select")
    chosen = min(finite)[1]  # ties resolve to the smaller count
    return chosen, rows, fits


def select_components(X, n_range, cfg: EmConfig, criterion: str = "bic"):
    """Fit one mixture per candidate count and return the criterion minimizer.

    Returns ``(chosen, table)`` where ``table`` holds one :class:`SelectionRow`
    per candidate; failed candidates carry NaN scores.
    """
    chosen, rows, _ = _select(X, n_range, cfg, criterion)
    return chosen, rows


def write_selection_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n_components", "log_likelihood", "aic", "bic"])
        for r in rows:
            w.writerow([r.n_components, repr(r.log_likelihood), repr(r.aic), repr(r.bic)])
