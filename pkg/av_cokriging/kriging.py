# av_cokriging/kriging.py
# Single-level Kriging: squared-exponential correlation, profiled maximum
# likelihood fitting of (beta, tau2, theta) and posterior mean/variance.
#
# Coordinates are mapped to [0, 1] with the design-space bounds stored on the
# model before the kernel is applied, so theta is comparable across inputs
# measured in different units.
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from av_cokriging.config import FitConfig, derive_rng
from av_cokriging.dataset import POINT_TOL, Bounds, Dataset, as_point, as_points
from av_cokriging.errors import (
    FittingFailureError,
    InvalidArgumentError,
    NumericalSingularityError,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
TAU2_FLOOR = 1e-12
NUGGET_STEP = 10.0
NUGGET_FIRST_STEP = 1e-10
PREDICT_CHUNK = 2048
EXACT_RESIDUAL_TOL = 1e-9
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelParams:
    theta: np.ndarray  # inverse squared lengthscales, one per coordinate
    tau2: float
    nugget: float = 0.0

    def __post_init__(self) -> None:
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        if theta.ndim != 1 or len(theta) < 1:
            raise InvalidArgumentError("theta must be a non-empty vector")
        if not np.all(np.isfinite(theta)) or np.any(theta <= 0):
            raise InvalidArgumentError(f"theta must be finite and > 0, got {theta}")
        if not (math.isfinite(self.tau2) and self.tau2 > 0):
            raise InvalidArgumentError(f"tau2 must be finite and > 0, got {self.tau2}")
        if not (math.isfinite(self.nugget) and self.nugget >= 0):
            raise InvalidArgumentError(f"nugget must be finite and >= 0, got {self.nugget}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "tau2", float(self.tau2))
        object.__setattr__(self, "nugget", float(self.nugget))

    @property
    def dim(self) -> int:
        return len(self.theta)


def kernel_eval(a, b, params: KernelParams) -> float:
    """r(a, b; theta) = exp(-sum_i theta_i (a_i - b_i)^2)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != (params.dim,) or b.shape != (params.dim,):
        raise InvalidArgumentError(
            f"dimension mismatch: points {a.shape}, {b.shape} vs theta of length {params.dim}"
        )
    return float(np.exp(-np.sum(params.theta * (a - b) ** 2)))


def cross_correlation(A: np.ndarray, B: np.ndarray, theta: np.ndarray) -> np.ndarray:
    sq = np.sqrt(theta)
    return np.exp(-cdist(A * sq, B * sq, "sqeuclidean"))


def correlation_matrix(points, params: KernelParams) -> np.ndarray:
    """R with R_ij = r(x_i, x_j; theta), nugget added to the diagonal."""
    X = as_points(points, params.dim)
    R = cross_correlation(X, X, params.theta)
    R[np.diag_indices_from(R)] = 1.0 + params.nugget
    return R


def stable_cholesky(R: np.ndarray, nugget: float, max_nugget: float) -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor of R + nugget*I, growing the nugget tenfold on failure.

    R is the unit-diagonal correlation matrix without nugget.
    """
    nug = float(nugget)
    limit = max(float(max_nugget), nug)
    while True:
        A = R.copy()
        A[np.diag_indices_from(A)] += nug
        try:
            L = cholesky(A, lower=True, check_finite=False)
        except LinAlgError:
            L = None
        if L is not None and np.all(np.diag(L) > 0):
            if nug != nugget:
                logger.warning("correlation matrix needed nugget %.1e (requested %.1e)", nug, nugget)
            return L, nug
        nxt = nug * NUGGET_STEP if nug > 0 else NUGGET_FIRST_STEP
        if nxt > limit * (1 + 1e-12):
            raise NumericalSingularityError(
                f"Cholesky factorization failed with nugget up to {nug:.1e} (n={len(R)})"
            )
        nug = nxt


def _gls_beta(L: np.ndarray, y: np.ndarray) -> float:
    ones = np.ones_like(y)
    Ri_y = cho_solve((L, True), y, check_finite=False)
    Ri_1 = cho_solve((L, True), ones, check_finite=False)
    return float(ones @ Ri_y / (ones @ Ri_1))


def _estimate_beta(y: np.ndarray, L: Optional[np.ndarray], method: str) -> float:
    if method == "gls" and L is not None:
        return _gls_beta(L, y)
    # sample mean of the observations
    return float(np.mean(y))


def _unit_or_bounds(data: Dataset, bounds: Optional[Bounds]) -> Bounds:
    b = bounds if bounds is not None else Bounds.from_points(data.X)
    if b.dim != data.dim:
        raise InvalidArgumentError(f"bounds have dimension {b.dim}, data has {data.dim}")
    return b


def log_likelihood(params: KernelParams, beta: float, data: Dataset, bounds: Optional[Bounds] = None) -> float:
    """Gaussian log likelihood of the data with Sigma = tau2 * (R + nugget*I).

    Coordinates are normalized with `bounds` first (bounding box of the data
    when omitted), matching what fit_mle does.
    """
    if params.dim != data.dim:
        raise InvalidArgumentError(f"theta has length {params.dim}, data has dimension {data.dim}")
    b = _unit_or_bounds(data, bounds)
    U = b.normalize(data.X)
    R = correlation_matrix(U, params)
    try:
        L = cholesky(R, lower=True, check_finite=False)
    except LinAlgError as e:
        raise NumericalSingularityError(f"covariance is not positive definite: {e}") from e
    n = data.n
    z = solve_triangular(L, data.y - beta, lower=True, check_finite=False)
    logdet = n * math.log(params.tau2) + 2.0 * float(np.sum(np.log(np.diag(L))))
    return -0.5 * (n * LOG_2PI + logdet + float(z @ z) / params.tau2)


class _Profile:
    """Likelihood with tau2 profiled out, for one dataset."""

    def __init__(self, data: Dataset, bounds: Bounds, config: FitConfig):
        self.y = data.y
        self.n = data.n
        self.config = config
        self.U = bounds.normalize(data.X)
        # nugget 0 without a fitted nugget: interpolate or reject the parameters
        self.exact = config.nugget == 0.0 and not config.noise

    def unpack(self, log_params: np.ndarray) -> Tuple[np.ndarray, float]:
        d = self.U.shape[1]
        theta = np.exp(log_params[:d])
        nugget = math.exp(log_params[d]) if self.config.noise else self.config.nugget
        return theta, nugget

    def evaluate(self, log_params: np.ndarray) -> Tuple[float, float, float, float]:
        """Return (l, beta, tau2, nugget_used); raises NumericalSingularityError."""
        theta, nugget = self.unpack(log_params)
        R = cross_correlation(self.U, self.U, theta)
        np.fill_diagonal(R, 1.0)
        L, nug = stable_cholesky(R, nugget, 0.0 if self.exact else self.config.max_nugget)
        beta = _estimate_beta(self.y, L, self.config.beta_method)
        if self.exact:
            self._check_interpolation(R, L, beta)
        z = solve_triangular(L, self.y - beta, lower=True, check_finite=False)
        q = float(z @ z)
        tau2 = max(q / self.n, TAU2_FLOOR)
        logdet_r = 2.0 * float(np.sum(np.log(np.diag(L))))
        ll = -0.5 * (self.n * LOG_2PI + self.n * math.log(tau2) + logdet_r + q / tau2)
        return ll, beta, tau2, nug

    def _check_interpolation(self, R: np.ndarray, L: np.ndarray, beta: float) -> None:
        resid = self.y - beta
        alpha = cho_solve((L, True), resid, check_finite=False)
        err = float(np.max(np.abs(R @ alpha - resid)))
        limit = EXACT_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(resid))))
        if err > limit:
            raise NumericalSingularityError(
                f"nugget-free fit misses its training data by {err:.1e} (limit {limit:.1e})"
            )


def log_theta_upper(data: Dataset, bounds: Bounds, config: FitConfig) -> np.ndarray:
    """Upper end of the log(theta) search range for each coordinate.

    Capped where exp(-theta * gap^2) reaches config.theta_cap_corr, gap being the
    smallest spacing between distinct normalized values of that coordinate.
    """
    lo, hi = config.log_theta_bounds
    upper = np.full(data.dim, hi)
    if config.theta_cap_corr <= 0.0:
        return upper
    U = bounds.normalize(data.X)
    for i in range(data.dim):
        gaps = np.diff(np.unique(U[:, i]))
        gaps = gaps[gaps > POINT_TOL]
        if len(gaps) == 0:
            continue
        cap = math.log(-math.log(config.theta_cap_corr) / float(gaps.min()) ** 2)
        if lo < cap < hi:
            upper[i] = cap
    return upper


def profile_log_likelihood(
    theta,
    data: Dataset,
    config: Optional[FitConfig] = None,
    bounds: Optional[Bounds] = None,
    nugget: Optional[float] = None,
) -> Tuple[float, float]:
    """Log likelihood at theta with tau2 at its closed-form optimum; returns (l, tau2)."""
    config = config or FitConfig()
    prof = _Profile(data, _unit_or_bounds(data, bounds), config)
    log_params = np.log(np.atleast_1d(np.asarray(theta, dtype=float)))
    if config.noise:
        log_params = np.append(log_params, math.log(nugget if nugget is not None else config.nugget))
    ll, _, tau2, _ = prof.evaluate(log_params)
    return ll, tau2


class KrigingModel:
    """Fitted single-level posterior. Instances are never mutated after construction."""

    def __init__(
        self,
        beta: float,
        params: KernelParams,
        training: Dataset,
        bounds: Bounds,
        chol: np.ndarray,
        fit_info: Optional[Dict[str, Any]] = None,
    ):
        self.beta = float(beta)
        self.params = params
        self.training = training
        self.bounds = bounds
        self.chol = chol
        self._U = bounds.normalize(training.X)
        self.alpha = cho_solve((chol, True), training.y - self.beta, check_finite=False)
        self.fit_info = fit_info or {}
        for arr in (self.chol, self._U, self.alpha):
            arr.setflags(write=False)

    @classmethod
    def from_params(
        cls,
        data: Dataset,
        params: KernelParams,
        beta: Optional[float] = None,
        bounds: Optional[Bounds] = None,
        max_nugget: Optional[float] = None,
        beta_method: str = "mean",
        fit_info: Optional[Dict[str, Any]] = None,
    ) -> "KrigingModel":
        """Condition the field on `data` with fixed hyperparameters.

        The nugget is escalated up to `max_nugget` (no escalation when None).
        """
        if params.dim != data.dim:
            raise InvalidArgumentError(f"theta has length {params.dim}, data has dimension {data.dim}")
        b = _unit_or_bounds(data, bounds)
        U = b.normalize(data.X)
        R = cross_correlation(U, U, params.theta)
        np.fill_diagonal(R, 1.0)
        limit = params.nugget if max_nugget is None else max_nugget
        L, nug = stable_cholesky(R, params.nugget, limit)
        if nug != params.nugget:
            params = KernelParams(params.theta, params.tau2, nug)
        if beta is None:
            beta = _estimate_beta(data.y, L, beta_method)
        return cls(beta, params, data, b, L, fit_info)

    @property
    def dim(self) -> int:
        return self.training.dim

    @property
    def n(self) -> int:
        return self.training.n

    def _correlations(self, X: np.ndarray) -> np.ndarray:
        return cross_correlation(self.bounds.normalize(X), self._U, self.params.theta)

    def predict(self, X) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at each row of X."""
        X = as_points(X, self.dim)
        m = len(X)
        mean = np.empty(m)
        var = np.empty(m)
        for start in range(0, m, PREDICT_CHUNK):
            sl = slice(start, start + PREDICT_CHUNK)
            r = self._correlations(X[sl])
            mean[sl] = self.beta + r @ self.alpha
            v = solve_triangular(self.chol, r.T, lower=True, check_finite=False)
            var[sl] = self.params.tau2 * (1.0 - np.einsum("ij,ij->j", v, v))
        np.maximum(var, 0.0, out=var)
        return mean, var

    def posterior_cov(self, S, x) -> Tuple[np.ndarray, float]:
        """Covariance of each row of S with a new observation at x, and its variance.

        The new observation gets the same nugget as the training points, so a
        rank-one update with these terms equals conditioning on the enlarged
        dataset.
        """
        S = as_points(S, self.dim)
        xp = as_point(x, self.dim)
        rx = self._correlations(xp)[0]
        vx = solve_triangular(self.chol, rx, lower=True, check_finite=False)
        tau2 = self.params.tau2
        c_xx = tau2 * (1.0 + self.params.nugget - float(vx @ vx))
        c_sx = np.empty(len(S))
        xu = self.bounds.normalize(xp)
        for start in range(0, len(S), PREDICT_CHUNK):
            sl = slice(start, start + PREDICT_CHUNK)
            su = self.bounds.normalize(S[sl])
            r_sx = cross_correlation(su, xu, self.params.theta)[:, 0]
            vs = solve_triangular(self.chol, self._correlations(S[sl]).T, lower=True, check_finite=False)
            c_sx[sl] = tau2 * (r_sx - vs.T @ vx)
        return c_sx, max(c_xx, 0.0)

    def contains_point(self, x, tol: float = POINT_TOL) -> bool:
        xu = self.bounds.normalize(as_point(x, self.dim))
        return bool(np.any(np.max(np.abs(self._U - xu), axis=1) <= tol))

    def condition_on(self, x, y: float) -> "KrigingModel":
        """Same hyperparameters and beta, one more observation."""
        return KrigingModel.from_params(
            self.training.append(x, y), self.params, beta=self.beta, bounds=self.bounds
        )

    def log_likelihood(self) -> float:
        return log_likelihood(self.params, self.beta, self.training, self.bounds)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "kriging",
            "beta": self.beta,
            "theta": self.params.theta.tolist(),
            "tau2": self.params.tau2,
            "nugget": self.params.nugget,
            "bounds": self.bounds.to_dict(),
            "X": self.training.X.tolist(),
            "y": self.training.y.tolist(),
            "fit_info": self.fit_info,
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "KrigingModel":
        if doc.get("kind") != "kriging":
            raise InvalidArgumentError(f"not a kriging model document (kind={doc.get('kind')!r})")
        if doc.get("format_version") != FORMAT_VERSION:
            raise InvalidArgumentError(f"unsupported model format_version {doc.get('format_version')!r}")
        try:
            params = KernelParams(np.asarray(doc["theta"], dtype=float), doc["tau2"], doc["nugget"])
            data = Dataset(np.asarray(doc["X"], dtype=float), np.asarray(doc["y"], dtype=float))
            bounds = Bounds.from_dict(doc["bounds"])
            beta = float(doc["beta"])
        except KeyError as e:
            raise InvalidArgumentError(f"model document missing field {e}") from e
        return cls.from_params(data, params, beta=beta, bounds=bounds, fit_info=doc.get("fit_info"))


def posterior_mean(model: KrigingModel, x) -> float:
    return float(model.predict(as_point(x, model.dim))[0][0])


def posterior_var(model: KrigingModel, x) -> float:
    return float(model.predict(as_point(x, model.dim))[1][0])


def _start_points(theta_upper: np.ndarray, config: FitConfig) -> np.ndarray:
    lower = [config.log_theta_bounds[0]] * len(theta_upper)
    upper = list(theta_upper)
    if config.noise:
        lower.append(config.log_nugget_bounds[0])
        upper.append(config.log_nugget_bounds[1])
    sampler = qmc.LatinHypercube(d=len(lower), seed=derive_rng(config.seed, "fit"))
    return qmc.scale(sampler.random(config.n_starts), lower, upper)


def fit_mle(data: Dataset, config: Optional[FitConfig] = None, bounds: Optional[Bounds] = None) -> KrigingModel:
    """Fit beta by the sample mean and (tau2, theta) by multistart maximum likelihood.

    Local refinement is Nelder-Mead over log(theta) (and log(nugget) for
    noisy data) from each Latin-hypercube start. The best start wins; ties go
    to the lowest start index.

    With nugget 0 and no fitted nugget, parameters whose correlation matrix
    cannot be factorized without a nugget, or whose solve misses the data by
    more than EXACT_RESIDUAL_TOL, are infeasible.
    """
    config = config or FitConfig()
    b = _unit_or_bounds(data, bounds)
    prof = _Profile(data, b, config)
    theta_upper = log_theta_upper(data, b, config)
    starts = _start_points(theta_upper, config)
    opt_bounds = [(config.log_theta_bounds[0], float(hi)) for hi in theta_upper]
    if config.noise:
        opt_bounds.append(config.log_nugget_bounds)

    def objective(p: np.ndarray) -> float:
        try:
            return -prof.evaluate(p)[0]
        except NumericalSingularityError:
            return np.inf

    best_ll = -np.inf
    best_p: Optional[np.ndarray] = None
    diagnostics: List[Dict[str, Any]] = []

    for k, p0 in enumerate(starts):
        entry: Dict[str, Any] = {"start": k, "log_params": p0.tolist()}
        try:
            ll0 = prof.evaluate(p0)[0]
        except NumericalSingularityError as e:
            entry["error"] = str(e)
            diagnostics.append(entry)
            logger.warning("fit start %d rejected: %s", k, e)
            continue
        entry["start_log_likelihood"] = ll0
        cand_p, cand_ll = p0, ll0
        res = minimize(
            objective,
            p0,
            method="Nelder-Mead",
            bounds=opt_bounds,
            options={"maxiter": config.max_iter, "xatol": 1e-4, "fatol": 1e-8},
        )
        if np.isfinite(res.fun) and -res.fun > cand_ll:
            cand_p, cand_ll = np.asarray(res.x, dtype=float), float(-res.fun)
        entry["log_likelihood"] = cand_ll
        diagnostics.append(entry)
        logger.debug("fit start %d: l0=%.6g -> l=%.6g", k, ll0, cand_ll)
        if cand_ll > best_ll:
            best_ll, best_p = cand_ll, cand_p

    if best_p is None:
        raise FittingFailureError(
            f"all {config.n_starts} restarts failed numerically (n={data.n}, d={data.dim})",
            diagnostics=diagnostics,
        )

    ll, beta, tau2, nug = prof.evaluate(best_p)
    theta, _ = prof.unpack(best_p)
    params = KernelParams(theta, tau2, nug)
    info = {
        "log_likelihood": ll,
        "starts": diagnostics,
        "n_starts": config.n_starts,
        "beta_method": config.beta_method,
        "noise": config.noise,
        "log_theta_upper": theta_upper.tolist(),
    }
    model = KrigingModel.from_params(data, params, beta=beta, bounds=b, fit_info=info)
    logger.info(
        "kriging fit n=%d d=%d: l=%.6g beta=%.6g tau2=%.4g theta=%s nugget=%.1e",
        data.n, data.dim, ll, beta, tau2, np.array2string(theta, precision=4), nug,
    )
    return model
