"""Histograms, correlation, smoothing and Logistic/GEV maximum-likelihood fits.

Fits are deterministic: fixed starting points, fixed tolerances and iteration
caps, single-threaded. GEV parameters are ordered (location, scale, shape)
with positive shape = heavy right tail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DataError,
    DegenerateDataError,
    SpecError,
    UndefinedCorrelationError,
)

EULER_GAMMA = 0.5772156649015329

# Fixed optimizer constants (not configurable, for reproducibility).
LOGISTIC_GRAD_TOL = 1e-8
LOGISTIC_MAX_ITER = 500
GEV_FTOL = 1e-12
GEV_XTOL = 1e-10
GEV_MAX_ITER = 5000
GEV_XI_GUMBEL = 1e-8


@dataclass(frozen=True)
class HistogramSpec:
    """Bin layout: either (lo, hi, bin_count) or explicit edges."""

    lo: Optional[float] = None
    hi: Optional[float] = None
    bin_count: Optional[int] = None
    edges: Optional[tuple[float, ...]] = None
    clamp: str = "drop"  # drop | saturate

    def __post_init__(self) -> None:
        if self.clamp not in ("drop", "saturate"):
            raise SpecError(f"unknown clamp policy {self.clamp!r}")
        if self.edges is not None:
            e = np.asarray(self.edges, dtype=float)
            if e.size < 2 or not np.all(np.diff(e) > 0):
                raise SpecError("edges must be strictly increasing with >= 2 entries")
        else:
            if self.lo is None or self.hi is None or self.bin_count is None:
                raise SpecError("spec needs (lo, hi, bin_count) or explicit edges")
            if self.lo >= self.hi:
                raise SpecError(f"lo ({self.lo}) must be < hi ({self.hi})")
            if self.bin_count < 1:
                raise SpecError("bin_count must be >= 1")

    def edge_array(self) -> np.ndarray:
        if self.edges is not None:
            return np.asarray(self.edges, dtype=float)
        return np.linspace(self.lo, self.hi, self.bin_count + 1)


@dataclass(frozen=True, eq=False)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    underflow: int
    overflow: int
    n: int

    def to_dict(self) -> dict:
        return {
            "edges": [float(e) for e in self.edges],
            "counts": [int(c) for c in self.counts],
            "underflow": self.underflow,
            "overflow": self.overflow,
            "n": self.n,
        }


def histogram(values: Sequence[float] | np.ndarray, spec: HistogramSpec) -> Histogram:
    """Left-closed right-open binning; NaN inputs are excluded from n."""
    edges = spec.edge_array()
    v = np.asarray(values, dtype=float).ravel()
    v = v[np.isfinite(v)]
    nbins = edges.size - 1
    idx = np.searchsorted(edges, v, side="right") - 1
    under = idx < 0
    over = idx >= nbins
    if spec.clamp == "saturate":
        idx = np.clip(idx, 0, nbins - 1)
        counts = np.bincount(idx, minlength=nbins)
        return Histogram(edges, counts, 0, 0, int(v.size))
    inside = ~(under | over)
    counts = np.bincount(idx[inside], minlength=nbins)
    return Histogram(
        edges, counts, int(np.count_nonzero(under)), int(np.count_nonzero(over)),
        int(v.size),
    )


@dataclass(frozen=True, eq=False)
class Histogram2d:
    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray  # shape (nx, ny)
    n: int
    dropped: int

    def to_dict(self) -> dict:
        return {
            "x_edges": [float(e) for e in self.x_edges],
            "y_edges": [float(e) for e in self.y_edges],
            "counts": [[int(c) for c in row] for row in self.counts],
            "n": self.n,
            "dropped": self.dropped,
        }


def histogram2d(
    xs: Sequence[float] | np.ndarray,
    ys: Sequence[float] | np.ndarray,
    spec_x: HistogramSpec,
    spec_y: HistogramSpec,
) -> Histogram2d:
    """Joint counts; pairs falling outside either axis are dropped (and counted)."""
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size:
        raise DataError(f"length mismatch: {x.size} xs vs {y.size} ys")
    finite = np.isfinite(x) & np.isfinite(y)
    x, y = x[finite], y[finite]
    ex, ey = spec_x.edge_array(), spec_y.edge_array()
    ix = np.searchsorted(ex, x, side="right") - 1
    iy = np.searchsorted(ey, y, side="right") - 1
    nx, ny = ex.size - 1, ey.size - 1
    inside = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    counts = np.zeros((nx, ny), dtype=np.int64)
    np.add.at(counts, (ix[inside], iy[inside]), 1)
    return Histogram2d(
        ex, ey, counts, int(x.size), int(np.count_nonzero(~inside))
    )


def pearson(xs: Sequence[float] | np.ndarray, ys: Sequence[float] | np.ndarray) -> float:
    """Product-moment correlation coefficient in [-1, 1]."""
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size:
        raise DataError(f"length mismatch: {x.size} xs vs {y.size} ys")
    if x.size < 2:
        raise DataError("pearson needs n >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(np.sum(dx * dx))
    sy = np.sqrt(np.sum(dy * dy))
    if sx == 0 or sy == 0:
        raise UndefinedCorrelationError("zero variance in at least one argument")
    r = float(np.sum(dx * dy) / (sx * sy))
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class FitResult:
    family: str  # logistic | gev
    params: tuple[float, ...]  # (location, scale[, shape])
    log_likelihood: float
    converged: bool
    iterations: int
    n: int

    @property
    def location(self) -> float:
        return self.params[0]

    @property
    def scale(self) -> float:
        return self.params[1]

    @property
    def shape(self) -> Optional[float]:
        return self.params[2] if len(self.params) > 2 else None

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": list(self.params),
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "iterations": self.iterations,
            "n": self.n,
        }


def _logistic_mean_nll(x: np.ndarray, mu: float, log_sigma: float) -> float:
    sigma = np.exp(log_sigma)
    z = (x - mu) / sigma
    # -log f = z + log sigma + 2 log(1 + exp(-z)); stable via logaddexp.
    return float(np.mean(z + log_sigma + 2.0 * np.logaddexp(0.0, -z)))


def _logistic_mean_grad(x: np.ndarray, mu: float, log_sigma: float) -> np.ndarray:
    sigma = np.exp(log_sigma)
    z = (x - mu) / sigma
    u = np.tanh(0.5 * z)
    g_mu = float(np.mean(-u / sigma))
    g_ls = float(np.mean(1.0 - z * u))
    return np.array([g_mu, g_ls])


def fit_logistic(values: Sequence[float] | np.ndarray) -> FitResult:
    """Logistic(location, scale) MLE via safeguarded Newton on (mu, log sigma)."""
    x = np.asarray(values, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if x.size < 10:
        raise DataError(f"logistic fit needs n >= 10, got {x.size}")
    std = float(np.std(x))
    if std == 0:
        raise DegenerateDataError("constant data has no logistic scale")
    mu = float(np.median(x))
    log_sigma = float(np.log(np.sqrt(3.0) * std / np.pi))

    theta = np.array([mu, log_sigma])
    nll = _logistic_mean_nll(x, *theta)
    converged = False
    iterations = 0
    h = 1e-6
    for iterations in range(1, LOGISTIC_MAX_ITER + 1):
        grad = _logistic_mean_grad(x, *theta)
        if np.max(np.abs(grad)) < LOGISTIC_GRAD_TOL:
            converged = True
            break
        # Hessian via central differences of the analytic gradient.
        hess = np.empty((2, 2))
        for j in range(2):
            step = np.zeros(2)
            step[j] = h
            hess[:, j] = (
                _logistic_mean_grad(x, *(theta + step))
                - _logistic_mean_grad(x, *(theta - step))
            ) / (2 * h)
        try:
            delta = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            delta = grad
        # Backtrack until the step improves the objective.
        scale = 1.0
        for _ in range(40):
            cand = theta - scale * delta
            cand_nll = _logistic_mean_nll(x, *cand)
            if cand_nll <= nll:
                break
            scale *= 0.5
        else:
            break
        theta, nll = cand, cand_nll
    mu, sigma = float(theta[0]), float(np.exp(theta[1]))
    loglik = -nll * x.size
    return FitResult("logistic", (mu, sigma), loglik, converged, iterations, int(x.size))


def logistic_pdf(x: np.ndarray, location: float, scale: float) -> np.ndarray:
    z = (np.asarray(x, dtype=float) - location) / scale
    sech_half = 1.0 / np.cosh(0.5 * z)
    return 0.25 * sech_half * sech_half / scale


def _gev_mean_nll(x: np.ndarray, theta: np.ndarray) -> float:
    """Mean negative log-likelihood with a barrier on the support constraint."""
    mu, log_sigma, xi = theta
    sigma = np.exp(log_sigma)
    z = (x - mu) / sigma
    if abs(xi) < GEV_XI_GUMBEL:
        return float(np.mean(log_sigma + z + np.exp(-z)))
    t = 1.0 + xi * z
    min_t = float(np.min(t))
    if min_t <= 0:
        return 1e10 * (1.0 - min_t)
    log_t = np.log(t)
    return float(np.mean(log_sigma + (1.0 + 1.0 / xi) * log_t + np.exp(-log_t / xi)))


def _nelder_mead(
    fn, x0: np.ndarray, steps: np.ndarray, ftol: float, xtol: float, max_iter: int
) -> tuple[np.ndarray, float, bool, int]:
    """Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5, shrink 0.5)."""
    ndim = x0.size
    simplex = [x0.copy()]
    for j in range(ndim):
        v = x0.copy()
        v[j] += steps[j]
        simplex.append(v)
    fvals = [fn(v) for v in simplex]

    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        order = np.argsort(fvals, kind="stable")
        simplex = [simplex[i] for i in order]
        fvals = [fvals[i] for i in order]
        best, worst = fvals[0], fvals[-1]
        spread = max(np.max(np.abs(v - simplex[0])) for v in simplex[1:])
        if abs(worst - best) < ftol * (1.0 + abs(best)) and spread < xtol:
            converged = True
            break
        centroid = np.mean(simplex[:-1], axis=0)
        reflected = centroid + (centroid - simplex[-1])
        f_r = fn(reflected)
        if f_r < best:
            expanded = centroid + 2.0 * (centroid - simplex[-1])
            f_e = fn(expanded)
            if f_e < f_r:
                simplex[-1], fvals[-1] = expanded, f_e
            else:
                simplex[-1], fvals[-1] = reflected, f_r
        elif f_r < fvals[-2]:
            simplex[-1], fvals[-1] = reflected, f_r
        else:
            contracted = centroid + 0.5 * (simplex[-1] - centroid)
            f_c = fn(contracted)
            if f_c < worst:
                simplex[-1], fvals[-1] = contracted, f_c
            else:
                for i in range(1, len(simplex)):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = fn(simplex[i])
    order = np.argsort(fvals, kind="stable")
    return simplex[order[0]], fvals[order[0]], converged, iterations


def fit_gev(values: Sequence[float] | np.ndarray) -> FitResult:
    """GEV(location, scale, shape) MLE via simplex descent from a moment start."""
    x = np.asarray(values, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if x.size < 50:
        raise DataError(f"GEV fit needs n >= 50, got {x.size}")
    std = float(np.std(x))
    if std == 0:
        raise DegenerateDataError("constant data has no GEV scale")
    sigma0 = np.sqrt(6.0) * std / np.pi
    mu0 = float(np.mean(x)) - EULER_GAMMA * sigma0
    theta0 = np.array([mu0, np.log(sigma0), 0.1])
    steps = np.array([
        max(0.05 * abs(mu0), 0.01),
        0.1,
        0.05,
    ])
    theta, nll, converged, iterations = _nelder_mead(
        lambda t: _gev_mean_nll(x, t), theta0, steps, GEV_FTOL, GEV_XTOL, GEV_MAX_ITER
    )
    mu, sigma, xi = float(theta[0]), float(np.exp(theta[1])), float(theta[2])
    # Flag barrier-violating "solutions" as not converged.
    if nll >= 1e9:
        converged = False
    loglik = -nll * x.size
    return FitResult("gev", (mu, sigma, xi), loglik, converged, iterations, int(x.size))


def gev_pdf(x: np.ndarray, location: float, scale: float, shape: float) -> np.ndarray:
    z = (np.asarray(x, dtype=float) - location) / scale
    out = np.zeros_like(z, dtype=float)
    if abs(shape) < GEV_XI_GUMBEL:
        out = np.exp(-z - np.exp(-z)) / scale
        return out
    t = 1.0 + shape * z
    ok = t > 0
    tw = np.where(ok, t, 1.0)
    out = np.where(
        ok,
        np.power(tw, -1.0 - 1.0 / shape) * np.exp(-np.power(tw, -1.0 / shape)) / scale,
        0.0,
    )
    return out


def smooth(series: Sequence[float] | np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; the window truncates at the series edges."""
    if window % 2 == 0:
        raise SpecError(f"smoothing window must be odd, got {window}")
    v = np.asarray(series, dtype=float).ravel()
    if window > v.size:
        raise SpecError(f"window {window} exceeds series length {v.size}")
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(v)))
    n = v.size
    lo = np.maximum(np.arange(n) - half, 0)
    hi = np.minimum(np.arange(n) + half + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)
