"""Covariances of GEV models by one-dimensional quadrature, and the
reduction of utility correlations to utility-difference correlations.

For a pair of routes (k, k') the generating function restricted to those two
coordinates is written as

    G(u, v) = a*u + b*v + sum_m (p_m u^(1/s_m) + q_m v^(1/s_m))^(s_m)

which covers MNL, every cross-nested logit and the PCL. With u = exp(-x) and
v = 1, ``P(x) = u G_u / G`` is the probability that eps_k - eps_k' exceeds x
(unit scale), so ``-dP/dx`` is the density of the difference and

    Cov = theta0^2 * (pi^2/6 - E[(eps_k - eps_k')^2] / 2 + (E eps_k - E eps_k')^2 / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .gev import GevModel, MnlModel, ModelError, PclModel

EULER_GAMMA = 0.5772156649015329
GUMBEL_VAR = math.pi ** 2 / 6.0


class QuadratureError(RuntimeError):
    """The truncated integral does not meet its tail bound."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre rule on panels graded geometrically towards
    every kink of the integrand.

    ``x_max`` is the truncation half-width in units of theta0 and ``nodes``
    the node budget per kink (both sides together).
    """

    x_max: float = 40.0
    nodes: int = 4096
    order: int = 16
    h_min: float = 1e-8
    tail_tol: float = 1e-10

    def __post_init__(self):
        if self.nodes < 4 * self.order:
            raise ValueError("nodes must be at least 4 * order")


@dataclass(frozen=True)
class PairGenerator:
    """Two-coordinate restriction of a generating function (see module doc)."""

    a: float
    b: float
    log_p: np.ndarray
    log_q: np.ndarray
    s: np.ndarray

    def value(self, u, v):
        """G(u, v) for positive u, v (used to cross-check the full-vector form)."""
        total = self.a * u + self.b * v
        for lp, lq, s in zip(self.log_p, self.log_q, self.s):
            total += (math.exp(lp) * u ** (1 / s) + math.exp(lq) * v ** (1 / s)) ** s
        return total

    @property
    def marginal_k(self) -> float:
        return self.a + float(np.exp(self.s * self.log_p).sum())

    @property
    def marginal_kk(self) -> float:
        return self.b + float(np.exp(self.s * self.log_q).sum())

    def kinks(self) -> np.ndarray:
        """Points where a nest switches from being dominated by k to k'."""
        return np.unique(np.round(self.s * (self.log_p - self.log_q), 12))

    def _terms(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        zp = self.log_p[:, None] - x[None, :] / self.s[:, None]
        zq = np.broadcast_to(self.log_q[:, None], zp.shape)
        lse = np.logaddexp(zp, zq)
        log_t = self.s[:, None] * lse
        w = np.exp(zp - lse)
        parts = [log_t]
        if self.a > 0:
            parts.append((math.log(self.a) - x)[None, :])
        if self.b > 0:
            parts.append(np.full((1, x.size), math.log(self.b)))
        log_g = logsumexp(np.vstack(parts), axis=0)
        t = np.exp(log_t - log_g)
        lin_u = self.a * np.exp(-x - log_g) if self.a > 0 else np.zeros_like(x)
        return t, w, lin_u

    def probability(self, x) -> np.ndarray:
        """P(eps_k - eps_k' > x) in unit scale."""
        t, w, lin_u = self._terms(np.atleast_1d(x))
        return lin_u + (t * w).sum(axis=0)

    def density(self, x) -> np.ndarray:
        """-dP/dx, the density of eps_k - eps_k' in unit scale."""
        t, w, lin_u = self._terms(np.atleast_1d(x))
        p = lin_u + (t * w).sum(axis=0)
        curv = (t * (w * w + w * (1.0 - w) / self.s[:, None])).sum(axis=0)
        return lin_u + curv - p * p


def _linear_only(a: float, b: float) -> PairGenerator:
    empty = np.zeros(0)
    return PairGenerator(a, b, empty, empty, empty)


def pair_generator(model: GevModel, k: int, kk: int) -> PairGenerator:
    if k == kk:
        raise ValueError("pair_generator needs two distinct routes")
    if isinstance(model, MnlModel):
        return _linear_only(1.0, 1.0)
    if isinstance(model, PclModel):
        model = model.as_cnl()
    ak = model.alpha[:, k]
    akk = model.alpha[:, kk]
    both = (ak > 0) & (akk > 0)
    a = float(ak[(ak > 0) & ~both].sum())
    b = float(akk[(akk > 0) & ~both].sum())
    s = model.delta[both]
    return PairGenerator(a, b, np.log(ak[both]) / s, np.log(akk[both]) / s, s)


def generating_function(model: GevModel, y) -> float:
    """G(y) on a nonnegative vector, unit scale."""
    y = np.asarray(y, dtype=float)
    if isinstance(model, MnlModel):
        return float(y.sum())
    if isinstance(model, PclModel):
        model = model.as_cnl()
    total = 0.0
    for alpha, d in zip(model.alpha, model.delta):
        inner = float(np.sum(alpha ** (1.0 / d) * y ** (1.0 / d)))
        total += inner ** d if inner > 0 else 0.0
    return total


def generating_gradient(model: GevModel, y) -> np.ndarray:
    """dG/dy_k on a positive vector, unit scale."""
    y = np.asarray(y, dtype=float)
    if isinstance(model, MnlModel):
        return np.ones_like(y)
    if isinstance(model, PclModel):
        model = model.as_cnl()
    grad = np.zeros_like(y)
    for alpha, d in zip(model.alpha, model.delta):
        c = alpha ** (1.0 / d)
        inner = float(np.sum(c * y ** (1.0 / d)))
        if inner > 0:
            grad += c * y ** (1.0 / d - 1.0) * inner ** (d - 1.0)
    return grad


def marginal_mean(model: GevModel, k: int) -> float:
    """E[eps_k] = theta0 * (gamma + ln G(e_k))."""
    a_k = generating_function(model, np.eye(model.n_routes)[k])
    if not a_k > 0:
        raise ModelError(f"malformed model: G(e_{k}) = {a_k!r}")
    return model.theta0 * (EULER_GAMMA + math.log(a_k))


def _panel_breaks(centers: np.ndarray, spec: QuadratureSpec) -> np.ndarray:
    lo = min(-spec.x_max, centers.min() - spec.x_max)
    hi = max(spec.x_max, centers.max() + spec.x_max)
    per_side = max(2, spec.nodes // (2 * spec.order))
    width = hi - lo
    steps = np.geomspace(width, spec.h_min, per_side)
    pts = [np.array([lo, hi])]
    for c in centers:
        pts.append(c + steps)
        pts.append(c - steps)
        pts.append(np.array([c]))
    br = np.unique(np.clip(np.concatenate(pts), lo, hi))
    return br[np.concatenate(([True], np.diff(br) > 1e-14))]


def quadrature_nodes(centers, spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    br = _panel_breaks(np.atleast_1d(np.asarray(centers, dtype=float)), spec)
    gx, gw = np.polynomial.legendre.leggauss(spec.order)
    mid = 0.5 * (br[1:] + br[:-1])
    half = 0.5 * (br[1:] - br[:-1])
    x = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    return x, w


def difference_moments(gen: PairGenerator, spec: QuadratureSpec) -> tuple[float, float, float]:
    """Zeroth, first and second moments of eps_k - eps_k' (unit scale)."""
    centers = np.concatenate(([0.0], gen.kinks(), [math.log(gen.marginal_k / gen.marginal_kk)]))
    x, w = quadrature_nodes(centers, spec)
    f = gen.density(x)
    lo, hi = x.min(), x.max()
    edge = gen.density(np.array([lo, hi]))
    tail = float(np.max(np.abs(edge) * (np.array([lo, hi]) ** 2 + 2 * np.abs([lo, hi]) + 2)))
    if tail > spec.tail_tol:
        raise QuadratureError(f"tail bound {tail:.3e} exceeds {spec.tail_tol:.1e}; increase x_max")
    return float(w @ f), float(w @ (x * f)), float(w @ (x * x * f))


def gev_covariance(model: GevModel, k: int, kk: int, spec: QuadratureSpec | None = None) -> float:
    """Covariance of the random terms of routes k and k' (cost units squared)."""
    if k == kk:
        raise ValueError("gev_covariance needs two distinct routes")
    spec = spec or QuadratureSpec()
    gen = pair_generator(model, k, kk)
    _, _, second = difference_moments(gen, spec)
    mean_gap = math.log(gen.marginal_k) - math.log(gen.marginal_kk)
    unit = GUMBEL_VAR - 0.5 * second + 0.5 * mean_gap ** 2
    return model.theta0 ** 2 * unit


def gev_covariance_matrix(model: GevModel, spec: QuadratureSpec | None = None) -> np.ndarray:
    n = model.n_routes
    var = GUMBEL_VAR * model.theta0 ** 2
    cov = np.eye(n) * var
    if isinstance(model, MnlModel):
        return cov
    for i in range(n):
        for j in range(i + 1, n):
            cov[i, j] = cov[j, i] = gev_covariance(model, i, j, spec)
    return cov


def gev_fcm(model: GevModel, spec: QuadratureSpec | None = None) -> np.ndarray:
    """Full correlation matrix; every GEV marginal has variance pi^2 theta0^2 / 6."""
    corr = gev_covariance_matrix(model, spec) / (GUMBEL_VAR * model.theta0 ** 2)
    np.fill_diagonal(corr, 1.0)
    return corr


def reduce_to_rcm(matrix, reference: int, variances=None) -> np.ndarray:
    """Correlations of utility differences (eps_k - eps_r) for k != r.

    ``matrix`` is a covariance matrix, or a correlation matrix when
    ``variances`` is given.
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    if n < 2:
        raise ValueError("need at least two routes")
    if not 0 <= reference < n:
        raise ValueError(f"reference index {reference} out of range")
    if variances is not None:
        sd = np.sqrt(np.asarray(variances, dtype=float))
        m = m * np.outer(sd, sd)
    keep = [k for k in range(n) if k != reference]
    b = np.zeros((n - 1, n))
    b[np.arange(n - 1), keep] = 1.0
    b[:, reference] = -1.0
    red = b @ m @ b.T
    d = np.diag(red)
    if np.any(d <= 1e-12 * max(1.0, float(np.abs(np.diag(m)).max()))):
        raise ValueError("zero difference variance against the reference route")
    sd = np.sqrt(d)
    out = red / np.outer(sd, sd)
    np.fill_diagonal(out, 1.0)
    return out
