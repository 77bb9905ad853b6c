"""Structural growth model on a two-layer firm network.

For each year t the growth vector solves::

    (I - bG G_t - bH H_t) y_t = (bLG G_{t-1} + bLH H_{t-1}) y_{t-1} + gamma y_{t-1} + eps_t

with ``eps_t ~ N(mu0, sigma0^2)`` independently per firm. The inverse of
``I - M`` is never formed; solves go through a truncated Neumann series.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np

from .exceptions import ConvergenceError
from .network import PanelNetwork, matrix_spectral_bound

PARAM_NAMES = ("beta_G", "beta_H", "beta_LG", "beta_LH", "gamma", "mu0", "sigma0")


@dataclass(frozen=True)
class StructuralParams:
    """The seven model parameters.

    ``beta_G``/``beta_H`` weight contemporaneous neighbour growth,
    ``beta_LG``/``beta_LH`` lagged neighbour growth, ``gamma`` own lagged
    growth; ``mu0`` and ``sigma0`` are the shock mean and standard deviation.
    """

    beta_G: float = 0.0
    beta_H: float = 0.0
    beta_LG: float = 0.0
    beta_LH: float = 0.0
    gamma: float = 0.0
    mu0: float = 0.0
    sigma0: float = 1.0

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError("parameters must be finite")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be > 0")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "StructuralParams":
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "StructuralParams":
        return replace(self, **changes)


@dataclass
class GrowthPanel:
    """Per-firm log growth by year.

    ``y`` has shape (n_years, firm_count). ``z`` optionally holds the latent
    noiseless growth of a synthetic panel.
    """

    years: list
    y: np.ndarray
    z: np.ndarray | None = None

    def __post_init__(self):
        self.years = [int(v) for v in self.years]
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 2 or self.y.shape[0] != len(self.years):
            raise ValueError("y must have shape (n_years, firm_count)")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("growth values must be finite")
        if self.z is not None:
            self.z = np.asarray(self.z, dtype=float)
            if self.z.shape != self.y.shape:
                raise ValueError("z must match y in shape")

    @property
    def firm_count(self) -> int:
        return self.y.shape[1]

    def index(self, year: int) -> int:
        try:
            return self.years.index(int(year))
        except ValueError:
            raise KeyError(f"no growth data for year {year}") from None

    def at(self, year: int) -> np.ndarray:
        return self.y[self.index(year)]

    def latent(self) -> "GrowthPanel":
        """Panel whose observed series is the latent one."""
        if self.z is None:
            raise ValueError("no latent series")
        return GrowthPanel(self.years, self.z.copy())

    def with_values(self, y) -> "GrowthPanel":
        return GrowthPanel(self.years, y, self.z)

    def permuted(self, perm) -> "GrowthPanel":
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        z = None if self.z is None else self.z[:, inv]
        return GrowthPanel(self.years, self.y[:, inv], z)


@dataclass
class ShockVector:
    year: int | None
    e: np.ndarray

    def __post_init__(self):
        self.e = np.asarray(self.e, dtype=float)
        if not np.all(np.isfinite(self.e)):
            raise ValueError("shock vector has non-finite entries")


@dataclass
class GaussianLikelihood:
    """One year's multivariate normal log density of y_t given y_{t-1}.

    ``logdet_Sigma`` is ``n log sigma0^2 - 2 logdet(I - M)``; ``quad_form`` is
    the Mahalanobis term, evaluated in shock space.
    """

    mean: np.ndarray
    logdet_Sigma: float
    quad_form: float
    loglik: float
    logdet_se: float = 0.0


class NeumannSolution(NamedTuple):
    x: np.ndarray
    last_term_norm: float


def neumann_solve(G, H, beta_G, beta_H, rhs, terms=30, check=True) -> NeumannSolution:
    """Solve ``(I - beta_G G - beta_H H) x = rhs`` by a truncated series.

    Returns ``sum_{k<terms} M^k rhs`` and the 2-norm of the last term added,
    a proxy for the truncation error. ``rhs`` may be a vector or an (n, p)
    block. With ``check`` the spectral guard runs first and a
    :class:`ConvergenceError` is raised when it fails.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != G.shape[0] or G.shape != H.shape:
        raise ValueError("dimension mismatch")
    if check:
        bound = matrix_spectral_bound(G, H, beta_G, beta_H)
        if not bound.converges:
            raise ConvergenceError(bound.estimate)
    term = rhs.copy()
    total = rhs.copy()
    if beta_G == 0 and beta_H == 0:
        return NeumannSolution(total, 0.0 if terms > 1 else float(np.linalg.norm(term)))
    for _ in range(terms - 1):
        term = beta_G * (G @ term) + beta_H * (H @ term)
        total += term
    return NeumannSolution(total, float(np.linalg.norm(term)))


def lag_rhs(params: StructuralParams, G_prev, H_prev, y_prev) -> np.ndarray:
    """``(bLG G_{t-1} + bLH H_{t-1} + gamma I) y_{t-1}``."""
    y_prev = np.asarray(y_prev, dtype=float)
    out = params.gamma * y_prev
    if params.beta_LG:
        out += params.beta_LG * (G_prev @ y_prev)
    if params.beta_LH:
        out += params.beta_LH * (H_prev @ y_prev)
    return out


def apply_I_minus_M(G, H, beta_G, beta_H, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = y.copy()
    if beta_G:
        out -= beta_G * (G @ y)
    if beta_H:
        out -= beta_H * (H @ y)
    return out


def simulate_step(params, G_t, H_t, G_prev, H_prev, y_prev, eps_t, terms=30, check=True) -> np.ndarray:
    """One forward step of the structural model; returns ``y_t``."""
    rhs = lag_rhs(params, G_prev, H_prev, y_prev) + np.asarray(eps_t, dtype=float)
    return neumann_solve(G_t, H_t, params.beta_G, params.beta_H, rhs, terms=terms, check=check).x


def extract_shocks_simple(params, G_t, H_t, y_t) -> ShockVector:
    """Contemporaneous-only shocks ``e_t = (I - M_t) y_t``."""
    return ShockVector(None, apply_I_minus_M(G_t, H_t, params.beta_G, params.beta_H, y_t))


def extract_shocks_full(params, panel: PanelNetwork, growth_panel: GrowthPanel, year_t: int) -> ShockVector:
    """Full structural residual including the lag terms.

    ``e_t = (I - M_t) y_t - (bLG G_{t-1} + bLH H_{t-1}) y_{t-1} - gamma y_{t-1}``
    """
    prev = panel.previous_year(year_t)
    now, before = panel.snapshot(year_t), panel.snapshot(prev)
    y_t = growth_panel.at(year_t)
    y_prev = growth_panel.at(prev)
    e = apply_I_minus_M(now.G, now.H, params.beta_G, params.beta_H, y_t)
    e -= lag_rhs(params, before.G, before.H, y_prev)
    return ShockVector(int(year_t), e)


def log_likelihood(params, panel, growth_panel, year_t, logdet_method="dense", terms=30, **logdet_options) -> GaussianLikelihood:
    """Gaussian log density of ``y_t`` given ``y_{t-1}`` and the networks.

    The mean is ``(I - M)^-1 (mu0 1 + lag)``. The quadratic form uses the
    shock-space identity ``(y - mean)' Sigma^-1 (y - mean) = |eps - mu0|^2 / sigma0^2``
    with ``eps = (I - M) y - lag``, so no inverse is formed.
    ``logdet_options`` pass through to :func:`firmnet.logdet.logdet_I_minus_M`.
    """
    from .logdet import logdet_I_minus_M

    prev = panel.previous_year(year_t)
    now, before = panel.snapshot(year_t), panel.snapshot(prev)
    bound = matrix_spectral_bound(now.G, now.H, params.beta_G, params.beta_H)
    if not bound.converges:
        raise ConvergenceError(bound.estimate)
    y_t = growth_panel.at(year_t)
    lag = lag_rhs(params, before.G, before.H, growth_panel.at(prev))
    n = y_t.shape[0]
    mean = neumann_solve(now.G, now.H, params.beta_G, params.beta_H, lag + params.mu0, terms=terms, check=False).x
    eps = apply_I_minus_M(now.G, now.H, params.beta_G, params.beta_H, y_t) - lag - params.mu0
    s2 = params.sigma0 ** 2
    quad = float(eps @ eps) / s2
    ld = logdet_I_minus_M(now.G, now.H, params.beta_G, params.beta_H, method=logdet_method, **logdet_options)
    logdet_sigma = n * np.log(s2) - 2.0 * ld.value
    loglik = -0.5 * (n * np.log(2 * np.pi) + logdet_sigma + quad)
    return GaussianLikelihood(mean, float(logdet_sigma), quad, float(loglik), 2.0 * ld.se)
