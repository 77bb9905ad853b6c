"""Bayesian estimation of the structural parameters on a pooled panel.

All year transitions share one parameter vector. Writing the coefficients as
``w = (bG, bH, bLG, bLH, gamma, mu0)`` and stacking the regressors::

    D_t = [G_t y_t, H_t y_t, G_{t-1} y_{t-1}, H_{t-1} y_{t-1}, y_{t-1}, 1]

the shocks are ``eps_t = y_t - D_t w`` and the pooled log likelihood is::

    -N/2 log(2 pi s2) + sum_t logdet(I - M_t) - |y - D w|^2 / (2 s2)

The residual sum of squares is a quadratic in ``w`` built from the pooled
6 x 6 Gram matrix, and the Jacobian term is a polynomial in (bG, bH) (see
:mod:`firmnet.logdet`), so each likelihood evaluation is O(1) after setup.

The sampler is Metropolis-within-Gibbs:

* ``mu0``: exact normal conditional;
* ``sigma0^2``: exact inverse-gamma conditional;
* ``(bG, bH)`` and ``(bLG, bLH, gamma)``: Gaussian random-walk Metropolis on
  the full posterior. Proposals outside the spectral guard are rejected.

Proposal covariances adapt during burn-in only and are frozen afterwards.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._rng import substream
from .exceptions import ConfigError, ConvergenceError
from .logdet import DENSE_MAX_N, TraceSeriesLogdet, dense_logdet
from .model import PARAM_NAMES, GrowthPanel, StructuralParams
from .network import PanelNetwork, matrix_spectral_bound

LOCATION_NAMES = PARAM_NAMES[:6]
NETWORK_BLOCK = (0, 1)
LAG_BLOCK = (2, 3, 4)


@dataclass(frozen=True)
class PriorSpec:
    """Normal priors ``(mean, variance)`` on the six location parameters and
    an inverse-gamma ``(shape, scale)`` prior on ``sigma0^2``."""

    normal: dict = field(default_factory=lambda: {k: (0.0, 1.0) for k in LOCATION_NAMES})
    sigma2: tuple = (2.0, 0.5)

    def __post_init__(self):
        missing = [k for k in LOCATION_NAMES if k not in self.normal]
        extra = [k for k in self.normal if k not in LOCATION_NAMES]
        if missing or extra:
            raise ConfigError(f"prior keys: missing {missing}, unexpected {extra}")
        for k, (m, v) in self.normal.items():
            if not (np.isfinite(m) and v > 0):
                raise ConfigError(f"prior for {k} needs finite mean and positive variance")
        a, b = self.sigma2
        if not (a > 0 and b > 0):
            raise ConfigError("sigma2 prior shape and scale must be positive")

    @property
    def means(self) -> np.ndarray:
        return np.array([self.normal[k][0] for k in LOCATION_NAMES])

    @property
    def variances(self) -> np.ndarray:
        return np.array([self.normal[k][1] for k in LOCATION_NAMES])

    def to_dict(self) -> dict:
        return {"normal": {k: list(v) for k, v in self.normal.items()}, "sigma2": list(self.sigma2)}

    @classmethod
    def from_dict(cls, doc) -> "PriorSpec":
        if not isinstance(doc, dict):
            raise ConfigError("prior document must be an object")
        extra = set(doc) - {"normal", "sigma2"}
        if extra:
            raise ConfigError(f"unknown prior keys {sorted(extra)}")
        normal = {k: (0.0, 1.0) for k in LOCATION_NAMES}
        try:
            for k, v in doc.get("normal", {}).items():
                normal[k] = (float(v[0]), float(v[1]))
            sigma2 = tuple(float(x) for x in doc.get("sigma2", (2.0, 0.5)))
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"malformed prior: {exc}") from None
        if len(sigma2) != 2:
            raise ConfigError("sigma2 prior needs (shape, scale)")
        return cls(normal, sigma2)


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 10_500
    burn_in: int = 500
    thinning: int = 10
    step_network: float = 0.005
    step_lag: float = 0.01
    seed: int = 0
    logdet_method: str = "trace_series"
    terms: int = 30
    probes: int = 64
    exact_orders: int = 4
    adapt: bool = True

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise ConfigError("iterations must exceed burn_in >= 0")
        if self.thinning < 1:
            raise ConfigError("thinning must be >= 1")
        if not (self.step_network > 0 and self.step_lag > 0):
            raise ConfigError("proposal steps must be positive")
        if self.logdet_method not in ("dense", "trace_series", "none"):
            raise ConfigError(f"unknown logdet method {self.logdet_method!r}")

    @property
    def retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning

    def replace(self, **changes) -> "ChainConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc) -> "ChainConfig":
        extra = set(doc) - set(cls.__dataclass_fields__)
        if extra:
            raise ConfigError(f"unknown chain keys {sorted(extra)}")
        return cls(**doc)


# ---------------------------------------------------------------------------
# pooled likelihood


def panel_logdet(panel: PanelNetwork, years, terms=30, probes=64, exact_orders=4, seed=0) -> TraceSeriesLogdet:
    """Sum over ``years`` of the per-year trace-series surrogates."""
    total = None
    for y in years:
        s = panel.snapshot(y)
        t = TraceSeriesLogdet(s.G, s.H, terms=terms, probes=probes, exact_orders=exact_orders,
                              rng=substream(seed, "logdet", int(y)))
        total = t if total is None else total + t
    return total


class PooledLikelihood:
    """Sufficient statistics of a panel for fast likelihood evaluation.

    Parameters
    ----------
    panel, growth_panel
        Network panel and growth; every panel year after the first that has
        growth for itself and its predecessor becomes a transition.
    logdet_method : {'trace_series', 'dense', 'none'}
        ``'none'`` drops the Jacobian term entirely.
    logdet : TraceSeriesLogdet, optional
        Precomputed surrogate (reused across panels sharing a network).
    """

    def __init__(self, panel: PanelNetwork, growth_panel: GrowthPanel, logdet_method="trace_series", terms=30,
                 probes=64, exact_orders=4, seed=0, logdet=None, dense_max_n=DENSE_MAX_N):
        years = [y for y in panel.years[1:] if y in growth_panel.years and panel.previous_year(y) in growth_panel.years]
        if not years:
            raise ValueError("need at least two consecutive years of network and growth data")
        if growth_panel.firm_count != panel.firm_count:
            raise ValueError("growth and panel disagree on firm count")
        self.years = years
        self.n_firms = panel.firm_count
        self.n_obs = self.n_firms * len(years)
        gram = np.zeros((6, 6))
        cross = np.zeros(6)
        yy = 0.0
        for y in years:
            prev = panel.previous_year(y)
            now, before = panel.snapshot(y), panel.snapshot(prev)
            yt, yp = growth_panel.at(y), growth_panel.at(prev)
            D = np.column_stack([now.G @ yt, now.H @ yt, before.G @ yp, before.H @ yp, yp, np.ones_like(yt)])
            gram += D.T @ D
            cross += D.T @ yt
            yy += float(yt @ yt)
        self.gram, self.cross, self.yy = gram, cross, yy
        self.sum_y = float(cross[5])

        self.logdet_method = logdet_method
        self._snaps = [panel.snapshot(y) for y in years]
        self._rows = [
            (np.asarray(s.G.sum(axis=1)).ravel(), np.asarray(s.H.sum(axis=1)).ravel()) for s in self._snaps
        ]
        self._guard_cache: dict = {}
        if logdet_method == "trace_series":
            self._logdet = logdet or panel_logdet(panel, years, terms, probes, exact_orders, seed)
        elif logdet_method == "dense":
            if self.n_firms > dense_max_n:
                raise ValueError(f"dense log-determinant refused for n={self.n_firms} > {dense_max_n}")
            self._logdet = None
        elif logdet_method == "none":
            self._logdet = None
        else:
            raise ValueError(f"unknown logdet method {logdet_method!r}")

    def sum_of_squares(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(self.yy - 2.0 * w @ self.cross + w @ self.gram @ w)

    def residual_sum(self, w) -> float:
        """Sum over all firm-years of ``y - D w`` excluding the mu0 column."""
        w = np.asarray(w, dtype=float)
        return float(self.sum_y - self.gram[5, :5] @ w[:5])

    def guard(self, beta_G, beta_H) -> bool:
        """True when every transition year passes the spectral guard."""
        a, b = abs(beta_G), abs(beta_H)
        for (rg, rh), s in zip(self._rows, self._snaps):
            if (a * rg + b * rh).max(initial=0.0) < 1.0:
                continue
            if not matrix_spectral_bound(s.G, s.H, a, b).converges:
                return False
        return True

    def logdet(self, beta_G, beta_H) -> float:
        if beta_G == 0 and beta_H == 0 or self.logdet_method == "none":
            return 0.0
        if self.logdet_method == "trace_series":
            return self._logdet.value(beta_G, beta_H)
        return sum(dense_logdet(s.G, s.H, beta_G, beta_H, max_n=self.n_firms) for s in self._snaps)

    def loglik(self, w, sigma2) -> float:
        ss = self.sum_of_squares(w)
        return (-0.5 * self.n_obs * np.log(2 * np.pi * sigma2) + self.logdet(w[0], w[1]) - 0.5 * ss / sigma2)

    def loglik_params(self, params: StructuralParams) -> float:
        return self.loglik(params.as_array()[:6], params.sigma0 ** 2)


# ---------------------------------------------------------------------------
# conjugate conditionals


def mu0_conditional(residual_sum, n_obs, sigma2, prior_mean, prior_var) -> tuple:
    """Normal conditional of mu0 given the other residuals: (mean, variance)."""
    precision = 1.0 / prior_var + n_obs / sigma2
    mean = (prior_mean / prior_var + residual_sum / sigma2) / precision
    return mean, 1.0 / precision


def sigma2_conditional(sum_of_squares, n_obs, shape, scale) -> tuple:
    """Inverse-gamma conditional of sigma0^2: (shape, scale)."""
    return shape + 0.5 * n_obs, scale + 0.5 * sum_of_squares


# ---------------------------------------------------------------------------
# chain


@dataclass
class PosteriorChain:
    """Retained draws in canonical parameter order (``sigma0``, not its square)."""

    samples: np.ndarray
    acceptance: dict
    config: ChainConfig
    names: tuple = PARAM_NAMES

    def __len__(self):
        return self.samples.shape[0]

    def column(self, name) -> np.ndarray:
        return self.samples[:, self.names.index(name)]

    @property
    def means(self) -> StructuralParams:
        return StructuralParams.from_array(self.samples.mean(axis=0))

    def summary(self, level=0.99) -> "ChainSummary":
        return summarize_chain(self, level)


@dataclass
class ChainSummary:
    """Posterior mean and central credible interval per parameter."""

    level: float
    rows: dict  # name -> (mean, lower, upper)

    def table(self) -> list:
        return [(k, *self.rows[k]) for k in self.rows]

    def format(self, digits=5) -> str:
        """Plain-text table: Parameter, Mean, Lower, Upper."""
        head = f"{'Parameter':<10}{'Mean':>12}{'Lower':>12}{'Upper':>12}"
        lines = [head, "-" * len(head)]
        for k, m, lo, hi in self.table():
            lines.append(f"{k:<10}{m:>12.{digits}g}{lo:>12.{digits}g}{hi:>12.{digits}g}")
        return "\n".join(lines)


def summarize_chain(chain, level=0.99) -> ChainSummary:
    """Posterior means and equal-tailed intervals.

    Interval bounds are empirical quantiles with linear interpolation at
    ``(1 - level) / 2`` and ``1 - (1 - level) / 2``. ``chain`` may be a
    :class:`PosteriorChain` or an (m, p) array (columns named by
    ``PARAM_NAMES`` when p == 7, else ``p0, p1, ...``).
    """
    if isinstance(chain, PosteriorChain):
        samples, names = chain.samples, chain.names
    else:
        samples = np.asarray(chain, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        names = PARAM_NAMES if samples.shape[1] == 7 else tuple(f"p{i}" for i in range(samples.shape[1]))
    if samples.shape[0] == 0:
        raise ValueError("empty chain")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    a = (1.0 - level) / 2.0
    lo = np.quantile(samples, a, axis=0)
    hi = np.quantile(samples, 1.0 - a, axis=0)
    mean = samples.mean(axis=0)
    return ChainSummary(level, {k: (float(mean[i]), float(lo[i]), float(hi[i])) for i, k in enumerate(names)})


def _initial_state(growth_panel, priors):
    w = priors.means.copy()
    sigma2 = float(np.var(growth_panel.y, ddof=1))
    return w, sigma2 if sigma2 > 0 else 1.0


def gibbs_sample(panel, growth_panel, priors: PriorSpec | None = None, config: ChainConfig | None = None,
                 likelihood: PooledLikelihood | None = None) -> PosteriorChain:
    """Run the Metropolis-within-Gibbs chain; see the module docstring."""
    priors = priors or PriorSpec()
    config = config or ChainConfig()
    lik = likelihood or PooledLikelihood(panel, growth_panel, config.logdet_method, config.terms, config.probes,
                                         config.exact_orders, config.seed)
    rng = substream(config.seed, "chain")
    pm, pv = priors.means, priors.variances
    a0, b0 = priors.sigma2

    w, sigma2 = _initial_state(growth_panel, priors)
    if not lik.guard(w[0], w[1]):
        raise ConvergenceError(matrix_spectral_bound(lik._snaps[0].G, lik._snaps[0].H, w[0], w[1]).estimate,
                               "initial state violates the spectral guard")

    def log_post(w, sigma2):
        return lik.loglik(w, sigma2) - 0.5 * np.sum((w - pm) ** 2 / pv)

    blocks = {"network": np.array(NETWORK_BLOCK), "lag": np.array(LAG_BLOCK)}
    chol = {
        "network": np.eye(2) * config.step_network,
        "lag": np.eye(3) * config.step_lag,
    }
    log_scale = {k: 0.0 for k in blocks}
    accepted = {k: 0 for k in blocks}
    window_acc = {k: 0 for k in blocks}
    trace = np.empty((config.iterations, 7))
    retained = []
    current = log_post(w, sigma2)
    window = 50

    for it in range(config.iterations):
        # mu0 | rest
        m, v = mu0_conditional(lik.residual_sum(w), lik.n_obs, sigma2, pm[5], pv[5])
        w[5] = m + np.sqrt(v) * rng.standard_normal()
        # sigma2 | rest
        shape, scale = sigma2_conditional(lik.sum_of_squares(w), lik.n_obs, a0, b0)
        sigma2 = scale / rng.gamma(shape)
        current = log_post(w, sigma2)

        for name, idx in blocks.items():
            prop = w.copy()
            step = np.exp(log_scale[name]) * (chol[name] @ rng.standard_normal(idx.size))
            prop[idx] += step
            u = rng.random()
            if name == "network" and not lik.guard(prop[0], prop[1]):
                continue
            cand = log_post(prop, sigma2)
            if np.log(u) < cand - current:
                w, current = prop, cand
                window_acc[name] += 1
                if it >= config.burn_in:
                    accepted[name] += 1

        trace[it, :6] = w
        trace[it, 6] = np.sqrt(sigma2)

        if config.adapt and it < config.burn_in and (it + 1) % window == 0:
            for name, idx in blocks.items():
                rate = window_acc[name] / window
                log_scale[name] += (rate - 0.3) * 2.0
                window_acc[name] = 0
                start = (it + 1) // 2
                if it + 1 - start >= 4 * window:
                    cov = np.cov(trace[start:it + 1][:, idx], rowvar=False)
                    cov = cov * 2.38 ** 2 / idx.size + np.eye(idx.size) * 1e-12
                    try:
                        chol[name] = np.linalg.cholesky(cov)
                        log_scale[name] = 0.0 if rate > 0.05 else log_scale[name]
                    except np.linalg.LinAlgError:
                        pass

        if it >= config.burn_in and (it - config.burn_in + 1) % config.thinning == 0:
            retained.append(trace[it].copy())

    n_post = config.iterations - config.burn_in
    acc = {k: accepted[k] / n_post for k in blocks}
    return PosteriorChain(np.array(retained).reshape(-1, 7), acc, config)


# ---------------------------------------------------------------------------
# measurement-error experiment


COMPARED = ("beta_G", "beta_H", "beta_LG", "beta_LH", "gamma")


@dataclass
class AttenuationReport:
    """Estimates with and without added measurement noise.

    ``theta_true`` holds posterior means from the noiseless latent series,
    ``theta_apparent`` those from the noisy observations, ``generating`` the
    parameters the panel was drawn with. ``r_empirical[k]`` is
    ``theta_apparent[k] / theta_true[k]``.
    """

    theta_true: StructuralParams
    theta_apparent: StructuralParams
    generating: StructuralParams
    noise_sd: float
    r_theoretical: float
    r_empirical: dict
    generator_config: dict
    chain_config: dict

    def to_dict(self) -> dict:
        return {
            "theta_true": self.theta_true.to_dict(),
            "theta_apparent": self.theta_apparent.to_dict(),
            "generating": self.generating.to_dict(),
            "noise_sd": self.noise_sd,
            "r_theoretical": self.r_theoretical,
            "r_empirical": dict(self.r_empirical),
            "generator_config": self.generator_config,
            "chain_config": self.chain_config,
        }


def attenuation_factor(shock_var, noise_var) -> float:
    """``var(eps) / (var(eps) + var(eta))``."""
    return shock_var / (shock_var + noise_var)


def measurement_error_experiment(generator_config, noise_sd, priors=None, chain_config=None,
                                 synthetic=None) -> AttenuationReport:
    """Estimate on latent and on noise-contaminated growth from one panel.

    Both chains share the network, the Jacobian surrogate and the chain seed,
    so ``noise_sd == 0`` reproduces the noiseless run exactly.
    """
    from .synthetic import generate_panel

    if noise_sd < 0:
        raise ConfigError("noise_sd must be >= 0")
    gen = generator_config.replace(noise_sd=float(noise_sd))
    if not gen.params.sigma0 > 0:
        raise ConfigError("degenerate generator: sigma0 must be > 0")
    chain_config = chain_config or ChainConfig()
    data = synthetic if synthetic is not None else generate_panel(gen)
    latent = data.growth.latent()
    observed = GrowthPanel(data.growth.years, data.growth.y)
    years = [y for y in data.panel.years[1:]]
    shared = None
    if chain_config.logdet_method == "trace_series":
        shared = panel_logdet(data.panel, years, chain_config.terms, chain_config.probes, chain_config.exact_orders,
                              chain_config.seed)
    runs = []
    for g in (latent, observed):
        lik = PooledLikelihood(data.panel, g, chain_config.logdet_method, chain_config.terms, chain_config.probes,
                               chain_config.exact_orders, chain_config.seed, logdet=shared)
        runs.append(gibbs_sample(data.panel, g, priors, chain_config, likelihood=lik).means)
    true_est, apparent = runs
    r_emp = {k: getattr(apparent, k) / getattr(true_est, k) for k in COMPARED}
    return AttenuationReport(
        theta_true=true_est,
        theta_apparent=apparent,
        generating=gen.params,
        noise_sd=float(noise_sd),
        r_theoretical=attenuation_factor(gen.params.sigma0 ** 2, float(noise_sd) ** 2),
        r_empirical=r_emp,
        generator_config=gen.to_dict(),
        chain_config=chain_config.to_dict(),
    )
