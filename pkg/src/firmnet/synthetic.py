"""Synthetic longitudinal panels with shock-responsive link renewal.

Year 0 networks come from a capped nomination scheme: each firm names at
most ``nomination_cap`` partners in G and, independently, in H (out-degree
capped, in-degree free). Every later year:

1. shocks ``eps_t ~ N(mu0, sigma0^2)`` are drawn;
2. links are renewed. An existing link (i, j) is severed with probability
   ``p_sever_on_negative`` when the counterpart j has a negative shock in
   year t. Each firm with spare capacity then, with probability
   ``p_form_on_positive``, nominates a new partner drawn uniformly from
   firms whose shock was positive ``formation_lag`` years earlier,
   excluding itself and current partners;
3. latent growth ``z_t`` follows the structural model on the renewed
   networks, and ``y_t = z_t + eta_t`` with ``eta_t ~ N(0, noise_sd^2)``.

Randomness comes from named sub-streams of ``seed`` (network, shocks,
renewal, noise), so changing ``noise_sd`` leaves ``z`` untouched.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ._rng import substream
from .exceptions import ConfigError, ConvergenceError
from .model import GrowthPanel, StructuralParams, simulate_step, neumann_solve
from .network import PanelNetwork, Snapshot, adjacency, matrix_spectral_bound

# posterior magnitudes used as the generating truth of the measurement-error experiment
EXPERIMENT_TRUTH = StructuralParams(beta_G=0.06, beta_H=0.06, beta_LG=0.04, beta_LH=0.04, gamma=-0.3, mu0=0.0, sigma0=0.3)


@dataclass(frozen=True)
class GeneratorConfig:
    firm_count: int = 2000
    n_years: int = 10
    start_year: int = 2003
    nomination_cap: int = 5
    mean_degree: float = 1.7
    params: StructuralParams = field(default_factory=lambda: EXPERIMENT_TRUTH)
    p_sever_on_negative: float = 0.35
    p_form_on_positive: float = 0.30
    formation_lag: int = 1
    noise_sd: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.firm_count < 2:
            raise ConfigError("firm_count must be >= 2")
        if self.n_years < 1:
            raise ConfigError("n_years must be >= 1")
        if self.nomination_cap < 1:
            raise ConfigError("nomination_cap must be >= 1")
        for name in ("p_sever_on_negative", "p_form_on_positive"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.p_form_on_positive > self.p_sever_on_negative:
            raise ConfigError("p_form_on_positive must not exceed p_sever_on_negative")
        if self.mean_degree < 0:
            raise ConfigError("mean_degree must be >= 0")
        cap = min(self.nomination_cap, self.firm_count - 1)
        if self.mean_degree > cap:
            raise ConfigError(
                f"requested {self.mean_degree * self.firm_count:g} nominations per layer exceed "
                f"capacity {cap} x {self.firm_count}"
            )
        if self.formation_lag not in (0, 1):
            raise ConfigError("formation_lag must be 0 or 1")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")
        if not isinstance(self.params, StructuralParams):
            raise ConfigError("params must be StructuralParams")

    def replace(self, **changes) -> "GeneratorConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "GeneratorConfig":
        doc = dict(doc)
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown generator keys {sorted(extra)}")
        if "params" in doc and not isinstance(doc["params"], StructuralParams):
            p = dict(EXPERIMENT_TRUTH.to_dict())
            p.update(doc["params"])
            try:
                doc["params"] = StructuralParams(**p)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
        return cls(**doc)


@dataclass
class SyntheticPanel:
    """Generated network, growth (y and latent z) and the true shocks."""

    panel: PanelNetwork
    growth: GrowthPanel
    shocks: np.ndarray  # (n_years, firm_count)
    config: GeneratorConfig


def _initial_layer(rng, n, cap, mean_degree):
    cap = min(cap, n - 1)
    deg = rng.binomial(cap, mean_degree / cap if cap else 0.0, size=n)
    rows, cols = [], []
    for i in np.flatnonzero(deg):
        t = rng.choice(n - 1, size=deg[i], replace=False)
        t[t >= i] += 1
        rows.append(np.full(deg[i], i))
        cols.append(t)
    if not rows:
        return adjacency([], [], n)
    return adjacency(np.concatenate(rows), np.concatenate(cols), n)


def _renew(rng, a: sp.csr_matrix, shock_now, shock_form, cfg: GeneratorConfig) -> sp.csr_matrix:
    n = a.shape[0]
    rows = np.repeat(np.arange(n), np.diff(a.indptr))
    cols = a.indices.astype(np.int64)
    u = rng.random(cols.size)
    keep = ~((shock_now[cols] < 0) & (u < cfg.p_sever_on_negative))
    rows, cols = rows[keep], cols[keep]

    outdeg = np.bincount(rows, minlength=n)
    pool = np.flatnonzero(shock_form > 0)
    attempt = rng.random(n) < cfg.p_form_on_positive
    # a single uniform draw per attempting firm keeps the stream layout fixed
    picks = rng.integers(0, max(pool.size, 1), size=n)
    candidates = np.flatnonzero(attempt & (outdeg < min(cfg.nomination_cap, n - 1)))
    if pool.size == 0 or candidates.size == 0:
        return adjacency(rows, cols, n)
    existing = set((rows * n + cols).tolist())
    new_r, new_c = [], []
    for i in candidates.tolist():
        j = int(pool[picks[i]])
        if j == i or i * n + j in existing:
            continue
        existing.add(i * n + j)
        new_r.append(i)
        new_c.append(j)
    return adjacency(np.concatenate([rows, new_r]), np.concatenate([cols, new_c]), n)


def generate_panel(config: GeneratorConfig = GeneratorConfig(), terms: int = 30) -> SyntheticPanel:
    """Draw a synthetic panel; see the module docstring for the recipe."""
    config.validate()
    p = config.params
    n, T = config.firm_count, config.n_years
    net_rng = substream(config.seed, "network")
    shock_rng = substream(config.seed, "shocks")
    renew_rng = substream(config.seed, "renewal")
    noise_rng = substream(config.seed, "noise")

    G = _initial_layer(net_rng, n, config.nomination_cap, config.mean_degree)
    H = _initial_layer(net_rng, n, config.nomination_cap, config.mean_degree)
    bound = matrix_spectral_bound(G, H, p.beta_G, p.beta_H)
    if not bound.converges:
        raise ConfigError(f"true parameters fail the spectral guard on the initial network (rho ~ {bound.estimate:.4g})")

    eps = shock_rng.normal(p.mu0, p.sigma0, size=(T, n))
    years = [config.start_year + t for t in range(T)]
    snaps = {years[0]: Snapshot(G, H)}
    z = np.empty((T, n))
    z[0] = neumann_solve(G, H, p.beta_G, p.beta_H, eps[0], terms=terms, check=False).x
    for t in range(1, T):
        form_shock = eps[t - config.formation_lag]
        G_new = _renew(renew_rng, G, eps[t], form_shock, config)
        H_new = _renew(renew_rng, H, eps[t], form_shock, config)
        if not matrix_spectral_bound(G_new, H_new, p.beta_G, p.beta_H).converges:
            raise ConvergenceError(matrix_spectral_bound(G_new, H_new, p.beta_G, p.beta_H).estimate)
        z[t] = simulate_step(p, G_new, H_new, G, H, z[t - 1], eps[t], terms=terms, check=False)
        G, H = G_new, H_new
        snaps[years[t]] = Snapshot(G, H)

    noise = noise_rng.normal(0.0, 1.0, size=(T, n))
    y = z + config.noise_sd * noise if config.noise_sd > 0 else z.copy()
    panel = PanelNetwork([f"F{i:05d}" for i in range(n)], years, snaps)
    return SyntheticPanel(panel, GrowthPanel(years, y, z), eps, config)


# ---------------------------------------------------------------------------
# growth persistence diagnostic


@dataclass
class PersistenceTable:
    """Mean next-year growth by (current growth bin, size bin).

    ``mean`` and ``sem`` are NaN where a cell is empty; ``count`` is zero
    there. Rows index growth bins, columns size bins.
    """

    growth_edges: np.ndarray
    size_edges: np.ndarray
    mean: np.ndarray
    count: np.ndarray
    sem: np.ndarray

    def cells(self):
        """Non-empty cells as (growth_bin, size_bin, mean, count, sem)."""
        for g, s in zip(*np.nonzero(self.count)):
            yield int(g), int(s), float(self.mean[g, s]), int(self.count[g, s]), float(self.sem[g, s])


def _edges(values, bins):
    if np.ndim(bins) == 0:
        q = np.linspace(0, 1, int(bins) + 1)
        e = np.quantile(values, q)
        e[0], e[-1] = -np.inf, np.inf
        return np.unique(e)
    return np.asarray(bins, dtype=float)


def persistence_table(growth_panel: GrowthPanel, size_proxy, bins=(10, 5)) -> PersistenceTable:
    """Binned stand-in for a smoothed persistence surface.

    Pairs every firm-year growth ``y_t`` with ``y_{t+1}`` and the firm's size
    covariate at t. ``size_proxy`` is a (firm_count,) vector or an
    (n_years, firm_count) array. ``bins`` is ``(growth_bins, size_bins)``;
    each entry is a count (quantile edges) or an explicit edge array.
    """
    y = growth_panel.y
    T, n = y.shape
    if T < 2:
        raise ValueError("need at least two consecutive years")
    size = np.asarray(size_proxy, dtype=float)
    if size.shape == (n,):
        size = np.broadcast_to(size, (T, n))
    if size.shape != (T, n):
        raise ValueError("size_proxy must be (firm_count,) or (n_years, firm_count)")
    cur = y[:-1].ravel()
    nxt = y[1:].ravel()
    sz = size[:-1].ravel()
    ge = _edges(cur, bins[0])
    se = _edges(sz, bins[1])
    gi = np.clip(np.searchsorted(ge, cur, side="right") - 1, 0, len(ge) - 2)
    si = np.clip(np.searchsorted(se, sz, side="right") - 1, 0, len(se) - 2)
    inside = (cur >= ge[0]) & (cur <= ge[-1]) & (sz >= se[0]) & (sz <= se[-1])
    shape = (len(ge) - 1, len(se) - 1)
    flat = np.ravel_multi_index((gi[inside], si[inside]), shape)
    cnt = np.bincount(flat, minlength=np.prod(shape)).reshape(shape)
    s1 = np.bincount(flat, weights=nxt[inside], minlength=np.prod(shape)).reshape(shape)
    s2 = np.bincount(flat, weights=nxt[inside] ** 2, minlength=np.prod(shape)).reshape(shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(cnt > 0, s1 / cnt, np.nan)
        var = np.where(cnt > 1, (s2 - cnt * mean ** 2) / (cnt - 1), np.nan)
        sem = np.sqrt(np.maximum(var, 0.0) / cnt)
    return PersistenceTable(ge, se, mean, cnt, sem)
