"""Counterfactual shock propagation and the aggregate-fluctuation split.

A year-t shock vector is pushed through the network of another year t'::

    y_{t'|t} = (I - bG G_{t'} - bH H_{t'})^-1 e_t

Comparing the cross-firm spread of ``y_{t'|t}`` over t' shows how well each
year's network absorbs (negative) or spreads (positive) the shocks of year t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    StructuralParams,
    extract_shocks_full,
    extract_shocks_simple,
    neumann_solve,
)
from .network import PanelNetwork

# fixed propagation strengths used by the counterfactual figures
COUNTERFACTUAL_PARAMS = StructuralParams(beta_G=0.06, beta_H=0.05)
SPLITS = ("all", "pos", "neg")


@dataclass(frozen=True)
class ShockSplit:
    e_pos: np.ndarray
    e_neg: np.ndarray

    def select(self, split: str) -> np.ndarray:
        if split == "pos":
            return self.e_pos
        if split == "neg":
            return self.e_neg
        if split == "all":
            return self.e_pos + self.e_neg
        raise ValueError(f"split must be one of {SPLITS}")


def split_shocks(e) -> ShockSplit:
    """Positive and negative parts; zeros land in neither."""
    e = np.asarray(e, dtype=float)
    return ShockSplit(np.where(e > 0, e, 0.0), np.where(e < 0, e, 0.0))


def propagate_counterfactual(e, panel: PanelNetwork, network_year, beta_G=0.06, beta_H=0.05, terms=30) -> np.ndarray:
    """Growth implied by shocks ``e`` on the network of ``network_year``."""
    snap = panel.snapshot(network_year)
    return neumann_solve(snap.G, snap.H, beta_G, beta_H, e, terms=terms).x


@dataclass
class ProfileRow:
    """One shock year's counterfactual growth across every network year."""

    shock_year: int
    split: str
    network_years: list
    sd: np.ndarray
    mean: np.ndarray
    growth: np.ndarray | None = None  # (len(network_years), n) when kept

    @property
    def own_index(self) -> int:
        return self.network_years.index(self.shock_year)

    @property
    def own_sd(self) -> float:
        """Reference level: spread under the shock year's own network."""
        return float(self.sd[self.own_index])

    def argmin_year(self) -> int:
        return self.network_years[int(np.argmin(self.sd))]

    def rows(self):
        for k, y in enumerate(self.network_years):
            yield (self.shock_year, y, self.split, float(self.sd[k]), float(self.mean[k]), int(y == self.shock_year))


PROFILE_HEADER = ("shock_year", "network_year", "split", "sd", "mean", "own_year")


def propagation_profile(panel, growth_panel, shock_year, params=COUNTERFACTUAL_PARAMS, split="all", terms=30,
                        keep_growth=False) -> ProfileRow:
    """Spread and mean of ``y^{split}_{t'|t}`` for every panel year t'.

    Shocks are the contemporaneous residuals ``(I - M_t) y_t`` so that the
    own-year cell reproduces observed growth. Standard deviations are
    population (ddof=0) across firms.
    """
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}")
    snap = panel.snapshot(shock_year)
    e = extract_shocks_simple(params, snap.G, snap.H, growth_panel.at(shock_year)).e
    shocks = split_shocks(e).select(split) if split != "all" else e
    years = list(panel.years)
    out = np.empty((len(years), e.size))
    for k, y in enumerate(years):
        out[k] = propagate_counterfactual(shocks, panel, y, params.beta_G, params.beta_H, terms)
    return ProfileRow(int(shock_year), split, years, out.std(axis=1), out.mean(axis=1), out if keep_growth else None)


def counterfactual_grid(panel, growth_panel, params=COUNTERFACTUAL_PARAMS, splits=SPLITS, shock_years=None,
                        terms=30) -> list:
    """Profiles for every (shock year, split)."""
    shock_years = panel.years if shock_years is None else shock_years
    return [propagation_profile(panel, growth_panel, t, params, s, terms) for t in shock_years for s in splits]


def grid_table(grid) -> list:
    return [r for row in grid for r in row.rows()]


@dataclass
class AggregateDecomposition:
    """Yearly cross-firm means with, without and frozen network.

    ``mean_growth`` is observed growth, ``mean_shocks`` the full structural
    residuals (a world without propagation), ``mean_frozen`` growth when the
    network stays at ``base_year``. Standard deviations of the yearly series
    use ddof=1.
    """

    years: list
    base_year: int
    mean_growth: np.ndarray
    mean_shocks: np.ndarray
    mean_frozen: np.ndarray
    sd_connected: float
    sd_shocks: float
    sd_frozen: float
    network_share: float
    renewal_uplift: float
    cumulative_growth: np.ndarray = field(init=False)
    cumulative_shocks: np.ndarray = field(init=False)
    cumulative_frozen: np.ndarray = field(init=False)

    def __post_init__(self):
        self.cumulative_growth = np.cumsum(self.mean_growth)
        self.cumulative_shocks = np.cumsum(self.mean_shocks)
        self.cumulative_frozen = np.cumsum(self.mean_frozen)

    def rows(self):
        for k, y in enumerate(self.years):
            yield (y, float(self.mean_growth[k]), float(self.mean_shocks[k]), float(self.mean_frozen[k]),
                   float(self.cumulative_growth[k]), float(self.cumulative_shocks[k]),
                   float(self.cumulative_frozen[k]))

    def summary(self) -> dict:
        return {
            "base_year": self.base_year,
            "sd_connected": self.sd_connected,
            "sd_shocks": self.sd_shocks,
            "sd_frozen": self.sd_frozen,
            "network_share": self.network_share,
            "renewal_uplift": self.renewal_uplift,
        }


DECOMPOSITION_HEADER = ("year", "mean_growth", "mean_shocks", "mean_frozen", "cum_growth", "cum_shocks",
                        "cum_frozen")


def aggregate_decomposition(panel, growth_panel, params: StructuralParams, base_year=None, terms=30,
                            frozen_lags=False) -> AggregateDecomposition:
    """How much of the aggregate growth fluctuation the network explains.

    Covers every year after the first. The frozen series propagates each
    year's full residual through the ``base_year`` network (default: first
    year). With ``frozen_lags`` it instead re-simulates the whole model with
    both contemporaneous and lagged networks held at ``base_year``, starting
    from observed growth at ``base_year``.
    """
    years = list(panel.years)
    if len(years) < 3:
        raise ValueError("aggregate decomposition needs at least 3 panel years")
    base = years[0] if base_year is None else int(base_year)
    if base not in years:
        raise KeyError(f"base year {base} not in panel")
    series = years[1:]
    b = panel.snapshot(base)
    mg, ms, mf = [], [], []
    gaps = []
    prev_frozen = growth_panel.at(base)
    for y in series:
        yt = growth_panel.at(y)
        e = extract_shocks_full(params, panel, growth_panel, y).e
        if frozen_lags:
            rhs = e + params.gamma * prev_frozen + params.beta_LG * (b.G @ prev_frozen) + params.beta_LH * (b.H @ prev_frozen)
            frozen = neumann_solve(b.G, b.H, params.beta_G, params.beta_H, rhs, terms=terms).x
            prev_frozen = frozen
        else:
            frozen = propagate_counterfactual(e, panel, base, params.beta_G, params.beta_H, terms)
        mg.append(yt.mean())
        ms.append(e.mean())
        mf.append(frozen.mean())
        gaps.append(float(np.mean(yt - frozen)))
    mg, ms, mf = np.array(mg), np.array(ms), np.array(mf)
    sd_c = float(np.std(mg, ddof=1))
    sd_s = float(np.std(ms, ddof=1))
    share = 1.0 - sd_s / sd_c if sd_c > 0 else float("nan")
    return AggregateDecomposition(
        years=series,
        base_year=base,
        mean_growth=mg,
        mean_shocks=ms,
        mean_frozen=mf,
        sd_connected=sd_c,
        sd_shocks=sd_s,
        sd_frozen=float(np.std(mf, ddof=1)),
        network_share=share,
        renewal_uplift=float(np.mean(gaps)),
    )
