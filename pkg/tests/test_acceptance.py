"""Exit criteria on synthetic panels.

Each test records one PASS/FAIL line, repeated in the terminal summary.
Run only these with ``pytest -m acceptance``.
"""

import time

import numpy as np
import pytest

from firmnet.counterfactual import aggregate_decomposition, propagation_profile
from firmnet.estimation import COMPARED, ChainConfig, PooledLikelihood, gibbs_sample, measurement_error_experiment
from firmnet.logdet import dense_logdet, logdet_I_minus_M
from firmnet.model import extract_shocks_full, neumann_solve
from firmnet.network import neighbor_growth_stats
from firmnet.synthetic import EXPERIMENT_TRUTH, GeneratorConfig, generate_panel

from conftest import record_criterion

pytestmark = pytest.mark.acceptance

# tolerances pinned from the exit criteria
RECOVERY_BETA_TOL = 0.015
RECOVERY_GAMMA_TOL = 0.05
RECOVERY_RUNTIME_LIMIT = 30 * 60
ATTENUATION_TARGET = 0.8
ATTENUATION_TOL = 0.1
SOLVER_REL_TOL = 1e-8
LOGDET_SE_MULTIPLE = 3
ROUND_TRIP_TOL = 1e-8
SHARE_TOL = 0.1
SEEDS = 100
REQUIRED_90 = 90
REQUIRED_95 = 95

# reduced chains for the many-seed suites; full length where a single run is checked
REDUCED_CHAIN = ChainConfig(iterations=2500, burn_in=500, thinning=10)
# 2,000 firms leave the per-seed sd profile too noisy for a 90% bar; see the notes
COUNTERFACTUAL_FIRMS = 30_000


def middle_year(panel):
    return panel.years[len(panel.years) // 2]


def test_synthetic_recovery():
    start = time.perf_counter()
    data = generate_panel(GeneratorConfig(firm_count=2000, n_years=10, seed=0))
    chain = gibbs_sample(data.panel, data.growth, config=ChainConfig())
    elapsed = time.perf_counter() - start
    means = chain.means
    errs = {
        "beta_G": abs(means.beta_G - EXPERIMENT_TRUTH.beta_G),
        "beta_H": abs(means.beta_H - EXPERIMENT_TRUTH.beta_H),
        "gamma": abs(means.gamma - EXPERIMENT_TRUTH.gamma),
    }
    ok = (errs["beta_G"] <= RECOVERY_BETA_TOL and errs["beta_H"] <= RECOVERY_BETA_TOL
          and errs["gamma"] <= RECOVERY_GAMMA_TOL and elapsed < RECOVERY_RUNTIME_LIMIT)
    detail = (f"beta_G={means.beta_G:.4f} beta_H={means.beta_H:.4f} gamma={means.gamma:.4f} "
              f"runtime={elapsed:.1f}s (10,500 iterations, trace-series logdet)")
    assert record_criterion("synthetic recovery", ok, detail)


def test_attenuation_ratio_full_chain():
    rep = measurement_error_experiment(GeneratorConfig(firm_count=2000, n_years=10, seed=0), 0.15)
    ratios = {k: rep.r_empirical[k] for k in ("beta_G", "beta_H")}
    ok = all(abs(r - ATTENUATION_TARGET) <= ATTENUATION_TOL for r in ratios.values())
    detail = f"r_theoretical={rep.r_theoretical:.3f} " + " ".join(f"{k}={v:.3f}" for k, v in ratios.items())
    assert record_criterion("attenuation ratio", ok, detail)


def test_attenuation_direction_over_seeds():
    hits = 0
    for seed in range(SEEDS):
        rep = measurement_error_experiment(GeneratorConfig(firm_count=2000, n_years=10, seed=seed), 0.15,
                                           chain_config=REDUCED_CHAIN.replace(seed=seed))
        hits += all(abs(getattr(rep.theta_apparent, k)) < abs(getattr(rep.theta_true, k)) for k in COMPARED)
    ok = hits >= REQUIRED_95
    assert record_criterion("attenuation direction", ok,
                            f"{hits}/{SEEDS} seeds attenuate all of {', '.join(COMPARED)}")


def test_solver_oracle():
    worst = 0.0
    for seed in range(200):
        data = generate_panel(GeneratorConfig(firm_count=500, n_years=1, seed=seed))
        snap = data.panel.snapshot(data.panel.years[0])
        rhs = np.random.default_rng(seed).normal(size=500)
        A = np.eye(500) - 0.06 * snap.G.toarray() - 0.06 * snap.H.toarray()
        direct = np.linalg.solve(A, rhs)
        x = neumann_solve(snap.G, snap.H, 0.06, 0.06, rhs, terms=30).x
        worst = max(worst, np.linalg.norm(x - direct) / np.linalg.norm(direct))
    within = 0
    worst_z = 0.0
    for seed in range(50):
        data = generate_panel(GeneratorConfig(firm_count=500, n_years=1, seed=1000 + seed))
        snap = data.panel.snapshot(data.panel.years[0])
        exact = dense_logdet(snap.G, snap.H, 0.06, 0.06)
        est = logdet_I_minus_M(snap.G, snap.H, 0.06, 0.06, method="trace_series", seed=seed)
        z = abs(est.value - exact) / est.se if est.se > 0 else (0.0 if est.value == exact else np.inf)
        worst_z = max(worst_z, z)
        within += z <= LOGDET_SE_MULTIPLE
    ok = worst <= SOLVER_REL_TOL and within == 50
    assert record_criterion("solver oracle", ok,
                            f"max rel err {worst:.2e} over 200 solves; logdet within 3 SE on {within}/50 "
                            f"(max {worst_z:.2f} SE)")


def test_round_trip_identity():
    worst = 0.0
    for seed in range(SEEDS):
        data = generate_panel(GeneratorConfig(firm_count=1000, n_years=3, seed=seed))
        for k, year in enumerate(data.panel.years[1:], start=1):
            e = extract_shocks_full(data.config.params, data.panel, data.growth, year).e
            worst = max(worst, float(np.max(np.abs(e - data.shocks[k]))))
    ok = worst <= ROUND_TRIP_TOL
    assert record_criterion("round trip", ok, f"max |error| {worst:.2e} over {SEEDS} panels")


def test_counterfactual_profiles():
    neg_ok = pos_ok = 0
    for seed in range(SEEDS):
        data = generate_panel(GeneratorConfig(firm_count=COUNTERFACTUAL_FIRMS, n_years=10, seed=seed))
        t = middle_year(data.panel)
        neg = propagation_profile(data.panel, data.growth, t, split="neg")
        pos = propagation_profile(data.panel, data.growth, t, split="pos")
        neg_ok += neg.argmin_year() >= t
        pos_ok += pos.sd[pos.own_index + 1] > pos.own_sd
    ok = neg_ok >= REQUIRED_90 and pos_ok >= REQUIRED_90
    assert record_criterion("counterfactual profiles", ok,
                            f"(a) neg minimum at t'>=t in {neg_ok}/{SEEDS}; (b) pos sd at t+1 above own in "
                            f"{pos_ok}/{SEEDS} ({COUNTERFACTUAL_FIRMS} firms)")


def _oracle_share(data):
    """Re-simulate with dense solves; compare propagated against raw shocks."""
    p = data.config.params
    panel, shocks = data.panel, data.shocks
    n = panel.firm_count
    z = np.empty_like(shocks)
    prev = None
    for k, year in enumerate(panel.years):
        s = panel.snapshot(year)
        A = np.eye(n) - p.beta_G * s.G.toarray() - p.beta_H * s.H.toarray()
        rhs = shocks[k].copy()
        if prev is not None:
            b = panel.snapshot(panel.years[k - 1])
            rhs += (p.beta_LG * b.G.toarray() + p.beta_LH * b.H.toarray()) @ prev + p.gamma * prev
        z[k] = np.linalg.solve(A, rhs)
        prev = z[k]
    connected = z[1:].mean(axis=1)
    unconnected = shocks[1:].mean(axis=1)
    return 1.0 - np.std(unconnected, ddof=1) / np.std(connected, ddof=1)


def test_aggregate_share_against_oracle():
    diffs = []
    for seed in range(20):
        data = generate_panel(GeneratorConfig(firm_count=2000, n_years=10, seed=seed))
        estimate = gibbs_sample(data.panel, data.growth, config=REDUCED_CHAIN.replace(seed=seed)).means
        share = aggregate_decomposition(data.panel, data.growth, estimate).network_share
        diffs.append(abs(share - _oracle_share(data)))
    worst = max(diffs)
    ok = worst <= SHARE_TOL
    assert record_criterion("aggregate share", ok, f"max |share - oracle| {worst:.3f} over 20 panels")


def test_renewal_uplift_positive():
    positive = 0
    for seed in range(SEEDS):
        data = generate_panel(GeneratorConfig(firm_count=2000, n_years=10, seed=seed))
        positive += aggregate_decomposition(data.panel, data.growth, data.config.params).renewal_uplift > 0
    ok = positive >= REQUIRED_95
    assert record_criterion("renewal uplift", ok, f"uplift > 0 in {positive}/{SEEDS} seeds")


def test_descriptive_ordering():
    hits = 0
    for seed in range(SEEDS):
        data = generate_panel(GeneratorConfig(firm_count=2000, n_years=10, seed=seed))
        severed, formed = neighbor_growth_stats(data.panel, data.growth, middle_year(data.panel), max_order=1)
        hits += (formed.proportion_positive[0] > severed.proportion_positive[0]
                 and severed.proportion_negative[0] > formed.proportion_negative[0])
    ok = hits >= REQUIRED_90
    assert record_criterion("descriptive ordering", ok,
                            f"formed links lean positive and severed links lean negative in {hits}/{SEEDS}")


def test_pooled_setup_reused():
    # guards the runtime budget: the logdet surrogate is built once per panel
    data = generate_panel(GeneratorConfig(firm_count=300, n_years=3, seed=0))
    lik = PooledLikelihood(data.panel, data.growth)
    chain = gibbs_sample(data.panel, data.growth, config=REDUCED_CHAIN, likelihood=lik)
    assert len(chain) == REDUCED_CHAIN.retained
