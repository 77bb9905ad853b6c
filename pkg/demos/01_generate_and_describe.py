"""Generate a synthetic buyer-supplier panel and look at how links churn."""

# %%
import numpy as np

from firmnet import GeneratorConfig, generate_panel, link_diff, neighbor_growth_stats

data = generate_panel(GeneratorConfig(firm_count=1500, n_years=6, seed=1))
panel, growth = data.panel, data.growth
print(f"{panel.firm_count} firms, years {panel.years[0]}-{panel.years[-1]}")

# %% [markdown]
# Buyer (G) and supplier (H) layers are stored separately; each firm names at
# most five partners per layer, so out-degree is capped while in-degree is not.

# %%
for year in panel.years:
    g, h = panel.nnz(year)
    print(f"{year}: {g} buyer links, {h} supplier links, mean growth {growth.at(year).mean():+.4f}")

# %% [markdown]
# Yearly link turnover. Links to firms hit by a negative shock are severed more
# readily than links to positive-shock firms are formed.

# %%
for year in panel.years[1:]:
    print(year, link_diff(panel, year).counts)

# %% [markdown]
# Who sits at the ends of formed and severed links? Order 1 is the link
# endpoints themselves, higher orders walk outward through the network.

# %%
year = panel.years[3]
for rec in neighbor_growth_stats(panel, growth, year, max_order=3):
    pos = np.round(rec.proportion_positive, 3)
    neg = np.round(rec.proportion_negative, 3)
    print(f"{rec.type:8s} links={rec.link_count:5d} positive share {pos} negative share {neg}")
