import numpy as np

from specdrift.grid import (
    build_incidence,
    build_wavenumber_grid,
    dense_basis_matrix,
    select_frequencies,
)
from specdrift.mcmc import ChainConfig, ChainData, run_chain
from specdrift.model import SpdeParams, build_spectral_system
from specdrift.scoring import aggregate
from specdrift.synthetic import make_rainfall_dataset
from specdrift.tobit import build_design, fit_lambda_tilde, latent_to_rain

# The full rainfall workflow on synthetic station records: estimate the
# power exponent, fit the censored model by MCMC with an NWP regression,
# push posterior draws through the state dynamics to get predictive rain
# samples at the stations, and score them against the held-out steps.
ds = make_rainfall_dataset(n=16, n_fit=120, horizon=4, n_stations=20, seed=6)
train, holdout = ds.train, ds.holdout
finite = np.isfinite(train.rain)
print(f"{train.rain.shape[1]} stations, {train.rain.shape[0]} training steps, "
      f"{holdout.rain.shape[0]} holdout leads")
print(f"dry share {np.mean(train.rain[finite] == 0.0):.2f}, "
      f"missing share {np.mean(~finite):.3f}")

# Stage 1: a pooled marginal fit pins the design exponent before the chain
# runs; the chain then samples its own lam around that value.
lam_tilde = fit_lambda_tilde(train.rain)
print(f"\nlam_tilde {lam_tilde:.3f} (generating lam {ds.lam})")
design, center = build_design(train.nwp, lam_tilde)

# Stage 2: MCMC on a reduced basis.  Twenty stations cannot identify all
# 256 grid coefficients, so keep the 40 lowest-wavenumber slots and let
# the nugget absorb the truncated small-scale variance.
grid = build_wavenumber_grid(16)
selection = select_frequencies(grid, 40)
incidence = build_incidence(train.locations, grid)
data = ChainData(
    grid=grid, delta=1.0, y=train.rain, tobit=True,
    design=design, incidence=incidence, selection=selection,
)
start = ds.params.replace(
    rho0=ds.params.rho0 * 1.3, zeta=ds.params.zeta * 0.7,
    gamma=ds.params.gamma * 1.2, tau2=ds.params.tau2 * 1.5,
)
# a few minutes: dense filtering over 40 slots x 120 steps per iteration
config = ChainConfig(n_iter=1200, burn_in=400, seed=11, init=start, lam_init=lam_tilde)
post = run_chain(data, config)
print(f"chain: {post.n_draws} retained draws, joint acceptance {post.accept_rate:.3f}, "
      f"lam acceptance {post.lam_accept_rate:.3f}")
# Expect lam and the dry coefficient b2 to be recovered; the amount
# coefficient b1 posts a touch low because the design fixes the exponent at
# the plug-in lam_tilde rather than the generating lam.
for name, true_val in [("b1", ds.b[0]), ("b2", ds.b[1]), ("lam", ds.lam)]:
    lo, hi = post.credible_interval(name)
    print(f"  {name:>3} generating {true_val:7.3f}  post mean {post.column(name).mean():7.3f}"
          f"  95% [{lo:7.3f}, {hi:7.3f}]")

# Stage 3: posterior-predictive rain at the stations.  For each retained
# draw, restart the dynamics from that draw's final coefficient state,
# propagate with innovation noise, add the regression on the future NWP
# fields and the nugget, and invert the power link.
future_design, _ = build_design(holdout.nwp, lam_tilde, center)
basis_st = dense_basis_matrix(grid, slots=selection.slots, cells=incidence.cell_indices)
horizon, m = holdout.rain.shape
take = np.arange(post.n_draws)[::post.n_draws // 120][:120]
rng = np.random.default_rng(12)
samples = np.empty((horizon, m, take.size))
full = np.zeros(grid.n_slots)
for col, s in enumerate(take):
    params = SpdeParams.from_array(post.theta[s])
    system = build_spectral_system(grid, params, 1.0)
    sd = np.sqrt(system.q[selection.slots])
    alpha = post.alpha_last[s].copy()
    for lead in range(horizon):
        full[selection.slots] = alpha
        alpha = system.apply_propagator(full)[selection.slots]
        alpha += sd * rng.standard_normal(alpha.size)
        w_st = basis_st @ alpha + future_design[lead] @ post.b[s]
        w_st += np.sqrt(params.tau2) * rng.standard_normal(m)
        samples[lead, :, col] = latent_to_rain(w_st, post.lam[s])

# Stage 4: CRPS/MAE against the held-out observations, next to a
# persistence forecast that repeats the last observed station rain
# (missing entries treated as dry).
report = aggregate(samples, holdout.rain)
last_row = np.nan_to_num(train.rain[-1])
persistence = aggregate(np.tile(last_row[None, :, None], (horizon, 1, 1)), holdout.rain)

print(f"\n{'lead':>6} {'crps':>7} {'mae':>7} {'mae(persistence)':>17}")
for lead in range(1, horizon + 1):
    row = report.get("stationwise", lead)
    base = persistence.get("stationwise", lead)
    print(f"{lead:>6} {row.crps:7.3f} {row.mae:7.3f} {base.mae:17.3f}")
row, base = report.get("stationwise"), persistence.get("stationwise")
print(f"{'pooled':>6} {row.crps:7.3f} {row.mae:7.3f} {base.mae:17.3f}")
area = report.get("areal")
print(f"\nareal pooled crps {area.crps:.3f} over {area.n} leads")
