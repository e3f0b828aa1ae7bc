import numpy as np

from specdrift.grid import build_wavenumber_grid
from specdrift.mcmc import ChainConfig, ChainData, ess, run_chain
from specdrift.model import PARAM_NAMES, SpdeParams, build_spectral_system
from specdrift.simulate import observe, simulate
from specdrift.synthetic import sigma2_for_variance

# Posterior sampling for the fully observed Gaussian model: simulate a
# field, hand the noisy frames to the adaptive MH sampler, compare the
# marginal posteriors against the generating values.
truth = SpdeParams(
    rho0=0.12, sigma2=1.0, zeta=0.2, rho1=0.1, gamma=2.0,
    psi=0.7, mu_x=0.12, mu_y=-0.06, tau2=0.1,
)
truth = truth.replace(sigma2=sigma2_for_variance(truth, 8, 1.0))

grid = build_wavenumber_grid(8)
system = build_spectral_system(grid, truth, 1.0)
traj = simulate(system, 300, seed=1, init="stationary")
obs = observe(traj, tau2=truth.tau2, seed=2)

# Start the chain away from the truth; the first 2500 iterations adapt the
# proposal covariance and are discarded.  Takes about half a minute.
start = truth.replace(
    rho0=truth.rho0 * 1.3, zeta=truth.zeta * 0.7, gamma=truth.gamma * 1.2,
    tau2=truth.tau2 * 1.5,
)
data = ChainData(grid=grid, delta=1.0, y=obs.w)
config = ChainConfig(n_iter=6000, burn_in=2500, seed=3, init=start)
post = run_chain(data, config)
print(f"{post.n_draws} retained draws, joint acceptance {post.accept_rate:.3f}")

truth_vec = truth.as_array()
print(f"\n{'param':>6} {'truth':>10} {'post mean':>10} {'95% interval':>24} {'ess':>6}")
for j, name in enumerate(PARAM_NAMES):
    col = post.column(name)
    lo, hi = post.credible_interval(name)
    flag = " " if lo <= truth_vec[j] <= hi else "*"
    print(f"{name:>6} {truth_vec[j]:10.3g} {col.mean():10.3g} "
          f"[{lo:10.3g}, {hi:10.3g}]{flag} {ess(col):6.0f}")
print("(* = generating value outside the interval)")

# Expect eight of the nine intervals to cover.  The damping rate zeta is
# the softest direction of this posterior: every mode decays at rate
# k'Sigma k + zeta, so only the handful of slow low-wavenumber modes carry
# information that separates zeta from the diffusion, and on an 8x8 grid a
# few hundred frames leave that direction ridged.  The interval lands low
# here; sharpening it needs a finer grid, not more frames.
