"""Payoff noise redrawn every 50 steps at delta in {0.75, 2, 3}: KL to the QRE over time."""

import matplotlib.pyplot as plt
import numpy as np

from _common import parser, prepare
from nearzero.dynamics import qre_solve
from nearzero.experiments import epsilon_for_delta, noisy_run, tail_spread, trajectory_csv, write_text
from nearzero.game import random_interior_strategy
from _common import nzsg

args = parser(__doc__, "results/noise_injection").parse_args()
out = prepare(args)
t = 0.75
g = nzsg(1, 3)
p = qre_solve(g, t)
x0 = random_interior_strategy(g, np.random.default_rng(args.seed))
fig, ax = plt.subplots(figsize=(6, 3.5))
for i, delta in enumerate((0.75, 2.0, 3.0)):
    traj = noisy_run(g, t, epsilon_for_delta(g, delta), 50, 500.0, seed=args.seed, x0=x0,
                     reference=p, record_every=10)
    write_text(out / f"delta_{delta}.csv", trajectory_csv(traj))
    ax.semilogy(traj.times, traj.kl_p_x, color=f"C{i}", lw=0.7,
                label=f"delta={delta}, spread {tail_spread(traj):.3g}")
    ax.axhline(traj.radius, color=f"C{i}", ls="--", lw=0.8)
ax.set_xlabel("t")
ax.set_ylabel("KL(p || x(t))")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(out / "noise_injection.png", dpi=120)
print(out / "noise_injection.png")
