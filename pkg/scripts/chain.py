"""Three-agent chain: Q-Learning on the zero-sum game and on a perturbation with delta <= 0.75."""

import matplotlib.pyplot as plt
import numpy as np

from _common import parser, prepare
from nearzero.dynamics import integrate, qre_solve
from nearzero.experiments import epsilon_for_delta, perturb_game, trajectory_csv, write_text
from nearzero.game import dumps_game, random_interior_strategy
from _common import nzsg

args = parser(__doc__, "results/chain").parse_args()
out = prepare(args)
t, delta = 0.75, 0.75
base = nzsg(args.seed + 1, 3)
noisy, cert = perturb_game(base, epsilon_for_delta(base, delta), args.seed)
p = qre_solve(base, t)
write_text(out / "base.json", dumps_game(base))
write_text(out / "perturbed.json", dumps_game(noisy))

fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
for ax, (name, g) in zip(axes, (("zero-sum", base), ("perturbed", noisy))):
    for s in range(5):
        x0 = random_interior_strategy(g, np.random.default_rng(s))
        traj = integrate(g, x0, t, 100.0, reference=p, delta=cert, record_every=10)
        if s == 0:
            write_text(out / f"{name}.csv", trajectory_csv(traj))
        for k in range(3):
            ax.plot(traj.times, traj.states[:, 2 * k], color=f"C{k}", lw=0.8)
    for k in range(3):
        ax.axhline(p[k][0], color=f"C{k}", ls="--", lw=0.8)
    ax.set_title(name)
    ax.set_xlabel("t")
axes[0].set_ylabel("probability of action 1")
fig.tight_layout()
fig.savefig(out / "chain.png", dpi=120)
print(out / "chain.png")
