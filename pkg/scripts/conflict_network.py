"""Conflict network preset: projection certificate and KL to the projected QRE at several T."""

import matplotlib.pyplot as plt
import numpy as np

from _common import parser, prepare
from nearzero.dynamics import integrate, qre_solve, trap_radius
from nearzero.experiments import dumps_json, conflict_preset, write_text
from nearzero.game import mpd_exact, random_interior_strategy
from nearzero.projection import nearest_nzsg

args = parser(__doc__, "results/conflict_network").parse_args()
out = prepare(args)
gc = conflict_preset()
res = nearest_nzsg(gc)
exact = mpd_exact(gc, res.projected)
cert = res.certificate()
cert["delta_exact"] = exact.value
write_text(out / "certificate.json", dumps_json(cert))

temps = (0.35, 0.5, 2.5)
fig, axes = plt.subplots(1, len(temps), figsize=(12, 3.5))
for ax, t in zip(axes, temps):
    p = qre_solve(res.projected, t)
    radius = trap_radius(3, exact, t)
    for s in range(5):
        x0 = random_interior_strategy(gc, np.random.default_rng(args.seed + s))
        traj = integrate(gc, x0, t, 500.0, reference=p, delta=exact, record_every=10)
        ax.semilogy(traj.times, traj.kl_p_x, lw=0.7)
    ax.axhline(radius, color="k", ls="--", lw=0.8)
    ax.set_title(f"T={t}, radius {radius:.3g}")
    ax.set_xlabel("t")
axes[0].set_ylabel("KL(p || x(t))")
fig.tight_layout()
fig.savefig(out / "conflict_network.png", dpi=120)
print(out / "conflict_network.png", "2-norm certificate", cert["delta_2norm"], "exact", exact.value)
