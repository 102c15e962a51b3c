"""KL divergence to the QRE on a random logit plane, with the trap contour."""

import matplotlib.pyplot as plt
import numpy as np

from _common import parser, prepare
from nearzero.dynamics import qre_solve, trap_radius
from nearzero.experiments import EmbeddingSpec, embedding_kl, logit_embedding
from _common import nzsg

args = parser(__doc__, "results/kl_contours").parse_args()
out = prepare(args)
n, delta, t = 5, 1.0, 0.75
game = nzsg(args.seed, n, "random")
p = qre_solve(game, t)
spec = EmbeddingSpec.random(n, args.seed)
kl = embedding_kl(p, logit_embedding(spec))
radius = trap_radius(n, delta, t)
np.savetxt(out / "kl_grid.csv", kl, delimiter=",")

fig, ax = plt.subplots(figsize=(5, 4))
cs = ax.contourf(spec.betas, spec.alphas, np.log1p(kl), levels=30, cmap="viridis")
ax.contour(spec.betas, spec.alphas, kl, levels=[radius], colors="w", linewidths=2)
fig.colorbar(cs, label="ln(1 + KL(p || z))")
ax.set_xlabel("beta")
ax.set_ylabel("alpha")
ax.set_title(f"N={n}, delta={delta}, T={t}: radius {radius:.3g}")
fig.tight_layout()
fig.savefig(out / "kl_contours.png", dpi=120)
print(out / "kl_contours.png")
