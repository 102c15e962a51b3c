"""Ten-agent network: final iterates of 100 perturbed games per delta, against the QRE."""

import csv

import matplotlib.pyplot as plt

from _common import parser, prepare
from nearzero.experiments import CampaignSpec, GeneratorSpec, campaign

p = parser(__doc__, "results/ten_agent_campaign")
p.add_argument("--runs", type=int, default=100)
p.add_argument("--workers", type=int, default=4)
args = p.parse_args()
out = prepare(args)
deltas = (2.0, 3.0, 5.0, 9.0)
fig, axes = plt.subplots(1, len(deltas), figsize=(14, 3.5), sharey=True)
for ax, delta in zip(axes, deltas):
    spec = CampaignSpec(generator=GeneratorSpec(agents=10, graph="random", seed=args.seed),
                        runs=args.runs, delta=delta, horizon=200.0, record_every=1000,
                        seed=args.seed, workers=args.workers, name=f"delta_{delta}")
    report = campaign(spec, out / f"delta_{delta}")
    with open(out / f"delta_{delta}" / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    stats = [{"med": float(r["median"]), "q1": float(r["q1"]), "q3": float(r["q3"]),
              "whislo": float(r["min"]), "whishi": float(r["max"]), "label": r["agent"]}
             for r in rows]
    ax.bxp(stats, showfliers=False)
    ax.scatter(range(1, 11), [float(r["qre"]) for r in rows], marker="x", color="r", zorder=3)
    ax.set_title(f"delta={delta}: {report['violations']} outside")
    ax.set_xlabel("agent")
axes[0].set_ylabel("final probability of action 1")
fig.tight_layout()
fig.savefig(out / "ten_agent_campaign.png", dpi=120)
print(out / "ten_agent_campaign.png")
