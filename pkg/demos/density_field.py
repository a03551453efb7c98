"""Grid-free density reconstruction under an optimal control plan.

Solves the single-link control program, plugs the optimal boundary
flows into the exact cumulative-count solution and samples the implied
density field on a fine space-time grid — no simulation involved, every
value is evaluated in closed form.  Writes demo_field.csv next to this
script (time rows, space columns) for external plotting.

Run:  python3 demos/density_field.py
"""

import csv
import os

import numpy as np

from laxflow import BoundaryFlows, InitialDensityProfile, build_max_outflow_lp, parse_scenario
from laxflow.moskowitz import density_field

HERE = os.path.dirname(os.path.abspath(__file__))
SCENARIO = os.path.join(HERE, "..", "scenarios", "i880_link.scn")
OUT = os.path.join(HERE, "demo_field.csv")


def main():
    with open(SCENARIO, encoding="utf-8") as handle:
        scn = parse_scenario(handle.read())
    ls = scn.links[0]
    fd, disc = ls.fd(), ls.disc()
    chance = ls.chance(alpha=0.025)

    sol = build_max_outflow_lp(fd, chance, disc).solve()
    flows = BoundaryFlows(sol.series("q_in", disc.n_max),
                          sol.series("q_out", disc.n_max))
    profile = InitialDensityProfile(np.asarray(ls.rho_mean))

    field, rho = density_field(fd, profile, flows, disc, nt=121, nx=97)
    print(f"sampled {rho.shape[0]} x {rho.shape[1]} density values")
    print(f"density range: {rho.min():.4f} .. {rho.max():.4f} veh/m "
          f"(jam {fd.rho_m} veh/m)")

    with open(OUT, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        centers = (field.x[:-1] + field.x[1:]) / 2
        writer.writerow(["t_s"] + [f"x={x:.0f}m" for x in centers])
        for i, t in enumerate(field.t):
            writer.writerow([f"{t:.1f}"] + [f"{v:.6f}" for v in rho[i]])
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
