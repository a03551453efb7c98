"""Robust boundary control of a single highway link.

Loads the bundled 3.9 km link scenario, solves the throughput-maximizing
model under density uncertainty, then sweeps the throughput/congestion
trade-off weight to show how the controller trades queue length for
outflow.

Run:  python3 demos/single_link_control.py
"""

import os

import numpy as np

from laxflow import (
    TradeoffSpec,
    build_max_outflow_lp,
    build_tradeoff_lp,
    level_of_service,
    parse_scenario,
)

HERE = os.path.dirname(os.path.abspath(__file__))
SCENARIO = os.path.join(HERE, "..", "scenarios", "i880_link.scn")


def main():
    with open(SCENARIO, encoding="utf-8") as handle:
        scn = parse_scenario(handle.read())
    ls = scn.links[0]
    fd, disc = ls.fd(), ls.disc()
    chance = ls.chance(alpha=0.025)

    print(f"link {ls.id}: {ls.length:.0f} m, capacity {fd.capacity:.2f} veh/s "
          f"({fd.capacity * 3600:.0f} vph)")
    print(f"horizon {disc.t_max:.0f} s in {disc.n_max} steps of {disc.T:.0f} s")
    print(f"initial densities (veh/m): {np.round(ls.rho_mean, 3)}")
    print(f"uncertainty sigma = {ls.rho_sigma[0]} veh/m at 97.5% confidence\n")

    sol = build_max_outflow_lp(fd, chance, disc).solve()
    q_in = sol.series("q_in", disc.n_max)
    q_out = sol.series("q_out", disc.n_max)
    print("throughput-maximizing plan:")
    print(f"  total outflow   {q_out.sum() * disc.T:8.1f} veh")
    print(f"  mean inflow     {q_in.mean():8.3f} veh/s")
    print(f"  outflow profile {np.round(q_out, 3)}\n")

    print("trade-off sweep (lambda weights throughput, 1-lambda congestion):")
    print("  lambda   total outflow [veh]   level of service [veh*s]")
    for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
        tsol = build_tradeoff_lp(fd, chance, disc, TradeoffSpec(lam)).solve()
        total = tsol.series("q_out", disc.n_max).sum() * disc.T
        print(f"  {lam:6.2f}   {total:19.1f}   {level_of_service(tsol, disc):14.1f}")


if __name__ == "__main__":
    main()
