"""Godunov (cell-transmission) forward simulator.

Independent of the variational machinery: links are split into small
cells, interface fluxes are min(demand, supply), and junctions split
sending flows by the transition matrices.  Used both as an oracle for
the boundary-count solutions and as a replay engine that evaluates a
fixed control plan against realized initial densities.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .fd import FDParams
from .network import Junction, Link, Network


class CFLError(Exception):
    """Raised when a requested time step exceeds the stability limit."""


def _demand(fd: FDParams, rho: np.ndarray) -> np.ndarray:
    """Vectorized sending capacity (flux below rho_c, capacity above)."""
    rho = np.clip(rho, 0.0, fd.rho_m)
    return np.where(rho <= fd.rho_c, fd.v_f * rho, fd.capacity)


def _supply(fd: FDParams, rho: np.ndarray) -> np.ndarray:
    """Vectorized receiving capacity (capacity below rho_c, congested flux above)."""
    rho = np.clip(rho, 0.0, fd.rho_m)
    return np.where(rho <= fd.rho_c, fd.capacity, fd.w * (rho - fd.rho_m))


def _check_cfl(fd: FDParams, dt: float, dx: float) -> None:
    limit = dx / max(fd.v_f, abs(fd.w))
    if dt > limit + 1e-12:
        raise CFLError(f"dt={dt:g} exceeds stability limit {limit:g} (dx={dx:g})")


def step_link(
    fd: FDParams,
    rho: np.ndarray,
    inflow: float,
    outflow_cap: float,
    dt: float,
    dx: float,
) -> tuple[np.ndarray, float, float]:
    """Advance one link by one time step.

    Interface flux between consecutive cells is min(demand(upstream),
    supply(downstream)); the boundary inflow is accepted up to the first
    cell's supply and the outflow releases the last cell's demand up to
    ``outflow_cap``.  Returns (next densities, accepted inflow, released
    outflow); the update conserves vehicles exactly.
    """
    _check_cfl(fd, dt, dx)
    rho = np.asarray(rho, dtype=float)
    demand = _demand(fd, rho)
    supply = _supply(fd, rho)
    accepted = min(float(inflow), float(supply[0]))
    released = min(float(demand[-1]), float(outflow_cap))
    flux = np.empty(rho.size + 1)
    flux[0] = accepted
    flux[-1] = released
    if rho.size > 1:
        flux[1:-1] = np.minimum(demand[:-1], supply[1:])
    nxt = rho + (dt / dx) * (flux[:-1] - flux[1:])
    return nxt, accepted, released


@dataclass
class LinkTrace:
    """Density history of one link plus its boundary flow record."""

    dx: float
    densities: np.ndarray  # (n_steps + 1, n_cells)
    accepted: np.ndarray  # (n_steps,) veh/s
    released: np.ndarray  # (n_steps,) veh/s

    @property
    def max_density(self) -> float:
        return float(self.densities.max())

    def vehicle_count(self, step: int = -1) -> float:
        return float(self.densities[step].sum() * self.dx)

    def cumulative_inflow(self, dt: float) -> np.ndarray:
        """Vehicles having crossed the upstream boundary by each step."""
        return np.concatenate([[0.0], np.cumsum(self.accepted) * dt])

    def cumulative_outflow(self, dt: float) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.released) * dt])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        n_cells = self.densities.shape[1]
        writer.writerow([f"x={self.dx * (j + 0.5):.1f}" for j in range(n_cells)])
        for row in self.densities:
            writer.writerow([f"{v:.6g}" for v in row])
        return buf.getvalue()


def simulate_link(
    fd: FDParams,
    length: float,
    initial: np.ndarray,
    q_in: np.ndarray,
    q_out_cap: np.ndarray,
    horizon: float,
    n_cells: int,
    cfl: float = 0.9,
) -> LinkTrace:
    """Run one isolated link under stepwise-constant boundary flows.

    ``initial`` holds one density per cell (or per even segment, which is
    then replicated across cells); ``q_in``/``q_out_cap`` hold one value
    per control step of length horizon/len(q_in).
    """
    if len(q_in) != len(q_out_cap):
        raise ValueError("q_in and q_out_cap must cover the same steps")
    dx = length / n_cells
    dt = cfl * dx / max(fd.v_f, abs(fd.w))
    n_steps = int(math.ceil(horizon / dt))
    dt = horizon / n_steps
    initial = np.asarray(initial, dtype=float)
    if initial.size != n_cells:
        if n_cells % initial.size:
            raise ValueError("cell count must be a multiple of the profile size")
        initial = np.repeat(initial, n_cells // initial.size)
    control_dt = horizon / len(q_in)
    dens = np.empty((n_steps + 1, n_cells))
    dens[0] = initial
    acc = np.empty(n_steps)
    rel = np.empty(n_steps)
    for s in range(n_steps):
        idx = min(int((s * dt) / control_dt), len(q_in) - 1)
        dens[s + 1], acc[s], rel[s] = step_link(
            fd, dens[s], q_in[idx], q_out_cap[idx], dt, dx
        )
    return LinkTrace(dx=dx, densities=dens, accepted=acc, released=rel)


@dataclass
class ControlPlan:
    """Fixed boundary decisions replayed through the simulator.

    ``entry_inflows`` maps entry-link ids to per-step demand profiles
    (veh/s); ``ramp_inflows`` maps on-ramp ids to per-step metered flows.
    Everything else (mainline junction fluxes, exit outflows) is left to
    the dynamics.
    """

    entry_inflows: dict[str, np.ndarray]
    ramp_inflows: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class SimulationResult:
    dt: float
    time: np.ndarray
    links: dict[str, LinkTrace]
    entry_queues: dict[str, np.ndarray]  # per-step backlog, veh
    ramp_served: dict[str, np.ndarray]  # veh/s actually admitted
    conservation_drift: float  # |count change - net boundary flow|, veh

    def max_density(self, link_id: str) -> float:
        return self.links[link_id].max_density


def entry_links(network: Network) -> list[str]:
    fed = {o for j in network.junctions for o in j.outgoing}
    return [l.id for l in network.links if l.id not in fed]


def exit_links(network: Network) -> list[str]:
    drained = {i for j in network.junctions for i in j.incoming}
    return [l.id for l in network.links if l.id not in drained]


def simulate_network(
    network: Network,
    realized: dict[str, np.ndarray],
    plan: ControlPlan,
    horizon: float,
    cells_per_segment: int = 8,
    cfl: float = 0.9,
    exit_caps: dict[str, float] | None = None,
) -> SimulationResult:
    """Replay a control plan on realized initial densities.

    ``realized`` maps link ids to per-segment densities (veh/m,
    lane-aggregated).  At each junction the fixed on-ramp flows are
    served first; main-lane sending flows are split by the transition
    shares and, when an outgoing link lacks supply, every contributing
    link is cut back by the most limiting outgoing ratio so the split
    proportions are preserved.  Unaccepted entry demand accumulates in a
    virtual queue per entry link.  Spillback is an outcome, not an error.
    """
    links = {l.id: l for l in network.links}
    dx = {lid: links[lid].disc.X / cells_per_segment for lid in links}
    dt = min(
        cfl * dx[lid] / max(links[lid].fd.v_f, abs(links[lid].fd.w)) for lid in links
    )
    n_steps = int(math.ceil(horizon / dt))
    dt = horizon / n_steps
    control_dt = horizon / len(next(iter(plan.entry_inflows.values())))

    dens: dict[str, np.ndarray] = {}
    traces: dict[str, LinkTrace] = {}
    for lid, link in links.items():
        n_cells = link.disc.k_max * cells_per_segment
        profile = np.repeat(np.asarray(realized[lid], dtype=float), cells_per_segment)
        if profile.size != n_cells:
            raise ValueError(f"{lid}: expected {link.disc.k_max} segment densities")
        d = np.empty((n_steps + 1, n_cells))
        d[0] = profile
        traces[lid] = LinkTrace(
            dx=dx[lid], densities=d, accepted=np.zeros(n_steps), released=np.zeros(n_steps)
        )
        dens[lid] = profile.copy()

    entry_ids = entry_links(network)
    exit_ids = exit_links(network)
    caps = {lid: links[lid].fd.capacity for lid in exit_ids}
    if exit_caps:
        caps.update(exit_caps)
    queues = {lid: np.zeros(n_steps) for lid in entry_ids}
    ramp_served = {r: np.zeros(n_steps) for r in plan.ramp_inflows}
    queue_now = {lid: 0.0 for lid in entry_ids}
    total_in = total_out = 0.0

    for s in range(n_steps):
        c = min(int((s * dt) / control_dt), int(horizon / control_dt) - 1)
        demand = {lid: _demand(links[lid].fd, dens[lid]) for lid in links}
        supply = {lid: _supply(links[lid].fd, dens[lid]) for lid in links}
        inflow = {lid: 0.0 for lid in links}
        outflow_cap = {lid: math.inf for lid in links}

        for junc in network.junctions:
            sending = {j: float(demand[j][-1]) for j in junc.incoming}
            residual = {}
            ramp_into = {i: 0.0 for i in junc.outgoing}
            if junc.on_ramp is not None:
                q = float(plan.ramp_inflows[junc.on_ramp][c])
                for idx, out in enumerate(junc.outgoing):
                    share = junc.P2[idx] * q
                    admitted = min(share, float(supply[out][0]))
                    ramp_into[out] = admitted
                ramp_served[junc.on_ramp][s] = sum(ramp_into.values())
            for idx, out in enumerate(junc.outgoing):
                residual[out] = max(float(supply[out][0]) - ramp_into[out], 0.0)
            theta = {}
            for idx, out in enumerate(junc.outgoing):
                desired = sum(
                    junc.P1[idx][jdx] * sending[j]
                    for jdx, j in enumerate(junc.incoming)
                )
                theta[out] = 1.0 if desired <= residual[out] else residual[out] / desired
            for jdx, j in enumerate(junc.incoming):
                ratio = min(
                    (theta[out] for idx, out in enumerate(junc.outgoing)
                     if junc.P1[idx][jdx] > 0.0),
                    default=1.0,
                )
                flux = sending[j] * ratio
                outflow_cap[j] = flux
                for idx, out in enumerate(junc.outgoing):
                    inflow[out] += junc.P1[idx][jdx] * flux
            for idx, out in enumerate(junc.outgoing):
                inflow[out] += ramp_into[out]

        for lid in entry_ids:
            inflow[lid] = float(plan.entry_inflows[lid][c]) + queue_now[lid] / dt
        for lid in exit_ids:
            outflow_cap[lid] = caps[lid]

        for lid, link in links.items():
            dens[lid], acc, rel = step_link(
                link.fd, dens[lid], inflow[lid], outflow_cap[lid], dt, dx[lid]
            )
            traces[lid].densities[s + 1] = dens[lid]
            traces[lid].accepted[s] = acc
            traces[lid].released[s] = rel
            if lid in entry_ids:
                queue_now[lid] = max(inflow[lid] - acc, 0.0) * dt
                queues[lid][s] = queue_now[lid]
            if lid in exit_ids:
                total_out += rel * dt
        for lid in entry_ids:
            total_in += traces[lid].accepted[s] * dt
        for junc in network.junctions:
            if junc.on_ramp is not None:
                total_in += ramp_served[junc.on_ramp][s] * dt
            if junc.off_ramp is not None:
                for jdx, j in enumerate(junc.incoming):
                    total_out += junc.P3[jdx] * traces[j].released[s] * dt

    count0 = sum(t.vehicle_count(0) for t in traces.values())
    count1 = sum(t.vehicle_count(-1) for t in traces.values())
    drift = abs((count1 - count0) - (total_in - total_out))
    return SimulationResult(
        dt=dt,
        time=np.arange(n_steps + 1) * dt,
        links=traces,
        entry_queues=queues,
        ramp_served=ramp_served,
        conservation_drift=drift,
    )
