"""Freeway network topology, junction flow transitions, and network control.

Links carry lane-aggregated diagrams and per-link uncertainty; junctions
route outflows to downstream inflows through fixed transition matrices.
The network program maximizes time-weighted inflows plus outflows over
all mainline links, with a fairness penalty on merging links, ramp
lower bounds enforcing main-lane priority, supply caps at the exits,
robust compatibility rows per link and transition equalities per node.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from . import fd as fdmod
from .conditions import Discretization
from .constraints import ChanceSpec, ConstraintRow, Provenance, build_robust_rows
from .fd import FDParams
from .lp import LinearProgram, LPSolution

_TOL = 1e-9


@dataclass(frozen=True)
class Link:
    """One mainline link with its lane-aggregated diagram and uncertainty."""

    id: str
    length: float
    n_lane: int
    fd: FDParams
    disc: Discretization
    chance: ChanceSpec

    def __post_init__(self):
        if self.n_lane < 1:
            raise ValueError(f"{self.id}: n_lane must be >= 1")
        if abs(self.disc.length - self.length) > _TOL * max(1.0, self.length):
            raise ValueError(
                f"{self.id}: length {self.length} != k_max*X {self.disc.length}"
            )
        if self.chance.k_max != self.disc.k_max:
            raise ValueError(f"{self.id}: chance/discretization segment mismatch")


@dataclass(frozen=True)
class Junction:
    """Flow transition at one node.

    ``P1[a, j]`` is the share of incoming link j's outflow entering
    outgoing link a; ``P2[a]`` the share of the on-ramp flow entering a;
    ``P3[j]`` the share of link j's outflow leaving via the off-ramp.
    """

    id: str
    incoming: tuple[str, ...]
    outgoing: tuple[str, ...]
    P1: np.ndarray
    P2: np.ndarray | None = None   # present iff on_ramp
    P3: np.ndarray | None = None   # zero vector when no off-ramp
    on_ramp: str | None = None
    off_ramp: str | None = None

    def __post_init__(self):
        P1 = np.asarray(self.P1, dtype=float)
        object.__setattr__(self, "P1", P1)
        ni, no = len(self.incoming), len(self.outgoing)
        if P1.shape != (no, ni):
            raise ValueError(f"{self.id}: P1 shape {P1.shape} != ({no}, {ni})")
        P3 = (np.zeros(ni) if self.P3 is None
              else np.asarray(self.P3, dtype=float))
        object.__setattr__(self, "P3", P3)
        if P3.shape != (ni,):
            raise ValueError(f"{self.id}: P3 shape {P3.shape} != ({ni},)")
        if (self.on_ramp is None) != (self.P2 is None):
            raise ValueError(f"{self.id}: P2 must accompany an on-ramp")
        if self.P2 is not None:
            P2 = np.asarray(self.P2, dtype=float)
            object.__setattr__(self, "P2", P2)
            if P2.shape != (no,):
                raise ValueError(f"{self.id}: P2 shape {P2.shape} != ({no},)")
            if abs(P2.sum() - 1.0) > _TOL:
                raise ValueError(f"{self.id}: on-ramp shares sum to {P2.sum()}")
            if np.any((P2 < 0) | (P2 > 1)):
                raise ValueError(f"{self.id}: P2 entries outside [0, 1]")
        if np.any((P1 < 0) | (P1 > 1)) or np.any((P3 < 0) | (P3 > 1)):
            raise ValueError(f"{self.id}: transition entries outside [0, 1]")
        col = P1.sum(axis=0) + P3
        if np.any(np.abs(col - 1.0) > _TOL):
            raise ValueError(
                f"{self.id}: incoming-link shares sum to {col}, expected 1"
            )
        if self.off_ramp is None and np.any(P3 > 0):
            raise ValueError(f"{self.id}: nonzero off-ramp shares without a ramp")


@dataclass(frozen=True)
class Network:
    links: tuple[Link, ...]
    junctions: tuple[Junction, ...]

    def __post_init__(self):
        ids = {ln.id for ln in self.links}
        if len(ids) != len(self.links):
            raise ValueError("duplicate link ids")
        for jn in self.junctions:
            for lid in jn.incoming + jn.outgoing:
                if lid not in ids:
                    raise ValueError(f"{jn.id}: unknown link {lid!r}")
        n_maxes = {ln.disc.n_max for ln in self.links}
        steps = {ln.disc.T for ln in self.links}
        if len(n_maxes) != 1 or len(steps) != 1:
            raise ValueError("links must share n_max and T")

    @property
    def n_max(self) -> int:
        return self.links[0].disc.n_max

    @property
    def T(self) -> float:
        return self.links[0].disc.T

    def link(self, lid: str) -> Link:
        for ln in self.links:
            if ln.id == lid:
                return ln
        raise KeyError(lid)

    @property
    def on_ramps(self) -> list[str]:
        return [jn.on_ramp for jn in self.junctions if jn.on_ramp]

    @property
    def off_ramps(self) -> list[str]:
        return [jn.off_ramp for jn in self.junctions if jn.off_ramp]


@dataclass(frozen=True)
class NetworkObjectiveSpec:
    """Weights of the network objective.

    ``fairness_pairs`` lists (link_a, link_b) whose per-lane outflows at a
    shared merge should stay proportional to their lane counts; the slack
    y(i) absorbs the absolute difference at cost eta.
    """

    eta: float = 0.2
    fairness_pairs: tuple[tuple[str, str], ...] = ()
    time_weighting: bool = True
    ramp_shares: tuple[tuple[str, str], ...] = ()       # (ramp, merge link)
    exit_caps: tuple[tuple[str, float], ...] = ()        # (link, supply density)

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")


def _qin_name(lid: str):
    return lambda i: f"q_in[{lid},{i}]"


def _qout_name(lid: str):
    return lambda i: f"q_out[{lid},{i}]"


def junction_rows(junction: Junction, step: int) -> list[ConstraintRow]:
    """Equality rows routing node flows at one time step.

    Outgoing-link inflows equal the transition-weighted incoming-link
    outflows plus the on-ramp share; the off-ramp flow collects its
    shares of the incoming outflows.
    """
    rows = []
    for a, out_id in enumerate(junction.outgoing):
        coeffs = {f"q_in[{out_id},{step}]": 1.0}
        for j, in_id in enumerate(junction.incoming):
            if junction.P1[a, j]:
                coeffs[f"q_out[{in_id},{step}]"] = -float(junction.P1[a, j])
        if junction.on_ramp is not None and junction.P2[a]:
            coeffs[f"q_on[{junction.on_ramp},{step}]"] = -float(junction.P2[a])
        rows.append(ConstraintRow(coeffs, 0.0, "==",
                    Provenance("junction", n=step, branch=junction.id,
                               note=out_id)))
    if junction.off_ramp is not None:
        coeffs = {f"q_off[{junction.off_ramp},{step}]": 1.0}
        for j, in_id in enumerate(junction.incoming):
            if junction.P3[j]:
                coeffs[f"q_out[{in_id},{step}]"] = -float(junction.P3[j])
        rows.append(ConstraintRow(coeffs, 0.0, "==",
                    Provenance("junction", n=step, branch=junction.id,
                               note=junction.off_ramp)))
    return rows


def build_network_lp(
    network: Network, spec: NetworkObjectiveSpec
) -> LinearProgram:
    """Assemble the network control program."""
    n = network.n_max
    lp = LinearProgram(name="network")
    for ln in network.links:
        for i in range(1, n + 1):
            lp.add_variable(f"q_in[{ln.id},{i}]", 0.0, ln.fd.capacity)
        for i in range(1, n + 1):
            lp.add_variable(f"q_out[{ln.id},{i}]", 0.0, ln.fd.capacity)
    for ramp in network.on_ramps:
        for i in range(1, n + 1):
            lp.add_variable(f"q_on[{ramp},{i}]", 0.0)
    for ramp in network.off_ramps:
        for i in range(1, n + 1):
            lp.add_variable(f"q_off[{ramp},{i}]", 0.0)
    if spec.fairness_pairs:
        for i in range(1, n + 1):
            lp.add_variable(f"y[{i}]", 0.0, control=False)

    for ln in network.links:
        lp.add_rows(build_robust_rows(
            ln.fd, ln.chance, ln.disc, _qin_name(ln.id), _qout_name(ln.id)))
    for jn in network.junctions:
        for i in range(1, n + 1):
            lp.add_rows(junction_rows(jn, i))
    for a, b in spec.fairness_pairs:
        la, lb = network.link(a), network.link(b)
        for i in range(1, n + 1):
            diff = {f"q_out[{b},{i}]": float(la.n_lane),
                    f"q_out[{a},{i}]": -float(lb.n_lane)}
            lp.add_row(ConstraintRow({"y[" + str(i) + "]": 1.0, **diff}, 0.0,
                       ">=", Provenance("fairness", n=i, branch="pos",
                                        note=f"{a}|{b}")))
            lp.add_row(ConstraintRow(
                {f"y[{i}]": 1.0, **{k: -v for k, v in diff.items()}}, 0.0,
                ">=", Provenance("fairness", n=i, branch="neg",
                                 note=f"{a}|{b}")))
    # main-lane priority: a ramp may feed at most the per-lane outflow of
    # the mainline link merging at the same node
    for ramp, merge in spec.ramp_shares:
        lanes = network.link(merge).n_lane
        for i in range(1, n + 1):
            lp.add_row(ConstraintRow(
                {f"q_on[{ramp},{i}]": 1.0,
                 f"q_out[{merge},{i}]": -1.0 / lanes},
                0.0, "<=", Provenance("ramp_priority", n=i, branch=ramp,
                                      note=merge)))
    for lid, rho_down in spec.exit_caps:
        ln = network.link(lid)
        cap = fdmod.supply(ln.fd, rho_down)
        for i in range(1, n + 1):
            lp.add_row(ConstraintRow({f"q_out[{lid},{i}]": 1.0}, cap, "<=",
                       Provenance("exit_supply", n=i, branch=lid)))

    obj: dict[str, float] = {}
    for ln in network.links:
        for i in range(1, n + 1):
            wgt = float(n - i + 1) if spec.time_weighting else 1.0
            obj[f"q_in[{ln.id},{i}]"] = wgt
            obj[f"q_out[{ln.id},{i}]"] = wgt
    if spec.fairness_pairs:
        for i in range(1, n + 1):
            obj[f"y[{i}]"] = -spec.eta
    lp.set_objective(obj, sense="max")
    return lp


# -- CA-92 / CA-101 case study ------------------------------------------------

CASE_LENGTHS = (600.0, 600.0, 1200.0, 600.0, 600.0, 600.0, 1200.0, 600.0)
CASE_LANES = (2, 2, 3, 3, 4, 5, 5, 5)
# mean initial density of each link as a multiple of its critical density
CASE_DENSITY_RATIOS = (1.575, 0.975, 0.917, 0.352, 1.238, 0.730, 0.088, 0.084)
CASE_SEGMENT = 600.0
CASE_UNCERTAIN = ("L3", "L7")  # sigma = 0.2 * mean on these links


def lane_fd() -> FDParams:
    """Per-lane diagram of the case study: 25 m/s, 0.02 / 0.125 veh/m."""
    return FDParams.from_critical(v_f=25.0, rho_c=0.02, rho_m=0.125)


def build_case_network(
    n_max: int = 25,
    t_max: float = 500.0,
    alpha: float = 0.025,
    robust: bool = True,
) -> Network:
    """Two-highway interchange network with four metered on-ramps."""
    base = lane_fd()
    links = []
    for j in range(8):
        lid = f"L{j + 1}"
        lanes = CASE_LANES[j]
        fd = base.scaled(lanes)
        k_max = int(round(CASE_LENGTHS[j] / CASE_SEGMENT))
        disc = Discretization(zeta=0.0, chi=CASE_LENGTHS[j], k_max=k_max,
                              n_max=n_max, T=t_max / n_max)
        mean = CASE_DENSITY_RATIOS[j] * fd.rho_c
        sigma = 0.2 * mean if (robust and lid in CASE_UNCERTAIN) else 0.0
        chance = ChanceSpec(np.full(k_max, mean), np.full(k_max, sigma),
                            alpha=alpha)
        links.append(Link(lid, CASE_LENGTHS[j], lanes, fd, disc, chance))
    junctions = (
        Junction("node1", ("L1",), ("L2",), np.array([[1.0]]),
                 P2=np.array([1.0]), on_ramp="on1"),
        Junction("node2", ("L2", "L6"), ("L3", "L7"),
                 np.array([[0.5, 0.2], [0.5, 0.8]])),
        Junction("node3", ("L3",), ("L4",), np.array([[0.8]]),
                 P2=np.array([1.0]), P3=np.array([0.2]),
                 on_ramp="on2", off_ramp="off1"),
        Junction("node4", ("L5",), ("L6",), np.array([[1.0]]),
                 P2=np.array([1.0]), on_ramp="on3"),
        Junction("node5", ("L7",), ("L8",), np.array([[0.8]]),
                 P2=np.array([1.0]), P3=np.array([0.2]),
                 on_ramp="on4", off_ramp="off2"),
    )
    return Network(tuple(links), junctions)


def case_objective_spec(eta: float = 0.2) -> NetworkObjectiveSpec:
    """Objective/side-constraint bundle of the case study.

    Exit outflows are capped by the supply of the (static) downstream
    densities, which are below critical here, so the caps equal capacity.
    """
    base = lane_fd()
    return NetworkObjectiveSpec(
        eta=eta,
        fairness_pairs=(("L2", "L6"),),
        ramp_shares=(("on1", "L1"), ("on2", "L3"),
                           ("on3", "L5"), ("on4", "L7")),
        exit_caps=(("L4", CASE_DENSITY_RATIOS[3] * base.rho_c * CASE_LANES[3]),
                   ("L8", CASE_DENSITY_RATIOS[7] * base.rho_c * CASE_LANES[7])),
    )


@dataclass
class SensitivityCase:
    n_max: int
    rows: int
    control_variables: int
    approx_rows: int       # n_l * (2*k_max*n_max + n_max^2), k_max averaged
    status: str
    solve_seconds: float
    time: np.ndarray       # common axis, s
    on_ramp_flows: dict[str, np.ndarray]


def time_step_sensitivity(
    n_max_list: list[int],
    t_max: float = 500.0,
    eta: float = 0.2,
    alpha: float = 0.025,
    resample_points: int = 100,
) -> list[SensitivityCase]:
    """Solve the case-study program across time-step counts.

    Controls are piecewise constant; resampling them on a shared axis
    makes trajectories with different n_max directly comparable.
    """
    axis = np.linspace(0.0, t_max, resample_points, endpoint=False)
    out = []
    for n_max in n_max_list:
        net = build_case_network(n_max=n_max, t_max=t_max, alpha=alpha)
        lp = build_network_lp(net, case_objective_spec(eta=eta))
        t0 = _time.perf_counter()
        sol = lp.solve()
        dt_solve = _time.perf_counter() - t0
        approx = sum(2 * ln.disc.k_max * n_max + n_max**2 for ln in net.links)
        ramps = {}
        if sol.optimal:
            T = t_max / n_max
            idx = np.minimum((axis / T).astype(int), n_max - 1)
            for ramp in net.on_ramps:
                vals = np.array([sol[f"q_on[{ramp},{i}]"]
                                 for i in range(1, n_max + 1)])
                ramps[ramp] = vals[idx]
        out.append(SensitivityCase(
            n_max=n_max, rows=lp.num_rows,
            control_variables=lp.num_control_variables,
            approx_rows=approx, status=sol.status, solve_seconds=dt_solve,
            time=axis, on_ramp_flows=ramps))
    return out
