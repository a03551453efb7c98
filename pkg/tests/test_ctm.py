import numpy as np
import pytest

from laxflow.ctm import (
    CFLError,
    ControlPlan,
    entry_links,
    exit_links,
    simulate_link,
    simulate_network,
    step_link,
)
from laxflow.fd import FDParams, flux
from laxflow.network import build_case_network

FD = FDParams.from_critical(v_f=30.0, rho_c=0.074, rho_m=0.5)


def test_cfl_guard():
    with pytest.raises(CFLError):
        step_link(FD, np.full(4, 0.05), 1.0, 10.0, dt=10.0, dx=100.0)


def test_equilibrium_is_a_fixed_point():
    rho = np.full(10, 0.05)
    q = flux(FD, 0.05)
    nxt, acc, rel = step_link(FD, rho, q, 10.0, dt=2.0, dx=100.0)
    assert np.allclose(nxt, rho, atol=1e-14)
    assert acc == pytest.approx(q)
    assert rel == pytest.approx(q)


def test_jam_releases_at_capacity():
    rho = np.full(10, FD.rho_m)
    nxt, acc, rel = step_link(FD, rho, 1.0, 10.0, dt=2.0, dx=100.0)
    # a fully jammed link accepts nothing and discharges its last cell
    assert acc == 0.0
    assert rel == pytest.approx(FD.capacity)
    assert nxt[-1] < FD.rho_m


def test_closed_link_conserves_vehicles():
    rng = np.random.default_rng(0)
    rho = rng.uniform(0.0, FD.rho_m, 20)
    dx = 100.0
    count0 = rho.sum() * dx
    for _ in range(1000):
        rho, acc, rel = step_link(FD, rho, 0.0, 0.0, dt=2.0, dx=dx)
        assert acc == 0.0 and rel == 0.0
    assert rho.sum() * dx == pytest.approx(count0, abs=1e-10)


def test_simulate_link_tracks_boundary_counts():
    q_in = np.array([1.0, 1.5, 0.5, 1.0])
    trace = simulate_link(
        FD, 2000.0, np.full(4, 0.03), q_in, np.full(4, 10.0),
        horizon=400.0, n_cells=40,
    )
    dt = 400.0 / len(trace.accepted)
    # every offered vehicle fits on this lightly loaded link
    assert trace.cumulative_inflow(dt)[-1] == pytest.approx(q_in.sum() * 100.0, rel=1e-6)
    # conservation: count change equals net boundary flow
    net = trace.cumulative_inflow(dt)[-1] - trace.cumulative_outflow(dt)[-1]
    assert trace.vehicle_count(-1) - trace.vehicle_count(0) == pytest.approx(
        net, abs=1e-8
    )
    assert "x=" in trace.to_csv().splitlines()[0]


def test_network_topology_helpers():
    net = build_case_network(n_max=5)
    assert sorted(entry_links(net)) == ["L1", "L5"]
    assert sorted(exit_links(net)) == ["L4", "L8"]


def _uniform_plan(net, n, entry=0.3, ramp=0.1):
    return ControlPlan(
        entry_inflows={lid: np.full(n, entry) for lid in entry_links(net)},
        ramp_inflows={r: np.full(n, ramp) for r in net.on_ramps},
    )


def test_network_replay_conserves_and_routes():
    net = build_case_network(n_max=10)
    realized = {ln.id: ln.chance.rho_mean.copy() for ln in net.links}
    plan = _uniform_plan(net, 10)
    res = simulate_network(net, realized, plan, horizon=500.0, cells_per_segment=4)
    assert res.conservation_drift < 1e-9
    for lid, trace in res.links.items():
        assert trace.max_density <= net.link(lid).fd.rho_m + 1e-12
    # light loading: no entry backlog survives, ramps are fully served
    for lid, q in res.entry_queues.items():
        assert q[-1] == pytest.approx(0.0, abs=1e-9)
    for r, served in res.ramp_served.items():
        assert served.mean() == pytest.approx(0.1, rel=1e-6)


def test_network_replay_queues_excess_demand():
    net = build_case_network(n_max=10)
    realized = {ln.id: np.full(ln.disc.k_max, 0.9 * ln.fd.rho_m) for ln in net.links}
    plan = _uniform_plan(net, 10, entry=2.0, ramp=0.5)
    res = simulate_network(net, realized, plan, horizon=500.0, cells_per_segment=4)
    # congested start: entries cannot absorb 2 veh/s, a queue must form
    assert max(q.max() for q in res.entry_queues.values()) > 0.0
    assert res.conservation_drift < 1e-8
