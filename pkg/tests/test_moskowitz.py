import numpy as np
import pytest

from laxflow.conditions import BoundaryFlows, Discretization, InitialDensityProfile
from laxflow.fd import FDParams, flux
from laxflow.moskowitz import (
    density_field,
    initial_component,
    moskowitz_from_downstream,
    moskowitz_from_initial,
    moskowitz_from_upstream,
    sample_field,
    solve_moskowitz,
)

FD = FDParams.from_critical(v_f=30.0, rho_c=0.074, rho_m=0.5)
DISC = Discretization(zeta=0.0, chi=3858.0, k_max=6, n_max=21, T=20.0)


def _uniform(rho, q):
    profile = InitialDensityProfile(np.full(DISC.k_max, rho))
    flows = BoundaryFlows(np.full(DISC.n_max, q), np.full(DISC.n_max, q))
    return profile, flows


def test_components_match_conditions_on_their_domains():
    profile, flows = _uniform(0.05, 1.2)
    X, T = DISC.X, DISC.T
    # at t=0 the initial component reproduces the initial count
    assert moskowitz_from_initial(FD, profile, DISC, 2, 0.0, 1.5 * X) == pytest.approx(
        -(0.05 * X + 0.05 * X / 2)
    )
    # on the upstream boundary the upstream component reproduces the inflow count
    assert moskowitz_from_upstream(FD, flows, DISC, 2, 1.5 * T, 0.0) == pytest.approx(
        1.2 * 1.5 * T
    )
    # on the downstream boundary the downstream component reproduces the
    # outflow count shifted by the vehicles initially on the link
    got = moskowitz_from_downstream(FD, flows, profile, DISC, 2, 1.5 * T, DISC.chi)
    assert got == pytest.approx(1.2 * 1.5 * T - 0.05 * 6 * X)


def test_empty_road_free_flow_closed_form():
    profile = InitialDensityProfile(np.zeros(DISC.k_max))
    q = 1.0
    flows = BoundaryFlows(np.full(DISC.n_max, q), np.full(DISC.n_max, q))
    v = FD.v_f
    for t, x in [(100.0, 600.0), (200.0, 2000.0), (400.0, 3858.0)]:
        want = q * (t - x / v) if t >= x / v else 0.0
        assert solve_moskowitz(FD, profile, flows, DISC, t, x) == pytest.approx(want)


def test_equilibrium_density_is_preserved():
    rho = 0.05
    profile, flows = _uniform(rho, flux(FD, rho))
    _, dens = density_field(FD, profile, flows, DISC, nt=41, nx=61)
    assert np.allclose(dens, rho, atol=1e-9)


def test_monotone_in_time_and_space():
    rng = np.random.default_rng(3)
    profile = InitialDensityProfile(rng.uniform(0.0, 0.2, DISC.k_max))
    q_in = rng.uniform(0.0, 1.5, DISC.n_max)
    q_out = rng.uniform(0.5, 2.0, DISC.n_max)
    field = sample_field(FD, profile, BoundaryFlows(q_in, q_out), DISC, nt=31, nx=41)
    # vehicle counts accumulate in time and deplete downstream
    assert np.all(np.diff(field.grid, axis=0) >= -1e-9)
    assert np.all(np.diff(field.grid, axis=1) <= 1e-9)


def test_branch_seams_are_continuous():
    rho = np.array([0.03, 0.2, 0.05, 0.05, 0.05, 0.05])
    X = DISC.X
    for k, rk in ((1, 0.03), (2, 0.2)):
        for t in (10.0, 35.0):
            # seams of the characteristic fans emitted by segment k
            for x_seam in (
                (k - 1) * X + FD.v_f * t,
                k * X + FD.v_f * t,
                (k - 1) * X + FD.w * t,
                k * X + FD.w * t,
            ):
                left = initial_component(FD, rho, X, k, t, x_seam - 1e-6)
                right = initial_component(FD, rho, X, k, t, x_seam + 1e-6)
                if np.isinf(left) or np.isinf(right):
                    continue
                assert left == pytest.approx(right, abs=1e-4)


def test_sample_axis_broadcasting():
    samples = np.random.default_rng(0).uniform(0.0, 0.3, size=(50, DISC.k_max))
    vals = initial_component(FD, samples, DISC.X, 3, 40.0, 3.2 * DISC.X)
    assert vals.shape == (50,)
    single = initial_component(FD, samples[7], DISC.X, 3, 40.0, 3.2 * DISC.X)
    assert vals[7] == pytest.approx(float(single))


def test_infeasible_domain_rejected():
    profile = InitialDensityProfile(np.zeros(DISC.k_max))
    flows = BoundaryFlows(np.full(DISC.n_max, 1.0), np.full(DISC.n_max, 1.0))
    with pytest.raises(ValueError):
        solve_moskowitz(FD, profile, flows, DISC, -50.0, 100.0)
