import math

import numpy as np
import pytest

from laxflow.conditions import (
    INF,
    BoundaryFlows,
    Discretization,
    InitialDensityProfile,
    check_cfl,
    downstream_value,
    initial_value,
    upstream_value,
)
from laxflow.fd import FDParams

FD = FDParams.from_critical(v_f=30.0, rho_c=0.074, rho_m=0.5)
DISC = Discretization(zeta=0.0, chi=3858.0, k_max=6, n_max=21, T=20.0)


def test_grid_properties():
    assert DISC.length == pytest.approx(3858.0)
    assert DISC.X == pytest.approx(643.0)
    assert DISC.t_max == pytest.approx(420.0)
    with pytest.raises(ValueError):
        Discretization(zeta=0.0, chi=0.0, k_max=1, n_max=1, T=1.0)
    with pytest.raises(ValueError):
        Discretization(zeta=0.0, chi=100.0, k_max=0, n_max=1, T=1.0)


def test_initial_value_counts_vehicles():
    profile = InitialDensityProfile(np.array([0.06, 0.04, 0.05, 0.05, 0.05, 0.05]))
    profile.validate(FD, DISC)
    X = DISC.X
    # the cumulative count decreases downstream by the vehicles passed over
    assert initial_value(profile, DISC, 1, 0.0, 0.0) == pytest.approx(0.0)
    assert initial_value(profile, DISC, 1, 0.0, X) == pytest.approx(-0.06 * X)
    assert initial_value(profile, DISC, 2, 0.0, X + X / 2) == pytest.approx(
        -(0.06 * X + 0.04 * X / 2)
    )
    # off-domain queries return +inf: wrong time, wrong segment
    assert initial_value(profile, DISC, 1, 5.0, 0.0) == INF
    assert initial_value(profile, DISC, 1, 0.0, 2 * X) == INF
    with pytest.raises(ValueError):
        initial_value(profile, DISC, 7, 0.0, 0.0)


def test_initial_profile_validation():
    bad_shape = InitialDensityProfile(np.full(4, 0.05))
    with pytest.raises(ValueError):
        bad_shape.validate(FD, DISC)
    too_dense = InitialDensityProfile(np.full(6, 0.6))
    with pytest.raises(ValueError):
        too_dense.validate(FD, DISC)


def test_boundary_values_accumulate_flows():
    q_in = np.full(21, 1.5)
    q_out = np.full(21, 1.0)
    flows = BoundaryFlows(q_in, q_out)
    flows.validate(FD, DISC)
    # upstream count after 1.5 steps of constant inflow 1.5 veh/s
    assert upstream_value(flows, DISC, 2, 30.0, 0.0) == pytest.approx(45.0)
    # off its own step or off the boundary line: +inf
    assert upstream_value(flows, DISC, 1, 30.0, 0.0) == INF
    assert upstream_value(flows, DISC, 2, 30.0, 10.0) == INF
    profile = InitialDensityProfile(np.full(6, 0.05))
    offset = profile.total_count * DISC.X
    assert downstream_value(flows, profile, DISC, 2, 30.0, 3858.0) == pytest.approx(
        30.0 - offset
    )


def test_boundary_flow_validation():
    with pytest.raises(ValueError):
        BoundaryFlows(np.full(5, 1.0), np.full(21, 1.0)).validate(FD, DISC)
    with pytest.raises(ValueError):
        BoundaryFlows(np.full(21, 100.0), np.full(21, 1.0)).validate(FD, DISC)


def test_cfl_diagnostic_is_advisory():
    diag = check_cfl(FD, DISC)
    assert diag.free_flow_ratio == pytest.approx(30.0 * 20.0 / 643.0)
    assert diag.backwave_ratio == pytest.approx(abs(FD.w) * 20.0 / 643.0)
    assert not diag.warned
    tight = Discretization(zeta=0.0, chi=3858.0, k_max=12, n_max=21, T=20.0)
    with pytest.warns(UserWarning):
        assert check_cfl(FD, tight).warned
