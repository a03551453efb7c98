import math

import numpy as np
import pytest

from laxflow.conditions import Discretization
from laxflow.constraints import (
    ChanceSpec,
    ConstraintRow,
    Provenance,
    build_deterministic_rows,
    build_robust_downstream_rows,
    build_robust_rows,
    build_robust_upstream_rows,
    inverse_normal_cdf,
)
from laxflow.fd import FDParams

FD = FDParams.from_critical(v_f=30.0, rho_c=0.074, rho_m=0.5)
DISC = Discretization(zeta=0.0, chi=3858.0, k_max=6, n_max=21, T=20.0)
MEAN = np.array([0.065, 0.047, 0.052, 0.057, 0.051, 0.056])


def _chance(sigma, alpha=0.025):
    return ChanceSpec(rho_mean=MEAN, rho_std=np.full(6, sigma), alpha=alpha)


def test_normal_quantiles():
    assert inverse_normal_cdf(0.975) == pytest.approx(1.959964, abs=1e-6)
    assert inverse_normal_cdf(0.95) == pytest.approx(1.644854, abs=1e-6)
    assert inverse_normal_cdf(0.99) == pytest.approx(2.326348, abs=1e-6)
    assert inverse_normal_cdf(0.5) == pytest.approx(0.0, abs=1e-12)
    assert inverse_normal_cdf(0.3) == pytest.approx(-inverse_normal_cdf(0.7), abs=1e-9)
    with pytest.raises(ValueError):
        inverse_normal_cdf(0.0)
    with pytest.raises(ValueError):
        inverse_normal_cdf(1.0)


def test_chance_spec_quantile_arithmetic():
    ch = _chance(0.012)
    z = inverse_normal_cdf(0.975)
    assert ch.z == pytest.approx(z, abs=1e-9)
    assert ch.rho_upper(1) == pytest.approx(0.065 + z * 0.012)
    assert ch.rho_lower(3) == pytest.approx(0.052 - z * 0.012)
    assert ch.pooled_offset() == pytest.approx(z * math.sqrt(6 * 0.012**2))
    with pytest.raises(ValueError):
        ChanceSpec(rho_mean=MEAN, rho_std=np.full(6, -0.1))
    with pytest.raises(ValueError):
        ChanceSpec(rho_mean=MEAN, rho_std=np.zeros(6), alpha=0.7)


def test_zero_sigma_matches_deterministic_exactly():
    robust = build_robust_rows(FD, _chance(0.0), DISC)
    det = build_deterministic_rows(FD, _chance(0.012), DISC)
    assert len(robust) == len(det)
    for r, d in zip(robust, det):
        assert r.coeffs == d.coeffs
        assert r.sense == d.sense
        assert abs(r.rhs - d.rhs) <= 1e-12
        assert r.provenance.family == d.provenance.family


def test_transport_row_first_step_coefficient():
    # shift L/v_f = 128.6 s: the step-1 upstream solution meets the
    # downstream boundary inside step 7, overlapping it for 11.4 s
    rows = build_robust_upstream_rows(FD, _chance(0.012), DISC)
    row = next(
        r
        for r in rows
        if r.provenance.family == "up_down"
        and r.provenance.n == 1
        and r.provenance.p == 7
    )
    assert row.provenance.branch == "transport"
    assert row.coeffs["q_in[1]"] == pytest.approx(-(140.0 - 3858.0 / 30.0), abs=1e-9)
    assert row.coeffs["q_in[1]"] == pytest.approx(-11.4, abs=1e-9)
    for p in range(1, 8):
        assert row.coeffs[f"q_out[{p}]"] == pytest.approx(20.0)


def test_slot_bookkeeping():
    ch = _chance(0.012)
    up = build_robust_upstream_rows(FD, ch, DISC)
    down = build_robust_downstream_rows(FD, ch, DISC)
    n = DISC.n_max
    # upstream family: an (n, p) slot grid plus one seam row per reachable step
    seams = [r for r in up if r.provenance.family == "up_down_char"]
    assert len(up) == n * n + len(seams)
    assert len(down) == n * n
    # slots the solution cannot reach stay present but empty
    vac = [r for r in up if r.provenance.branch == "vacuous"]
    assert vac and all(r.is_empty for r in vac)
    # within a fixed n, increasing p walks vacuous -> transport -> capacity
    order = {"vacuous": 0, "transport": 1, "capacity": 2}
    for nn in range(1, n + 1):
        branches = [
            order[r.provenance.branch]
            for r in up
            if r.provenance.family == "up_down" and r.provenance.n == nn
        ]
        assert branches == sorted(branches)


def test_uncertainty_only_moves_rhs():
    base = build_robust_rows(FD, _chance(0.0), DISC)
    wide = build_robust_rows(FD, _chance(0.012), DISC)
    moved = 0
    for b, r in zip(base, wide):
        assert b.coeffs == r.coeffs
        moved += abs(b.rhs - r.rhs) > 1e-12
    assert moved > 0
    # each non-empty robust row is at least as strict as its mean-value twin
    for b, r in zip(base, wide):
        if r.is_empty or r.provenance.family.startswith("init_char"):
            continue
        if r.sense == "<=":
            assert r.rhs <= b.rhs + 1e-12
        else:
            assert r.rhs >= b.rhs - 1e-12


def test_row_validation():
    with pytest.raises(ValueError):
        ConstraintRow({"x": 1.0}, 0.0, "<", Provenance("t"))
