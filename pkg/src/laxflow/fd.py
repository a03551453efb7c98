"""Triangular fundamental diagram and derived quantities.

All quantities are SI: speeds in m/s, densities in veh/m, flows in veh/s.
Hourly units (vph, veh/km) are converted at the I/O boundary only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

_REL_TOL = 1e-6


class FDError(ValueError):
    """Inconsistent or out-of-domain fundamental diagram input."""


def derive_critical_density(v_f: float, w: float, rho_m: float) -> float:
    """Critical density of a triangular diagram from its two wave speeds.

    rho_c = -w * rho_m / (v_f - w), with v_f > 0, w < 0, rho_m > 0.
    """
    if v_f <= 0 or w >= 0 or rho_m <= 0:
        raise FDError(
            f"need v_f > 0, w < 0, rho_m > 0; got v_f={v_f}, w={w}, rho_m={rho_m}"
        )
    return -w * rho_m / (v_f - w)


@dataclass(frozen=True)
class FDParams:
    """Triangular fundamental diagram for one link.

    Immutable; safe to share.  Use the ``from_*`` constructors to derive
    the dependent parameter instead of passing all five by hand.
    """

    v_f: float      # free flow speed, m/s
    w: float        # congestion wave speed, m/s, negative
    rho_c: float    # critical density, veh/m
    rho_m: float    # jam density, veh/m
    capacity: float  # maximum flow rho_c * v_f, veh/s

    def __post_init__(self):
        if not (self.v_f > 0 and self.w < 0 and 0 < self.rho_c < self.rho_m):
            raise FDError(f"invalid parameter signs/ordering: {self}")
        rc = derive_critical_density(self.v_f, self.w, self.rho_m)
        if abs(rc - self.rho_c) > _REL_TOL * self.rho_c:
            raise FDError(
                f"rho_c={self.rho_c} inconsistent with -w*rho_m/(v_f-w)={rc}"
            )
        cap = self.rho_c * self.v_f
        if abs(cap - self.capacity) > _REL_TOL * cap:
            raise FDError(
                f"capacity={self.capacity} inconsistent with rho_c*v_f={cap}"
            )

    @classmethod
    def from_speeds(cls, v_f: float, w: float, rho_m: float) -> "FDParams":
        """Construct from (v_f, w, rho_m); rho_c and capacity are derived."""
        rho_c = derive_critical_density(v_f, w, rho_m)
        return cls(v_f=v_f, w=w, rho_c=rho_c, rho_m=rho_m, capacity=rho_c * v_f)

    @classmethod
    def from_critical(cls, v_f: float, rho_c: float, rho_m: float) -> "FDParams":
        """Construct from (v_f, rho_c, rho_m); w and capacity are derived."""
        if not 0 < rho_c < rho_m:
            raise FDError(f"need 0 < rho_c < rho_m; got {rho_c}, {rho_m}")
        w = -v_f * rho_c / (rho_m - rho_c)
        return cls(v_f=v_f, w=w, rho_c=rho_c, rho_m=rho_m, capacity=rho_c * v_f)

    def scaled(self, n_lane: int) -> "FDParams":
        """Lane-aggregated diagram: densities and flows scale, speeds do not."""
        if n_lane < 1:
            raise FDError(f"n_lane must be >= 1, got {n_lane}")
        return replace(
            self,
            rho_c=self.rho_c * n_lane,
            rho_m=self.rho_m * n_lane,
            capacity=self.capacity * n_lane,
        )


def _check_domain(fd: FDParams, rho: float) -> None:
    if rho < 0 or rho > fd.rho_m:
        raise FDError(f"density {rho} outside [0, {fd.rho_m}]")


def flux(fd: FDParams, rho: float) -> float:
    """Flow at density rho: v_f*rho below rho_c, w*(rho - rho_m) above."""
    _check_domain(fd, rho)
    if rho <= fd.rho_c:
        return fd.v_f * rho
    return fd.w * (rho - fd.rho_m)


def demand(fd: FDParams, rho: float) -> float:
    """Sending capacity: flux below rho_c, capacity above."""
    _check_domain(fd, rho)
    if rho <= fd.rho_c:
        return fd.v_f * rho
    return fd.capacity


def supply(fd: FDParams, rho: float) -> float:
    """Receiving capacity: capacity below rho_c, congested flux above."""
    _check_domain(fd, rho)
    if rho <= fd.rho_c:
        return fd.capacity
    return fd.w * (rho - fd.rho_m)
