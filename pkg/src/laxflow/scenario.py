"""Scenario files: a line-based key-value format for cases and models.

Grammar (canonical form; ``serialize`` emits exactly this and
``parse_scenario(serialize(s))`` returns an equal value)::

    laxflow-scenario 1
    units si
    <blank>
    [model]
    kind <max_outflow|tradeoff|network>
    <key> <value>            # h, lambda, eta, confidence, sigma ...
    <blank>
    [link <id>]
    v_f/rho_c/rho_m <...>    # SI units: m/s, veh/m
    length/k_max/n_max/T/n_lane <...>
    rho_mean v1 v2 ...       # one per segment, veh/m (lane-aggregated)
    rho_sigma v1 v2 ...
    <blank>
    [junction <id>]
    incoming a b / outgoing c d
    P1 <row for first outgoing> ; one line per outgoing link
    P2 <shares> / P3 <shares> / on_ramp <id> / off_ramp <id>  (optional)
    <blank>
    [objective] / [mc]       # optional sections with scalar keys

Floats are serialized with ``repr`` so round-trips are bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conditions import Discretization
from .constraints import ChanceSpec
from .fd import FDParams
from .network import Junction, Link, Network, NetworkObjectiveSpec

_HEADER = "laxflow-scenario 1"


class ScenarioError(Exception):
    """Base class for scenario problems (maps to CLI exit 3)."""


class ParseError(ScenarioError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(ScenarioError):
    pass


@dataclass
class LinkSpec:
    id: str
    v_f: float
    rho_c: float
    rho_m: float
    length: float
    k_max: int
    n_max: int
    T: float
    n_lane: int
    rho_mean: list[float]
    rho_sigma: list[float]

    def fd(self) -> FDParams:
        return FDParams.from_critical(v_f=self.v_f, rho_c=self.rho_c, rho_m=self.rho_m)

    def disc(self) -> Discretization:
        return Discretization(zeta=0.0, chi=self.length, k_max=self.k_max,
                              n_max=self.n_max, T=self.T)

    def chance(self, alpha: float, sigma: float | None = None,
               robust: bool = True) -> ChanceSpec:
        std = np.full(self.k_max, sigma) if sigma is not None \
            else np.asarray(self.rho_sigma, dtype=float)
        if not robust:
            std = np.zeros(self.k_max)
        return ChanceSpec(rho_mean=np.asarray(self.rho_mean, dtype=float),
                          rho_std=std, alpha=alpha)


@dataclass
class JunctionSpec:
    id: str
    incoming: list[str]
    outgoing: list[str]
    P1: list[list[float]]
    P2: list[float] | None = None
    P3: list[float] | None = None
    on_ramp: str | None = None
    off_ramp: str | None = None


@dataclass
class Scenario:
    units: str = "si"
    model: dict[str, str] = field(default_factory=dict)
    links: list[LinkSpec] = field(default_factory=list)
    junctions: list[JunctionSpec] = field(default_factory=list)
    objective: dict[str, list[list[str]]] = field(default_factory=dict)
    mc: dict[str, str] = field(default_factory=dict)

    def link(self, link_id: str) -> LinkSpec:
        for l in self.links:
            if l.id == link_id:
                return l
        raise ValidationError(f"unknown link {link_id!r}")

    @property
    def kind(self) -> str:
        return self.model.get("kind", "max_outflow")

    def model_float(self, key: str, default: float) -> float:
        return float(self.model[key]) if key in self.model else default


def _floats(parts: list[str], line_no: int) -> list[float]:
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(line_no, f"bad number: {exc}") from None


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text; raises ParseError/ValidationError."""
    lines = text.splitlines()
    if not lines or lines[0] != _HEADER:
        raise ParseError(1, f"expected header {_HEADER!r}")
    scn = Scenario()
    section: str | None = None
    link: dict | None = None
    junc: dict | None = None

    def close_current():
        nonlocal link, junc
        if link is not None:
            scn.links.append(_finish_link(link))
            link = None
        if junc is not None:
            scn.junctions.append(_finish_junction(junc))
            junc = None

    for no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            close_current()
            head = line[1:-1].split()
            section = head[0]
            if section == "link":
                if len(head) != 2:
                    raise ParseError(no, "link section needs an id")
                link = {"id": head[1], "line": no}
            elif section == "junction":
                if len(head) != 2:
                    raise ParseError(no, "junction section needs an id")
                junc = {"id": head[1], "line": no, "P1": []}
            elif section in ("model", "objective", "mc"):
                if len(head) != 1:
                    raise ParseError(no, f"[{section}] takes no argument")
            else:
                raise ParseError(no, f"unknown section {section!r}")
            continue
        parts = line.split()
        key, vals = parts[0], parts[1:]
        if section == "model":
            if key == "units":
                scn.units = vals[0]
            else:
                scn.model[key] = " ".join(vals)
        elif section == "link":
            if key in ("rho_mean", "rho_sigma"):
                link[key] = _floats(vals, no)
            elif key in ("k_max", "n_max", "n_lane"):
                link[key] = int(vals[0])
            elif key in ("v_f", "rho_c", "rho_m", "length", "T"):
                link[key] = float(vals[0])
            else:
                raise ParseError(no, f"unknown link key {key!r}")
        elif section == "junction":
            if key in ("incoming", "outgoing"):
                junc[key] = vals
            elif key == "P1":
                junc["P1"].append(_floats(vals, no))
            elif key in ("P2", "P3"):
                junc[key] = _floats(vals, no)
            elif key in ("on_ramp", "off_ramp"):
                junc[key] = vals[0]
            else:
                raise ParseError(no, f"unknown junction key {key!r}")
        elif section == "objective":
            scn.objective.setdefault(key, []).append(vals)
        elif section == "mc":
            scn.mc[key] = " ".join(vals)
        elif key == "units":
            scn.units = vals[0]
        else:
            raise ParseError(no, f"{key!r} outside any section")
    close_current()
    _validate(scn)
    return scn


def _finish_link(d: dict) -> LinkSpec:
    line = d.pop("line")
    required = {"v_f", "rho_c", "rho_m", "length", "k_max", "n_max", "T", "rho_mean"}
    missing = required - d.keys()
    if missing:
        raise ParseError(line, f"link {d['id']!r} missing {sorted(missing)}")
    d.setdefault("n_lane", 1)
    d.setdefault("rho_sigma", [0.0] * d["k_max"])
    return LinkSpec(**d)


def _finish_junction(d: dict) -> JunctionSpec:
    line = d.pop("line")
    if "incoming" not in d or "outgoing" not in d:
        raise ParseError(line, f"junction {d['id']!r} missing incoming/outgoing")
    return JunctionSpec(**d)


def _validate(scn: Scenario) -> None:
    if scn.units != "si":
        raise ValidationError(f"unsupported units {scn.units!r}")
    if scn.kind not in ("max_outflow", "tradeoff", "network"):
        raise ValidationError(f"unknown model kind {scn.kind!r}")
    ids = [l.id for l in scn.links]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate link ids")
    for l in scn.links:
        if len(l.rho_mean) != l.k_max or len(l.rho_sigma) != l.k_max:
            raise ValidationError(
                f"link {l.id}: need {l.k_max} rho_mean/rho_sigma entries")
        try:
            l.fd()
            l.disc()
        except ValueError as exc:
            raise ValidationError(f"link {l.id}: {exc}") from None
    known = set(ids)
    for j in scn.junctions:
        for ref in (*j.incoming, *j.outgoing):
            if ref not in known:
                raise ValidationError(f"junction {j.id}: unknown link {ref!r}")
        try:
            _to_junction(j)
        except ValueError as exc:
            raise ValidationError(f"junction {j.id}: {exc}") from None
    if scn.kind == "network" and not scn.junctions:
        raise ValidationError("network model needs junction sections")


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def serialize(scn: Scenario) -> str:
    """Canonical text form; parse(serialize(s)) == s."""
    out = [_HEADER, "units " + scn.units, ""]
    out.append("[model]")
    for k, v in scn.model.items():
        out.append(f"{k} {v}")
    for l in scn.links:
        out += ["", f"[link {l.id}]"]
        for k in ("v_f", "rho_c", "rho_m", "length", "T"):
            out.append(f"{k} {_fmt(getattr(l, k))}")
        for k in ("k_max", "n_max", "n_lane"):
            out.append(f"{k} {getattr(l, k)}")
        out.append("rho_mean " + " ".join(_fmt(v) for v in l.rho_mean))
        out.append("rho_sigma " + " ".join(_fmt(v) for v in l.rho_sigma))
    for j in scn.junctions:
        out += ["", f"[junction {j.id}]"]
        out.append("incoming " + " ".join(j.incoming))
        out.append("outgoing " + " ".join(j.outgoing))
        for row in j.P1:
            out.append("P1 " + " ".join(_fmt(v) for v in row))
        if j.P2 is not None:
            out.append("P2 " + " ".join(_fmt(v) for v in j.P2))
        if j.P3 is not None:
            out.append("P3 " + " ".join(_fmt(v) for v in j.P3))
        if j.on_ramp is not None:
            out.append("on_ramp " + j.on_ramp)
        if j.off_ramp is not None:
            out.append("off_ramp " + j.off_ramp)
    if scn.objective:
        out += ["", "[objective]"]
        for k, entries in scn.objective.items():
            for vals in entries:
                out.append((k + " " + " ".join(vals)).rstrip())
    if scn.mc:
        out += ["", "[mc]"]
        for k, v in scn.mc.items():
            out.append(f"{k} {v}")
    return "\n".join(out) + "\n"


def _to_junction(j: JunctionSpec) -> Junction:
    return Junction(
        id=j.id,
        incoming=tuple(j.incoming),
        outgoing=tuple(j.outgoing),
        P1=np.asarray(j.P1, dtype=float),
        P2=None if j.P2 is None else np.asarray(j.P2, dtype=float),
        P3=None if j.P3 is None else np.asarray(j.P3, dtype=float),
        on_ramp=j.on_ramp,
        off_ramp=j.off_ramp,
    )


def build_network(
    scn: Scenario,
    alpha: float = 0.025,
    sigma: float | None = None,
    n_max: int | None = None,
    robust: bool = True,
) -> Network:
    """Materialize the scenario's topology as a Network."""
    links = []
    for ls in scn.links:
        disc = ls.disc()
        if n_max is not None and n_max != ls.n_max:
            t_max = ls.n_max * ls.T
            disc = Discretization(zeta=0.0, chi=ls.length, k_max=ls.k_max,
                                  n_max=n_max, T=t_max / n_max)
        chance = ls.chance(alpha, sigma=sigma, robust=robust)
        links.append(Link(id=ls.id, length=ls.length, n_lane=ls.n_lane,
                          fd=ls.fd(), disc=disc, chance=chance))
    return Network(links=tuple(links),
                   junctions=tuple(_to_junction(j) for j in scn.junctions))


def objective_spec(scn: Scenario, eta: float | None = None) -> NetworkObjectiveSpec:
    """Objective settings from the [objective] section."""
    obj = scn.objective
    if eta is None:
        eta = float(obj["eta"][0][0]) if "eta" in obj else 0.2
    fairness = tuple((a, b) for a, b in obj.get("fairness", []))
    ramp_shares = tuple((r, l) for r, l in obj.get("ramp_share", []))
    exit_caps = tuple((lid, float(rho)) for lid, rho in obj.get("exit_density", []))
    return NetworkObjectiveSpec(eta=eta, fairness_pairs=fairness,
                                ramp_shares=ramp_shares, exit_caps=exit_caps)
