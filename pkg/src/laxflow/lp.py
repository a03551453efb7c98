"""Linear program container with named variables and a HiGHS backend.

Rows are the sparse :class:`~laxflow.constraints.ConstraintRow` objects
produced by the constraint builders; variables carry bounds directly, so
nonnegativity and capacity limits never appear as rows.  Solving goes
through ``scipy.optimize.linprog`` (HiGHS); solutions are re-validated
against the stored rows independently of the solver's own report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from .constraints import ConstraintRow, Provenance

_VIOLATION_TOL = 1e-7


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    control: bool = True  # False for slack/auxiliary variables


@dataclass
class LPSolution:
    status: str  # 'optimal' | 'infeasible' | 'unbounded' | 'iteration_limit' | 'error'
    x: dict[str, float]
    objective_value: float | None
    max_violation: float | None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def __getitem__(self, name: str) -> float:
        return self.x[name]

    def series(self, prefix: str, n: int) -> np.ndarray:
        """Values of ``prefix[1] .. prefix[n]`` as an array."""
        return np.array([self.x[f"{prefix}[{i}]"] for i in range(1, n + 1)])


class LPError(Exception):
    pass


class LinearProgram:
    """Named-variable LP: optimize c'x subject to sparse rows and bounds."""

    def __init__(self, name: str = ""):
        self.name = name
        self.variables: list[Variable] = []
        self._index: dict[str, int] = {}
        self.rows: list[ConstraintRow] = []
        self.objective: dict[str, float] = {}
        self.sense: str = "max"

    # -- construction ---------------------------------------------------------

    def add_variable(
        self,
        name: str,
        lb: float = 0.0,
        ub: float = math.inf,
        control: bool = True,
    ) -> None:
        if name in self._index:
            raise LPError(f"duplicate variable {name!r}")
        if lb > ub:
            raise LPError(f"variable {name!r}: lb {lb} > ub {ub}")
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, lb=float(lb), ub=float(ub), control=control))

    def add_row(self, row: ConstraintRow) -> None:
        if not row.coeffs.keys() <= self._index.keys():
            unknown = sorted(row.coeffs.keys() - self._index.keys())
            raise LPError(f"row references unknown variables {unknown}")
        self.rows.append(row)

    def add_rows(self, rows: list[ConstraintRow]) -> None:
        known = self._index.keys()
        for r in rows:
            if not r.coeffs.keys() <= known:
                unknown = sorted(r.coeffs.keys() - known)
                raise LPError(f"row references unknown variables {unknown}")
        self.rows.extend(rows)

    def set_objective(self, coeffs: dict[str, float], sense: str = "max") -> None:
        if sense not in ("max", "min"):
            raise LPError(f"bad objective sense {sense!r}")
        for v in coeffs:
            if v not in self._index:
                raise LPError(f"objective references unknown variable {v!r}")
        self.objective = dict(coeffs)
        self.sense = sense

    # -- reporting ------------------------------------------------------------

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_control_variables(self) -> int:
        return sum(1 for v in self.variables if v.control)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "variables": self.num_variables,
            "control_variables": self.num_control_variables,
            "rows": self.num_rows,
            "sense": self.sense,
        }

    # -- solving --------------------------------------------------------------

    def _matrices(self):
        n = len(self.variables)
        ub_data, ub_i, ub_j, b_ub = [], [], [], []
        eq_data, eq_i, eq_j, b_eq = [], [], [], []
        n_ub = n_eq = 0
        for row in self.rows:
            if row.sense == "==":
                for v, c in row.coeffs.items():
                    eq_i.append(n_eq)
                    eq_j.append(self._index[v])
                    eq_data.append(c)
                b_eq.append(row.rhs)
                n_eq += 1
            else:
                flip = -1.0 if row.sense == ">=" else 1.0
                for v, c in row.coeffs.items():
                    ub_i.append(n_ub)
                    ub_j.append(self._index[v])
                    ub_data.append(flip * c)
                b_ub.append(flip * row.rhs)
                n_ub += 1
        A_ub = csr_matrix((ub_data, (ub_i, ub_j)), shape=(n_ub, n)) if n_ub else None
        A_eq = csr_matrix((eq_data, (eq_i, eq_j)), shape=(n_eq, n)) if n_eq else None
        return A_ub, (np.array(b_ub) if n_ub else None), A_eq, (np.array(b_eq) if n_eq else None)

    def solve(self) -> LPSolution:
        n = len(self.variables)
        c = np.zeros(n)
        for v, coef in self.objective.items():
            c[self._index[v]] = coef
        if self.sense == "max":
            c = -c
        A_ub, b_ub, A_eq, b_eq = self._matrices()
        bounds = [(v.lb, None if math.isinf(v.ub) else v.ub) for v in self.variables]
        res = linprog(
            c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
            bounds=bounds, method="highs",
        )
        if res.status == 2:
            return LPSolution("infeasible", {}, None, None, res.message)
        if res.status == 3:
            return LPSolution("unbounded", {}, None, None, res.message)
        if res.status == 1:
            return LPSolution("iteration_limit", {}, None, None, res.message)
        if res.status != 0:
            return LPSolution("error", {}, None, None, res.message)
        x = {v.name: float(res.x[i]) for i, v in enumerate(self.variables)}
        obj = float(res.fun) * (-1.0 if self.sense == "max" else 1.0)
        viol = self.validate(x)
        if viol > _VIOLATION_TOL:
            return LPSolution(
                "error", x, obj, viol,
                f"solution violates rows by {viol:.3e} > {_VIOLATION_TOL:.1e}",
            )
        return LPSolution("optimal", x, obj, viol, res.message)

    def validate(self, x: dict[str, float]) -> float:
        """Largest constraint/bound violation of a candidate point."""
        worst = 0.0
        for v in self.variables:
            val = x[v.name]
            worst = max(worst, v.lb - val, val - v.ub)
        for row in self.rows:
            lhs = sum(c * x[v] for v, c in row.coeffs.items())
            if row.sense == "<=":
                worst = max(worst, lhs - row.rhs)
            elif row.sense == ">=":
                worst = max(worst, row.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - row.rhs))
        return worst

    # -- text round-trip ------------------------------------------------------

    def to_text(self) -> str:
        """Plain-text dump: one line per variable, objective and row."""
        lines = [f"lp {self.name}"]
        for v in self.variables:
            lines.append(f"var {v.name} {v.lb!r} {v.ub!r} {int(v.control)}")
        terms = " ".join(f"{k}:{float(c)!r}" for k, c in self.objective.items())
        lines.append(f"{self.sense} {terms}".rstrip())
        for r in self.rows:
            terms = " ".join(f"{k}:{float(c)!r}" for k, c in r.coeffs.items())
            pr = r.provenance
            tag = f"{pr.family}/{pr.k}/{pr.n}/{pr.p}/{pr.branch}"
            lines.append(f"row {r.sense} {float(r.rhs)!r} {tag} {terms}".rstrip())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LinearProgram":
        lp = cls()
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            kind = parts[0]
            if kind == "lp":
                lp.name = parts[1] if len(parts) > 1 else ""
            elif kind == "var":
                lp.add_variable(parts[1], float(parts[2]), float(parts[3]),
                                control=bool(int(parts[4])))
            elif kind in ("max", "min"):
                coeffs = {}
                for term in parts[1:]:
                    k, c = term.rsplit(":", 1)
                    coeffs[k] = float(c)
                lp.set_objective(coeffs, sense=kind)
            elif kind == "row":
                sense, rhs, tag = parts[1], float(parts[2]), parts[3]
                fam, k, n, p, branch = tag.split("/")
                coeffs = {}
                for term in parts[4:]:
                    key, c = term.rsplit(":", 1)
                    coeffs[key] = float(c)
                prov = Provenance(
                    family=fam,
                    k=None if k == "None" else int(k),
                    n=None if n == "None" else int(n),
                    p=None if p == "None" else int(p),
                    branch=branch,
                )
                lp.rows.append(ConstraintRow(coeffs, rhs, sense, prov))
            else:
                raise LPError(f"unrecognized line: {line!r}")
        return lp
