"""Grid-free LWR solutions and robust boundary control.

Layers, bottom to top:

- :mod:`laxflow.fd` — triangular fundamental diagram;
- :mod:`laxflow.conditions` — discretized initial/boundary value conditions;
- :mod:`laxflow.moskowitz` — explicit cumulative-count solutions;
- :mod:`laxflow.constraints` — chance-constrained compatibility rows;
- :mod:`laxflow.lp` — named-variable linear programs (HiGHS backend);
- :mod:`laxflow.link_models` / :mod:`laxflow.network` — control programs;
- :mod:`laxflow.ctm` — independent Godunov simulator (oracle + replay);
- :mod:`laxflow.montecarlo` — sample-based constraint validation;
- :mod:`laxflow.scenario` / :mod:`laxflow.cli` — files and commands.
"""

from .conditions import (
    BoundaryFlows,
    CFLDiagnostic,
    Discretization,
    InitialDensityProfile,
    check_cfl,
)
from .constraints import (
    ChanceSpec,
    ConstraintRow,
    Provenance,
    build_deterministic_rows,
    build_robust_rows,
    inverse_normal_cdf,
)
from .ctm import CFLError, ControlPlan, simulate_link, simulate_network, step_link
from .fd import FDError, FDParams, derive_critical_density
from .link_models import (
    SmoothingSpec,
    TradeoffSpec,
    build_max_outflow_lp,
    build_tradeoff_lp,
    level_of_service,
    sweep_uncertainty,
)
from .lp import LinearProgram, LPError, LPSolution
from .montecarlo import (
    MonteCarloSpec,
    compare_relaxed_vs_mc,
    mc_rows_vs_downstream,
    mc_rows_vs_upstream,
)
from .moskowitz import density_field, sample_field, solve_moskowitz
from .network import (
    Junction,
    Link,
    Network,
    NetworkObjectiveSpec,
    build_case_network,
    build_network_lp,
    case_objective_spec,
    time_step_sensitivity,
)
from .scenario import Scenario, ScenarioError, parse_scenario, serialize

__version__ = "0.1.0"
