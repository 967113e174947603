"""Load-shifting inventory control with convex ordering costs."""

__version__ = "0.1.0"

from .cost import (ConvexityError, CostFunction, CurvatureBounds, DomainError, PowerCost,
                   QuadraticCost, TabulatedCost, curvature_bounds, eval_cost)
from .demand import (DemandPath, DemandSpec, InventoryProblem, ValidationReport, fig3_like,
                     load_problem, sample_path, validate)
from .deterministic import (Block, OrderTrajectory, concave_majorant_oracle,
                            convex_solve_oracle, load_shift)
from .policies import (DPPolicy, LSHPolicy, MyopicPolicy, RHHPolicy, TargetTrajectory,
                       ValueFunction, dp_decide, dp_solve, lsh_build, lsh_decide, make_policy,
                       myopic_decide, rhh_decide)
from .bounds import (BoundReport, bound_report, heuristic_expected_cost,
                     heuristic_gap_upper_bound, myopic_expected_cost, myopic_gap_lower_bound,
                     nominal_stats)
from .sim import ComparisonReport, RolloutResult, monte_carlo, rollout
from .thermo import (PressureSeries, RefrigerantTable, build_G, case_study, invert_H)
