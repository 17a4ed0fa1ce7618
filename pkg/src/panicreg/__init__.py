"""Constrained GLM estimation with penalized-risk model selection."""
from .duality import ConstrainedSolution, PathPoint, SolverFailure, path_value, solve_constrained
from .errors import (BudgetExceededError, DegenerateGridError, DomainError, InputError,
                     PanicRegError, PathInversionError, SelectionError, UnboundedERMError)
from .glm import (LINEAR, LOGISTIC, POISSON, CoefficientVector, Dataset, Family,
                  FamilyKind, empirical_risk, mean_value, pointwise_loss, risk_gradient)
from .penalty import LASSO, PenaltyKind, PenaltySpec, lambda_max, penalty_value, prox, within_ball
from .selection import (CriterionConfig, Grid, GridRecord, Method, SelectionResult, build_grid,
                        df_hat, df_tilde, panic_penalty, select, select_continuous, select_cv,
                        select_modified_bic, select_panic, solve_grid, support)
from .simulation import (SimDesign, SimulationReport, TrueModel, compute_metrics,
                         generate_problem, paper_designs, paper_methods, run_replication,
                         run_study)
from .solver import DEFAULT_CONFIG, FitResult, SolverConfig, fit_erm, fit_penalized, intercept_only

__version__ = "0.1.0"
