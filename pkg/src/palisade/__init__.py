"""Terminal-cost parameter estimation and pattern control for an
acid-mediated tumor growth PDE system on uniform image-derived grids."""

__version__ = "0.1.0"

from .adjoint import AdjointTrajectory, solve_adjoint, step_adjoint
from .archive import ArchiveError, load_series, save_field, save_series
from .config import DEFAULT_BOUNDS, PARAM_NAMES, RunConfig
from .control import (ControlSet, NeutralizeResult, combine_controls, combine_params,
                      neutralize, solve_forward_controlled)
from .forward import (InstabilityError, ParamSet, StateTrajectory, solve_forward,
                      stability_check, step_state)
from .grid import Grid2D, TimeGrid, div, grad, inner, laplace_neumann, norm_l2, norm_linf
from .imaging import (PreprocessParams, RasterImage, export_pgm, gaussian_blur,
                      import_raster, otsu_threshold, perturb, preprocess)
from .kinetics import KineticsEval, eval_f1, eval_f2, evaluate, partials_f1, partials_f2
from .optimizer import (CostReport, GradientSet, MetricsReport, PGDResult,
                        assemble_gradient, eval_cost, eval_metrics, pgd_run, project_box)

__all__ = [
    "__version__",
    "Grid2D", "TimeGrid", "grad", "div", "laplace_neumann", "norm_l2", "norm_linf", "inner",
    "RunConfig", "PARAM_NAMES", "DEFAULT_BOUNDS",
    "KineticsEval", "eval_f1", "eval_f2", "partials_f1", "partials_f2", "evaluate",
    "ParamSet", "StateTrajectory", "InstabilityError", "step_state", "solve_forward",
    "stability_check",
    "AdjointTrajectory", "step_adjoint", "solve_adjoint",
    "CostReport", "GradientSet", "MetricsReport", "PGDResult",
    "eval_cost", "assemble_gradient", "project_box", "pgd_run", "eval_metrics",
    "ControlSet", "NeutralizeResult", "solve_forward_controlled", "neutralize",
    "combine_params", "combine_controls",
    "RasterImage", "PreprocessParams", "preprocess", "perturb", "gaussian_blur",
    "otsu_threshold", "export_pgm", "import_raster",
    "save_series", "save_field", "load_series", "ArchiveError",
]
