"""
Econometrics
------------

Estimators for the firm-year panel: binary and count regressions with fixed effects, marginal
effects, instrumental variables, propensity score matching and placebo tests.
"""

from .analysis import (
    HeterogeneityReport,
    SuiteResult,
    default_suite,
    heterogeneity,
    moderation,
    run_suite,
    vif,
)
from .design import (
    CONTROLS,
    DesignMatrix,
    ModelSpec,
    PanelRow,
    add_lags,
    assemble_panel,
    build_design,
    load_panel,
    panel_frame,
)
from .iv import IVResult, fit_iv, fit_tsls
from .margins import MarginalEffect, ame_binary
from .models import (
    estimate,
    fit,
    fit_logit,
    fit_negbin,
    fit_ols,
    fit_poisson,
    fit_probit,
)
from .placebo import PlaceboReport, placebo
from .psm import PSMResult, match_nearest, psm
from .results import EstimationResult, render_table, table_frame
