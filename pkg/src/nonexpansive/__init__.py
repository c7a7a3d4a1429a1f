"""Fixed-point iteration schemes for generalized nonexpansive self-maps of boxes,
with sampled condition checkers and convergence diagnostics."""

from .space import Domain, NormKind, Point, SampleStrategy, convex_combine, distance, sample
from .exprmap import ExprEvalError, ExprSyntaxError, evaluate_ast, parse
from .mappings import Catalog, MappingSpec, default_catalog, evaluate, from_expression, residual
from .schemes import (
    IterationTrace,
    ParamSchedule,
    StopCriteria,
    noor_step,
    run_scheme,
    thakur_step,
)
from .conditions import (
    ConditionReport,
    Verdict,
    check_condition_C,
    check_condition_Da,
    check_condition_I,
    check_lemma1,
    check_quasi_nonexpansive,
    sample_C_set,
)
from .diagnostics import compare_schemes, estimate_rate, fejer_check, residual_decay_check

__version__ = "0.1.0"
