from ddn.evaluation.metrics import (  # noqa: F401
    ConditionSSE,
    head_entropy,
    oracle_log_likelihoods,
    sse,
    test_log_likelihood,
    toy_sse,
    truth_grid,
)
from ddn.evaluation.report import EvalReport, TrialRecord, comparison_table, format_mean_std  # noqa: F401
from ddn.evaluation.suite import tabular_trial_runner, toy_trial_runner, trial_suite  # noqa: F401
