"""Validation and scoring toolkit for the XEQ explainable-AI experience questionnaire.

Subpackages by stage: :mod:`~xeqkit.scale` and :mod:`~xeqkit.ingest` load
data, :mod:`~xeqkit.content_validity`, :mod:`~xeqkit.reliability`,
:mod:`~xeqkit.construct` and :mod:`~xeqkit.discriminant` validate the
instrument, :mod:`~xeqkit.scoring` scores and benchmarks systems,
:mod:`~xeqkit.simulation` generates synthetic responses and
:mod:`~xeqkit.pipeline` runs everything end to end.
"""

__version__ = "0.1.0"

from .content_validity import (  # noqa: E402
    content_validity,
    item_cvi,
    scale_cvi_average,
    scale_cvi_universal,
    select_items,
)
from .construct import CfaModel, cfa_fit, efa_eigenvalues, one_factor_loadings  # noqa: E402
from .discriminant import TrialConfig, group_comparison, run_discriminant_trials  # noqa: E402
from .errors import AnalysisError, ValidationError, XeqError  # noqa: E402
from .ingest import apply_attention_filters, load_responses, pair_retest  # noqa: E402
from .reliability import (  # noqa: E402
    cronbach_alpha,
    icc_two_way_mixed,
    inter_item_matrix,
    item_total_correlation,
    pearson,
)
from .scale import ResponseMatrix, ScaleDefinition, load_scale, xeq_scale  # noqa: E402
from .scoring import (  # noqa: E402
    BenchmarkStore,
    benchmark_add,
    classify_system,
    factor_scores,
    stakeholder_score,
    system_score,
)
from .simulation import GeneratorSpec, generate_factor_data, generate_retest, generate_two_group  # noqa: E402

__all__ = [
    "__version__",
    "AnalysisError", "ValidationError", "XeqError",
    "ScaleDefinition", "ResponseMatrix", "load_scale", "xeq_scale",
    "load_responses", "apply_attention_filters", "pair_retest",
    "content_validity", "item_cvi", "scale_cvi_average", "scale_cvi_universal", "select_items",
    "pearson", "item_total_correlation", "inter_item_matrix", "cronbach_alpha", "icc_two_way_mixed",
    "efa_eigenvalues", "CfaModel", "cfa_fit", "one_factor_loadings",
    "TrialConfig", "run_discriminant_trials", "group_comparison",
    "stakeholder_score", "factor_scores", "system_score",
    "BenchmarkStore", "benchmark_add", "classify_system",
    "GeneratorSpec", "generate_factor_data", "generate_two_group", "generate_retest",
]
