"""moca: a rule-based engine for assessing cultural impact on agile elements.

The package joins a catalog of cultural metrics (0..100 scales between two
named poles) with a taxonomy of agile elements, and evaluates authorable,
optionally condition-gated impact rules against a team's cultural profile.
Results are qualitative per-element assessments with full explanation
traces, what-if diffs, and a full-matrix export.
"""

from .model import (
    AgileElement,
    ConditionTerm,
    ConfigurationError,
    ContextFlag,
    CulturalMetric,
    CulturalProfile,
    CultureLevel,
    DEFAULT_THRESHOLDS,
    ElementKind,
    ImpactCondition,
    ImpactRule,
    ImpactSign,
    Level,
    MATRIX_KINDS,
    MetricPredicate,
    MetricSource,
    MocaError,
    NormalizedRule,
    UnknownEntityError,
    level_of,
    normalize,
)
from .dsl import (
    Comment,
    ParseError,
    RuleDocument,
    RuleSyntaxError,
    parse,
    parse_errors,
    serialize,
)
from .kb import (
    ExpectedCounts,
    Finding,
    KnowledgeBase,
    KnowledgeBaseError,
    LoadResult,
    Severity,
    ValidationReport,
    load,
    load_kb,
    load_profiles,
    seed_dir,
    seed_kb_paths,
    validate_completeness,
)
from .engine import (
    Assessment,
    ConditionStatus,
    Contribution,
    ElementDiff,
    EvaluationContext,
    ImpactLabel,
    MatrixEntry,
    MatrixExport,
    diff,
    evaluate,
    evaluate_element,
    export_matrix,
    label_for,
)

__version__ = "0.1.0"

__all__ = [
    "AgileElement",
    "Assessment",
    "Comment",
    "ConditionStatus",
    "ConditionTerm",
    "ConfigurationError",
    "ContextFlag",
    "Contribution",
    "CulturalMetric",
    "CulturalProfile",
    "CultureLevel",
    "DEFAULT_THRESHOLDS",
    "ElementDiff",
    "ElementKind",
    "EvaluationContext",
    "ExpectedCounts",
    "Finding",
    "ImpactCondition",
    "ImpactLabel",
    "ImpactRule",
    "ImpactSign",
    "KnowledgeBase",
    "KnowledgeBaseError",
    "Level",
    "LoadResult",
    "MATRIX_KINDS",
    "MatrixEntry",
    "MatrixExport",
    "MetricPredicate",
    "MetricSource",
    "MocaError",
    "NormalizedRule",
    "ParseError",
    "RuleDocument",
    "RuleSyntaxError",
    "Severity",
    "UnknownEntityError",
    "ValidationReport",
    "diff",
    "evaluate",
    "evaluate_element",
    "export_matrix",
    "label_for",
    "level_of",
    "load",
    "load_kb",
    "load_profiles",
    "normalize",
    "parse",
    "parse_errors",
    "seed_dir",
    "seed_kb_paths",
    "serialize",
    "validate_completeness",
    "__version__",
]
