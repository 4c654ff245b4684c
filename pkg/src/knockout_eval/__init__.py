"""Knockout-tournament LLM-as-a-judge scoring.

Answers to a question are compared pairwise in a single-elimination bracket;
each answer's final score is the mean of every score it collected before it
was eliminated. Individual and single-round pairwise baselines, two-ordering
debiasing, agreement metrics and a simulated judge come with it.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateInput,
    KnockoutEvalError,
    NoScoreFound,
    ScoreOutOfRange,
    TooFewAnswers,
    UnscorableResponse,
)
from .judges import Judge, JudgeConfig, OracleBackend, RemoteBackend, build_backend  # noqa: E402
from .metrics import Grouping, pairwise_ranking_accuracy, pearson  # noqa: E402
from .models import (  # noqa: E402
    CHAMPION,
    AssessmentResult,
    CandidateAnswer,
    Difficulty,
    EvaluationItem,
    Method,
    TaskKind,
    final_average,
)
from .tournament import EngineConfig, run_assessment, run_individual, run_knockout, run_naive_pairwise  # noqa: E402

__all__ = [
    "AssessmentResult",
    "CHAMPION",
    "CandidateAnswer",
    "DegenerateInput",
    "Difficulty",
    "EngineConfig",
    "EvaluationItem",
    "Grouping",
    "Judge",
    "JudgeConfig",
    "KnockoutEvalError",
    "Method",
    "NoScoreFound",
    "OracleBackend",
    "RemoteBackend",
    "ScoreOutOfRange",
    "TaskKind",
    "TooFewAnswers",
    "UnscorableResponse",
    "build_backend",
    "final_average",
    "pairwise_ranking_accuracy",
    "pearson",
    "run_assessment",
    "run_individual",
    "run_knockout",
    "run_naive_pairwise",
]
