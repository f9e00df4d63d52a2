from pdfa_bench.predictors.base import (
    EvalOutcome,
    PredictorSpec,
    build_predictor,
    evaluate_stream,
)

__all__ = ["EvalOutcome", "PredictorSpec", "build_predictor", "evaluate_stream"]
