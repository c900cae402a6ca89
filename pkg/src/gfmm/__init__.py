"""General fuzzy min-max (GFMM) hyperbox classifiers."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    UNLABELED,
    DimensionMismatchError,
    EmptyModelError,
    GfmmError,
    GfmmModel,
    Hyperbox,
    IntervalData,
    IntervalPattern,
    InvalidParameterError,
    membership,
    predict,
    ramp,
)
from .online import OnlineConfig, can_expand, contract, expand, overlap_test, train_online, train_online_adaptive  # noqa: E402
from .agglo import AggloConfig, SimilarityMeasure, aggregation_admissible, similarity, train_agglo_2, train_agglo_sm  # noqa: E402
from .pruning import BoxStats, prune  # noqa: E402

__all__ = [
    "UNLABELED", "DimensionMismatchError", "EmptyModelError", "GfmmError", "GfmmModel", "Hyperbox",
    "IntervalData", "IntervalPattern", "InvalidParameterError", "membership", "predict", "ramp",
    "OnlineConfig", "can_expand", "contract", "expand", "overlap_test", "train_online",
    "train_online_adaptive", "AggloConfig", "SimilarityMeasure", "aggregation_admissible",
    "similarity", "train_agglo_2", "train_agglo_sm", "BoxStats", "prune",
]
