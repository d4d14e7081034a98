"""pbcast: forecast public support for participatory-budgeting proposals.

Classical baselines (softmax vote-share model, nearest-neighbor vote
averaging over reduced feature vectors), LLM prompting pipelines with
record/replay, the evaluation metric suite, and a what-if service.
"""

from .data import (  # noqa: F401
    Campaign,
    CampaignError,
    DataError,
    PredictionRecord,
    PredictionRun,
    Project,
    RunStore,
    SchemaError,
    ValidationReport,
    Violation,
    discover_campaigns,
    load_campaign,
    load_campaign_dir,
    load_pabulib,
    validate_campaign,
    write_campaign,
)
from .embeddings import (  # noqa: F401
    CachingEmbedder,
    EmbeddingCache,
    HashingEmbedder,
    HttpEmbeddingClient,
)
from .features import FeatureSchema, ProjectVectorizer, build_features, fit_feature_schema  # noqa: F401
from .pca import PrincipalComponents, fit_pca  # noqa: F401
from .models import (  # noqa: F401
    KnnVoteRegressor,
    PvmRegressor,
    fit_pvm,
    load_model,
    predict_knn,
    predict_pvm,
    pvm_probabilities,
    save_model,
)
from .metrics import (  # noqa: F401
    EvalReport,
    aggregated_cost_curve,
    evaluate_run,
    greedy_allocate,
    jaccard_top_k,
    kendall_tau,
    normalized_rmse,
    null_predictor,
    rank_order,
)
from .selection import DimSelection, select_pca_dim  # noqa: F401

__version__ = "0.1.0"
