"""scorefuse: model-agnostic decision fusion for per-class probability tables.

Train desk-scale base classifiers, combine frozen model outputs with eight
ensemble mechanisms (bagging, boosting, stacking, mixture of experts,
majority voting, the max rule, probability averaging, weighted probability
averaging), fuse a binary detector with a multiclass classifier across
mismatched label spaces, and evaluate the result with a stratified-split
protocol.
"""

from .types import (
    ConfusionMatrix,
    LabelSpace,
    ProbVector,
    ScoreRow,
    ScoreTable,
    argmax_class,
    argmax_index,
    renormalize,
)
from .io import (
    DatasetManifest,
    ManifestEntry,
    read_feature_table,
    read_manifest,
    read_score_table,
    write_feature_table,
    write_manifest,
    write_score_table,
)
from .images import (
    AugmentPlan,
    RasterImage,
    augment,
    augment_ids,
    flip,
    load_image,
    min_max_normalize,
    resize_square,
    rotate90,
    save_pgm,
)
from .linear import (
    LinearModel,
    TrainConfig,
    extract_features,
    load_model,
    loss_and_grad,
    predict_matrix,
    predict_proba,
    save_model,
    score_table,
    softmax,
    train,
)
from .combine import (
    BagEnsemble,
    BoostEnsemble,
    EnsembleSpec,
    OofResult,
    accuracy_weights,
    bag_predict,
    bag_predict_proba,
    bagging_train,
    boost_alpha,
    boost_round,
    boosting_predict,
    boosting_train,
    bootstrap_sample,
    fuse_tables,
    grid_search_weights,
    kfold_indices,
    load_ensemble,
    majority_vote,
    max_confidence_cell,
    max_rule,
    moe_predict,
    moe_train,
    oof_table,
    prob_average,
    save_ensemble,
    stacking_predict,
    stacking_train,
    table_accuracy,
    weighted_average,
)
from .cascade import CascadeSpec, cascade_predict, lift_binary
from .evaluate import (
    REFERENCE_BASELINES,
    EvalMetrics,
    SplitAssignment,
    build_report,
    confusion,
    metrics,
    render_report_text,
    stratified_split,
    write_report,
)

__version__ = "0.1.0"
