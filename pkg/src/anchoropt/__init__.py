"""Black-box tuning of object-detector anchor scales and input size.

Three optimizers over normalized hyper-parameter spaces (an evolution
strategy and two surrogate-based Bayesian loops), detector anchor
geometry, a coverage proxy objective, an IoU k-means baseline, and
post-hoc importance analysis.
"""

__version__ = "0.1.0"

from .space import (
    HyperParam,
    HyperParamSpace,
    builtin_space,
    default_vector,
    load_space_file,
    resolve_space,
)
from .anchors import (
    Box,
    FrcnnAnchorConfig,
    SsdAnchorConfig,
    anchor_wh,
    constant_box_scale,
    frcnn_anchor_set,
    frcnn_grid,
    iou,
    ssd_anchor_shapes,
    ssd_default_config,
    ssd_layer_boxes,
    ssd_scale_schedule,
)
from .cmaes import CmaEs, CmaesParams, ProtocolError, default_lambda
from .surrogate import (
    BoConfig,
    GpSurrogate,
    RfConfig,
    RfSurrogate,
    expected_improvement,
    gp_fit,
    gp_predict,
    propose_next,
    rf_fit,
    rf_predict,
    run_sequential_bo,
)
from .objective import (
    AnnotationSet,
    FitnessRequest,
    FitnessResponse,
    coverage_fitness,
    external_evaluate,
    load_annotations,
    proxy_objective,
    recall_at_iou,
)
from .analysis import (
    GenerationStats,
    KmeansResult,
    RegressionReport,
    fit_importance_regression,
    generation_stats,
    kmeans_iou,
    stats_to_csv,
)
from .trials import Trial
from .campaign import CampaignConfig, report, resume_campaign, run_campaign
