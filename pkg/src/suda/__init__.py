"""Support-based domain adaptation for sim2real joint-angle regression."""

from .baselines import (
    DIDA_METHODS,
    DidaConfig,
    adversarial_step,
    coral_loss,
    mmd_loss,
    train_dida,
)
from .bvh import (
    BvhDocument,
    JointTriple,
    export_angles,
    forward_kinematics,
    joint_angle,
    load_bvh,
    parse_bvh,
)
from .data import (
    Dataset,
    DatasetMeta,
    LabeledFrame,
    NormStats,
    SensorFrame,
    load_csv,
    normalize_fit,
    save_csv,
    split_chrono,
    strip_labels,
)
from .errors import SudaError
from .evaluate import aggregate, mae_deg, method_table, render_report, size_sweep
from .pipeline import AdaptResult, BenchmarkSpec, adapt, benchmark_datasets, train_supervised
from .regressor import (
    RegressorConfig,
    RegressorModel,
    TrainConfig,
    evaluate_mae,
    forward,
    init_model,
    load_model,
    loss_mae,
    lr_at,
    predict_series,
    save_model,
    train,
)
from .simulate import (
    DomainConfig,
    SurrogateConfig,
    TrajectorySpec,
    benchmark_domain_pair,
    gen_trajectory,
    make_domain_pair,
    sensor_response,
    simulate,
)
from .support import (
    RegistrationMap,
    SupportCurve,
    build_pseudo_dataset,
    fit_support,
    load_curve,
    param_of,
    register,
    save_curve,
    support_evidence,
)

__version__ = "0.1.0"
