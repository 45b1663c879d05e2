"""Desk-scale benchmarking harness for robot scene-understanding tasks."""

__version__ = "0.1.0"

from .batch import BatchSpec, run_batch  # noqa: E402
from .client import (  # noqa: E402
    ClientHandle,
    act,
    connect,
    observe,
    run_agent,
    run_submission,
)
from .omq import (  # noqa: E402
    EvalReport,
    PairwiseQuality,
    assign,
    evaluate,
    evaluate_results_file,
    iou3d,
    pairwise_quality,
    scd_ground_truth,
    summarise,
)
from .pools import (  # noqa: E402
    EnvironmentDef,
    GroundTruthObject,
    Pools,
    ResolvedConfig,
    RobotDef,
    TaskDef,
    list_options,
    load_pool,
    save_pool,
    validate_selection,
)
from .results import load_results, prefill_results, validate_results, write_results  # noqa: E402
from .supervisor import SupervisorServer, serve  # noqa: E402
from .worldsim import (  # noqa: E402
    ActionOutcome,
    MotionCommand,
    SensorFrame,
    WorldState,
    apply_variant,
    init_world,
    reset,
    sense,
    step_motion,
)
