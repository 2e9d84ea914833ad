"""pivotsim: a desk-scale simulator and TRPO trainer for in-gripper tool
pivoting with grip-controlled friction."""

from .dynamics import (
    ArmParams,
    ControlInput,
    FrictionParams,
    SimState,
    ToolParams,
    deformation,
    friction_torque,
    integrate_step,
    net_tool_torque,
    tool_accel,
)
from .environment import (
    MdpConfig,
    Observation,
    PivotingEnv,
    RandomizationConfig,
    StepResult,
    goal_predicate,
)
from .policy import (
    CheckpointError,
    MlpSpec,
    PolicyParams,
    ValueParams,
    forward_mean,
    init_policy_params,
    init_value_params,
    kl_mean,
    load_checkpoint,
    log_prob,
    sample_action,
    save_checkpoint,
)
from .trpo import (
    TrajectoryBatch,
    TrainResult,
    TrpoConfig,
    collect_rollouts,
    conjugate_gradient,
    discounted_returns,
    fisher_vector_product,
    fit_baseline,
    surrogate,
    surrogate_grad,
    train,
    trpo_update,
)
from .evaluation import (
    CycleSpec,
    EvalProtocol,
    SweepSpec,
    dump_trajectory,
    evaluate,
    friction_sweep,
    target_cycle,
)
from .config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    config_to_dict,
    default_config,
    default_friction,
    load_config,
    tool1,
    tool2,
)

__version__ = "0.1.0"
