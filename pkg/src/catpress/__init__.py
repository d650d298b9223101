"""Compression toolkit for image-to-image generators.

Three pieces work together: a teacher built from six-branch mixed-operation
residual blocks, one-step budget-constrained channel pruning driven by
normalization scale magnitudes, and feature distillation that maximizes the
kernel-alignment similarity between teacher and student activations.
"""

from .align import FeatureMatrix, ka, ka_grad, ka_gram, ka_naive
from .arch import (
    Activation,
    Branch,
    Conv,
    DepthwiseConv,
    GeneratorArch,
    IncResBlock,
    Norm,
    PlainResBlock,
    ResidualAdd,
    TransposedConv,
    arch_hash,
    build_resnet_template,
    deserialize,
    load_arch,
    save_arch,
    serialize,
    validate,
)
from .engine import Adam, Tape, Var, sgd_adam_step
from .errors import (
    ArchHashMismatch,
    BatchMismatch,
    BudgetInfeasible,
    CatpressError,
    ChannelUnderflow,
    DegenerateInput,
    DivergenceError,
    NoPrunableNorms,
    ParseError,
    SchemaError,
    ShapeError,
    TapMismatch,
    TapeConsumed,
)
from .macs import CostBreakdown, arch_macs, layer_macs
from .pruning import (
    PruneBudget,
    PruneResult,
    apply_threshold,
    collect_scales,
    prune,
    search_threshold,
)
from .runtime import ExecModel, init_params, load_checkpoint, save_checkpoint
from .tasks import SyntheticTask, synth_pair
from .training import (
    KDConfig,
    LossWeights,
    TrainReport,
    adv_loss,
    default_tap_points,
    desk_task,
    desk_teacher_arch,
    dist_loss,
    evaluate,
    evaluate_model,
    train_student,
    train_teacher,
)
from .verify import oracle_ka, oracle_macs, oracle_threshold, run_verify

__version__ = "0.1.0"
