"""Multi-level out-of-distribution detection.

Routes each input to one of k classifier exits by its compressed-size
complexity, scores it there with an energy-family OOD score, and accepts
or rejects against a single calibrated threshold. Includes greedy,
randomized, and constant-exit baselines plus an evaluation harness
(AUROC, FPR at fixed TPR, ID accuracy, expected FLOPs).
"""

from .complexity import (
    CodecId,
    ComplexityScore,
    ImageBuffer,
    complexity_score,
    compress_bit_length,
    compute_l_max,
    jpeg2000_available,
    normalize_complexity,
    select_exit,
)
from .detector import (
    ConstantStrategy,
    DetectionOutcome,
    GreedyStrategy,
    MoodStrategy,
    RandomizedStrategy,
    SplitMix64,
    calibrate_greedy_gammas,
    constant_detect,
    greedy_detect,
    mood_detect,
    parse_strategy,
    randomized_detect,
)
from .errors import (
    CalibrationError,
    DecodeError,
    InputError,
    MagicError,
    MoodError,
    ParseError,
    SchemaError,
    TruncatedError,
    UnsupportedCodecError,
)
from .exitnet import (
    ExitCostModel,
    ExitNetWeights,
    analytic_cost_model,
    forward_all_exits,
    read_weights,
    write_weights,
)
from .metrics import (
    DEFAULT_FIVE_EXIT_COSTS,
    EvalReport,
    auroc,
    build_report,
    exit_histogram,
    fpr_at_tpr,
    id_accuracy,
    mean_flops,
    report_rows_to_csv,
    report_rows_to_table,
)
from .scoring import (
    CalibrationProfile,
    LogitsRecord,
    ScoreFunctionId,
    adjusted_energy,
    calibrate_energy_means,
    calibrate_profile,
    calibrate_threshold,
    energy,
    msp,
    odin_t,
    score,
)

__version__ = "0.1.0"
