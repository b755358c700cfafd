"""Application-wide constants."""
from typing import Dict, Tuple

# Numerical clamps
LOG_EPS = 1e-12  # ln(max(x, LOG_EPS)); gives the 0*log 0 = 0 convention
TI_EPS = 1e-8  # added inside the log inner product of the TI term
NORMALIZATION_TOL = 1e-6  # accepted |sum - 1| for a probability table

# Joint estimation
MAX_JOINT_ORDER = 4

# Default block layout
DEFAULT_NUM_VARIABLES = 8
DEFAULT_UNITS_PER_VARIABLE = 8

# Default architecture (desk scale)
DEFAULT_ENCODER_HIDDEN: Tuple[int, ...] = (64, 64)
DEFAULT_REPRESENTATION_DIM = 64
DEFAULT_PROJECTOR_HIDDEN: Tuple[int, ...] = (128,)

# Default training hyperparameters
DEFAULT_EPOCHS = 200
DEFAULT_BATCH_SIZE = 256
DEFAULT_BASE_LR = 1e-3
DEFAULT_WARMUP_EPOCHS = 10
DEFAULT_FINAL_LR = 1e-5
DEFAULT_WEIGHT_DECAY = 1e-6
DEFAULT_MOMENTUM = 0.9
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_LAMBDA = 1.0
DEFAULT_BETA = 1.0
DEFAULT_CHECKPOINT_EVERY = 10
DEFAULT_MONITOR_SIZE = 1024

# Default synthetic world; one attribute per default code variable
DEFAULT_NUM_ATTRIBUTES = 8
DEFAULT_VALUES_PER_ATTRIBUTE = 8
DEFAULT_AMBIENT_DIM = 64
DEFAULT_NOISE_SIGMA = 0.05
# Input-space scale of the first attribute relative to the others
DEFAULT_FIRST_ATTRIBUTE_SALIENCE = 0.5
DEFAULT_TRAIN_SIZE = 8192
DEFAULT_TEST_SIZE = 2048

# Default augmentation policy
DEFAULT_AUG_SIGMA = 0.1
DEFAULT_AUG_DROPOUT = 0.2
DEFAULT_AUG_SCALE = 0.1

# Evaluation
ONEHOT_THRESHOLDS: Tuple[float, float] = (0.9, 0.99)
DEFAULT_KNN_K = 20
PROBE_ITERATIONS = 500
PROBE_LR = 0.1
# Share of blocks above 0.9 reported on ImageNet at full scale; reference only.
REFERENCE_ONEHOT_FRACTION = 0.9118

# IDX format
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# Checkpoint container
CHECKPOINT_MAGIC = b"IMSVD001"
PARAMS_FILENAME = "params.bin"
OPTIMIZER_FILENAME = "optimizer.bin"
MANIFEST_FILENAME = "manifest.txt"
METRICS_FILENAME = "metrics.jsonl"

# CLI spellings of loss variants
VARIANT_ALIASES: Dict[str, str] = {
    "full": "full",
    "de-oe-ti": "full",
    "de-oe": "de-oe",
    "oe-ti": "oe-ti",
    "de-oe-tic": "de-oe-tic",
    "ti": "ti",
}

# Exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Error messages
ERROR_SHAPE_MISMATCH = "{op}: shape mismatch {left} vs {right}"
ERROR_NON_FINITE = "{op}: non-finite values in input"
ERROR_EMPTY_BATCH = "{op}: batch is empty"
