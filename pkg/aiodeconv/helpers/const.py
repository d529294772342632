"""AIODeconv constants."""

from enum import Enum

TOOL_VERSION = "26.10.0"


class LossName(Enum):
    """Loss function Enum."""

    L2 = "l2"
    L1 = "l1"
    HUBER = "huber"
    EPS = "eps"


class Enforcement(Enum):
    """Constraint enforcement Enum."""

    IMPLICIT = "implicit"
    EXPLICIT = "explicit"


class RegularizerName(Enum):
    """Regularizer Enum."""

    NONE = "none"
    L2 = "l2"
    L1 = "l1"
    ELASTIC = "elastic"
    GROUP = "group"


class Criterion(Enum):
    """Parameter grid criterion Enum."""

    AUTO = "auto"
    ORACLE_MAD = "oracle_mad"
    RESIDUAL_RMSD = "residual_rmsd"
    LCURVE = "lcurve"


class ViolationCategory(Enum):
    """STO violation category Enum."""

    OK = "ok"
    VIOLATING_REFERENCE = "violating_reference"
    VIOLATING_MIXTURE = "violating_mixture"


class ViolationScope(Enum):
    """STO violation filter scope Enum."""

    PER_SAMPLE = "per_sample"
    ANY_SAMPLE = "any_sample"


class ViolationDrop(Enum):
    """Which violating categories the STO filter drops."""

    BOTH = "both"
    MIXTURE = "mixture"


class RangeMode(Enum):
    """Range filter Enum."""

    NONE = "none"
    FIXED = "fixed"
    ADAPTIVE = "adaptive"


class KneeNormalization(Enum):
    """Knee detection axis scaling Enum."""

    UNIT = "unit"
    NONE = "none"


class MarkerMethod(Enum):
    """Marker selection Enum."""

    NONE = "none"
    ABBAS = "abbas"
    NEWMAN = "newman"
    BALANCED = "balanced"


class PValueCombine(Enum):
    """How the two pairwise marker tests are combined."""

    MAX = "max"
    SECOND = "second"


class ScqGenes(Enum):
    """Genes whose mixture values carry the synthetic SCQ rescale."""

    ALL = "all"
    SHARED = "shared"


class NoiseKind(Enum):
    """Synthetic noise Enum."""

    NONE = "none"
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"
    OUTLIER = "outlier"


# SOLVER
MAX_ITERS = 10000
OBJECTIVE_TOL = 1e-9
FEASIBILITY_TOL = 1e-9
STO_TOL = 1e-9
PERCENT_TOL = 1e-6
RIDGE_JITTER = 1e-8
PARAM_GRID = tuple(10.0**exponent for exponent in range(-7, 8))
DEFAULT_HUBER_M = 1.0
DEFAULT_EPSILON = 0.5
CLARABEL_TOLERANCES = {
    "tol_gap_abs": 1e-10,
    "tol_gap_rel": 1e-10,
    "tol_feas": 1e-10,
}

# FILTERS
LOG2_LO = 3.0
LOG2_HI = 12.0
RANGE_SWEEP_HI = tuple(float(exponent) for exponent in range(5, 17))
MIN_KNEE_POINTS = 3
KNEE_TIE_TOL = 1e-12

# MARKERS
Q_CUT = 1e-3
Q_CUT_AFTER_RANGE = 1e-5
Q_CUT_AUTO = "auto"
STEP_CAP = 1000
SINGULAR_CUTOFF = 1e-12

# EVALUATION
BASELINE_SAMPLES = 10000
BASELINE_CHUNK = 1000
QC_THRESHOLD = 3.0
KENDALL_EXACT_MAX = 10

# SYNTHETIC DATA
LEAKAGE = 0.01
BACKGROUND_JITTER = 0.1
EXPRESSION_LOG2_RANGE = (4.0, 12.0)

# LOSS CURVE (M=1, eps=1/2 as in the usual comparison plot)
LOSS_CURVE_LIMIT = 3.0
LOSS_CURVE_STEP = 0.05

# TSV SCHEMA
GENE = "gene"
COLUMN = "column"
CELLTYPE = "celltype"
CONFIG_ID = "config_id"
SAMPLE = "sample"

METRICS_COLUMNS = [
    CONFIG_ID,
    "loss",
    "nn",
    "sto",
    "regularizer",
    "lambda",
    "mad",
    "rmsd",
    "r2d",
    "p_mad",
    "p_rmsd",
    "p_r2d",
    "n_genes_used",
    "error",
]

# OUTPUT FILES
CONCENTRATIONS_FILE = "concentrations.tsv"
METRICS_FILE = "metrics.tsv"
PER_SAMPLE_FILE = "per_sample.tsv"
FILTER_REPORT_FILE = "filter_report.tsv"
CONDITION_CURVE_FILE = "condition_curve.tsv"
SORTED_EXPRESSION_FILE = "sorted_expression.tsv"
RANGE_SWEEP_FILE = "range_sweep.tsv"
AGREEMENT_FILE = "agreement.tsv"
LOSS_CURVE_FILE = "loss_curve.tsv"
MARKER_SCORES_FILE = "marker_scores.tsv"
MASKS_FILE = "masks.tsv"
EVAL_FILE = "eval.tsv"
MANIFEST_FILE = "manifest.txt"
MIXTURE_FILE = "mixture.tsv"
REFERENCE_FILE = "reference.tsv"
REPLICATES_FILE = "replicates.tsv"
REPLICATE_MAP_FILE = "replicate_map.tsv"
TRUTH_FILE = "truth.tsv"

# EXIT CODES
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3

# SETTINGS (string values, as they appear in a settings file)
DATASET = "dataset"
FILTERS = "filters"
MARKERS = "markers"
SOLVER = "solver"
EVAL = "eval"
OUTPUT = "output"

LAMBDA_GRID = "grid"

DEFAULT_SETTINGS: dict[str, dict[str, str]] = {
    DATASET: {
        "mixture": "",
        "reference": "",
        "replicates": "",
        "truth": "",
    },
    FILTERS: {
        "sto_violation": "off",
        "sto_scope": ViolationScope.PER_SAMPLE.value,
        "sto_categories": ViolationDrop.BOTH.value,
        "range": RangeMode.NONE.value,
        "range_lo": format(LOG2_LO, "g"),
        "range_hi": format(LOG2_HI, "g"),
        "range_normalization": KneeNormalization.UNIT.value,
    },
    MARKERS: {
        "method": MarkerMethod.NONE.value,
        "q_cut": "1e-3",
        "step_cap": str(STEP_CAP),
        "combine": PValueCombine.MAX.value,
    },
    SOLVER: {
        "losses": "l2,l1,huber,eps",
        "nn_modes": "implicit,explicit",
        "sto_modes": "implicit,explicit",
        "huber_m": "1.0",
        "epsilon": "0.5",
        "param_search": "on",
        "regularizer": RegularizerName.NONE.value,
        "lambda": "0",
        "alpha": "0.5",
        "groups": "",
        "criterion": Criterion.AUTO.value,
        "max_iters": str(MAX_ITERS),
    },
    EVAL: {
        "samples": str(BASELINE_SAMPLES),
        "seed": "0",
        "qc_threshold": str(QC_THRESHOLD),
    },
    OUTPUT: {
        "directory": "results",
        "workers": "1",
    },
}

SETTING_KEYS = {
    section: tuple(keys) for section, keys in DEFAULT_SETTINGS.items()
}

ON_VALUES = ("on", "true", "yes", "1")
OFF_VALUES = ("off", "false", "no", "0")
