# Code version echoed into run manifests
CODE_VERSION = "1.0.0"

# Grid (default reproduction box)
DEFAULT_HALF_WIDTH = 16.0
DEFAULT_N_POINTS = 4096
MIN_N_POINTS = 8

# Stepping
DEFAULT_SCHEME = "rk4_spectral"
SCHEMES = ("euler_upwind", "rk4_spectral")
DEFAULT_CFL_SAFETY = 0.5
DEFAULT_BLOWUP_FACTOR = 1000.0
DEFAULT_DT_MIN = 1e-10
DEFAULT_MAX_STEPS = 2_000_000
SPEED_EPSILON = 1e-12  # zero-velocity guard in the CFL step
GROWTH_WINDOW = 3      # steps of monotone ||n|| growth that mark a non-finite step as blow-up
SIGN_TOLERANCE = 1e-3  # sign-definite data may dip below zero by this fraction of ||v||_inf
KINK_FLOOR = 1e-3      # kinks are only sought where |v| exceeds this fraction of ||v||_inf

# Smooth spectral filter on the quadratic products: exp(-strength * (k / k_Nyquist)^order)
FILTER_STRENGTH = 36.0
FILTER_ORDER = 36

# Kernel periodization cut-off (relative to the kernel value at zero)
IMAGE_SUM_TOLERANCE = 1e-16

# Outputs
DIAGNOSTICS_FILE = "diagnostics.csv"
SNAPSHOT_DIR = "snapshots"
SNAPSHOT_TEMPLATE = "snapshot_{:04d}.csv"
MANIFEST_FILE = "manifest.txt"
REPORT_FILE = "blowup_report.txt"
SUMMARY_FILE = "summary.csv"
LOG_FILE = "peakon_lab.log"
DEFAULT_OUT_DIR = "runs"
OUT_DIR_ENV = "PEAKON_OUT_DIR"

DIAGNOSTICS_COLUMNS = [
    "t", "linf_n", "linf_n_char", "int_linf_n", "w1inf_v", "h1beta_sq", "min_n", "cfl_number", "crest_x", "mass_n",
]
SNAPSHOT_COLUMNS = ["x", "v", "n"]
