# Shared constants for the lab

# --- Experiment defaults (desk scale) ---
DESK_PROFILE = {
    "N": 1024,
    "delta": 0.5,
    "K": 2,
    "M": 2,
    "eta": 0.2,
    "activation": "relu",
    "teacher_activation": "relu",
    "feature_fn": "tanh",
}

# Full-scale runs, same D/N ratio
FULL_PROFILE = {**DESK_PROFILE, "N": 4096}

PROFILES = {"desk": DESK_PROFILE, "full": FULL_PROFILE}

STEPS_PER_N = 10  # total SGD steps = 10 * N
SNAPSHOTS_PER_RUN = 200  # stride = N / 20 over 10 * N steps
DEFAULT_P_EVAL = 10_000
MIN_P_EVAL = 1_000

DEFAULT_DT = 0.01
DEFAULT_T_END = 10.0
DEFAULT_N_BINS = 64
MIN_N_BINS = 16

DEFAULT_TAU_STEPS = 1000
BASELINE_REPEATS = 20
THIRD_MOMENT_REPLICATES = 8
DEFAULT_SGD_SEEDS = (1, 2, 3, 4, 5)

# --- Sampling ---
CHUNK_ROWS = 4096
PILOT_ROWS = 100_000
PILOT_SEED_OFFSET = 7_919
SIGMA_FLOOR = 1e-3  # lower end of the std-dev draw range
MAX_PD_ATTEMPTS = 200

# Block-mixture parameter ranges used when drawing a spec
BLOCK_RANGES = {
    "alpha": 1.0,
    "beta": 2.0,
    "delta_max": 1.0,
    "rho_low": -0.3,
    "rho_high": 0.9,
    "tau_max": 0.5,
}

# --- Numerics ---
PSD_FLOOR = 1e-12
PSD_TOLERANCE = 1e-8
DENOMINATOR_FLOOR = 1e-12
DEFAULT_QUADRATURE_ORDER = 64
MIN_QUADRATURE_ORDER = 20
I4_TOLERANCE = 1e-7
I4_MAX_REFINEMENTS = 4

# Mid-range window for KS and residual slope fits
MID_RANGE_WINDOW = (2.0 ** -7, 2.0 ** -2)

# --- Named scalar laws ---
NAMED_LAWS = {
    "uniform": {"law": "uniform", "params": {"a": 0.0, "b": 10.0}},
    "beta1": {"law": "beta", "params": {"a": 0.5, "b": 0.5}},
    "beta2": {"law": "beta", "params": {"a": 5.0, "b": 1.0}},
    "poisson": {"law": "poisson", "params": {"lam": 2.0}},
    "laplace": {"law": "laplace", "params": {"loc": 0.0, "scale": 1.0}},
    "pareto": {"law": "pareto", "params": {"alpha": 5.0}},
    "lorentz": {"law": "lorentz", "params": {"x0": 0.0, "gamma": 1.0}},
    "gaussian": {"law": "gaussian", "params": {"loc": 0.0, "scale": 1.0}},
    "gaussian_mixture": {
        "law": "gaussian_mixture",
        "params": {"w0": 0.3, "w1": 0.7, "mu_low": -2.0, "mu_high": 2.0, "sigma_low": 0.5, "sigma_high": 5.0},
    },
}

# --- CLI exit codes ---
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_IO = 4

CSV_FLOAT_FORMAT = "%.17g"
