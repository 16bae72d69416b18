from .ode import DensityField, OdeState, assemble_eps_g, init_density_fields, ode_step, run_ode
from .records import load_record, record_to_frame, save_record
from .sgd import average_runs, dynamic_error, run_sgd, sgd_step
from .spectral import SpectralGrid, build_spectral_grid, mp_density, mp_support, spectral_density_gap
