from .model import ForwardPass, forward, init_gaussian, measure_order_params, outputs, project_inputs
from .storage import load_state, save_state
