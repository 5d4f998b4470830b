"""Forward-only online learning for spiking networks with synaptic filters (SOLSA).

The package splits into the forward model (:mod:`solsa.dynamics`), the
online learner (:mod:`solsa.learning`), update scheduling and early stop,
a BPTT reference (:mod:`solsa.bptt`), data handling, training and profiling.
"""
from .dynamics import (ConfigurationError, LayerParams, LayerState, NetworkParams, NetworkState,
                       firing_probability, heaviside_fire, init_params, layer_forward_step,
                       membrane_step, network_forward_step, run_forward, surrogate_gradient,
                       synapse_filter_step)
from .learning import (LearnerState, PerStepLoss, SequencingError, accumulate_step, apply_update,
                       eligibility_trace_step, learning_signal_backprop, per_step_loss)
from .schedule import (UpdateSchedule, is_update_point, record_gradient_magnitude,
                       select_update_points)
from .early_stop import EarlyStopState, accuracy_fraction, early_stop_step
from .bptt import UnrollHistory, bptt_gradients, truncated_bptt_gradients, unrolled_forward
from .data import (DataError, Dataset, LabeledSequence, SyntheticTask, encode_input_frame,
                   generate_synthetic, load_dataset, save_dataset)
from .training import RunConfig, RunMetrics, build_update_schedule, evaluate, train
from .profiling import profile_memory, profile_workload

__version__ = "0.1.0"
