"""Consensus-based distributed training of LSTM load forecasters."""

from .data import (DailyRecord, Normalizer, Shard, build_samples, fit_normalizer, gen_synthetic,
                   parse_series, shard_dataset)
from .graph import (GraphTopology, build_topology, contraction_factor, is_connected, laplacian,
                    metropolis_weights, named_topology)
from .lstm import (CellState, LstmParams, SequenceSample, backward_bptt, cell_forward,
                   empirical_loss, init_params, predict)
from .metrics import EvalReport, evaluate
from .numerics import finite_difference_gradient, pack_params, unpack_params
from .trainer import (AgentState, TrainConfig, TrainReport, TrainingDivergence, consensus_round,
                      disagreement, local_gradient_step, train, train_cbl, train_centralized,
                      train_lbc)

__version__ = "0.1.0"
