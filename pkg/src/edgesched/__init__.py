"""Learned task offloading for multi-server mobile edge computing.

The package splits into a physical layer (scenarios, channels, the convex
resource allocator), a learning stack (manual-backprop networks, the channel
autoencoder, prioritized replay, the scheduling agent) and an evaluation
layer (adaptive annealing search, baselines, swarm oracle, experiment
drivers).
"""

from .agent import (AgentConfig, EpochLog, RunResult, SeedBundle, decide,
                    policy_loss, policy_loss_grads, run, train_step)
from .allocator import (Allocation, Evaluator, allocate_frequencies,
                        allocate_frequencies_oracle, evaluate, local_capacity,
                        max_power_assignment)
from .annealing import (AnnealConfig, BudgetState, SearchResult, adapt_budget,
                        mutate, random_search, search)
from .autoencoder import (AutoencoderConfig, ChannelCompressor, EncodedState,
                          Rasterizer, SampleMemory, compression_ratio,
                          default_dims, reconstruction_accuracy,
                          reconstruction_error)
from .bench import (BenchReport, PsoConfig, StrategyStats, exhaustive_best,
                    greedy_baseline, nrr, pso_oracle, random_baseline,
                    run_benchmark)
from .config import (ExperimentConfig, ScenarioConfig, build_scenario,
                     dump_scenario, load_config, load_scenario)
from .experiment import (bench_experiment, dynamic_experiment,
                         train_experiment)
from .mec import (ChannelState, MecSpec, OffloadDecision, RadioParams,
                  Scenario, Task, UeSpec, channel_gain, data_rate,
                  random_scenario, reweighted, sample_channel_state,
                  weighted_latency)
from .neural import (Adam, LayerSpec, Network, load_checkpoint, mlp_specs,
                     save_checkpoint, sgd_step)
from .replay import ReplayBuffer, ReplayConfig, Transition, dissimilarity

__version__ = "0.1.0"

__all__ = [
    "Adam", "AgentConfig", "Allocation", "AnnealConfig", "AutoencoderConfig",
    "BenchReport", "BudgetState", "ChannelCompressor", "ChannelState",
    "EncodedState", "EpochLog", "Evaluator", "ExperimentConfig", "LayerSpec",
    "MecSpec", "Network", "OffloadDecision", "PsoConfig", "RadioParams",
    "Rasterizer", "ReplayBuffer", "ReplayConfig", "RunResult", "SampleMemory",
    "Scenario", "ScenarioConfig", "SearchResult", "SeedBundle",
    "StrategyStats", "Task", "Transition", "UeSpec", "adapt_budget",
    "allocate_frequencies", "allocate_frequencies_oracle", "bench_experiment",
    "build_scenario", "channel_gain", "compression_ratio", "data_rate",
    "decide", "default_dims", "dissimilarity", "dump_scenario",
    "dynamic_experiment", "evaluate", "exhaustive_best", "greedy_baseline",
    "load_checkpoint", "load_config", "load_scenario", "local_capacity",
    "max_power_assignment", "mlp_specs", "mutate", "nrr", "policy_loss",
    "policy_loss_grads", "pso_oracle", "random_baseline", "random_scenario",
    "random_search", "reconstruction_accuracy", "reconstruction_error",
    "reweighted", "run", "run_benchmark", "sample_channel_state",
    "save_checkpoint", "search", "sgd_step", "train_experiment", "train_step",
    "weighted_latency",
]
