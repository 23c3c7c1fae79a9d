"""Learning agents (DGN, distributed and centralized MADQN) and the PQ baseline."""

from .dgn import DgnAgent, DgnConfig, dgn_forward, dgn_loss, dgn_targets, dgn_train_step, init_dgn
from .dqn import CentralizedDqn, DistributedDqn, DqnConfig, dqn_forward, dqn_loss, dqn_train_step, hard_sync
from .policies import (
    POLICIES,
    CentralizedDqnPolicy,
    DgnPolicy,
    DistributedDqnPolicy,
    Policy,
    PqPolicy,
    centralized_step,
    epsilon_schedule,
    make_policy,
    select_action,
)
from .replay import Batch, Experience, ReplayBuffer
from .training import TrainConfig, TrainResult, train

__all__ = [
    "Batch",
    "CentralizedDqn",
    "CentralizedDqnPolicy",
    "DgnAgent",
    "DgnConfig",
    "DgnPolicy",
    "DistributedDqn",
    "DistributedDqnPolicy",
    "DqnConfig",
    "Experience",
    "POLICIES",
    "Policy",
    "PqPolicy",
    "ReplayBuffer",
    "TrainConfig",
    "TrainResult",
    "centralized_step",
    "dgn_forward",
    "dgn_loss",
    "dgn_targets",
    "dgn_train_step",
    "dqn_forward",
    "dqn_loss",
    "dqn_train_step",
    "epsilon_schedule",
    "hard_sync",
    "init_dgn",
    "make_policy",
    "select_action",
    "train",
]
