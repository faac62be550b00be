from .env import GateEnv, run_episode
from .gae import LengthMismatch, compute_gae
from .reward import RewardConfig, RewardContext, barrier, base_reward, compute_reward, reference_gate, shaping_weight
from .train import EvalResult, TrainResult, evaluate, train
from .update import (
    Adam,
    NonFiniteLoss,
    PPOHyperparams,
    RolloutBuffer,
    UpdateStats,
    clip_grad_norm,
    global_norm,
    ppo_loss,
    ppo_update,
)
