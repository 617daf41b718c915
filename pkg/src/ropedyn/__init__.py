"""Contrastive learning of rope dynamics: representations, forward/inverse
models, MPC planning, and imitation from observation, on a self-contained 2D
pick-and-place rope environment."""

from .autodiff import Tape
from .env import EnvConfig
from .models import ModelBundle, init_bundle
from .training import TrainConfig, train
from .data import Dataset, collect_dataset, load_dataset, save_dataset
from .checkpoint import load_checkpoint, save_checkpoint
from .control import PlanConfig, Demo, EpisodeRecord
from .harness import Method, SuiteConfig, evaluate
from .metrics import geom_error, success

__all__ = [
    "Tape", "EnvConfig", "ModelBundle", "init_bundle", "TrainConfig", "train",
    "Dataset", "collect_dataset", "load_dataset", "save_dataset",
    "load_checkpoint", "save_checkpoint", "PlanConfig", "Demo", "EpisodeRecord",
    "Method", "SuiteConfig", "evaluate", "geom_error", "success",
]
