"""
Pipeline agents for BENET
Dataset manufacture, mask estimation, dereverberation and experiments
"""

from .dataset_agent import DatasetAgent, clip_plan, generate_training_data, training_plan
from .dereverb_agent import DereverbAgent, dereverberate, product_mask
from .experiment_agent import ExperimentAgent, run_experiment
from .ild_agent import IldMaskAgent, LevelUNet, build_net, predict_ild_mask, train
from .ipd_agent import IpdMaskAgent, run_mle

__all__ = [
    "DatasetAgent",
    "DereverbAgent",
    "ExperimentAgent",
    "IldMaskAgent",
    "IpdMaskAgent",
    "LevelUNet",
    "build_net",
    "clip_plan",
    "dereverberate",
    "generate_training_data",
    "predict_ild_mask",
    "product_mask",
    "run_experiment",
    "run_mle",
    "train",
    "training_plan",
]
