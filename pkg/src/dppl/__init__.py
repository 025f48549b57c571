"""Link scheduling with learned determinantal point processes.

Modules
-------
numerics     LU log-determinants, solves, symmetric eigendecomposition
dpp          L-ensembles: probabilities, exact samplers, MAP inference
network      ad-hoc (D2D) and drone-cellular instance generators, SINR
schedulers   GP successive approximation, brute force, independent thinning
model        conditional DPP families, likelihood, gradient, training
experiment   dataset/solve/train/eval/bench pipeline behind the CLI
"""
from .dpp import KernelEnsemble, build_kernel, map_infer, sample
from .model import ModelParams, TrainingSample, infer, train
from .network import AdHocConfig, DroneCellConfig, NetworkInstance, generate, sum_rate
from .schedulers import GpConfig, brute_force_schedule, gp_schedule

__all__ = [
    "AdHocConfig", "DroneCellConfig", "GpConfig", "KernelEnsemble", "ModelParams",
    "NetworkInstance", "TrainingSample", "brute_force_schedule", "build_kernel", "generate",
    "gp_schedule", "infer", "map_infer", "sample", "sum_rate", "train",
]
