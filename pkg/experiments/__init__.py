"""
实验模块
compare / domain / noise 三个实验及其汇总、绘图
"""

from .compare import run_compare
from .domain import run_domain
from .noise import run_noise
from .plotting import regenerate_plots
from .runner import ExperimentCheck, ExperimentResult

__all__ = ["ExperimentCheck", "ExperimentResult", "regenerate_plots", "run_compare", "run_domain", "run_noise"]
