"""Cell-free massive MIMO pilot design, uplink detection and pilot sensing metrics."""

from . import detection, manifold, metrics, pilots, sensing, sysmodel
from .config import ExperimentSpec, load_config
from .experiments import run_experiment
from .seeding import seed_derivation

__all__ = ["detection", "manifold", "metrics", "pilots", "sensing", "sysmodel",
           "ExperimentSpec", "load_config", "run_experiment", "seed_derivation"]
__version__ = "0.1.0"
