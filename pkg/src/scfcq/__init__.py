"""Sequential control-function censored quantile regression."""

from .basis import BasisSpec
from .estimator import CoefficientPath, Dataset, ScfcqConfig, estimate_path, trim
from .first_stage import FirstStageConfig, fit_control
from .inference import BootstrapConfig, bootstrap_path
from .quantile_core import rq, solve

__version__ = "0.1.0"
