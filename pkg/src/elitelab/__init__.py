"""Elitist black-box optimization lab: problems, operators, the (mu+lambda) game and estimators."""

from .bitstring import BitString, hamming
from .model import ConfigError, ModelMode, PopulationView, RunOutcome, run_game

__version__ = "0.1.0"

__all__ = ["BitString", "ConfigError", "ModelMode", "PopulationView", "RunOutcome", "hamming", "run_game"]
