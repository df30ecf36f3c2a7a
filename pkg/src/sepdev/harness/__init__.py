"""Ensembles, importance sampling, export and the command-line interface."""
from .config import RunConfig
from .ensemble import EnsembleStats, run_ensemble
from .importance import (AlwaysEvent, FieldEvent, ISEstimate, ThresholdEvent, estimate_event,
                         mdp_curve)
from .io import export, load_stats

__all__ = ["RunConfig", "EnsembleStats", "run_ensemble", "FieldEvent", "ThresholdEvent",
           "AlwaysEvent", "ISEstimate", "estimate_event", "mdp_curve", "export", "load_stats"]
