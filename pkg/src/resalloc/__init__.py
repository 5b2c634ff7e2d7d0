"""Index policies for multi-pool resource allocation with restless-bandit relaxations."""

from .model import (SystemModel, ScenarioError, build_model, load_scenario,
                    serialize, state_space_size, classify_rows, weak_coupling_check)

__version__ = "0.1.0"

__all__ = ["SystemModel", "ScenarioError", "build_model", "load_scenario", "serialize",
           "state_space_size", "classify_rows", "weak_coupling_check"]
