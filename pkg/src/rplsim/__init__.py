"""Discrete-event simulator of RPL under DAO replay flooding, with DAO admission defenses."""

from .defense import DaoVerdict, DefenseMode
from .network import Network, run_once
from .scenario import Scenario, load_scenario, parse_scenario

__all__ = ["DaoVerdict", "DefenseMode", "Network", "Scenario", "load_scenario",
           "parse_scenario", "run_once"]
