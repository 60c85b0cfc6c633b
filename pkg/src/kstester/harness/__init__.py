"""Experiment runner, CLI and report figures."""

from .runner import ExperimentPlan, TrialReport, memory_report, run_experiment

__all__ = ["ExperimentPlan", "TrialReport", "memory_report", "run_experiment"]
