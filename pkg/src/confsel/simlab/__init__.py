"""Simulation scenarios, method pipelines and Monte-Carlo replication."""

from .scenarios import (SCENARIOS, ScenarioError, ScenarioSpec, SimData, generate_scenario,
                        s1_cdf, s2_mean, s2_variance, s3_acceptance, s4_acceptance)
from .methods import (PRESETS, FitCache, MethodError, MethodSpec, causal_methods, highdim_methods,
                      run_method, scenario1_methods, scenario3_methods, scenario4_methods)
from .runner import ReplicationSummary, evaluate_selection, replication_rng, run_replications
