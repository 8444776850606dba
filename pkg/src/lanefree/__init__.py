"""Broadcast factor-graph coordination for lane-free traffic.

A library implementing single-iteration max-sum message passing over
broadcast packets (standard, conditional and assignment-only variants),
a lane-free microsimulation environment with dynamic lateral regions,
the traffic factor formulation, a MOBIL baseline, and the scenario,
metrics and CLI tooling to reproduce the coordination experiments.
"""

from .agent import AgentTimingState, AgentView, StepContext, Variant, \
    agent_step, should_update
from .env import (IdmParams, LateralRegion, LateralRegionSet, RoadConfig,
                  VehicleState, build_regions, free_flow_accel, idm_accel,
                  lateral_control, longitudinal_control, pair_accel,
                  predict_arrival, safe_region, step_dynamics)
from .factors import (FactorParams, PairLink, candidate_connections, comfort,
                      form_links, overlap_class, pairwise_factor_value,
                      prune_connections, regret, single_factor_value)
from .messages import (BroadcastPacket, DecisionDomain, FactorNode,
                       PartitionResult, compute_q, compute_r_conditional,
                       compute_r_fixed, compute_r_standard, normalize,
                       partition_variables, select_assignment)
from .metrics import (MetricsReport, ZTestResult, collect_metrics,
                      two_sample_ztest)
from .mobil import MobilParams, RegionEstimate, build_region_estimates, \
    mobil_decide
from .sim import (InflowSpec, ScenarioConfig, Simulation, VehicleSpec,
                  coordination_scenario, load_config, open_highway_scenario,
                  run_scenario, save_config)

__version__ = "0.1.0"
