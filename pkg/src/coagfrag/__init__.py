"""Sectional solver for coagulation with multifragmentation under singular
collision kernels, with certified runtime diagnostics."""

from __future__ import annotations

from .config import (ConvergenceSettings, DiagnosticsSettings, RunConfig,
                     parse_config)
from .convergence import (ProbeReport, TruncationStudy, aligned_window_grid,
                          coarsen_counts, run_truncation_sequence,
                          uniqueness_probe)
from .diagnostics import (DiagnosticsReport, EnvelopeContext, ModulusCheck,
                          SnapshotDiagnostics, build_context, compute_report,
                          kernel_window_bound, moment_envelope,
                          moment_envelope_variant, power_split_constant,
                          suggested_tail_radius, tail_mass, time_modulus,
                          uniform_integrability, weighted_distance,
                          weighted_norm)
from .discretization import (Grid, RhsAssembler, RhsBreakdown, State,
                             assemble_rhs, build_grid, moment)
from .errors import (ConfigError, DomainError, GridError, ModelError,
                     NumericError, QuadratureError, SolverError)
from .integrator import IntegrationStats, Scenario, StepResult, Trajectory, run, step
from .kernels import (BUILTIN_KERNELS, CONSTANT, EKE, PRODUCT, SMOLUCHOWSKI,
                      BreakageCheck, CoagulationKernel, EnvelopeCertificate,
                      EnvelopeReport, FragmentationCertificate,
                      FragmentationModel, PowerLawFragmentation,
                      certify_fragmentation, check_envelope, derive_breakage,
                      derive_selection, eval_kernel, power_law_fragmentation,
                      validate_breakage)
from .oracles import (CertificationReport, ConstantKernelBenchmark,
                      LinearBreakupBenchmark, certify_benchmark,
                      constant_kernel_number)
from .quadrature import GradedRule, gauss_panel, integrate_decaying, integrate_graded
from .scenarios import (constant_kernel_case, default_x_min,
                        exponential_initial, gamma_initial,
                        linear_breakup_case, shipped_scenarios,
                        smoluchowski_powerlaw_case)
from .truncation import (TruncatedKernel, TruncationParams, truncate_initial,
                         truncate_kernel, truncate_selection)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_KERNELS", "BreakageCheck", "CONSTANT", "CertificationReport",
    "CoagulationKernel", "ConfigError", "ConstantKernelBenchmark",
    "ConvergenceSettings", "DiagnosticsReport", "DiagnosticsSettings",
    "DomainError", "EKE", "EnvelopeCertificate", "EnvelopeContext",
    "EnvelopeReport", "FragmentationCertificate", "FragmentationModel",
    "GradedRule", "Grid", "GridError", "IntegrationStats",
    "LinearBreakupBenchmark", "ModelError", "ModulusCheck", "NumericError",
    "PRODUCT", "PowerLawFragmentation", "ProbeReport", "QuadratureError",
    "RhsAssembler", "RhsBreakdown", "RunConfig", "SMOLUCHOWSKI", "Scenario",
    "SnapshotDiagnostics", "SolverError", "State", "StepResult", "Trajectory",
    "TruncatedKernel", "TruncationParams", "TruncationStudy",
    "aligned_window_grid", "assemble_rhs", "build_context", "build_grid",
    "certify_benchmark", "certify_fragmentation", "check_envelope",
    "coarsen_counts", "compute_report", "constant_kernel_case",
    "constant_kernel_number", "default_x_min", "derive_breakage",
    "derive_selection", "eval_kernel", "exponential_initial", "gamma_initial",
    "gauss_panel", "integrate_decaying", "integrate_graded",
    "kernel_window_bound", "linear_breakup_case", "moment", "moment_envelope",
    "moment_envelope_variant", "parse_config", "power_law_fragmentation",
    "power_split_constant", "run", "run_truncation_sequence",
    "shipped_scenarios", "smoluchowski_powerlaw_case", "step",
    "suggested_tail_radius", "tail_mass", "time_modulus", "truncate_initial",
    "truncate_kernel", "truncate_selection", "uniform_integrability",
    "uniqueness_probe", "validate_breakage", "weighted_distance",
    "weighted_norm",
]
