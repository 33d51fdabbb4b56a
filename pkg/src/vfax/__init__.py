"""Vortex filament dynamics with axial flow on the half-line.

Simulator and verification harness for the regularized tangent-field
systems with sign-dependent boundary conditions, compatibility-condition
machinery, invariant/energy diagnostics, delta-continuation, and a
curvature-torsion cross-check against the associated complex evolution
equation.
"""

from .core import (CompatibilityOrder, CompatibilityReport, DiagnosticsRecord,
                   Field3, GridSpec, Regime, SimParams, E3,
                   inner_product, l2_norm, sup_norm_unit_drift)
from .operators import (DerivativeOp, diff, linearized_rhs, rhs_v_original,
                        rhs_v_transformed, rhs_x_integrand)
from .compatibility import (CorrectionResult, RecursionConfig, check_compatibility,
                            compute_P, compute_Q, correct_datum, frechet,
                            verify_inner_identity, verify_remain_expansion)
from .timestepper import (ContinuationResult, RunConfig, RunResult, SimState,
                          delta_continuation, enforce_boundary, reconstruct_x,
                          run, stable_dt, step)
from .diagnostics import (IdentityCheckSpec, comparison_envelope, energy_E2,
                          identity_residual, modified_E3_pos, record)
from .hasimoto import (ComplexField, HelixFamily, hasimoto_transform,
                       helix_reference, hirota_residual, plane_wave,
                       plane_wave_frequency)
from .cli_io import (cli_main, load_initial_condition, load_snapshot,
                     read_diagnostics_csv, write_diagnostics_csv, write_snapshot)

__version__ = "0.1.0"
