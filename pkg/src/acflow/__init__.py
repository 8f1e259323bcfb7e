"""Equivariant vector Allen-Cahn minimizers on balls under finite reflection groups."""

from .comparison import RadialProfile, assemble_sigma, phi2_profile, solve_phi1, theta_profile
from .coxeter import (OrbitInfo, Reflection, ReflectionGroup, generate_group,
                      orbit_and_stabilizer, reflect, region_geometry)
from .field import (BallGrid, ScalarField, VectorField, build_grid, energy,
                    laplacian, load_field_csv, project_to_ball, save_field_csv,
                    seed_affine, symmetrize)
from .flow import FlowConfig, FlowResult, run_to_equilibrium, step
from .potential import (PotentialSpec, QSpec, check_hypotheses, eval_potential,
                        eval_q, make_custom_potential, make_q_spec,
                        make_triangle_potential)
from .verify import (DiagnosticsReport, comparison_ordering_check, decay_fit,
                     energy_scaling_sweep, kato_check, measure_and_degiorgi,
                     positivity_check, subharmonic_check)

__version__ = "0.1.0"
