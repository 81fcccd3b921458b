"""Dislocation line-tension, relaxation cell problems and phase-field energies."""

__version__ = "0.1.0"

from .cell import (PeriodicNetworkTopology, PsiInfinity, ZigzagConfig, g_upper,
                   grid_energy, grid_topology, periodic_network_optimize,
                   zigzag_energy, zigzag_optimize, zigzag_threshold, zigzag_topology)
from .errors import (DeskScaleError, DislocnetError, DomainError, InadmissibleKernelError,
                     InfeasibleTopologyError, InvalidDensityError, InvalidNetworkError,
                     OutOfSpanError, ResolutionError)
from .kernel import (KernelOnCircle, MaterialCubic, fourier_symbol, gamma_cubic,
                     kernel_positivity, spectral_multiplier)
from .limit import (PiecewiseAffineSlip, SlipBasis, basis_transform, limit_energy,
                    network_bulk_energy, self_energy)
from .linetension import (DislocationNetwork, Psi0, check_frank, network_line_energy,
                          psi0_cubic, psi0_quadrature)
from .phasefield import (PhaseFieldConfig, TorusGrid, build_regularized_dipole,
                         build_sharp_dipole, elastic_energy_spectral, minimize_energy,
                         near_far_split, peierls_energy, scaling_fit, total_energy)
from .relax import facet_envelope, psi_infinity, psi_rel_upper, split_search
