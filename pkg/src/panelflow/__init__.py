"""panelflow: clamped von Karman plate coupled to subsonic potential flow,
reduced to a plate equation with aerodynamic memory."""

__version__ = "0.1.0"

from .aero import (AeroConfig, HistoryBuffer, QuadratureSpec, escape_time,
                   q_eval, q_static)
from .diagnostics import EnergyReport, LyapunovWeights, ProbeReport
from .equilibria import (buckling_critical_load, continuation_sweep,
                         newton_solve, stationary_residual)
from .flowrecon import (FlowSampleSet, flow_energy_box, reconstruct,
                        reconstruct_box, trace_material_derivative)
from .grid import GridSpec
from .integrate import (InstabilityError, PhysParams, PlateState, SimConfig,
                        Stepper, Trajectory, pde_residual, simulate)
from .vonkarman import (AirySolution, LoadSet, airy_solve, fv,
                        fv_jacobian_apply, potential_energy, vk_bracket,
                        zero_loads)

__all__ = [name for name in dir() if not name.startswith("_")]
