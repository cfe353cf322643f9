"""Mixed finite elements for the coupled poroelastic / reaction-diffusion system in 2D."""

from .analysis import dominant_wavelength, integral, spatial_std
from .assembly import element_geometry, local_forms
from .forms import assemble_forms
from .mesh import Mesh, disk_mesh, read_mesh, rectangle_mesh, write_mesh
from .physics import ActiveLaw, FibreField, LinearRamp, PatchTraction, Physics
from .scenario import Domain, Scenario, ScenarioResult, preset, run_scenario
from .solver import CoupledSolver, FemState, StepReport
from .spaces import DofMap, build_spaces

__all__ = [
    "ActiveLaw", "CoupledSolver", "DofMap", "Domain", "FemState", "FibreField", "LinearRamp", "Mesh",
    "PatchTraction", "Physics", "Scenario", "ScenarioResult", "StepReport", "assemble_forms", "build_spaces",
    "disk_mesh", "dominant_wavelength", "element_geometry", "integral", "local_forms", "preset", "read_mesh",
    "rectangle_mesh", "run_scenario", "spatial_std", "write_mesh",
]
