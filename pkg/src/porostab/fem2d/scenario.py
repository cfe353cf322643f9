"""Scenario descriptions, presets and the time loop."""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal, Optional

import numpy as np

from ..model import CalciumParams, ModelParams, steady_state
from . import analysis
from .mesh import GAMMA, NONE, SIGMA, Mesh, disk_mesh, disk_rings_for, read_mesh, rectangle_mesh
from .physics import ActiveLaw, FibreField, LinearRamp, PatchTraction, Physics
from .solver import CoupledSolver, FemState


@dataclass(frozen=True)
class Domain:
    kind: Literal["rectangle", "disk", "file"] = "disk"
    lx: float = 1.0
    ly: float = 0.6
    center: tuple[float, float] = (0.5, 0.5)
    radius: float = 0.5
    n_triangles: int = 16000
    mesh_file: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("rectangle", "disk", "file"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "file" and not self.mesh_file:
            raise ValueError("file domains need mesh_file")
        if self.n_triangles < 2:
            raise ValueError("n_triangles must be at least 2")

    def build(self, bc_mode: str) -> Mesh:
        if self.kind == "file":
            return read_mesh(self.mesh_file)
        if self.kind == "disk":
            tag = NONE if bc_mode == "Robin" else GAMMA
            return disk_mesh(self.center, self.radius, disk_rings_for(self.n_triangles),
                             tagger=lambda mid: np.full(len(mid), tag))
        # square cells of side h: 2 * (lx/h) * (ly/h) = n_triangles
        h = np.sqrt(2.0 * self.lx * self.ly / self.n_triangles)
        nx, ny = max(1, int(round(self.lx / h))), max(1, int(round(self.ly / h)))
        top = self.ly

        def tagger(mid):
            if bc_mode == "Robin":
                return np.full(len(mid), NONE)
            return np.where(np.isclose(mid[:, 1], top), SIGMA, GAMMA)

        return rectangle_mesh(self.lx, self.ly, nx, ny, tagger)


@dataclass(frozen=True)
class Scenario:
    name: str
    params: ModelParams
    domain: Domain
    bc_mode: Literal["ClampedGamma_TractionSigma", "Robin"] = "ClampedGamma_TractionSigma"
    traction: Optional[PatchTraction] = None
    robin_rate: Optional[float] = None
    active: ActiveLaw = ActiveLaw()
    fibre: FibreField = FibreField()
    kinetics: Literal["schnackenberg", "calcium"] = "schnackenberg"
    calcium: Optional[CalciumParams] = None
    dt: float = 0.005
    t_final: float = 1.5
    perturbation: float = 1e-3
    seed: int = 0
    output_stride: int = 10
    probe_points: tuple = ((0.5, 0.5),)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.output_stride < 1:
            raise ValueError("output_stride must be at least 1")
        if self.traction is not None and self.bc_mode != "ClampedGamma_TractionSigma":
            raise ValueError("traction needs Sigma edges (ClampedGamma_TractionSigma mode)")
        if self.bc_mode == "Robin" and self.robin_rate is None:
            raise ValueError("Robin mode needs robin_rate")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def physics(self) -> Physics:
        return Physics(
            params=self.params,
            bc_mode=self.bc_mode,
            active=self.active,
            fibre=self.fibre,
            kinetics=self.kinetics,
            calcium=self.calcium,
            traction=self.traction,
            robin_stiffness=LinearRamp(self.robin_rate) if self.robin_rate is not None else None,
        )

    def with_(self, **changes) -> "Scenario":
        from dataclasses import replace

        return replace(self, **changes)


TEST2_PARAMS = ModelParams(gamma=1e-4, tau=100.0, rho=1.0)


def preset(name: str) -> Scenario:
    """Reference set-ups: ``test1`` (periodic traction on a clamped
    rectangle), ``test2`` (clamped disk), ``test3`` (growth with springs),
    ``calcium`` (stress-sensitive calcium exchange on the clamped disk)."""
    radial = FibreField("radial", center=(0.5, 0.5))
    if name == "test1":
        return Scenario(
            name="test1",
            params=TEST2_PARAMS.with_(tau=100.0, gamma=0.05, rho=1.0, k_dir=(1.0, 0.0)),
            domain=Domain("rectangle", lx=1.0, ly=0.6, n_triangles=10000),
            traction=PatchTraction(25000.0, 0.4, 0.6),
            fibre=FibreField("constant", (1.0, 0.0)),
            dt=0.005,
            t_final=1.75,
            probe_points=((0.5, 0.3), (0.25, 0.3), (0.75, 0.3)),
        )
    if name == "test2":
        return Scenario(
            name="test2",
            params=TEST2_PARAMS,
            domain=Domain("disk", n_triangles=64926),
            fibre=radial,
            dt=0.0025,
            t_final=1.5,
            probe_points=((0.5, 0.5), (0.25, 0.5), (0.5, 0.75)),
        )
    if name == "test3":
        return Scenario(
            name="test3",
            params=TEST2_PARAMS.with_(gamma=0.01, tau=2e5),
            domain=Domain("disk", n_triangles=64926),
            bc_mode="Robin",
            robin_rate=0.2,
            active=ActiveLaw("growth", tau2=0.2),
            fibre=radial,
            dt=0.0025,
            t_final=1.25,
            probe_points=((0.5, 0.5), (0.25, 0.5)),
        )
    if name == "calcium":
        return Scenario(
            name="calcium",
            params=TEST2_PARAMS.with_(tau=0.0, gamma=0.0),
            domain=Domain("disk", n_triangles=4000),
            kinetics="calcium",
            calcium=CalciumParams(),
            fibre=radial,
            dt=0.01,
            t_final=1.0,
            perturbation=0.0,
            probe_points=((0.5, 0.5),),
        )
    raise ValueError(f"unknown scenario preset {name!r}")


PRESETS = ("test1", "test2", "test3", "calcium")


def initial_state(solver: CoupledSolver, scenario: Scenario) -> FemState:
    """Rest state: zero displacement and pressures, species at equilibrium
    plus seeded uniform per-vertex noise of the configured amplitude."""
    s = solver.zero_state()
    if scenario.kinetics == "calcium":
        base1 = base2 = (scenario.calcium or CalciumParams()).w0_bath
    else:
        ss = steady_state(scenario.params)
        base1, base2 = ss.w10, ss.w20
    rng = np.random.default_rng(scenario.seed)
    n = len(s.w1)
    a = scenario.perturbation
    s.w1[:] = base1 + a * rng.uniform(-1.0, 1.0, n)
    s.w2[:] = base2 + a * rng.uniform(-1.0, 1.0, n)
    return s


@dataclass
class ScenarioResult:
    scenario: Scenario
    mesh: Mesh
    times: np.ndarray  # output times
    point_w1: np.ndarray  # (n_out, n_points)
    point_w2: np.ndarray
    w2_std: np.ndarray
    psi_min: np.ndarray
    psi_max: np.ndarray
    step_times: np.ndarray  # every step, including t = 0
    mass_w1: np.ndarray
    mass_w2: np.ndarray
    newton_iterations: np.ndarray
    newton_residuals: list
    constraint_residuals: np.ndarray
    final_state: FemState
    snapshots: list = field(default_factory=list)
    wall_time: float = 0.0

    def probe_table(self) -> tuple[list[str], np.ndarray]:
        cols = ["t"]
        cols += [f"w1_p{i}" for i in range(self.point_w1.shape[1])]
        cols += [f"w2_p{i}" for i in range(self.point_w2.shape[1])]
        cols += ["w2_std", "psi_min", "psi_max"]
        data = np.column_stack([self.times, self.point_w1, self.point_w2, self.w2_std, self.psi_min, self.psi_max])
        return cols, data


def run_scenario(
    scenario: Scenario,
    mesh: Mesh | None = None,
    keep_snapshots: bool = False,
    snapshot_writer: Callable[[Mesh, FemState, int], None] | None = None,
    progress: Callable[[int, FemState], None] | None = None,
) -> ScenarioResult:
    """Run the time loop and record probes every ``output_stride`` steps.

    ``snapshot_writer(mesh, state, index)`` is called at each output time;
    the CLI passes a VTK writer.
    """
    start = _time.perf_counter()
    mesh = mesh if mesh is not None else scenario.domain.build(scenario.bc_mode)
    solver = CoupledSolver(mesh, scenario.physics(), scenario.dt)
    located = analysis.locate(mesh, scenario.probe_points)
    weights = analysis.lumped_weights(mesh)
    state = initial_state(solver, scenario)
    prev = None
    out_t, pw1, pw2, std, pmin, pmax, snaps = [], [], [], [], [], [], []
    m1, m2, iters, resid, cons = [], [], [], [], []

    def record(s: FemState, index: int):
        out_t.append(s.time)
        pw1.append(analysis.point_values(mesh, s.w1, located))
        pw2.append(analysis.point_values(mesh, s.w2, located))
        std.append(analysis.spatial_std(mesh, s.w2))
        pmin.append(float(s.psi.min()))
        pmax.append(float(s.psi.max()))
        if keep_snapshots:
            snaps.append(s.copy())
        if snapshot_writer is not None:
            snapshot_writer(mesh, s, index)

    record(state, 0)
    m1.append(float(weights @ state.w1))
    m2.append(float(weights @ state.w2))
    for n in range(1, scenario.n_steps + 1):
        new, report = solver.advance(state, prev)
        prev, state = state, new
        m1.append(float(weights @ state.w1))
        m2.append(float(weights @ state.w2))
        iters.append(report.iterations)
        resid.append(report.residuals)
        cons.append(report.constraint_residual)
        if n % scenario.output_stride == 0 or n == scenario.n_steps:
            record(state, len(out_t))
        if progress is not None:
            progress(n, state)
    return ScenarioResult(
        scenario=scenario,
        mesh=mesh,
        times=np.array(out_t),
        point_w1=np.array(pw1),
        point_w2=np.array(pw2),
        w2_std=np.array(std),
        psi_min=np.array(pmin),
        psi_max=np.array(pmax),
        step_times=scenario.dt * np.arange(scenario.n_steps + 1),
        mass_w1=np.array(m1),
        mass_w2=np.array(m2),
        newton_iterations=np.array(iters),
        newton_residuals=resid,
        constraint_residuals=np.array(cons),
        final_state=state,
        snapshots=snaps,
        wall_time=_time.perf_counter() - start,
    )
