import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from porostab.errors import InvalidMesh, QuadratureDegreeTooLow, SingularElement
from porostab.fem2d import (
    CoupledSolver,
    Domain,
    FemState,
    Physics,
    assemble_forms,
    build_spaces,
    disk_mesh,
    dominant_wavelength,
    integral,
    preset,
    read_mesh,
    rectangle_mesh,
    run_scenario,
    spatial_std,
    write_mesh,
)
from porostab.fem2d.assembly import element_geometry, local_forms
from porostab.fem2d.mesh import GAMMA, NONE, SIGMA, Mesh, disk_rings_for, from_triangulation
from porostab.fem2d.ordering import nested_dissection
from porostab.fem2d.physics import ActiveLaw, FibreField, LinearRamp, PatchTraction
from porostab.fem2d.quadrature import DEGREE4, DEGREE6, monomial_integral, require_degree
from porostab.fem2d.scenario import initial_state
from porostab.model import ModelParams, steady_state

import mms

REFERENCE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def single_triangle(tag=GAMMA):
    return from_triangulation(REFERENCE, np.array([[0, 1, 2]]), lambda mid: np.full(len(mid), tag))


def all_gamma(mid):
    return np.full(len(mid), GAMMA)


class TestMesh:
    def test_single_triangle_counts(self):
        d = build_spaces(single_triangle())
        assert (d.n1, d.n2, d.n3, d.n4) == (8, 1, 3, 3)

    def test_unit_square(self):
        d = build_spaces(rectangle_mesh(1, 1, 1, 1))
        assert d.n3 == 4 and d.n2 == 2

    def test_large_disk_builds_quickly(self):
        start = time.perf_counter()
        mesh = disk_mesh(n_rings=disk_rings_for(64926))
        build_spaces(mesh)
        assert time.perf_counter() - start < 5.0
        assert abs(mesh.n_triangles - 64926) / 64926 < 0.05

    def test_orientation_and_tags(self):
        mesh = rectangle_mesh(2, 1, 6, 3)
        assert np.all(mesh.signed_areas() > 0)
        assert mesh.areas().sum() == pytest.approx(2.0)
        assert len(mesh.boundary_markers) == len(mesh.boundary_edges)

    def test_zero_area(self):
        v = np.array([[0, 0], [1, 0], [2, 0.0]])
        with pytest.raises(SingularElement):
            Mesh(v, np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2], [2, 0]]), np.zeros(3, dtype=int))

    def test_negative_orientation(self):
        with pytest.raises(InvalidMesh):
            Mesh(REFERENCE, np.array([[0, 2, 1]]), np.array([[0, 2], [2, 1], [1, 0]]), np.zeros(3, dtype=int))

    def test_untagged_boundary_rejected(self):
        with pytest.raises(InvalidMesh):
            Mesh(REFERENCE, np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2]]), np.zeros(2, dtype=int))

    def test_file_round_trip(self, tmp_path):
        mesh = rectangle_mesh(1, 0.6, 4, 3, tagger=lambda mid: np.where(mid[:, 1] > 0.59, SIGMA, GAMMA))
        write_mesh(mesh, tmp_path / "m.txt")
        text = (tmp_path / "m.txt").read_text().splitlines()
        assert text[0] == f"vertices {mesh.n_vertices}"
        back = read_mesh(tmp_path / "m.txt")
        np.testing.assert_array_equal(back.triangles, mesh.triangles)
        np.testing.assert_allclose(back.vertices, mesh.vertices)
        np.testing.assert_array_equal(back.boundary_markers, mesh.boundary_markers)

    def test_nested_dissection_is_permutation(self):
        mesh = disk_mesh(n_rings=12)
        perm = nested_dissection(mesh)
        np.testing.assert_array_equal(np.sort(perm), np.arange(mesh.n_vertices))


class TestQuadrature:
    @pytest.mark.parametrize("rule", [DEGREE4, DEGREE6])
    def test_exact_monomials(self, rule):
        lam = rule.barycentric
        for a in range(rule.degree + 1):
            for b in range(rule.degree + 1 - a):
                for c in range(rule.degree + 1 - a - b):
                    approx = rule.weights @ (lam[:, 0] ** a * lam[:, 1] ** b * lam[:, 2] ** c)
                    assert approx == pytest.approx(monomial_integral(a, b, c), rel=1e-12)

    def test_weights_sum(self):
        assert DEGREE4.weights.sum() == pytest.approx(1.0)

    def test_degree_guard(self):
        with pytest.raises(QuadratureDegreeTooLow):
            require_degree(DEGREE4, 6)


class TestForms:
    def test_p1_mass_single_triangle(self):
        f = local_forms(element_geometry(single_triangle()))
        area = 0.5
        np.testing.assert_allclose(np.diag(f.mass_p1[0]), area / 6)
        np.testing.assert_allclose(f.mass_p1[0][~np.eye(3, dtype=bool)], area / 12)

    def test_bubble_mass_exact(self):
        f = local_forms(element_geometry(single_triangle()))
        # int (27 l0 l1 l2)^2 = 729 * 2 |T| * 1!1!1!... / 8! * 2 -> 81/280 |T|
        assert f.mass_u[0][3, 3] == pytest.approx(729 * monomial_integral(2, 2, 2) * 0.5)

    def test_rigid_motions_have_no_strain(self):
        mesh = disk_mesh(n_rings=5)
        d = build_spaces(mesh)
        f = local_forms(element_geometry(mesh))
        n = mesh.n_vertices
        for u in (np.r_[np.ones(n), np.zeros(n)], np.r_[-mesh.vertices[:, 1], mesh.vertices[:, 0]]):
            U = np.zeros(d.n1)
            U[:2 * n] = u
            local = U[d.u_local]
            energy = np.einsum("ea,eab,eb->e", local, f.stiff_u, local)
            assert np.abs(energy).max() < 1e-10

    def test_b1_vanishes_on_translation(self):
        mesh = rectangle_mesh(1, 1, 5, 5)
        p = ModelParams()
        s = CoupledSolver(mesh, Physics(p), 0.01)
        state = s.zero_state()
        state.u[:mesh.n_vertices] = 1.0
        forms = assemble_forms(mesh, Physics(p), 0.01, state, solver=s)
        assert np.abs(forms.B1 @ state.u).max() < 1e-14

    def test_load_vanishes_without_forcing(self):
        mesh = rectangle_mesh(1, 1, 4, 4)
        ph = Physics(ModelParams(tau=0.0))
        forms = assemble_forms(mesh, ph, 0.01, FemState(*[np.ones(k) for k in (2 * 25 + 64, 25, 32, 25, 25)]))
        assert not forms.F.any()

    def test_body_load(self):
        mesh = rectangle_mesh(1, 1, 4, 4)
        ph = Physics(ModelParams(tau=0.0, rho=2.0), body_force=lambda x, t: np.broadcast_to([2.0 * 3.0, 0.0], x.shape))
        s = CoupledSolver(mesh, ph, 0.1)
        forms = assemble_forms(mesh, ph, 0.1, s.zero_state(), solver=s)
        n = mesh.n_vertices
        assert forms.F[:n].sum() == pytest.approx(0.01 * 6.0)

    def test_scaled_system_matches_solver(self):
        for name in ("test1", "test3", "calcium"):
            sc = preset(name)
            sc = sc.with_(domain=Domain(sc.domain.kind, lx=sc.domain.lx, ly=sc.domain.ly, n_triangles=300), dt=0.01)
            mesh = sc.domain.build(sc.bc_mode)
            ph = sc.physics()
            s = CoupledSolver(mesh, ph, sc.dt, newton_tol=1e-12)
            s0 = initial_state(s, sc)
            s1, _ = s.advance(s0)
            s2, _ = s.advance(s1, s0)
            res = assemble_forms(mesh, ph, sc.dt, s2, s1, solver=s).residual(s2, s1, s0)
            free = np.ones(s.dofs.total, dtype=bool)
            free[s.fixed] = False
            for key, r in res.items():
                r = r[free[s.dofs.block(key)]]
                assert np.abs(r).max() < 1e-9 * max(1.0, np.abs(r).max() + 1), (name, key)


def small_solver(params, dt=0.01, **physics):
    mesh = rectangle_mesh(1, 1, 8, 8, tagger=physics.pop("tagger", all_gamma))
    return CoupledSolver(mesh, Physics(params, **physics), dt)


class TestNewton:
    def test_equilibrium_fixed_point(self):
        p = ModelParams(tau=0.0, gamma=0.0)
        s = small_solver(p)
        ss = steady_state(p)
        state = s.zero_state()
        state.w1[:], state.w2[:] = ss.w10, ss.w20
        start, prev = state.copy(), None
        for _ in range(100):
            new, rep = s.advance(state, prev)
            prev, state = state, new
            assert rep.iterations == 0
        for name in ("u", "p", "psi"):
            assert np.abs(getattr(state, name)).max() <= 1e-10
        assert np.abs(state.w1 - start.w1).max() <= 1e-10 * ss.w10
        assert np.abs(state.w2 - start.w2).max() <= 1e-10 * ss.w20

    def test_linear_regime_one_iteration(self, rng):
        p = ModelParams(tau=0.0, gamma=0.0, beta1=0.0)
        s = small_solver(p, traction=PatchTraction(1e3, 0.0, 1.0),
                         tagger=lambda mid: np.where(mid[:, 1] > 0.99, SIGMA, GAMMA))
        state = s.zero_state()
        state.w1[:] = 1 + 0.1 * rng.uniform(size=len(state.w1))
        state.w2[:] = 1.0
        prev = None
        for _ in range(3):
            new, rep = s.advance(state, prev)
            prev, state = state, new
            assert rep.iterations == 1 and rep.residuals[-1] < 1e-6

    def test_converged_iterate_needs_no_update(self):
        sc = preset("test2").with_(domain=Domain("disk", n_triangles=600), dt=0.0025)
        mesh = sc.domain.build(sc.bc_mode)
        s = CoupledSolver(mesh, sc.physics(), sc.dt, newton_tol=1e-12)
        s0 = initial_state(s, sc)
        x1, _ = s.solve_step(s0.vector(), s0.vector(), sc.dt)
        h = s.history(s0.vector(), s0.vector(), sc.dt)
        dx, omega = s.newton_step(x1, s0.vector(), h, sc.dt)
        assert omega < 1e-12 and np.abs(dx).max() < 1e-10 * np.abs(x1).max()

    def test_quadratic_tail(self):
        sc = preset("test2").with_(domain=Domain("disk", n_triangles=2000), dt=0.0025)
        mesh = sc.domain.build(sc.bc_mode)
        s = CoupledSolver(mesh, sc.physics(), sc.dt, newton_tol=1e-14, max_newton=8)
        state, prev = initial_state(s, sc), None
        orders, counts = [], []
        for _ in range(120):
            new, rep = s.advance(state, prev)
            prev, state = state, new
            counts.append(len([x for x in rep.residuals if x >= 1e-6]))
            # drop round-off level residuals; keep triples past the first iterate
            r = [x for x in rep.residuals if x > 5e-16]
            if len(r) >= 3 and r[-3] < 1e-4:
                a, b, c = r[-3:]
                orders.append(np.log(c / b) / np.log(b / a))
        # standard tolerance: at most five iterations per step
        assert max(counts) <= 5
        assert len(orders) >= 10
        assert min(orders) >= 1.8

    def test_constraint_residual(self, rng):
        sc = preset("test2").with_(domain=Domain("disk", n_triangles=500), dt=0.005)
        mesh = sc.domain.build(sc.bc_mode)
        s = CoupledSolver(mesh, sc.physics(), sc.dt)
        state, prev = initial_state(s, sc), None
        for _ in range(5):
            new, rep = s.advance(state, prev)
            prev, state = state, new
            assert rep.constraint_residual < 1e-10


class TestAdvance:
    def test_traction_compresses(self):
        sc = preset("test1").with_(domain=Domain("rectangle", lx=1.0, ly=0.6, n_triangles=600), dt=0.01,
                                   t_final=0.95, perturbation=0.0)
        mesh = sc.domain.build(sc.bc_mode)
        s = CoupledSolver(mesh, sc.physics(), sc.dt)
        state, prev = initial_state(s, sc), None
        top = np.flatnonzero(np.isclose(mesh.vertices[:, 1], 0.6) & (mesh.vertices[:, 0] > 0.42)
                             & (mesh.vertices[:, 0] < 0.58))
        n = mesh.n_vertices
        for _ in range(sc.n_steps):
            new, _ = s.advance(state, prev)
            prev, state = state, new
            assert np.all(state.u[n + top] < 0)

    def test_pure_diffusion_conserves_mass(self, rng):
        p = ModelParams(beta1=0.0, gamma=0.0, tau=0.0)
        s = small_solver(p, dt=0.01)
        state = s.zero_state()
        state.w1[:] = 1 + rng.uniform(size=len(state.w1))
        state.w2[:] = 2 + rng.uniform(size=len(state.w2))
        m0 = integral(s.mesh, state.w1)
        prev = None
        for _ in range(20):
            new, _ = s.advance(state, prev)
            prev, state = state, new
            assert abs(integral(s.mesh, state.w1) - m0) < 1e-10 * m0

    def test_robin_mode(self):
        sc = preset("test3").with_(domain=Domain("disk", n_triangles=400), dt=0.01, t_final=0.05)
        res = run_scenario(sc)
        assert res.newton_iterations.max() <= 5
        assert np.all(np.isfinite(res.final_state.u)) and np.abs(res.final_state.u).max() > 0

    def test_calcium_runs(self):
        sc = preset("calcium").with_(domain=Domain("disk", n_triangles=300), t_final=0.05)
        res = run_scenario(sc)
        assert np.all(np.isfinite(res.final_state.w2))


class TestRunScenario:
    def test_zero_forcing_probes_constant(self):
        sc = preset("test2").with_(
            params=preset("test2").params.with_(tau=0.0, gamma=0.0),
            domain=Domain("disk", n_triangles=300), perturbation=0.0, t_final=0.05, dt=0.01, output_stride=2,
        )
        res = run_scenario(sc)
        ss = steady_state(sc.params)
        assert len(res.times) == 4  # t = 0 plus every second step and the final one
        np.testing.assert_allclose(res.point_w1, ss.w10, rtol=1e-12)
        np.testing.assert_allclose(res.point_w2, ss.w20, rtol=1e-12)
        assert np.all(res.w2_std < 1e-12) and np.all(res.psi_min == 0) and np.all(res.psi_max == 0)

    def test_seeded_perturbation(self):
        sc = preset("test2").with_(domain=Domain("disk", n_triangles=300))
        s = CoupledSolver(sc.domain.build(sc.bc_mode), sc.physics(), sc.dt)
        a, b = initial_state(s, sc), initial_state(s, sc)
        np.testing.assert_array_equal(a.w1, b.w1)
        ss = steady_state(sc.params)
        assert np.abs(a.w1 - ss.w10).max() <= 1e-3
        c = initial_state(s, sc.with_(seed=1))
        assert not np.array_equal(a.w1, c.w1)

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            preset("test2").with_(dt=0.0)
        with pytest.raises(ValueError):
            preset("test3").with_(traction=PatchTraction())
        with pytest.raises(ValueError):
            preset("unknown")


class TestAnalysis:
    def test_std_of_linear_field(self):
        mesh = rectangle_mesh(1, 1, 10, 10)
        # x on [0, 1]: variance 1/12
        assert spatial_std(mesh, mesh.vertices[:, 0]) == pytest.approx(np.sqrt(1 / 12))
        assert integral(mesh, mesh.vertices[:, 0]) == pytest.approx(0.5)

    def test_dominant_wavelength_of_stripes(self):
        mesh = disk_mesh(n_rings=40)
        x = mesh.vertices
        field = np.cos(2 * np.pi * x[:, 0] / 0.2) + np.cos(2 * np.pi * x[:, 1] / 0.2)
        # radial average of a single wavenumber is J0(k r); first peak at k r = 7.0156
        assert dominant_wavelength(mesh, field) == pytest.approx(7.0156 / (2 * np.pi) * 0.2, rel=0.05)

    def test_no_structure(self):
        mesh = rectangle_mesh(1, 1, 8, 8)
        assert np.isnan(dominant_wavelength(mesh, mesh.vertices[:, 0]))


class TestPhysics:
    def test_active_laws(self):
        assert ActiveLaw("linear").r(1.0, 2.0, 0.0) == 3.0
        assert ActiveLaw("quadratic").r(3.0, 2.0, 0.0) == 9.0
        assert ActiveLaw("growth", tau2=0.5).r(2.0, 0.0, 4.0) == 6.0

    def test_radial_fibres(self):
        k = FibreField("radial", center=(0.5, 0.5))(np.array([[1.0, 0.5]]))
        np.testing.assert_allclose(k, [[0.5, 0.0]])

    def test_robin_ramp(self):
        assert LinearRamp(0.2)(3.0) == pytest.approx(0.6)

    def test_traction_patch(self):
        tr = PatchTraction(25000.0, 0.4, 0.6)
        out = tr(np.array([[0.5, 0.6], [0.1, 0.6]]), 0.5)
        np.testing.assert_allclose(out, [[0.0, -25000.0], [0.0, 0.0]])


coord = st.floats(-2.0, 2.0, allow_nan=False)


class TestElementProperties:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(coord, min_size=6, max_size=6))
    def test_random_triangle(self, xy):
        v = np.array(xy).reshape(3, 2)
        area = 0.5 * ((v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1]) - (v[1, 1] - v[0, 1]) * (v[2, 0] - v[0, 0]))
        if abs(area) < 1e-3:
            return
        if area < 0:
            v = v[[0, 2, 1]]
        mesh = from_triangulation(v, np.array([[0, 1, 2]]), all_gamma)
        f = local_forms(element_geometry(mesh))
        a = abs(area)
        assert f.mass_p1[0].sum() == pytest.approx(a)
        np.testing.assert_allclose(f.stiff_p1[0].sum(axis=1), 0.0, atol=1e-9 * np.abs(f.stiff_p1).max())
        # bubble vanishes on the boundary, so its divergence integrates to zero
        np.testing.assert_allclose(f.div_u[0][[3, 7]], 0.0, atol=1e-12 * np.abs(f.div_u).max())
        assert np.all(np.linalg.eigvalsh(f.stiff_u[0]) > -1e-9 * np.abs(f.stiff_u).max())
        # rotation and translations carry no strain energy
        x, y = v[:, 0], v[:, 1]
        for u in (np.r_[1, 1, 1, 0, 0, 0, 0, 0.0], np.r_[0, 0, 0, 0, 1, 1, 1, 0.0], np.r_[-y, 0, x, 0]):
            assert abs(u @ f.stiff_u[0] @ u) < 1e-9 * np.abs(f.stiff_u).max() * (1 + u @ u)


class TestManufactured:
    LEVELS = (8, 16, 32)

    def test_rates(self):
        errors = [mms.run(n, 0.3) for n in self.LEVELS]
        ru, rp, rpsi = np.array(mms.rates(errors)).min(axis=0)
        assert ru >= 1.9 and rp >= 1.9 and rpsi >= 0.9

    def test_locking_robustness(self):
        for n in self.LEVELS:
            ref = np.array(mms.run(n, 0.3))
            near = np.array(mms.run(n, 0.499))
            assert np.all(near / ref <= 10.0), (n, near / ref)
