import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import identity
from scipy.sparse.linalg import spsolve

from conftest import dense_implicit_euler, dense_vofl_matrix
from varfrac.discretize import Mesh1D, build_laplacian_1d, half_interval, partition_regions
from varfrac.ionic import FisherReaction, fisher_source
from varfrac.stepper import (
    DivergenceError,
    PicardError,
    PicardSettings,
    TimeGrid,
    backward_euler_step,
    integrate,
)
from varfrac.vofl import EngineSettings, VoflOperator


class NoReaction:
    def initial_aux(self, n):
        return None

    def advance(self, aux, u, dt):
        return None

    def rate(self, u, aux):
        return np.zeros_like(u)


class PoisonAt(NoReaction):
    def __init__(self, node):
        self.node = node

    def rate(self, u, aux):
        r = np.zeros_like(u)
        r[self.node] = np.inf
        return r


class CountingAux(NoReaction):
    """Aux state that records the voltage iterate it was advanced with."""

    def __init__(self):
        self.calls = 0

    def advance(self, aux, u, dt):
        self.calls += 1
        return (aux + dt * u.mean(),)

    def rate(self, u, aux):
        return -0.1 * u


def fisher_cable(n=101, length=100.0, a1=1.5, a2=2.0, D=1.0, ell=None):
    mesh = Mesh1D.interval(length, length / (n - 1))
    A = build_laplacian_1d(mesh)
    part = partition_regions(mesh.coords, half_interval(length))
    op = VoflOperator(A, a1, a2, part, D=D, settings=EngineSettings(ell=ell))
    return mesh, A, part, op


def fisher_start(x):
    return np.where(x <= 5.0, 1.0, np.exp(-(x - 5.0)))


class TestStep:
    def test_no_dynamics_is_identity(self, rng):
        _, A, part, _ = fisher_cable(40, 4.0)
        op = VoflOperator(A, 1.5, 2.0, part, D=0.0)
        u = rng.standard_normal(40)
        out, aux, its = backward_euler_step(op, u, None, NoReaction(), 0.1)
        np.testing.assert_array_equal(out, u)
        assert its == 1

    def test_heat_step_matches_sparse_solve(self, rng):
        _, A, _, _ = fisher_cable(120, 12.0)
        op = VoflOperator(A, 2.0, D=0.8)
        u = rng.standard_normal(120)
        out, _, _ = backward_euler_step(op, u, None, NoReaction(), 0.05)
        ref = spsolve((identity(120) + 0.8 * 0.05 * A).tocsc(), u)
        np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)

    def test_constant_state_scalar_logistic(self):
        _, _, _, op = fisher_cable(60, 10.0)
        dt, c = 0.2, 0.3
        out, _, _ = backward_euler_step(op, np.full(60, c), None, FisherReaction(), dt,
                                        PicardSettings(tol=1e-13, max_iter=200))
        # scalar oracle: positive root of dt u^2 + (1 - dt) u - c = 0
        root = (-(1 - dt) + np.sqrt((1 - dt) ** 2 + 4 * dt * c)) / (2 * dt)
        np.testing.assert_allclose(out, root, atol=1e-11)

    def test_picard_error_carries_update(self):
        _, _, _, op = fisher_cable(60, 10.0)
        with pytest.raises(PicardError) as info:
            backward_euler_step(op, np.full(60, 0.3), None, FisherReaction(), 0.5,
                                PicardSettings(tol=1e-15, max_iter=2))
        assert info.value.update_norm > 0
        assert "2 iterations" in str(info.value)

    def test_divergence_names_node(self):
        _, _, _, op = fisher_cable(30, 3.0)
        with pytest.raises(DivergenceError, match="node 7") as info:
            backward_euler_step(op, np.zeros(30), None, PoisonAt(7), 0.1)
        assert info.value.node == 7

    def test_aux_advanced_from_start_each_sweep(self):
        _, _, _, op = fisher_cable(20, 2.0)
        model = CountingAux()
        u, aux, its = backward_euler_step(op, np.ones(20), np.float64(0.0), model, 0.1,
                                          PicardSettings(tol=1e-12))
        assert model.calls == its + 1
        assert aux[0] == pytest.approx(0.1 * u.mean())

    def test_source_array_and_callable(self):
        _, A, _, _ = fisher_cable(20, 2.0)
        op = VoflOperator(A, 2.0, D=0.0)
        u1, _, _ = backward_euler_step(op, np.zeros(20), None, NoReaction(), 0.5, source=np.full(20, 2.0))
        np.testing.assert_allclose(u1, 1.0)
        seen = []
        backward_euler_step(op, np.zeros(20), None, NoReaction(), 0.5,
                            source=lambda t: seen.append(t) or np.zeros(20), t=3.0)
        assert seen == [3.5]

    def test_invalid_settings(self):
        with pytest.raises(ValueError):
            PicardSettings(tol=0.0)
        with pytest.raises(ValueError):
            PicardSettings(max_iter=0)
        with pytest.raises(ValueError):
            TimeGrid(0.0, 1.0)
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0.2)
        assert TimeGrid(0.25, 1200.0).n_steps == 4800


@settings(max_examples=10, deadline=None)
@given(a1=st.sampled_from([1.3, 1.5, 2.0]), a2=st.sampled_from([1.4, 1.8, 2.0]),
       dt=st.floats(0.01, 0.5), seed=st.integers(0, 2**31))
def test_converged_step_satisfies_implicit_residual(a1, a2, dt, seed):
    _, _, _, op = fisher_cable(40, 8.0, a1, a2)
    u_n = np.random.default_rng(seed).uniform(0, 1, 40)
    pic = PicardSettings(tol=1e-8, max_iter=200)
    u, _, _ = backward_euler_step(op, u_n, None, FisherReaction(), dt, pic)
    rhs = u_n + dt * (op.correction(u) + fisher_source(u))
    res = np.max(np.abs(u - op.solve_fb(rhs, dt)))
    assert res <= 2 * pic.tol * (1 + np.max(np.abs(u)))


class TestIntegrate:
    def test_zero_steps(self, rng):
        _, _, _, op = fisher_cable(30, 3.0)
        u0 = rng.uniform(size=30)
        traj = integrate(op, u0, None, FisherReaction(), TimeGrid(0.1, 1.0), steps=0)
        np.testing.assert_array_equal(traj.u, u0)
        assert traj.steps == 0 and traj.average_picard == 0.0

    def test_observers_get_readonly_views(self, rng):
        _, _, _, op = fisher_cable(30, 3.0)
        seen = []

        def obs(step, t, view):
            seen.append((step, t))
            with pytest.raises(ValueError):
                view.u[0] = 1.0

        integrate(op, rng.uniform(size=30), None, FisherReaction(), TimeGrid(0.25, 1.0), observers=[obs])
        assert seen == [(0, 0.0), (1, 0.25), (2, 0.5), (3, 0.75), (4, 1.0)]

    def test_stimulus_windows(self):
        _, A, _, _ = fisher_cable(10, 1.0)
        op = VoflOperator(A, 2.0, D=0.0)
        windows = []

        def stim(t0, t1):
            windows.append((t0, t1))
            return np.ones(10) if t0 < 0.5 else None

        traj = integrate(op, np.zeros(10), None, NoReaction(), TimeGrid(0.25, 1.0), stimulus=stim)
        np.testing.assert_allclose(traj.u, 0.5)
        assert windows[0] == (0.0, 0.25) and windows[-1] == (0.75, 1.0)

    def test_fisher_against_dense_reference(self):
        mesh, A, part, op = fisher_cable(101, 100.0, 1.5, 2.0, ell=16)
        u0 = fisher_start(mesh.coords)
        dt, t_end = 0.25, 15.0
        traj = integrate(op, u0, None, FisherReaction(), TimeGrid(dt, t_end),
                         picard=PicardSettings(tol=1e-10, max_iter=100))
        L = dense_vofl_matrix(A, 1.5, 2.0, part.region_of)
        ref = dense_implicit_euler(L, 1.0, dt, u0, int(t_end / dt), g=fisher_source, dg=lambda u: 1 - 2 * u)
        assert np.max(np.abs(traj.u - ref)) <= 1e-6

    def test_average_picard_small_at_default_tol(self):
        mesh, _, _, op = fisher_cable(101, 100.0, 1.5, 2.0)
        traj = integrate(op, fisher_start(mesh.coords), None, FisherReaction(), TimeGrid(0.1, 15.0))
        assert 1.0 <= traj.average_picard <= 5.0
        assert len(traj.picard_counts) == 150
