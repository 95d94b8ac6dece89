"""
Tests for the Dormand-Prince integrator and flow runs.
"""

from functools import cache

import numpy as np
import pytest

from hrflow.catalog import make_catalog_algebra
from hrflow.curvature import ricci_eigen
from hrflow.errors import DiagonalityBroken, InputError, IntegratorFailure
from hrflow.flow import dopri_step, error_norm, integrate_flow, random_initial_state
from hrflow.isotropy import bracket_coefficients, build_space
from hrflow.models import EventKind, FlowConfig, MetricState


@cache
def reference(key: str):
    space = build_space(make_catalog_algebra(key))
    return space, bracket_coefficients(space)


def ones(space, value=1.0):
    return MetricState(np.full(space.n_modules, value), space.n_l)


class TestDopriStep:
    def test_exponential_decay(self):
        def rhs(u):
            return -u

        u = np.array([1.0])
        step = dopri_step(rhs, u, rhs(u), 0.1)
        assert step.u_new[0] == pytest.approx(np.exp(-0.1), abs=1e-9)
        assert abs(step.error[0]) < 1e-5
        # FSAL: the last stage is the derivative at the new point
        assert step.stages[-1][0] == pytest.approx(-step.u_new[0])

    def test_dense_output_end_points(self):
        def rhs(u):
            return -u

        u = np.array([2.0, -1.0])
        step = dopri_step(rhs, u, rhs(u), 0.05)
        assert np.allclose(step.dense(u, 0.0), u)
        assert np.allclose(step.dense(u, 1.0), step.u_new)
        middle = step.dense(u, 0.5)
        assert np.allclose(middle, u * np.exp(-0.025), atol=1e-6)

    def test_error_norm_scale(self):
        error = np.array([1e-9, 1e-9])
        u = np.ones(2)
        assert error_norm(error, u, u, 1e-9, 0.0) == pytest.approx(1.0)


class TestFlowConfig:
    def test_rejects_bad_settings(self):
        with pytest.raises(InputError):
            FlowConfig(t_end=0.0)
        with pytest.raises(InputError):
            FlowConfig(rel_tol=-1.0)
        with pytest.raises(InputError) as info:
            FlowConfig(t_end=1.0, sample_times=(0.5, 0.2))
        assert info.value.check == "sample_times"

    def test_with_tolerance(self):
        config = FlowConfig(t_end=3.0).with_tolerance(1e-6)
        assert config.rel_tol == 1e-6
        assert config.abs_tol == pytest.approx(1e-8)
        assert config.t_end == 3.0

    def test_unknown_field(self):
        with pytest.raises(InputError) as info:
            FlowConfig.from_dict({"t_end": 1.0, "method": "rk4"})
        assert info.value.check == "flow_fields"


class TestIntegrateFlow:
    def test_hyperbolic_plane_closed_form(self):
        """r = -1/(2x), so x(t) = x0 + t exactly."""
        space, tensor = reference("hyperbolic_plane")
        config = FlowConfig(t_end=10.0, rel_tol=1e-10, abs_tol=1e-12)
        traj = integrate_flow(ones(space, 0.5), space, tensor, config)
        exact = 0.5 + traj.times
        assert np.max(np.abs(traj.x_matrix[:, 0] - exact) / exact) < 1e-7
        assert traj.terminal_event.kind == EventKind.COMPLETED
        assert traj.terminal_event.payload["reason"] == "t_end"
        assert traj.times[-1] == pytest.approx(10.0)

    def test_sample_schedule(self):
        space, tensor = reference("hyperbolic_plane")
        schedule = (0.0, 0.5, 1.0, 2.5, 4.0)
        config = FlowConfig(
            t_end=4.0, rel_tol=1e-10, abs_tol=1e-12, sample_times=schedule
        )
        traj = integrate_flow(ones(space), space, tensor, config)
        assert np.allclose(traj.times, schedule)
        assert np.allclose(traj.x_matrix[:, 0], 1.0 + np.array(schedule), rtol=1e-7)
        assert len(traj.steps) > 1

    def test_sl3_goes_extinct(self):
        space, tensor = reference("sl3r_trivial")
        traj = integrate_flow(ones(space), space, tensor, FlowConfig(t_end=100.0))
        assert traj.is_extinct
        event = traj.terminal_event
        assert event.payload["reason"] in ("threshold", "step_underflow")
        assert not traj.events_of(EventKind.DIAGONALITY_BROKEN)
        assert event.t < 100.0
        # the fiber collapses while p keeps growing
        final = traj.steps[-1][1]
        assert np.min(final[: space.n_l]) < np.min(final[space.n_l :])
        assert np.min(final[space.n_l :]) > 1.0

    def test_sl2_is_immortal(self):
        space, tensor = reference("sl2r_trivial")
        state = random_initial_state(space, 0.1, 10.0, np.random.default_rng(4))
        traj = integrate_flow(state, space, tensor, FlowConfig(t_end=50.0))
        assert not traj.is_extinct
        assert traj.terminal_event.kind == EventKind.COMPLETED
        R = traj.scalar
        assert np.all(np.diff(R) >= -1e-8 * np.maximum(1.0, np.abs(R[:-1])))

    def test_tie_groups_stay_tied(self):
        """Equal eigenvalues on a tie group stay equal along the flow."""
        space, tensor = reference("sl3r_trivial")
        state = random_initial_state(space, 0.5, 2.0, np.random.default_rng(9))
        traj = integrate_flow(state, space, tensor, FlowConfig(t_end=1.0))
        X = traj.x_matrix
        for group in space.tie_groups:
            block = X[:, list(group)]
            assert np.allclose(block, block[:, :1], rtol=1e-8)

    def test_max_steps(self):
        space, tensor = reference("sl2r_trivial")
        config = FlowConfig(t_end=50.0, max_steps=5)
        traj = integrate_flow(ones(space), space, tensor, config)
        assert traj.terminal_event.kind == EventKind.COMPLETED
        assert traj.terminal_event.payload["reason"] == "max_steps"
        assert traj.metadata["accepted_steps"] == 5
        # the terminal state is sampled
        assert traj.times[-1] == pytest.approx(traj.steps[-1][0])

    def test_non_finite_ricci(self):
        space, tensor = reference("sl2r_trivial")

        def broken(state, space, tensor):
            return np.full(space.n_modules, np.nan)

        with pytest.raises(IntegratorFailure) as info:
            integrate_flow(ones(space), space, tensor, FlowConfig(), ricci=broken)
        assert info.value.exit_code == 4

    def test_diagonality_broken(self):
        space, tensor = reference("sl3r_trivial")

        def doubled(state, space, tensor):
            return 2.0 * ricci_eigen(state, space, tensor)

        with pytest.raises(DiagonalityBroken) as info:
            integrate_flow(ones(space), space, tensor, FlowConfig(), ricci=doubled)
        traj = info.value.trajectory
        assert traj.events_of(EventKind.DIAGONALITY_BROKEN)
        assert traj.samples

    def test_metadata(self):
        space, tensor = reference("hyperbolic_plane")
        traj = integrate_flow(ones(space), space, tensor, FlowConfig(t_end=1.0), seed=7)
        assert traj.metadata["seed"] == 7
        assert traj.metadata["space_hash"] == space.space_hash()
        assert traj.metadata["rhs_evaluations"] >= traj.metadata["accepted_steps"]


class TestRandomInitialState:
    def test_range_and_ties(self):
        space, _ = reference("sl3r_trivial")
        state = random_initial_state(space, 0.5, 2.0, np.random.default_rng(1))
        assert np.all((state.x >= 0.5) & (state.x <= 2.0))
        for group in space.tie_groups:
            assert len(set(state.x[list(group)])) == 1

    def test_untied_draw_breaks_ties(self):
        space, _ = reference("sl3r_trivial")
        state = random_initial_state(
            space, 0.5, 2.0, np.random.default_rng(1), tied=False
        )
        assert np.all((state.x >= 0.5) & (state.x <= 2.0))
        assert len(set(state.x)) == space.n_modules

    def test_reproducible(self):
        space, _ = reference("so_3_2_mod_so_3")
        a = random_initial_state(space, 0.1, 10.0, np.random.default_rng(2))
        b = random_initial_state(space, 0.1, 10.0, np.random.default_rng(2))
        assert np.array_equal(a.x, b.x)
