"""
Tests for blow-down and blow-up profiles.
"""

import json
from functools import cache

import numpy as np
import pytest

from hrflow.asymptotics import (
    blowdown_profile,
    blowup_profile,
    einstein_residual,
    einstein_search,
    plot_script,
)
from hrflow.catalog import make_catalog_algebra
from hrflow.errors import WrongRegime
from hrflow.flow import integrate_flow, random_initial_state
from hrflow.isotropy import bracket_coefficients, build_space, classify_topology
from hrflow.models import FlowConfig, MetricState, ProfileMode
from hrflow.monitors import detect_extinction


@cache
def reference(key: str):
    space = build_space(make_catalog_algebra(key))
    return space, bracket_coefficients(space)


def ones(space, value=1.0):
    return MetricState(np.full(space.n_modules, value), space.n_l)


@cache
def hyperbolic_run(t_end: float):
    space, tensor = reference("hyperbolic_plane")
    return integrate_flow(ones(space), space, tensor, FlowConfig(t_end=t_end))


@cache
def sl3_run():
    space, tensor = reference("sl3r_trivial")
    return integrate_flow(ones(space), space, tensor, FlowConfig(t_end=100.0))


class TestEinsteinResidual:
    def test_sl2_background(self):
        space, tensor = reference("sl2r_trivial")
        assert einstein_residual(ones(space), space, tensor) == pytest.approx(2 / 3)

    def test_round_so3_is_einstein(self):
        space, tensor = reference("so3_fiber")
        assert einstein_residual(ones(space), space, tensor) == pytest.approx(0.0)

    def test_scale_invariant(self):
        space, tensor = reference("sl3r_trivial")
        state = MetricState(np.linspace(0.5, 4.0, 8), space.n_l)
        first = einstein_residual(state, space, tensor)
        assert einstein_residual(state.scaled(3.0), space, tensor) == pytest.approx(
            first
        )


class TestEinsteinSearch:
    @pytest.mark.parametrize("key", ["sl2r_trivial", "so_3_2_mod_so_3"])
    def test_no_invariant_einstein_metric(self, key):
        space, tensor = reference(key)
        best, state = einstein_search(space, tensor, np.random.default_rng(0))
        assert best >= 1e-3
        assert isinstance(state, MetricState)
        assert einstein_residual(state, space, tensor) == pytest.approx(best)

    def test_reproducible(self):
        space, tensor = reference("so_3_2_mod_so_3")
        first = einstein_search(space, tensor, np.random.default_rng(3), states=50)
        second = einstein_search(space, tensor, np.random.default_rng(3), states=50)
        assert first[0] == second[0]
        assert np.array_equal(first[1].x, second[1].x)


class TestBlowdown:
    def test_hyperbolic_plane_is_consistent(self):
        space, _ = reference("hyperbolic_plane")
        profile = blowdown_profile(hyperbolic_run(1000.0), space)
        assert profile.mode == ProfileMode.BLOWDOWN
        assert profile.consistent
        assert profile.final["pinching"] == pytest.approx(0.0, abs=1e-12)
        assert profile.final["p_over_t"] == pytest.approx(1e-3, rel=1e-3)
        assert profile.final["l_over_t"] == 0.0
        assert all(profile.monotone.values())
        # t r_p tends to -1/2
        assert profile.extras["symmetric_limit_residual"] < 1e-3
        assert "ln_sqrt_t_sup" not in profile.extras

    @pytest.mark.parametrize(
        "key, seed",
        [
            ("sl2r_trivial", 0),
            ("sl2r_trivial", 1),
            ("so_3_2_mod_so_3", 0),
            ("so_3_2_mod_so_3", 1),
        ],
    )
    def test_random_start_on_contractible_space(self, key, seed):
        space, tensor = reference(key)
        state = random_initial_state(space, 0.5, 2.0, np.random.default_rng(seed))
        traj = integrate_flow(state, space, tensor, FlowConfig(t_end=1e4))
        assert not traj.is_extinct
        profile = blowdown_profile(traj, space)
        assert profile.verdict == "consistent", profile.final
        assert all(profile.monotone.values())

    def test_strict_threshold_is_inconsistent(self):
        space, _ = reference("hyperbolic_plane")
        profile = blowdown_profile(hyperbolic_run(1000.0), space, threshold=1e-4)
        assert profile.verdict == "inconsistent"

    def test_short_run(self):
        space, _ = reference("hyperbolic_plane")
        with pytest.raises(WrongRegime) as info:
            blowdown_profile(hyperbolic_run(10.0), space)
        assert info.value.check == "duration"

    def test_extinct_run(self):
        space, _ = reference("sl3r_trivial")
        with pytest.raises(WrongRegime) as info:
            blowdown_profile(sl3_run(), space)
        assert info.value.check == "immortal"

    def test_profile_is_json(self):
        space, _ = reference("hyperbolic_plane")
        data = blowdown_profile(hyperbolic_run(1000.0), space).to_dict()
        assert json.loads(json.dumps(data))["verdict"] == "consistent"


class TestBlowup:
    def test_sl3_profile(self):
        space, tensor = reference("sl3r_trivial")
        traj = sl3_run()
        extinction = detect_extinction(traj, space, classify_topology(space, tensor))
        profile = blowup_profile(traj, space, extinction.T)
        assert profile.mode == ProfileMode.BLOWUP
        assert profile.verdict in ("consistent", "inconsistent")
        assert set(profile.extras["checks"]) == {
            "type_I",
            "p_normalized",
            "near_zero_count",
        }
        assert profile.final["type_I_ratio"] >= 1.0
        assert "fiber_einstein_residual" in profile.final
        assert profile.extras["T"] == extinction.T
        assert np.all(profile.times <= extinction.T)
        assert profile.series["normalized_r"].shape[1] == space.n_modules

    def test_immortal_run(self):
        space, _ = reference("hyperbolic_plane")
        with pytest.raises(WrongRegime) as info:
            blowup_profile(hyperbolic_run(10.0), space, 10.0)
        assert info.value.check == "extinct"


class TestPlotScript:
    def test_script_compiles(self):
        space, _ = reference("hyperbolic_plane")
        profile = blowdown_profile(hyperbolic_run(1000.0), space)
        source = plot_script(profile)
        compile(source, "plot_profile.py", "exec")
        assert "matplotlib" in source
        assert "blowdown_profile.png" in source
