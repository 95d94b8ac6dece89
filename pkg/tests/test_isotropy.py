"""
Tests for the module decomposition, Casimir constants, [ijk] and topology.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from hrflow.catalog import list_catalog, make_catalog_algebra
from hrflow.errors import InvalidAlgebra, InvalidCartanSplit, InvalidIsotropy
from hrflow.isotropy import (
    bracket_coefficients,
    build_space,
    classify_topology,
    decomposition_report,
    odd_p_residual,
    sum_identity_check,
    symmetric_commutant,
)
from hrflow.parse import load_algebra_document

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def _space(key, seed=0, **params):
    return build_space(make_catalog_algebra(key, **params), seed=seed)


class TestModules:
    def test_trivial_isotropy_gives_one_module_per_direction(self):
        space = _space("sl2r_trivial")
        assert space.modules == ((0,), (1,), (2,))
        assert space.n_l == 1
        assert list(space.b_flags) == [1.0, -1.0, -1.0]
        assert np.allclose(space.casimir, 0.0)

    def test_hyperbolic_plane(self):
        space = _space("hyperbolic_plane")
        assert space.n_l == 0
        assert space.n_modules == 1
        assert list(space.dims) == [2.0]
        assert space.casimir[0] == pytest.approx(0.5)
        assert space.h_indices == (0,)

    def test_so32_mod_so3(self):
        space = _space("so_3_2_mod_so_3")
        assert sorted(space.dims) == [1.0, 3.0, 3.0]
        assert space.n_l == 1
        assert space.casimir[0] == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(space.casimir[1:], 1.0 / 3.0)
        assert space.h_indices == (0, 1, 2)
        assert space.l_indices == (3,)
        assert space.p_indices == tuple(range(4, 10))
        assert all(d == 1 for d in space.commutant_dims)

    def test_change_of_basis_reproduces_constants(self):
        entry = make_catalog_algebra("so_3_2_mod_so_3")
        space = build_space(entry, seed=5)
        mapped = entry.algebra.change_basis(space.change_of_basis)
        assert np.allclose(mapped.tensor, space.alg.tensor, atol=1e-10)

    @pytest.mark.parametrize("seed", [1, 2, 3, 17])
    def test_seed_invariance(self, seed):
        """Module dims and Casimir constants do not depend on the seed."""

        def signature(space):
            pairs = zip(space.dims, space.casimir, strict=True)
            return sorted((int(d), round(float(c), 9)) for d, c in pairs)

        reference = signature(_space("so_3_2_mod_so_3", seed=0))
        assert signature(_space("so_3_2_mod_so_3", seed=seed)) == reference

    def test_build_space_accepts_a_document_dict(self):
        doc = json.loads((FIXTURES_DIR / "sl2_ahs.json").read_text())
        space = build_space(doc)
        assert space.n_modules == 3
        assert space.n_l == 1

    def test_broken_jacobi_is_rejected(self):
        doc = load_algebra_document(FIXTURES_DIR / "sl2_broken_jacobi.json")
        with pytest.raises(InvalidAlgebra) as info:
            build_space(doc)
        assert info.value.check == "jacobi"
        assert info.value.exit_code == 3

    def test_isotropy_that_is_not_a_subalgebra(self):
        entry = make_catalog_algebra("sl3r_trivial").with_isotropy([0, 1])
        with pytest.raises(InvalidIsotropy):
            build_space(entry)

    def test_compact_group_rejected_for_runs(self):
        entry = make_catalog_algebra("so3_fiber")
        assert build_space(entry).n_l == 3
        with pytest.raises(InvalidCartanSplit):
            build_space(entry, require_noncompact=True)


class TestSymmetricCommutant:
    def test_no_actions(self):
        assert len(symmetric_commutant([], 3)) == 6

    def test_rotation_generator(self):
        """A plane rotation commutes only with multiples of the identity."""
        J = np.array([[0.0, -1.0], [1.0, 0.0]])
        basis = symmetric_commutant([J], 2)
        assert len(basis) == 1
        S = basis[0]
        assert np.allclose(S, S[0, 0] * np.eye(2))


class TestBracketCoefficients:
    def test_sl2_value(self):
        space = _space("sl2r_trivial")
        tensor = bracket_coefficients(space)
        assert tensor.values[0, 1, 2] == pytest.approx(0.5)
        assert tensor.to_list() == [[0, 1, 2, pytest.approx(0.5)]]

    def test_so3_value(self):
        space = _space("so3_fiber")
        tensor = bracket_coefficients(space)
        assert tensor.values[0, 1, 2] == pytest.approx(0.5)

    def test_hyperbolic_plane_is_zero(self):
        tensor = bracket_coefficients(_space("hyperbolic_plane"))
        assert np.all(tensor.values == 0.0)

    @pytest.mark.parametrize("key", list_catalog())
    def test_identities_on_presets(self, key):
        space = _space(key)
        tensor = bracket_coefficients(space)
        assert tensor.symmetry_residual() < 1e-12
        assert odd_p_residual(space, tensor) < 1e-12
        report = sum_identity_check(space, tensor)
        assert report.passed, report.residuals


class TestTopology:
    @pytest.mark.parametrize(
        "key", ["sl2r_trivial", "so_3_2_mod_so_3", "hyperbolic_plane"]
    )
    def test_contractible(self, key):
        space = _space(key)
        regime = classify_topology(space)
        assert regime.contractible
        assert regime.regime == "immortal"

    def test_sl3_is_not_contractible(self):
        space = _space("sl3r_trivial")
        regime = classify_topology(space, bracket_coefficients(space))
        assert not regime.contractible
        assert regime.regime == "extinct"
        assert regime.eligible_indices == (0, 1, 2)
        assert regime.lambda_structural == pytest.approx(1.0 / 12.0)
        assert regime.lambda_over_d(space.dim_m) == pytest.approx(1.0 / 96.0)

    def test_centralizer_of_trivial_action_is_all_of_l(self):
        space = _space("so_3_2_mod_so_3")
        regime = classify_topology(space)
        assert regime.dim_w == 1
        assert regime.dim_v == 0
        assert regime.w_modules == (0,)
        assert regime.v_modules == ()
        assert abs(regime.w_basis[0, 0]) == pytest.approx(1.0)

    def test_trivial_isotropy_centralizes_every_l_module(self):
        space = _space("sl2r_squared")
        regime = classify_topology(space)
        assert regime.dim_w == space.dim_l == 2
        assert regime.w_modules == (0, 1)
        assert regime.v_basis.shape == (2, 0)
        assert np.allclose(regime.w_basis.T @ regime.w_basis, np.eye(2))

    def test_rotated_fiber_lies_in_v(self):
        entry = make_catalog_algebra("sl3r_trivial").with_isotropy([0])
        space = build_space(entry)
        regime = classify_topology(space)
        assert regime.dim_w == 0
        assert regime.dim_v == space.dim_l == 2
        assert regime.v_modules == (0,)
        assert np.allclose(regime.v_basis.T @ regime.v_basis, np.eye(2))
        data = json.loads(json.dumps(regime.to_dict()))
        assert data["v_modules"] == [0]
        assert len(data["v_basis"]) == 2

    def test_lambda_over_d_without_eligible_modules(self):
        space = _space("sl2r_trivial")
        assert classify_topology(space).lambda_over_d(space.dim_m) is None


class TestDecompositionReport:
    def test_report_is_json(self):
        space = _space("so_3_2_mod_so_3")
        tensor = bracket_coefficients(space)
        report = decomposition_report(space, tensor, classify_topology(space, tensor))
        text = json.dumps(report)
        assert json.loads(text)["space_hash"] == space.space_hash()
        assert [m["d"] for m in report["modules"]] == [int(d) for d in space.dims]
        assert report["regime"]["regime"] == "immortal"
        assert report["modules"][0]["block"] == "l"

    def test_space_hash(self):
        first = _space("sl3r_trivial").space_hash()
        assert len(first) == 64
        assert all(ch in "0123456789abcdef" for ch in first)
        assert _space("sl3r_trivial").space_hash() == first
        assert _space("sl2r_trivial").space_hash() != first
