"""
Tests for structure constants, the Killing form and Cartan splits.
"""

from pathlib import Path

import numpy as np
import pytest

from hrflow.algebra import (
    CartanSplit,
    LieAlgebra,
    ad_invariance_residual,
    background_metric,
    cartan_validate,
    killing_form,
    orthonormalize_adapted_basis,
    require_cartan_split,
    validate_algebra,
)
from hrflow.catalog import make_catalog_algebra
from hrflow.errors import (
    InputError,
    InvalidCartanSplit,
    InvalidIsotropy,
    NotSemisimple,
)
from hrflow.parse import load_algebra_document

FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture
def sl2():
    return load_algebra_document(FIXTURES_DIR / "sl2_ahs.json")


class TestLieAlgebra:
    def test_implied_antisymmetric_half(self, sl2):
        """Entries with i < j imply the (j, i) entries."""
        c = sl2.algebra.tensor
        assert c[0, 1, 2] == -2.0
        assert c[1, 0, 2] == 2.0
        assert np.allclose(c, -np.transpose(c, (1, 0, 2)))

    def test_bracket(self, sl2):
        """[A, H] = -2 S."""
        e = np.eye(3)
        assert np.allclose(sl2.algebra.bracket(e[0], e[1]), [0.0, 0.0, -2.0])

    def test_wrong_basis_length(self):
        with pytest.raises(InputError) as info:
            LieAlgebra(3, ("a", "b"), ())
        assert info.value.check == "basis"

    def test_index_out_of_range(self):
        with pytest.raises(InputError) as info:
            LieAlgebra(2, ("a", "b"), ((0, 1, 2, 1.0),))
        assert info.value.check == "index_range"
        assert info.value.exit_code == 2

    def test_from_tensor_keeps_upper_half(self, sl2):
        rebuilt = LieAlgebra.from_tensor(sl2.algebra.tensor, sl2.algebra.basis_names)
        assert all(i < j for i, j, _, _ in rebuilt.structure)
        assert np.allclose(rebuilt.tensor, sl2.algebra.tensor)


class TestValidateAlgebra:
    def test_catalog_algebras_pass(self):
        for key in ("sl2r_trivial", "sl3r_trivial", "so_3_2_mod_so_3"):
            report = validate_algebra(make_catalog_algebra(key).algebra)
            assert report.passed, (key, report.residuals)

    def test_corrupted_jacobi_fails(self):
        """[H, E] = 3E instead of 2E breaks the Jacobi identity."""
        doc = load_algebra_document(FIXTURES_DIR / "sl2_broken_jacobi.json")
        report = validate_algebra(doc.algebra)
        assert "jacobi" in report.failed
        assert report.residuals["jacobi"] > 0.1
        assert report.residuals["antisymmetry"] == 0.0

    def test_inconsistent_antisymmetry_fails(self):
        alg = LieAlgebra(2, ("a", "b"), ((0, 1, 1, 1.0), (1, 0, 1, 1.0)))
        report = validate_algebra(alg)
        assert "antisymmetry" in report.failed


class TestKillingForm:
    def test_sl2_values(self, sl2):
        B = killing_form(sl2.algebra).matrix
        assert np.allclose(B, np.diag([-8.0, 8.0, 8.0]))

    def test_ad_invariant(self):
        alg = make_catalog_algebra("sl3r_trivial").algebra
        assert ad_invariance_residual(alg, killing_form(alg)) < 1e-12

    def test_matches_trace_form_on_sl3(self):
        """B(X, Y) = 2n tr(XY) on sl(n, R)."""
        entry = make_catalog_algebra("sl", n=3)
        B = killing_form(entry.algebra).matrix
        mats = entry.matrices
        expected = np.array([[6.0 * np.trace(a @ b) for b in mats] for a in mats])
        assert np.allclose(B, expected, atol=1e-10)

    def test_signature(self):
        entry = make_catalog_algebra("sl", n=3)
        assert killing_form(entry.algebra).signature() == (5, 0, 3)


class TestCartanSplit:
    @pytest.mark.parametrize(
        "key", ["sl2r_trivial", "sl3r_trivial", "so_3_2_mod_so_3", "sl2r_squared"]
    )
    def test_catalog_splits_validate(self, key):
        entry = make_catalog_algebra(key)
        B = killing_form(entry.algebra)
        report = cartan_validate(entry.algebra, B, entry.split)
        assert report.passed, report.residuals

    def test_swapped_split_is_rejected(self, sl2):
        swapped = CartanSplit((1, 2), (0,))
        with pytest.raises(InvalidCartanSplit):
            require_cartan_split(sl2.algebra, killing_form(sl2.algebra), swapped)

    def test_not_a_partition(self, sl2):
        with pytest.raises(InputError) as info:
            require_cartan_split(
                sl2.algebra, killing_form(sl2.algebra), CartanSplit((0,), (1,))
            )
        assert info.value.check == "partition"

    def test_solvable_algebra_is_not_semisimple(self):
        alg = LieAlgebra(2, ("a", "b"), ((0, 1, 1, 1.0),))
        with pytest.raises(NotSemisimple):
            require_cartan_split(alg, killing_form(alg), CartanSplit((0,), (1,)))

    def test_compact_group_needs_noncompact_part(self):
        entry = make_catalog_algebra("so3_fiber")
        B = killing_form(entry.algebra)
        assert cartan_validate(entry.algebra, B, entry.split).passed
        with pytest.raises(InvalidCartanSplit) as info:
            require_cartan_split(entry.algebra, B, entry.split, require_noncompact=True)
        assert info.value.check == "p_nonempty"
        assert info.value.exit_code == 3


class TestAdaptedBasis:
    def _adapted(self, key, h=None):
        entry = make_catalog_algebra(key)
        B = killing_form(entry.algebra)
        Q = background_metric(entry.algebra, B, entry.split)
        h = entry.h_indices if h is None else h
        return entry, orthonormalize_adapted_basis(entry.algebra, Q, entry.split, h)

    def test_killing_form_becomes_minus_plus_identity(self):
        entry, adapted = self._adapted("so_3_2_mod_so_3")
        B = killing_form(adapted.algebra).matrix
        nk = len(adapted.k_indices)
        expected = np.diag([-1.0] * nk + [1.0] * (adapted.algebra.dim - nk))
        assert np.allclose(B, expected, atol=1e-10)

    def test_order_is_h_l_p(self):
        entry, adapted = self._adapted("so_3_2_mod_so_3")
        assert adapted.h_indices == (0, 1, 2)
        assert adapted.l_indices == (3,)
        assert adapted.p_indices == tuple(range(4, 10))

    def test_change_of_basis_reproduces_constants(self):
        entry, adapted = self._adapted("sl3r_trivial")
        mapped = entry.algebra.change_basis(adapted.change_of_basis)
        assert np.allclose(mapped.tensor, adapted.algebra.tensor, atol=1e-10)

    def test_isotropy_outside_k(self):
        with pytest.raises(InvalidIsotropy) as info:
            self._adapted("sl2r_trivial", h=(1,))
        assert info.value.check == "h_in_k"

    def test_isotropy_not_a_subalgebra(self):
        with pytest.raises(InvalidIsotropy) as info:
            self._adapted("sl3r_trivial", h=(0, 1))
        assert info.value.check == "h_subalgebra"
