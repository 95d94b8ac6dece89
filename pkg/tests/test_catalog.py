"""
Tests for the catalog of matrix algebras and presets.
"""

import numpy as np
import pytest

from hrflow.algebra import validate_algebra
from hrflow.catalog import (
    PRESETS,
    list_catalog,
    make_catalog_algebra,
    structure_from_matrices,
)
from hrflow.errors import InputError
from hrflow.parse import algebra_from_document


class TestFamilies:
    @pytest.mark.parametrize(
        "name,params,dim,split",
        [
            ("sl", {"n": 2}, 3, (1, 2)),
            ("sl", {"n": 3}, 8, (3, 5)),
            ("so", {"p": 2, "q": 2}, 6, (2, 4)),
            ("so", {"p": 3, "q": 2}, 10, (4, 6)),
            ("so_compact", {"n": 3}, 3, (3, 0)),
        ],
    )
    def test_dimensions(self, name, params, dim, split):
        entry = make_catalog_algebra(name, **params)
        assert entry.algebra.dim == dim
        assert (len(entry.split.k_indices), len(entry.split.p_indices)) == split
        assert len(entry.matrices) == dim

    def test_sl_basis_order(self):
        """Skew block, then the Cartan block, then the symmetric block."""
        entry = make_catalog_algebra("sl", n=3)
        names = entry.algebra.basis_names
        assert names[:3] == ("A01", "A02", "A12")
        assert names[3:5] == ("H0", "H1")
        assert names[5:] == ("S01", "S02", "S12")
        assert entry.tie_groups == ((0, 1, 2), (3, 4), (5, 6, 7))

    def test_sl_matrix_units_from_skew_and_symmetric(self):
        entry = make_catalog_algebra("sl", n=3)
        names = entry.algebra.basis_names
        mats = dict(zip(names, entry.matrices, strict=True))
        for i, j in ((0, 1), (0, 2), (1, 2)):
            upper = (mats[f"S{i}{j}"] + mats[f"A{i}{j}"]) / 2
            lower = (mats[f"S{i}{j}"] - mats[f"A{i}{j}"]) / 2
            unit = np.zeros((3, 3))
            unit[i, j] = 1.0
            assert np.array_equal(upper, unit)
            assert np.array_equal(lower, unit.T)
        # [E_01, E_10] = H_0
        e01 = (mats["S01"] + mats["A01"]) / 2
        e10 = (mats["S01"] - mats["A01"]) / 2
        assert np.array_equal(e01 @ e10 - e10 @ e01, mats["H0"])

    def test_so_tie_groups_are_singletons(self):
        entry = make_catalog_algebra("so", p=3, q=2)
        assert entry.tie_groups == tuple((i,) for i in range(10))

    def test_constants_satisfy_jacobi(self):
        for params in ({"n": 2}, {"n": 3}, {"n": 4}):
            assert validate_algebra(make_catalog_algebra("sl", **params).algebra).passed

    @pytest.mark.parametrize(
        "name,params",
        [
            ("sl", {"n": 1}),
            ("so", {"p": 1, "q": 2}),
            ("so_compact", {"n": 2}),
            ("sl", {"m": 3}),
        ],
    )
    def test_bad_params(self, name, params):
        with pytest.raises(InputError) as info:
            make_catalog_algebra(name, **params)
        assert info.value.check == "params"

    def test_unknown_key(self):
        with pytest.raises(InputError) as info:
            make_catalog_algebra("e8")
        assert info.value.check == "catalog_key"


class TestStructureFromMatrices:
    def test_closure_failure(self):
        """E01 and E10 bracket to a diagonal matrix outside their span."""
        e01 = np.array([[0.0, 1.0], [0.0, 0.0]])
        e10 = np.array([[0.0, 0.0], [1.0, 0.0]])
        with pytest.raises(InputError) as info:
            structure_from_matrices([e01, e10], ["E01", "E10"])
        assert info.value.check == "closure"
        assert info.value.details["residual"] > 0.5

    def test_sl2_constants(self):
        entry = make_catalog_algebra("sl", n=2)
        c = entry.algebra.tensor
        # [A, H] = -2 S, [A, S] = 2 H, [H, S] = 2 A
        assert c[0, 1, 2] == pytest.approx(-2.0)
        assert c[0, 2, 1] == pytest.approx(2.0)
        assert c[1, 2, 0] == pytest.approx(2.0)


class TestPresets:
    def test_list_catalog(self):
        keys = list_catalog()
        assert keys == list(PRESETS)
        assert "hyperbolic_plane" in keys
        assert "sl3r_trivial" in keys

    def test_hyperbolic_plane_isotropy_is_k(self):
        entry = make_catalog_algebra("hyperbolic_plane")
        assert entry.h_indices == entry.split.k_indices == (0,)
        assert entry.label == "hyperbolic_plane"

    def test_so_n_2_default_and_param(self):
        default = make_catalog_algebra("so_n_2_mod_so_n")
        assert default.params == {"p": 3, "q": 2}
        assert len(default.h_indices) == 3
        larger = make_catalog_algebra("so_n_2_mod_so_n", n=4)
        assert len(larger.h_indices) == 6
        assert larger.algebra.dim == 15

    def test_so_n_2_bad_param(self):
        with pytest.raises(InputError):
            make_catalog_algebra("so_n_2_mod_so_n", n=1)
        with pytest.raises(InputError):
            make_catalog_algebra("sl3r_trivial", n=4)

    def test_direct_sum(self):
        entry = make_catalog_algebra("sl2r_squared")
        assert entry.algebra.dim == 6
        assert entry.algebra.basis_names[:3] == ("A01_0", "H0_0", "S01_0")
        assert entry.algebra.basis_names[3:] == ("A01_1", "H0_1", "S01_1")
        assert entry.split.k_indices == (0, 3)
        # the summands commute
        assert np.all(entry.algebra.tensor[:3, 3:, :] == 0.0)
        assert validate_algebra(entry.algebra).passed

    def test_with_isotropy(self):
        entry = make_catalog_algebra("sl3r_trivial").with_isotropy([0])
        assert entry.h_indices == (0,)
        assert entry.label == "sl3r_trivial"

    def test_document_round_trip(self):
        entry = make_catalog_algebra("so_3_2_mod_so_3")
        doc = algebra_from_document(entry.to_document())
        assert np.array_equal(doc.algebra.tensor, entry.algebra.tensor)
        assert doc.split.k_indices == entry.split.k_indices
        assert doc.h_indices == entry.h_indices
