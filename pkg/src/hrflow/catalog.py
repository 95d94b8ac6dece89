"""
Catalog of matrix Lie algebras with their Cartan splits.

Every catalog algebra is built from explicit matrix representatives, so the
structure constants are derived rather than typed in.

WHY THIS FILE EXISTS:
- Gives tests and the check suites a fixed set of known spaces
- Keeps basis conventions (ordering, names) in one place
- Presets bundle an algebra with the isotropy a flow run should use
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .algebra import CartanSplit, LieAlgebra
from .errors import InputError

logger = logging.getLogger(__name__)

# Structure constants are rounded to this many decimals after the pinv solve.
ROUND_DECIMALS = 12


@dataclass(frozen=True, eq=False)
class CatalogEntry:
    """
    A catalog algebra with everything a run needs to start.

    ``tie_groups`` hold original basis indices whose modules must share one
    metric eigenvalue for the diagonal ansatz to be preserved by the flow.
    """

    key: str
    params: dict
    algebra: LieAlgebra
    split: CartanSplit
    h_indices: tuple[int, ...] = ()
    matrices: tuple[np.ndarray, ...] = ()
    tie_groups: tuple[tuple[int, ...], ...] = ()
    description: str = ""
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or self.key

    def with_isotropy(self, h_indices, name: str | None = None) -> "CatalogEntry":
        return CatalogEntry(
            key=self.key,
            params=dict(self.params),
            algebra=self.algebra,
            split=self.split,
            h_indices=tuple(int(i) for i in h_indices),
            matrices=self.matrices,
            tie_groups=self.tie_groups,
            description=self.description,
            name=name or self.name,
        )

    def to_document(self) -> dict:
        """Algebra document form (see parse.save_algebra_document)."""
        doc = self.algebra.to_dict()
        doc.update(self.split.to_dict())
        doc["h_indices"] = list(self.h_indices)
        return doc


# =============================================================================
# MATRIX HELPERS
# =============================================================================


def _unit(n: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((n, n))
    m[i, j] = 1.0
    return m


def structure_from_matrices(
    matrices: list[np.ndarray], names: list[str], tol: float = 1e-10
) -> LieAlgebra:
    """Solve [X_i, X_j] = c_ijk X_k by least squares over the flattened basis."""
    basis = np.stack([m.ravel() for m in matrices], axis=1)
    solve = np.linalg.pinv(basis)
    d = len(matrices)
    c = np.zeros((d, d, d))
    for i in range(d):
        for j in range(i + 1, d):
            commutator = matrices[i] @ matrices[j] - matrices[j] @ matrices[i]
            coeffs = solve @ commutator.ravel()
            miss = np.max(np.abs(basis @ coeffs - commutator.ravel()))
            if miss > tol:
                raise InputError(
                    f"span is not closed under the bracket ({names[i]}, {names[j]})",
                    check="closure",
                    details={"residual": float(miss)},
                )
            coeffs = np.round(coeffs, ROUND_DECIMALS)
            c[i, j] = coeffs
            c[j, i] = -coeffs
    return LieAlgebra.from_tensor(c, names)


# =============================================================================
# FAMILIES
# =============================================================================


def _sl(n: int) -> CatalogEntry:
    """
    sl(n,R) on the matrix-unit basis regrouped by the Cartan split.

    Order: A_ij = E_ij - E_ji (i < j, spans k = so(n)), then
    H_i = E_ii - E_{i+1,i+1}, then S_ij = E_ij + E_ji (i < j). The span is
    the usual E_ij (i != j) / H_i basis; E_ij = (S_ij + A_ij) / 2 and
    E_ji = (S_ij - A_ij) / 2, so constants in the E_ij basis follow by that
    change of basis.
    """
    if not isinstance(n, int) or n < 2:
        raise InputError("sl needs an integer n >= 2", check="params")
    skew, cartan, sym = [], [], []
    skew_names, cartan_names, sym_names = [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            skew.append(_unit(n, i, j) - _unit(n, j, i))
            skew_names.append(f"A{i}{j}")
            sym.append(_unit(n, i, j) + _unit(n, j, i))
            sym_names.append(f"S{i}{j}")
    for i in range(n - 1):
        cartan.append(_unit(n, i, i) - _unit(n, i + 1, i + 1))
        cartan_names.append(f"H{i}")

    matrices = skew + cartan + sym
    names = skew_names + cartan_names + sym_names
    nk = len(skew)
    dim = len(matrices)
    ties = (
        tuple(range(nk)),
        tuple(range(nk, nk + n - 1)),
        tuple(range(nk + n - 1, dim)),
    )
    return CatalogEntry(
        key="sl",
        params={"n": n},
        algebra=structure_from_matrices(matrices, names),
        split=CartanSplit(tuple(range(nk)), tuple(range(nk, dim))),
        matrices=tuple(matrices),
        tie_groups=ties,
        description=f"sl({n},R) with k = so({n}) and p = symmetric traceless",
    )


def _so(p: int, q: int) -> CatalogEntry:
    if not (isinstance(p, int) and isinstance(q, int)) or not p >= q >= 1:
        raise InputError("so needs integers p >= q >= 1", check="params")
    n = p + q
    k_mats, k_names, p_mats, p_names = [], [], [], []
    for block in (range(p), range(p, n)):
        for i in block:
            for j in block:
                if j > i:
                    k_mats.append(_unit(n, i, j) - _unit(n, j, i))
                    k_names.append(f"A{i}{j}")
    for i in range(p):
        for a in range(p, n):
            p_mats.append(_unit(n, i, a) + _unit(n, a, i))
            p_names.append(f"P{i}{a}")

    matrices = k_mats + p_mats
    nk = len(k_mats)
    return CatalogEntry(
        key="so",
        params={"p": p, "q": q},
        algebra=structure_from_matrices(matrices, k_names + p_names),
        split=CartanSplit(tuple(range(nk)), tuple(range(nk, len(matrices)))),
        matrices=tuple(matrices),
        tie_groups=tuple((i,) for i in range(len(matrices))),
        description=f"so({p},{q}) with k = so({p}) + so({q})",
    )


def _so_compact(n: int) -> CatalogEntry:
    if not isinstance(n, int) or n < 3:
        raise InputError("so_compact needs an integer n >= 3", check="params")
    mats, names = [], []
    for i in range(n):
        for j in range(i + 1, n):
            mats.append(_unit(n, i, j) - _unit(n, j, i))
            names.append(f"A{i}{j}")
    return CatalogEntry(
        key="so_compact",
        params={"n": n},
        algebra=structure_from_matrices(mats, names),
        split=CartanSplit(tuple(range(len(mats))), ()),
        matrices=tuple(mats),
        tie_groups=tuple((i,) for i in range(len(mats))),
        description=f"compact so({n}); p is empty",
    )


def _direct_sum(summands) -> CatalogEntry:
    if not summands:
        raise InputError("direct_sum needs at least one summand", check="params")
    parts = []
    for item in summands:
        try:
            name, params = item
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad summand {item!r}", check="params") from exc
        if name == "direct_sum":
            parts.append(_direct_sum(params.get("summands", [])))
        else:
            parts.append(_build_family(name, dict(params or {})))

    dim = sum(part.algebra.dim for part in parts)
    c = np.zeros((dim, dim, dim))
    names, k_idx, p_idx, mats, ties = [], [], [], [], []
    size = sum(part.matrices[0].shape[0] for part in parts)
    offset = row = 0
    for a, part in enumerate(parts):
        d = part.algebra.dim
        block = slice(offset, offset + d)
        c[block, block, block] = part.algebra.tensor
        names.extend(f"{name}_{a}" for name in part.algebra.basis_names)
        k_idx.extend(offset + i for i in part.split.k_indices)
        p_idx.extend(offset + i for i in part.split.p_indices)
        ties.extend(tuple(offset + i for i in group) for group in part.tie_groups)
        n = part.matrices[0].shape[0]
        for m in part.matrices:
            big = np.zeros((size, size))
            big[row : row + n, row : row + n] = m
            mats.append(big)
        offset += d
        row += n

    return CatalogEntry(
        key="direct_sum",
        params={"summands": [[p.key, p.params] for p in parts]},
        algebra=LieAlgebra.from_tensor(c, names),
        split=CartanSplit(tuple(k_idx), tuple(p_idx)),
        matrices=tuple(mats),
        tie_groups=tuple(ties),
        description=" + ".join(part.description.split(" with ")[0] for part in parts),
    )


def _build_family(key: str, params: dict) -> CatalogEntry:
    try:
        if key == "sl":
            return _sl(**params)
        if key == "so":
            return _so(**params)
        if key == "so_compact":
            return _so_compact(**params)
        if key == "direct_sum":
            return _direct_sum(params.get("summands", []))
    except TypeError as exc:
        raise InputError(f"invalid params for {key}: {params}", check="params") from exc
    raise InputError(f"unknown catalog key: {key}", check="catalog_key")


# =============================================================================
# PRESETS
# =============================================================================


@dataclass(frozen=True)
class Preset:
    key: str
    params: dict = field(default_factory=dict)
    isotropy: str = "none"
    description: str = ""


PRESETS: dict[str, Preset] = {
    "sl2r_trivial": Preset("sl", {"n": 2}, "none", "SL(2,R), trivial isotropy"),
    "sl3r_trivial": Preset("sl", {"n": 3}, "none", "SL(3,R), trivial isotropy"),
    "so_n_2_mod_so_n": Preset(
        "so", {"q": 2}, "first_block", "SO(n,2)/SO(n), param n"
    ),
    "so_3_2_mod_so_3": Preset(
        "so", {"p": 3, "q": 2}, "first_block", "SO(3,2)/SO(3)"
    ),
    "hyperbolic_plane": Preset("sl", {"n": 2}, "k", "SL(2,R)/SO(2)"),
    "sl2r_squared": Preset(
        "direct_sum",
        {"summands": [["sl", {"n": 2}], ["sl", {"n": 2}]]},
        "none",
        "SL(2,R) x SL(2,R), trivial isotropy",
    ),
    "so3_fiber": Preset("so_compact", {"n": 3}, "none", "compact SO(3), p empty"),
}


def _preset_entry(name: str, params: dict) -> CatalogEntry:
    preset = PRESETS[name]
    merged = dict(preset.params)
    if name == "so_n_2_mod_so_n":
        n = params.pop("n", 3)
        if not isinstance(n, int) or n < 2:
            raise InputError("so_n_2_mod_so_n needs an integer n >= 2", check="params")
        merged["p"] = n
    if params:
        raise InputError(
            f"unexpected params for {name}: {sorted(params)}", check="params"
        )

    entry = _build_family(preset.key, merged)
    if preset.isotropy == "k":
        h = entry.split.k_indices
    elif preset.isotropy == "first_block":
        p = merged["p"]
        h = tuple(range(p * (p - 1) // 2))
    else:
        h = ()
    return replace(
        entry, h_indices=tuple(h), description=preset.description, name=name
    )


def make_catalog_algebra(name: str, **params) -> CatalogEntry:
    """
    Build a catalog family ("sl", "so", "so_compact", "direct_sum") or preset.

    Raises InputError for unknown names or invalid params.
    """
    if name in PRESETS:
        entry = _preset_entry(name, dict(params))
    else:
        entry = _build_family(name, dict(params))
    logger.debug(
        "catalog %s: dim=%d, k=%d, p=%d",
        entry.label,
        entry.algebra.dim,
        len(entry.split.k_indices),
        len(entry.split.p_indices),
    )
    return entry


def list_catalog() -> list[str]:
    """Names of all presets, in catalog order."""
    return list(PRESETS)
