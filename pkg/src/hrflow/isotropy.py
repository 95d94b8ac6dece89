"""
Isotropy modules, Casimir constants and bracket coefficients.

Turns an adapted basis into a ReductiveSpace: the complement m = l + p is
split into ad(h)-irreducible modules, each certified by a one-dimensional
symmetric commutant (Schur). On top of the modules this file computes the
Casimir constants c_i, the bracket tensor [ijk] and the topology data that
decides which runs must go extinct.

Conventions:
- module indices run over l-modules first, then p-modules
- ``BracketTensor.values[i, j, k]`` is over module indices; h is not stored
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import null_space
from scipy.sparse.csgraph import connected_components

from .algebra import (
    AdaptedBasis,
    LieAlgebra,
    background_metric,
    killing_form,
    orthonormalize_adapted_basis,
    require_cartan_split,
    validate_algebra,
)
from .errors import InputError, InvalidAlgebra, InvalidIsotropy, NotIrreducible
from .models import DEFAULT_TOLERANCE, SCHUR_TOLERANCE, CheckReport

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-9
HASH_DECIMALS = 10


# =============================================================================
# TYPES
# =============================================================================


@dataclass(frozen=True, eq=False)
class ReductiveSpace:
    """
    A homogeneous space G/H with its irreducible module decomposition.

    ``alg`` is written in the final basis: Q-orthonormal, ordered (h, l, p),
    rotated inside each module block where the decomposition needed it.
    ``change_of_basis`` maps that basis back to the original one (columns).
    """

    alg: LieAlgebra
    h_indices: tuple[int, ...]
    l_indices: tuple[int, ...]
    p_indices: tuple[int, ...]
    modules: tuple[tuple[int, ...], ...]
    n_l: int
    change_of_basis: np.ndarray
    casimir: np.ndarray | None = None
    commutant_dims: tuple[int, ...] = ()
    seed: int = 0
    tie_groups: tuple[tuple[int, ...], ...] = ()
    label: str = ""

    @property
    def n_p(self) -> int:
        return len(self.modules) - self.n_l

    @property
    def n_modules(self) -> int:
        return len(self.modules)

    @property
    def dims(self) -> np.ndarray:
        return np.array([len(m) for m in self.modules], dtype=float)

    @property
    def b_flags(self) -> np.ndarray:
        return np.array([1.0] * self.n_l + [-1.0] * self.n_p)

    @property
    def l_modules(self) -> tuple[tuple[int, ...], ...]:
        return self.modules[: self.n_l]

    @property
    def p_modules(self) -> tuple[tuple[int, ...], ...]:
        return self.modules[self.n_l :]

    @property
    def dim_l(self) -> int:
        return len(self.l_indices)

    @property
    def dim_p(self) -> int:
        return len(self.p_indices)

    @property
    def dim_m(self) -> int:
        return self.dim_l + self.dim_p

    @property
    def k_indices(self) -> tuple[int, ...]:
        return self.h_indices + self.l_indices

    @property
    def m_indices(self) -> tuple[int, ...]:
        return self.l_indices + self.p_indices

    @cached_property
    def module_of(self) -> np.ndarray:
        """Module index of every position in m_indices order."""
        owner = {}
        for a, module in enumerate(self.modules):
            for idx in module:
                owner[idx] = a
        return np.array([owner[idx] for idx in self.m_indices], dtype=int)

    @cached_property
    def indicator(self) -> np.ndarray:
        """(dim m, N) 0/1 matrix sending m positions to their module."""
        E = np.zeros((self.dim_m, self.n_modules))
        E[np.arange(self.dim_m), self.module_of] = 1.0
        return E

    def module_weights(self, x: np.ndarray) -> np.ndarray:
        """Per m-position metric eigenvalue, expanded from per-module values."""
        return np.asarray(x, dtype=float)[self.module_of]

    def space_hash(self) -> str:
        """SHA-256 of the canonical JSON of the constants and the modules."""
        payload = {
            "dim": self.alg.dim,
            "brackets": [
                [i, j, k, round(v, HASH_DECIMALS)] for i, j, k, v in self.alg.structure
            ],
            "h": list(self.h_indices),
            "modules": [list(m) for m in self.modules],
            "n_l": self.n_l,
        }
        data = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True, eq=False)
class BracketTensor:
    """The symmetric coefficients [ijk] over module indices."""

    values: np.ndarray

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    def entries(self, cutoff: float = 1e-14):
        """Yield (i, j, k, value) for i <= j <= k with value above cutoff."""
        n = self.size
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    value = float(self.values[i, j, k])
                    if value > cutoff:
                        yield i, j, k, value

    def symmetry_residual(self) -> float:
        T = self.values
        if T.size == 0:
            return 0.0
        perms = [(1, 0, 2), (0, 2, 1), (2, 1, 0), (1, 2, 0), (2, 0, 1)]
        return float(max(np.max(np.abs(T - np.transpose(T, p))) for p in perms))

    def row_sums(self) -> np.ndarray:
        """Sum over j, k of [ijk] for every module i."""
        return self.values.sum(axis=(1, 2))

    def to_list(self) -> list[list]:
        return [[i, j, k, v] for i, j, k, v in self.entries()]


@dataclass
class TopologyRegime:
    """
    Whether G/H is contractible and, if not, the extinction rate data.

    ``w_basis`` and ``v_basis`` are Q-orthonormal columns in l coordinates
    (one row per entry of ``l_indices``) spanning W = centralizer of h in l
    and V = {X in W^perp : [l, X] in h}. ``w_modules``/``v_modules`` are the
    l-modules lying inside them. ``lambda_structural`` is None when no
    l-module is eligible.
    """

    contractible: bool
    eligible_indices: tuple[int, ...] = ()
    w_basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    v_basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    w_modules: tuple[int, ...] = ()
    v_modules: tuple[int, ...] = ()
    lambda_structural: float | None = None
    kk_leak: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def dim_w(self) -> int:
        return int(self.w_basis.shape[1]) if self.w_basis.ndim == 2 else 0

    @property
    def dim_v(self) -> int:
        return int(self.v_basis.shape[1]) if self.v_basis.ndim == 2 else 0

    @property
    def regime(self) -> str:
        return "immortal" if self.contractible else "extinct"

    def lambda_over_d(self, dim_m: int) -> float | None:
        if self.lambda_structural is None or dim_m == 0:
            return None
        return self.lambda_structural / dim_m

    def to_dict(self) -> dict:
        return {
            "contractible": self.contractible,
            "regime": self.regime,
            "eligible_indices": list(self.eligible_indices),
            "dim_w": self.dim_w,
            "dim_v": self.dim_v,
            "w_modules": list(self.w_modules),
            "v_modules": list(self.v_modules),
            "w_basis": self.w_basis.T.tolist(),
            "v_basis": self.v_basis.T.tolist(),
            "lambda_structural": self.lambda_structural,
            "kk_leak": self.kk_leak,
            "notes": list(self.notes),
        }


# =============================================================================
# MODULE DECOMPOSITION
# =============================================================================


def _symmetric_basis(d: int) -> list[np.ndarray]:
    basis = []
    for i in range(d):
        for j in range(i, d):
            m = np.zeros((d, d))
            if i == j:
                m[i, i] = 1.0
            else:
                m[i, j] = m[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(m)
    return basis


def symmetric_commutant(
    actions: list[np.ndarray], d: int, tol: float = 1e-10
) -> list[np.ndarray]:
    """Basis of symmetric d x d matrices S with A S = S A for every A in ``actions``."""
    sym = _symmetric_basis(d)
    if not actions:
        return sym
    rows = np.concatenate(
        [np.stack([(A @ S - S @ A).ravel() for S in sym], axis=1) for A in actions],
        axis=0,
    )
    coeffs = null_space(rows, rcond=tol)
    return [sum(c * S for c, S in zip(col, sym, strict=True)) for col in coeffs.T]


def _cluster(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group indices of sorted eigenvalues whose gaps stay below tol."""
    order = np.argsort(values)
    groups = [[order[0]]]
    for prev, cur in zip(order, order[1:], strict=False):
        if values[cur] - values[prev] > tol:
            groups.append([cur])
        else:
            groups[-1].append(cur)
    return [np.array(g) for g in groups]


def _split_irreducible(
    actions: list[np.ndarray], d: int, rng: np.random.Generator, tol: float
) -> tuple[list[np.ndarray], list[int]]:
    """
    Orthonormal bases (columns) of the irreducible pieces of a representation.

    Recurses on eigenspaces of a random symmetric commutant element until the
    commutant is one-dimensional.
    """
    commutant = symmetric_commutant(actions, d, tol)
    if len(commutant) <= 1:
        return [np.eye(d)], [max(len(commutant), 1)]

    coef = rng.standard_normal(len(commutant))
    coef /= np.linalg.norm(coef)
    element = sum(c * S for c, S in zip(coef, commutant, strict=True))
    eigvals, eigvecs = np.linalg.eigh(element)
    scale = max(float(np.max(np.abs(eigvals))), 1.0)
    groups = _cluster(eigvals, 1e-6 * scale)
    if len(groups) == 1:
        raise NotIrreducible(
            "random commutant element is scalar but the commutant is not",
            check="commutant_split",
            details={"commutant_dim": len(commutant)},
        )

    pieces, certs = [], []
    for group in groups:
        V = eigvecs[:, group]
        sub_actions = [V.T @ A @ V for A in actions]
        sub_pieces, sub_certs = _split_irreducible(sub_actions, V.shape[1], rng, tol)
        pieces.extend(V @ piece for piece in sub_pieces)
        certs.extend(sub_certs)
    return pieces, certs


def _coordinate_positions(piece: np.ndarray, tol: float = 1e-12) -> list[int] | None:
    """Positions if every column is a signed unit vector, else None."""
    positions = []
    for col in piece.T:
        support = np.flatnonzero(np.abs(col) > tol)
        if support.size != 1 or abs(abs(col[support[0]]) - 1.0) > tol:
            return None
        positions.append(int(support[0]))
    return positions


def _decompose_block(
    alg: LieAlgebra,
    h: list[int],
    block: list[int],
    rng: np.random.Generator,
    tol: float,
    rotation: np.ndarray,
) -> tuple[list[tuple[int, ...]], list[int]]:
    """Modules of one block (l or p); fills ``rotation`` where a split rotates."""
    if not block:
        return [], []
    ad = alg.ad_matrices()
    outside = [i for i in range(alg.dim) if i not in set(block)]
    actions = []
    for a in h:
        if outside:
            leak = float(np.max(np.abs(ad[a][np.ix_(outside, block)])))
            if leak > tol * max(alg.max_abs, 1.0):
                raise InvalidIsotropy(
                    "block is not ad(h)-invariant",
                    check="invariance",
                    details={"leak": leak, "h_index": a},
                )
        actions.append(ad[a][np.ix_(block, block)])

    adjacency = np.zeros((len(block), len(block)))
    for A in actions:
        adjacency += np.abs(A) > tol
    n_comp, labels = connected_components(adjacency, directed=False, return_labels=True)

    modules, certs = [], []
    for comp in range(n_comp):
        local = np.flatnonzero(labels == comp)
        positions = [block[i] for i in local]
        comp_actions = [A[np.ix_(local, local)] for A in actions]
        pieces, piece_certs = _split_irreducible(comp_actions, len(local), rng, tol)
        coords = [_coordinate_positions(piece) for piece in pieces]
        if all(c is not None for c in coords):
            for c in coords:
                modules.append(tuple(sorted(positions[i] for i in c)))
        else:
            R = np.concatenate(pieces, axis=1)
            rotation[np.ix_(positions, positions)] = R
            start = 0
            for piece in pieces:
                width = piece.shape[1]
                modules.append(tuple(positions[start : start + width]))
                start += width
        certs.extend(piece_certs)

    order = np.argsort([m[0] for m in modules], kind="stable")
    return [modules[i] for i in order], [certs[i] for i in order]


def decompose_modules(
    adapted: AdaptedBasis, seed: int = 0, tol: float = DEFAULT_TOLERANCE
) -> ReductiveSpace:
    """
    Split l and p into ad(h)-irreducible modules.

    The returned space has no Casimir constants yet; see casimir_constants.
    """
    alg = adapted.algebra
    h = list(adapted.h_indices)
    rng = np.random.default_rng(seed)
    rotation = np.eye(alg.dim)

    l_modules, l_certs = _decompose_block(
        alg, h, list(adapted.l_indices), rng, tol, rotation
    )
    p_modules, p_certs = _decompose_block(
        alg, h, list(adapted.p_indices), rng, tol, rotation
    )

    if not np.allclose(rotation, np.eye(alg.dim), atol=1e-14, rtol=0.0):
        names = tuple(
            name if np.isclose(rotation[i, i], 1.0) else f"{name}'"
            for i, name in enumerate(alg.basis_names)
        )
        alg = alg.change_basis(rotation, names)
        logger.debug("module split rotated the basis inside l or p")

    space = ReductiveSpace(
        alg=alg,
        h_indices=adapted.h_indices,
        l_indices=adapted.l_indices,
        p_indices=adapted.p_indices,
        modules=tuple(l_modules + p_modules),
        n_l=len(l_modules),
        change_of_basis=adapted.change_of_basis @ rotation,
        commutant_dims=tuple(l_certs + p_certs),
        seed=seed,
    )
    logger.info(
        "found %d l-modules and %d p-modules (dims %s)",
        space.n_l,
        space.n_p,
        [len(m) for m in space.modules],
    )
    return space


# =============================================================================
# CASIMIR AND BRACKET COEFFICIENTS
# =============================================================================


def casimir_constants(
    space: ReductiveSpace, tol: float = SCHUR_TOLERANCE
) -> np.ndarray:
    """
    c_i from C = -sum_a ad(E_a)^2 restricted to each module (E_a Q-orthonormal in h).

    Raises NotIrreducible when C is not scalar on a module.
    """
    ad = space.alg.ad_matrices()
    values = []
    for a, module in enumerate(space.modules):
        idx = list(module)
        C = np.zeros((len(idx), len(idx)))
        for h in space.h_indices:
            A = ad[h][np.ix_(idx, idx)]
            C -= A @ A
        c = float(np.trace(C)) / len(idx)
        off = float(np.max(np.abs(C - c * np.eye(len(idx)))))
        if off > tol:
            raise NotIrreducible(
                f"Casimir is not scalar on module {a}",
                check="casimir_scalar",
                details={"module": a, "residual": off, "casimir": c},
            )
        values.append(c)
    return np.array(values)


def bracket_coefficients(space: ReductiveSpace) -> BracketTensor:
    """[ijk] = sum of Q([E_a, E_b], E_c)^2 over Q-orthonormal bases of the modules."""
    m = list(space.m_indices)
    if not m:
        return BracketTensor(np.zeros((0, 0, 0)))
    squares = space.alg.tensor[np.ix_(m, m, m)] ** 2
    E = space.indicator
    values = np.einsum("abc,ai,bj,ck->ijk", squares, E, E, E)
    return BracketTensor(values)


def sum_identity_check(
    space: ReductiveSpace, tensor: BracketTensor, tol: float = IDENTITY_TOLERANCE
) -> CheckReport:
    """Residual of sum_jk [ijk] = d_i (1 - 2 c_i) per module, plus 0 <= sum <= d_i."""
    report = CheckReport(name="sum_identity", tolerance=tol)
    sums = tensor.row_sums()
    dims = space.dims
    casimir = space.casimir if space.casimir is not None else casimir_constants(space)
    for i, (s, d, c) in enumerate(zip(sums, dims, casimir, strict=True)):
        residual = abs(s - d * (1.0 - 2.0 * c))
        report.record(f"module_{i}", residual, residual <= tol)
        slack = min(s, d - s)
        report.record(f"bound_{i}", slack, slack >= -tol)
    return report


def odd_p_residual(space: ReductiveSpace, tensor: BracketTensor) -> float:
    """Largest [ijk] with an odd number of p-module indices."""
    parity = np.array([0] * space.n_l + [1] * space.n_p)
    total = parity[:, None, None] + parity[None, :, None] + parity[None, None, :]
    odd = tensor.values[total % 2 == 1]
    return float(np.max(odd)) if odd.size else 0.0


# =============================================================================
# TOPOLOGY
# =============================================================================


def _modules_inside(
    space: ReductiveSpace, basis: np.ndarray, tol: float
) -> tuple[int, ...]:
    """l-modules whose coordinate vectors lie in the span of ``basis``."""
    if not basis.size:
        return ()
    position = {idx: n for n, idx in enumerate(space.l_indices)}
    leftover = np.eye(basis.shape[0]) - basis @ basis.T
    inside = []
    for a, module in enumerate(space.l_modules):
        cols = [position[idx] for idx in module]
        if float(np.max(np.abs(leftover[:, cols]))) <= 1e3 * tol:
            inside.append(a)
    return tuple(inside)


def classify_topology(
    space: ReductiveSpace,
    tensor: BracketTensor | None = None,
    tol: float = DEFAULT_TOLERANCE,
) -> TopologyRegime:
    """Contractibility ([k,k] in h), eligible l-modules, W, V and the rate constant."""
    c = space.alg.tensor
    k = list(space.k_indices)
    l = list(space.l_indices)
    h = list(space.h_indices)
    scale = max(space.alg.max_abs, 1.0)
    if tensor is None:
        tensor = bracket_coefficients(space)

    kk_leak = float(np.max(np.abs(c[np.ix_(k, k, l)]))) if k and l else 0.0
    contractible = kk_leak <= tol * scale

    eligible = []
    for a, module in enumerate(space.l_modules):
        leak = float(np.max(np.abs(c[np.ix_(list(module), k, l)])))
        if leak > tol * scale:
            eligible.append(a)

    W = V = np.zeros((len(l), 0))
    if l:
        ad = space.alg.ad_matrices()
        if h:
            stacked = np.concatenate([ad[a][np.ix_(l, l)] for a in h], axis=0)
            W = null_space(stacked, rcond=tol)
        else:
            W = np.eye(len(l))
        W_perp = null_space(W.T, rcond=tol) if W.shape[1] else np.eye(len(l))
        if W_perp.shape[1]:
            stacked = np.concatenate([ad[y][np.ix_(l, l)] @ W_perp for y in l], axis=0)
            V = W_perp @ null_space(stacked, rcond=tol)

    lam = None
    if eligible:
        sums = tensor.row_sums()
        ln = space.n_l
        candidates = []
        for i in eligible:
            d_i = space.dims[i]
            within_l = float(tensor.values[i, :ln, :ln].sum())
            candidates.append(max(d_i - sums[i], 0.5 * within_l))
        lam = float(min(candidates))

    regime = TopologyRegime(
        contractible=contractible,
        eligible_indices=tuple(eligible),
        w_basis=W,
        v_basis=V,
        w_modules=_modules_inside(space, W, tol),
        v_modules=_modules_inside(space, V, tol),
        lambda_structural=lam,
        kk_leak=kk_leak,
    )
    if not contractible and lam is not None and lam <= 0:
        regime.notes.append("non-contractible but the rate constant is not positive")
    logger.info(
        "topology: %s, eligible=%s, lambda=%s",
        regime.regime,
        list(regime.eligible_indices),
        lam,
    )
    return regime


# =============================================================================
# PIPELINE
# =============================================================================


def _module_tie_groups(
    space: ReductiveSpace, groups: tuple[tuple[int, ...], ...]
) -> tuple[tuple[int, ...], ...]:
    """Translate tie groups of original basis indices into module index groups."""
    if not space.modules:
        return ()
    P = space.change_of_basis
    dominant = []
    for module in space.modules:
        weight = np.sum(P[:, list(module)] ** 2, axis=1)
        dominant.append(int(np.argmax(weight)))

    owner = {}
    for g, group in enumerate(groups):
        for idx in group:
            owner[int(idx)] = g
    merged: dict[object, list[int]] = {}
    for a, idx in enumerate(dominant):
        key = owner.get(idx, ("solo", a))
        merged.setdefault(key, []).append(a)
    return tuple(sorted((tuple(v) for v in merged.values()), key=lambda t: t[0]))


def build_space(
    source,
    seed: int = 0,
    tol: float = DEFAULT_TOLERANCE,
    require_noncompact: bool = False,
) -> ReductiveSpace:
    """
    Run validate, Killing form, Cartan check, Q, orthonormalize, decompose, Casimir.

    ``source`` is a CatalogEntry, an AlgebraDocument or a plain algebra document
    dict. Raises the matching HRFlowError at the first failing stage.
    """
    if isinstance(source, dict):
        from .parse import algebra_from_document

        source = algebra_from_document(source)
    try:
        alg, split, h_indices = source.algebra, source.split, source.h_indices
    except AttributeError as exc:
        raise InputError(f"cannot build a space from {type(source).__name__}") from exc
    label = getattr(source, "label", "") or ""
    tie_groups = getattr(source, "tie_groups", ()) or ()

    report = validate_algebra(alg, tol)
    if not report.passed:
        raise InvalidAlgebra(
            f"structure constants fail {report.failed[0]}",
            check=report.failed[0],
            details=report.to_dict(),
        )
    B = killing_form(alg)
    require_cartan_split(alg, B, split, tol=tol, require_noncompact=require_noncompact)
    Q = background_metric(alg, B, split)
    adapted = orthonormalize_adapted_basis(alg, Q, split, h_indices, tol)
    space = decompose_modules(adapted, seed=seed, tol=tol)
    space = replace(space, casimir=casimir_constants(space), label=label)
    return replace(space, tie_groups=_module_tie_groups(space, tie_groups))


def decomposition_report(
    space: ReductiveSpace, tensor: BracketTensor, regime: TopologyRegime
) -> dict:
    """The decomposition.json document."""
    casimir = space.casimir if space.casimir is not None else casimir_constants(space)
    modules = []
    for a, module in enumerate(space.modules):
        modules.append(
            {
                "index": a,
                "block": "l" if a < space.n_l else "p",
                "basis_indices": list(module),
                "basis_names": [space.alg.basis_names[i] for i in module],
                "d": len(module),
                "c": float(casimir[a]),
                "b": int(space.b_flags[a]),
                "commutant_dim": (
                    space.commutant_dims[a] if a < len(space.commutant_dims) else None
                ),
            }
        )
    return {
        "label": space.label,
        "dim": space.alg.dim,
        "dim_h": len(space.h_indices),
        "dim_l": space.dim_l,
        "dim_p": space.dim_p,
        "modules": modules,
        "tie_groups": [list(g) for g in space.tie_groups],
        "regime": regime.to_dict(),
        "eligible_indices": list(regime.eligible_indices),
        "brackets": tensor.to_list(),
        "seed": space.seed,
        "space_hash": space.space_hash(),
    }
