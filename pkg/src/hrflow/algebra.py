"""
Lie algebras given by structure constants.

Covers the algebraic ground floor of the pipeline: the structure-constant
representation, Killing form, Cartan split validation, the background
metric Q and the Q-orthonormal basis adapted to h + l + p.

Conventions:
- ``tensor[i, j, k]`` is the k-th coefficient of [e_i, e_j]
- ``ad_matrices()[i]`` is the matrix of ad(e_i), so ``ad[i][k, j] = tensor[i, j, k]``
- residuals are relative to the largest structure constant unless noted
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InputError, InvalidCartanSplit, InvalidIsotropy, NotSemisimple
from .models import DEFAULT_TOLERANCE, CheckReport

logger = logging.getLogger(__name__)

SIGNATURE_TOLERANCE = 1e-9
# Entries below this fraction of the largest constant are dropped when
# rebuilding a sparse structure from a dense tensor.
DROP_RELATIVE = 1e-14

Entry = tuple[int, int, int, float]


# =============================================================================
# TYPES
# =============================================================================


@dataclass(frozen=True, eq=False)
class LieAlgebra:
    """
    A real Lie algebra as a sparse list of structure constants.

    Canonical instances only store entries with i < j; the other half is
    implied by antisymmetry. Entries with i >= j are accepted (documents may
    carry them) and show up in the antisymmetry residual if inconsistent.
    """

    dim: int
    basis_names: tuple[str, ...]
    structure: tuple[Entry, ...] = ()

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise InputError("algebra dimension must be >= 1", check="dim")
        names = tuple(str(n) for n in self.basis_names)
        if len(names) != self.dim:
            raise InputError(
                f"{len(names)} basis names for dimension {self.dim}", check="basis"
            )
        entries = []
        for entry in self.structure:
            if len(entry) != 4:
                raise InputError(f"malformed structure entry {entry!r}", check="entry")
            i, j, k, value = entry
            if not all(isinstance(idx, (int, np.integer)) for idx in (i, j, k)):
                raise InputError(f"non-integer index in {entry!r}", check="entry")
            if not all(0 <= idx < self.dim for idx in (i, j, k)):
                raise InputError(
                    f"structure entry {entry!r} out of range for dim {self.dim}",
                    check="index_range",
                    details={"entry": [int(i), int(j), int(k), float(value)]},
                )
            entries.append((int(i), int(j), int(k), float(value)))
        object.__setattr__(self, "basis_names", names)
        object.__setattr__(self, "structure", tuple(entries))

    @cached_property
    def tensor(self) -> np.ndarray:
        """Dense c[i, j, k]; the implied antisymmetric half is filled in."""
        n = self.dim
        c = np.zeros((n, n, n))
        given = {(i, j, k) for i, j, k, _ in self.structure}
        for i, j, k, value in self.structure:
            c[i, j, k] = value
        for i, j, k, value in self.structure:
            if i != j and (j, i, k) not in given:
                c[j, i, k] = -value
        c.flags.writeable = False
        return c

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.tensor))) if self.structure else 0.0

    def ad_matrices(self) -> np.ndarray:
        """Stack of ad(e_i) matrices, shape (dim, dim, dim)."""
        return np.transpose(self.tensor, (0, 2, 1))

    def bracket(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.einsum("i,j,ijk->k", v, w, self.tensor)

    def change_basis(
        self, columns: np.ndarray, names: tuple[str, ...] | None = None
    ) -> "LieAlgebra":
        """
        Rewrite the algebra in the basis whose vectors are ``columns``.

        Column a holds the old coordinates of the new basis vector f_a.
        """
        P = np.asarray(columns, dtype=float)
        if P.shape != (self.dim, self.dim):
            raise InputError("change of basis must be square", check="change_basis")
        P_inv = np.linalg.inv(P)
        images = np.einsum("ia,jb,ijk->abk", P, P, self.tensor)
        new = np.einsum("ck,abk->abc", P_inv, images)
        names = names or tuple(f"f{a}" for a in range(self.dim))
        return LieAlgebra.from_tensor(new, names)

    @classmethod
    def from_tensor(
        cls, tensor: np.ndarray, names: tuple[str, ...] | list[str]
    ) -> "LieAlgebra":
        """Build the canonical sparse form (i < j) of a dense tensor."""
        c = np.asarray(tensor, dtype=float)
        n = c.shape[0]
        scale = float(np.max(np.abs(c))) if c.size else 0.0
        cutoff = DROP_RELATIVE * scale
        entries = [
            (i, j, k, float(c[i, j, k]))
            for i in range(n)
            for j in range(i + 1, n)
            for k in range(n)
            if abs(c[i, j, k]) > cutoff
        ]
        return cls(n, tuple(names), tuple(entries))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "basis": list(self.basis_names),
            "brackets": [[i, j, k, v] for i, j, k, v in self.structure],
        }


@dataclass(frozen=True, eq=False)
class BilinearForm:
    """A symmetric bilinear form on the algebra, as a matrix."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        m = 0.5 * (m + m.T)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def __call__(self, v: np.ndarray, w: np.ndarray) -> float:
        return float(v @ self.matrix @ w)

    def block(self, rows, cols) -> np.ndarray:
        return self.matrix[np.ix_(list(rows), list(cols))]

    def signature(self, tol: float = SIGNATURE_TOLERANCE) -> tuple[int, int, int]:
        """(n_plus, n_zero, n_minus); zero means below tol * max |eigenvalue|."""
        eig = np.linalg.eigvalsh(self.matrix)
        scale = float(np.max(np.abs(eig))) if eig.size else 0.0
        if scale == 0.0:
            return 0, int(eig.size), 0
        cut = tol * scale
        n_plus = int(np.sum(eig > cut))
        n_minus = int(np.sum(eig < -cut))
        return n_plus, int(eig.size) - n_plus - n_minus, n_minus


@dataclass(frozen=True)
class CartanSplit:
    """Index sets of k and p in the algebra basis."""

    k_indices: tuple[int, ...]
    p_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "k_indices", tuple(int(i) for i in self.k_indices))
        object.__setattr__(self, "p_indices", tuple(int(i) for i in self.p_indices))

    def is_partition(self, dim: int) -> bool:
        both = list(self.k_indices) + list(self.p_indices)
        return len(both) == dim and set(both) == set(range(dim))

    def to_dict(self) -> dict:
        return {"k_indices": list(self.k_indices), "p_indices": list(self.p_indices)}


@dataclass(frozen=True, eq=False)
class AdaptedBasis:
    """
    A Q-orthonormal basis ordered (h, l, p) and its provenance.

    ``change_of_basis`` has the original coordinates of the new basis
    vectors as columns.
    """

    algebra: LieAlgebra
    change_of_basis: np.ndarray
    h_indices: tuple[int, ...]
    l_indices: tuple[int, ...]
    p_indices: tuple[int, ...]

    @property
    def k_indices(self) -> tuple[int, ...]:
        return self.h_indices + self.l_indices

    @property
    def m_indices(self) -> tuple[int, ...]:
        return self.l_indices + self.p_indices

    @property
    def split(self) -> CartanSplit:
        return CartanSplit(self.k_indices, self.p_indices)


# =============================================================================
# CHECKS
# =============================================================================


def validate_algebra(alg: LieAlgebra, tol: float = DEFAULT_TOLERANCE) -> CheckReport:
    """Report antisymmetry and Jacobi residuals; passes iff both are below tol."""
    c = alg.tensor
    report = CheckReport(name="algebra", tolerance=tol)

    antisym = float(np.max(np.abs(c + np.transpose(c, (1, 0, 2))))) if c.size else 0.0
    report.record("antisymmetry", antisym, antisym <= tol)

    jacobi = (
        np.einsum("jkm,iml->ijkl", c, c)
        + np.einsum("kim,jml->ijkl", c, c)
        + np.einsum("ijm,kml->ijkl", c, c)
    )
    scale = max(alg.max_abs**2, 1.0) if alg.structure else 1.0
    jacobi_res = float(np.max(np.abs(jacobi))) / scale
    report.record("jacobi", jacobi_res, jacobi_res <= tol)

    if report.passed:
        logger.debug("algebra of dim %d passes validation", alg.dim)
    else:
        logger.warning("algebra validation failed: %s", report.failed)
    return report


def killing_form(alg: LieAlgebra) -> BilinearForm:
    """B(X, Y) = tr(ad X ad Y) on the algebra basis."""
    c = alg.tensor
    return BilinearForm(np.einsum("ilk,jkl->ij", c, c))


def ad_invariance_residual(alg: LieAlgebra, form: BilinearForm) -> float:
    """max |B([Z,X],Y) + B(X,[Z,Y])| relative to max |B|."""
    c = alg.tensor
    B = form.matrix
    defect = np.einsum("zxk,ky->zxy", c, B) + np.einsum("zyk,xk->zxy", c, B)
    scale = float(np.max(np.abs(B))) or 1.0
    return float(np.max(np.abs(defect))) / scale


def cartan_validate(
    alg: LieAlgebra,
    form: BilinearForm,
    split: CartanSplit,
    tol: float = DEFAULT_TOLERANCE,
    signature_tol: float = SIGNATURE_TOLERANCE,
    require_noncompact: bool = False,
) -> CheckReport:
    """
    Check every property of a Cartan split and report residuals.

    Sub-checks: partition, nondegenerate (Cartan criterion), unimodular,
    killing_kp, k_negative, p_positive, bracket_kk, bracket_kp, bracket_pp
    and, when requested, p_nonempty.
    """
    report = CheckReport(name="cartan", tolerance=tol)
    k = list(split.k_indices)
    p = list(split.p_indices)
    B = form.matrix
    c = alg.tensor

    report.record("partition", 0.0 if split.is_partition(alg.dim) else 1.0,
                  split.is_partition(alg.dim))
    if not split.is_partition(alg.dim):
        return report

    eig = np.linalg.eigvalsh(B)
    b_scale = float(np.max(np.abs(eig)))
    min_rel = float(np.min(np.abs(eig))) / b_scale if b_scale > 0 else 0.0
    report.record("nondegenerate", min_rel, min_rel > signature_tol)

    c_scale = alg.max_abs or 1.0
    trace_ad = np.abs(np.einsum("ijj->i", c))
    unimod = float(np.max(trace_ad)) / c_scale
    report.record("unimodular", unimod, unimod <= tol)

    norm = b_scale or 1.0
    if k and p:
        mixed = float(np.max(np.abs(B[np.ix_(k, p)]))) / norm
        report.record("killing_kp", mixed, mixed <= tol)
    if k:
        top = float(np.max(np.linalg.eigvalsh(B[np.ix_(k, k)]))) / norm
        report.record("k_negative", top, top < -signature_tol)
    if p:
        bottom = float(np.min(np.linalg.eigvalsh(B[np.ix_(p, p)]))) / norm
        report.record("p_positive", bottom, bottom > signature_tol)
    elif require_noncompact:
        report.record("p_nonempty", 1.0, False)

    def leak(rows, cols, target) -> float:
        if not rows or not cols or not target:
            return 0.0
        return float(np.max(np.abs(c[np.ix_(rows, cols, target)]))) / c_scale

    for key, value in (
        ("bracket_kk", leak(k, k, p)),
        ("bracket_kp", leak(k, p, k)),
        ("bracket_pp", leak(p, p, p)),
    ):
        report.record(key, value, value <= tol)

    return report


def require_cartan_split(
    alg: LieAlgebra, form: BilinearForm, split: CartanSplit, **kwargs
) -> CheckReport:
    """Run cartan_validate and raise the matching error on failure."""
    report = cartan_validate(alg, form, split, **kwargs)
    if report.passed:
        return report
    details = report.to_dict()
    first = report.failed[0]
    if first == "partition":
        raise InputError("split index sets do not partition the basis",
                         check=first, details=details)
    if first in ("nondegenerate", "unimodular"):
        raise NotSemisimple(f"algebra is not semisimple ({first})",
                            check=first, details=details)
    raise InvalidCartanSplit(f"Cartan split check failed: {first}",
                             check=first, details=details)


# =============================================================================
# BACKGROUND METRIC AND ADAPTED BASIS
# =============================================================================


def background_metric(
    alg: LieAlgebra, form: BilinearForm, split: CartanSplit
) -> BilinearForm:
    """Q = -B on k, +B on p, zero on the mixed block."""
    B = form.matrix
    Q = np.zeros_like(B)
    k = list(split.k_indices)
    p = list(split.p_indices)
    if k:
        Q[np.ix_(k, k)] = -B[np.ix_(k, k)]
    if p:
        Q[np.ix_(p, p)] = B[np.ix_(p, p)]
    return BilinearForm(Q)


def _gram_schmidt(
    candidates: np.ndarray,
    Q: np.ndarray,
    against: list[np.ndarray],
    rank_tol: float = 1e-9,
) -> list[np.ndarray]:
    """Classical Gram-Schmidt with one reorthogonalization pass."""
    basis = list(against)
    accepted: list[np.ndarray] = []
    for v0 in candidates.T:
        v = v0.astype(float).copy()
        length0 = np.sqrt(max(v0 @ Q @ v0, 0.0))
        for _ in range(2):
            coeffs = [u @ Q @ v for u in basis]
            for u, coef in zip(basis, coeffs, strict=True):
                v = v - coef * u
        length = np.sqrt(max(v @ Q @ v, 0.0))
        if length0 == 0.0 or length <= rank_tol * length0:
            continue
        v = v / length
        basis.append(v)
        accepted.append(v)
    return accepted


def _vector_name(vector: np.ndarray, names: tuple[str, ...], fallback: str) -> str:
    support = np.flatnonzero(np.abs(vector) > 1e-12)
    if support.size == 1:
        return names[int(support[0])]
    return fallback


def orthonormalize_adapted_basis(
    alg: LieAlgebra,
    Q: BilinearForm,
    split: CartanSplit,
    h_indices: tuple[int, ...] | list[int],
    tol: float = DEFAULT_TOLERANCE,
) -> AdaptedBasis:
    """
    Build the Q-orthonormal basis (h, l, p) with l = h^perp inside k.

    Raises InvalidIsotropy if h is not inside k or not a subalgebra.
    """
    h = [int(i) for i in h_indices]
    k = list(split.k_indices)
    p = list(split.p_indices)
    outside = sorted(set(h) - set(k))
    if outside:
        raise InvalidIsotropy(
            "isotropy is not contained in k",
            check="h_in_k",
            details={"outside_k": outside},
        )
    if h:
        rest = [i for i in range(alg.dim) if i not in set(h)]
        leak = 0.0
        if rest:
            leak = float(np.max(np.abs(alg.tensor[np.ix_(h, h, rest)])))
        if leak > tol * (alg.max_abs or 1.0):
            raise InvalidIsotropy(
                "isotropy is not a subalgebra",
                check="h_subalgebra",
                details={"leak": leak},
            )

    Qm = Q.matrix
    eye = np.eye(alg.dim)
    h_vectors = _gram_schmidt(eye[:, h], Qm, []) if h else []
    if len(h_vectors) != len(h):
        raise InvalidIsotropy("isotropy basis is degenerate under Q", check="h_rank")
    l_vectors = _gram_schmidt(eye[:, k], Qm, h_vectors) if k else []
    if len(h_vectors) + len(l_vectors) != len(k):
        raise InvalidIsotropy("could not complete h to a basis of k", check="l_rank")
    p_vectors = _gram_schmidt(eye[:, p], Qm, []) if p else []
    if len(p_vectors) != len(p):
        raise InvalidCartanSplit("p is degenerate under Q", check="p_rank")

    columns = h_vectors + l_vectors + p_vectors
    P = np.column_stack(columns)
    names = tuple(
        [_vector_name(v, alg.basis_names, f"h{a}") for a, v in enumerate(h_vectors)]
        + [_vector_name(v, alg.basis_names, f"l{a}") for a, v in enumerate(l_vectors)]
        + [_vector_name(v, alg.basis_names, f"p{a}") for a, v in enumerate(p_vectors)]
    )
    adapted = alg.change_basis(P, names)

    gram = P.T @ Qm @ P
    defect = float(np.max(np.abs(gram - np.eye(alg.dim))))
    if defect > 1e-9:
        raise InvalidCartanSplit("adapted basis is not Q-orthonormal",
                                 check="orthonormal", details={"defect": defect})

    nh, nl = len(h_vectors), len(l_vectors)
    logger.debug("adapted basis: dim h=%d, dim l=%d, dim p=%d", nh, nl, len(p_vectors))
    return AdaptedBasis(
        algebra=adapted,
        change_of_basis=P,
        h_indices=tuple(range(nh)),
        l_indices=tuple(range(nh, nh + nl)),
        p_indices=tuple(range(nh + nl, alg.dim)),
    )
