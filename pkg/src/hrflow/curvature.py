"""
Ricci and scalar curvature of awesome metrics.

Two independent routes to the Ricci tensor live here:
- ricci_eigen: the eigenvalue formula over bracket coefficients [ijk]
- ricci_full: the orthonormal-frame formula on the Q-orthonormal basis of m

The flow integrates the first and cross-checks it against the second.

Data Typing:
- ``state.x`` is indexed by module
- ricci_full matrices are indexed by m positions (l_indices + p_indices)
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import EmptyFiber, InputError
from .isotropy import BracketTensor, ReductiveSpace
from .models import CheckReport, MetricState, RicciData

logger = logging.getLogger(__name__)

BOUND_TOLERANCE = 1e-9
DIAGONALITY_TOLERANCE = 1e-8
DIAGONALITY_ROUNDOFF = 1e-15


def _check_layout(state: MetricState, space: ReductiveSpace) -> None:
    if state.size != space.n_modules or state.n_l != space.n_l:
        raise InputError(
            f"metric has {state.size} entries (n_l={state.n_l}); "
            f"space has {space.n_modules} modules (n_l={space.n_l})",
            check="layout",
        )


# =============================================================================
# EIGENVALUE ROUTE
# =============================================================================


def ricci_eigen(
    state: MetricState, space: ReductiveSpace, tensor: BracketTensor
) -> np.ndarray:
    """Ricci eigenvalues r_i, one per module."""
    _check_layout(state, space)
    x = state.x
    T = tensor.values
    inv = 1.0 / x
    # sum_jk T_ijk / (x_j x_k) and sum_jk T_ijk x_k / x_j
    first = np.einsum("ijk,j,k->i", T, inv, inv)
    second = np.einsum("ijk,j,k->i", T, inv, x)
    bracket = x * first - 2.0 * second * inv
    return space.b_flags / (2.0 * x) + bracket / (4.0 * space.dims)


def scalar_curvature(
    state: MetricState, space: ReductiveSpace, tensor: BracketTensor
) -> float:
    """R = sum_l d/(2l) - sum_p d/(2p) - 1/4 sum [ijk] x_i/(x_j x_k)."""
    _check_layout(state, space)
    x = state.x
    inv = 1.0 / x
    linear = float(np.sum(space.b_flags * space.dims / (2.0 * x)))
    cubic = float(np.einsum("ijk,i,j,k->", tensor.values, x, inv, inv))
    return linear - 0.25 * cubic


def ricci_data(
    state: MetricState,
    space: ReductiveSpace,
    tensor: BracketTensor,
    full: bool = False,
) -> RicciData:
    r = ricci_eigen(state, space, tensor)
    R = scalar_curvature(state, space, tensor)
    return RicciData(r=r, R=R, full=ricci_full(state, space) if full else None)


# =============================================================================
# FULL TENSOR ROUTE
# =============================================================================


def _m_constants(space: ReductiveSpace) -> np.ndarray:
    m = list(space.m_indices)
    return space.alg.tensor[np.ix_(m, m, m)]


def ricci_full(state: MetricState, space: ReductiveSpace) -> np.ndarray:
    """
    Ricci tensor on the Q-orthonormal basis of m.

    2 ric(X,Y) = -B(X,Y) - sum_i g([X,X_i]_m,[Y,X_i]_m)
                 + 1/2 sum_ij g([X_i,X_j]_m,X) g([X_i,X_j]_m,Y)
    with X_i g-orthonormal. The diagonal equals r_i x_i.
    """
    _check_layout(state, space)
    C = _m_constants(space)
    x = space.module_weights(state.x)
    w = 1.0 / x
    minus_b = np.diag(space.module_weights(space.b_flags))
    second = np.einsum("i,c,aic,bic->ab", w, x, C, C)
    third = np.einsum("i,j,ija,ijb->ab", w, w, C, C) * np.outer(x, x)
    return 0.5 * (minus_b - second + 0.5 * third)


def diagonality_defect(
    state: MetricState, space: ReductiveSpace, r: np.ndarray
) -> dict[str, float]:
    """
    Off-module block and diagonal mismatch of ricci_full against r_i.

    Both are read off the g-normalized tensor ric_ab / sqrt(x_a x_b), which is
    the Ricci endomorphism in a g-orthonormal frame, so they are on the scale of
    r rather than of ric. ``norm`` is its largest entry, ``relative`` the larger
    defect over ``norm`` and ``condition`` is max x / min x.
    """
    ric = ricci_full(state, space)
    if not ric.size:
        return {
            "off_block": 0.0,
            "diagonal_mismatch": 0.0,
            "norm": 0.0,
            "relative": 0.0,
            "condition": 1.0,
        }
    x = space.module_weights(state.x)
    normalized = ric / np.sqrt(np.outer(x, x))
    owner = space.module_of
    same = owner[:, None] == owner[None, :]
    expected = np.diag(space.module_weights(np.asarray(r, dtype=float)))
    off = float(np.max(np.abs(np.where(same, 0.0, normalized))))
    mismatch = float(np.max(np.abs(np.where(same, normalized - expected, 0.0))))
    norm = float(np.max(np.abs(normalized)))
    worst = max(off, mismatch)
    return {
        "off_block": off,
        "diagonal_mismatch": mismatch,
        "norm": norm,
        "relative": worst / norm if norm > 0 else worst,
        "condition": float(np.max(x) / np.min(x)),
    }


def diagonality_tolerance(condition: float) -> float:
    """Allowed relative defect; round-off grows with the metric's conditioning."""
    return DIAGONALITY_TOLERANCE + DIAGONALITY_ROUNDOFF * condition


def lp_block_residual(state: MetricState, space: ReductiveSpace) -> float:
    """max |ric(l, p)| / max |ric|; zero for every awesome metric."""
    ric = ricci_full(state, space)
    if not ric.size:
        return 0.0
    in_l = space.module_of < space.n_l
    block = ric[np.ix_(in_l, ~in_l)]
    norm = float(np.max(np.abs(ric)))
    worst = float(np.max(np.abs(block))) if block.size else 0.0
    return worst / norm if norm > 0 else worst


# =============================================================================
# FIBER SPLIT
# =============================================================================


@dataclass(frozen=True, eq=False)
class FiberSplit:
    """Per l-direction decomposition of ric(X, X) into fiber term plus p-corrections."""

    positions: tuple[int, ...]
    fiber_term: np.ndarray
    trace_p: np.ndarray
    bracket_p: np.ndarray
    projection_p: np.ndarray
    full_diagonal: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.fiber_term + self.trace_p + self.bracket_p + self.projection_p

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.total - self.full_diagonal)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "position": self.positions,
                "fiber_term": self.fiber_term,
                "trace_p": self.trace_p,
                "bracket_p": self.bracket_p,
                "projection_p": self.projection_p,
                "total": self.total,
                "ric_full": self.full_diagonal,
            }
        )


def fiber_split_ricci(state: MetricState, space: ReductiveSpace) -> FiberSplit:
    """
    Split ric(X, X) for each l direction X into the K/H Ricci term and p terms.

    The fiber term uses the Killing form of k itself and complement l.
    Raises EmptyFiber when l = 0.
    """
    _check_layout(state, space)
    if not space.l_indices:
        raise EmptyFiber("fiber split needs a nonzero l", check="l_nonempty")

    c = space.alg.tensor
    ad = space.alg.ad_matrices()
    k = list(space.k_indices)
    l = list(space.l_indices)
    p = list(space.p_indices)
    m = list(space.m_indices)
    x_m = space.module_weights(state.x)
    pos = {idx: a for a, idx in enumerate(m)}
    x_l = x_m[[pos[i] for i in l]]
    x_p = x_m[[pos[i] for i in p]] if p else np.zeros(0)

    c_k = c[np.ix_(k, k, k)]
    B_k = np.einsum("ilk,jkl->ij", c_k, c_k)
    k_pos = {idx: a for a, idx in enumerate(k)}

    C_ll = c[np.ix_(l, l, l)]
    fiber = []
    trace_p, bracket_p, projection_p = [], [], []
    for a_pos, a in enumerate(l):
        w_l = 1.0 / x_l
        second = np.einsum("i,c,ic->", w_l, x_l, C_ll[a_pos] ** 2)
        third = np.einsum("i,j,ij->", w_l, w_l, C_ll[:, :, a_pos] ** 2)
        third *= x_l[a_pos] ** 2
        fiber.append(0.5 * (-B_k[k_pos[a], k_pos[a]] - second + 0.5 * third))

        if p:
            ad_p = ad[a][np.ix_(p, p)]
            trace_p.append(-0.5 * float(np.trace(ad_p @ ad_p)))
            w_p = 1.0 / x_p
            # [X, p] stays in p
            moved = np.einsum("i,c,ic->", w_p, x_p, c[a][np.ix_(p, p)] ** 2)
            bracket_p.append(-0.5 * float(moved))
            C_ppa = c[np.ix_(p, p, [a])][:, :, 0]
            lifted = np.einsum("i,j,ij->", w_p, w_p, C_ppa**2) * x_l[a_pos] ** 2
            projection_p.append(0.25 * float(lifted))
        else:
            trace_p.append(0.0)
            bracket_p.append(0.0)
            projection_p.append(0.0)

    ric = ricci_full(state, space)
    full_diag = np.array([ric[pos[i], pos[i]] for i in l])
    return FiberSplit(
        positions=tuple(l),
        fiber_term=np.array(fiber, dtype=float),
        trace_p=np.array(trace_p),
        bracket_p=np.array(bracket_p),
        projection_p=np.array(projection_p),
        full_diagonal=full_diag,
    )


# =============================================================================
# BOUNDS
# =============================================================================


def bound_suite(
    state: MetricState,
    space: ReductiveSpace,
    tensor: BracketTensor,
    tol: float = BOUND_TOLERANCE,
    r: np.ndarray | None = None,
) -> CheckReport:
    """
    Signed slacks of the algebraic curvature estimates; negative means violated.

    Bounds that need both l and p report None when a side is empty.
    """
    report = CheckReport(name="bounds", tolerance=tol)
    r = ricci_eigen(state, space, tensor) if r is None else np.asarray(r)
    R = scalar_curvature(state, space, tensor)
    x = state.x
    has_l, has_p = space.n_l > 0, space.n_p > 0

    def put(key: str, slack: float) -> None:
        report.record(key, slack, slack >= -tol)

    if has_l:
        l_ord = state.l_order()
        i_l1, i_ln = int(l_ord[0]), int(l_ord[-1])
        l_1, l_n = x[i_l1], x[i_ln]
    else:
        i_ln, l_1, l_n = None, None, 0.0
    if has_p:
        p_ord = state.p_order()
        i_p1, i_pm = int(p_ord[0]), int(p_ord[-1])
        p_1, p_m = x[i_p1], x[i_pm]
        r_1, r_m = r[i_p1], r[i_pm]

    if has_p:
        put("r1", -1.0 / (2.0 * p_1) - r_1)
        put("rm", r_m + 1.0 / (2.0 * p_m) + l_n / (4.0 * p_1 * p_m))
        top_l = l_n * r[i_ln] if has_l else 0.0
        put("scale_invariant", 2.0 * (p_m * r_m + top_l) + (p_m + l_n) / p_1)
    else:
        for key in ("r1", "rm", "scale_invariant"):
            report.mark_na(key)

    if has_l:
        T = tensor.values
        d_n = space.dims[i_ln]
        nl = space.n_l
        within_l = float(T[i_ln, :nl, :nl].sum()) / (4.0 * d_n * l_n)
        across_p = 0.0
        for j in range(nl, space.n_modules):
            for k in range(nl, space.n_modules):
                if T[i_ln, j, k] == 0.0:
                    continue
                p_j, p_k = x[j], x[k]
                across_p += T[i_ln, j, k] * (
                    2.0 / l_n
                    + l_n / (p_j * p_k)
                    - p_j / (l_n * p_k)
                    - p_k / (l_n * p_j)
                )
        put("rn", r[i_ln] - within_l - across_p / (4.0 * d_n))
        put("scalar_ceiling", space.dim_l / (2.0 * l_1) - R)
    else:
        report.mark_na("rn")
        report.mark_na("scalar_ceiling")

    if has_l and has_p:
        r_n = r[i_ln]
        if p_m - p_1 >= l_n:
            report.notes.append("dichotomy: wide p-spread branch")
            put("dichotomy_rm", r_m + 1.0 / (4.0 * p_m) + 1.0 / (4.0 * p_1))
            put("dichotomy_rn", r_n - (2.0 - p_m / p_1 - p_1 / p_m) / (4.0 * l_n))
        else:
            report.notes.append("dichotomy: narrow p-spread branch")
            put("dichotomy_rm", r_m + 1.0 / (2.0 * p_m) + l_n / (4.0 * p_1 * p_m))
            put("dichotomy_rn", r_n)
    else:
        report.mark_na("dichotomy_rm")
        report.mark_na("dichotomy_rn")

    if not report.passed:
        logger.warning("curvature bounds violated: %s", report.failed)
    return report


def curvature_report_rows(
    states: list[MetricState], space: ReductiveSpace, tensor: BracketTensor
) -> pd.DataFrame:
    """One row per state: x_*, r_*, R and the bound slacks."""
    rows = []
    for state in states:
        r = ricci_eigen(state, space, tensor)
        row = {f"x_{i}": v for i, v in enumerate(state.x)}
        row.update({f"r_{i}": v for i, v in enumerate(r)})
        row["R"] = scalar_curvature(state, space, tensor)
        bounds = bound_suite(state, space, tensor, r=r)
        row.update({f"slack_{k}": v for k, v in bounds.residuals.items()})
        rows.append(row)
    return pd.DataFrame(rows)
