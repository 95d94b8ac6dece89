"""
Deterministic check suites over the catalog.

Each suite returns CheckReports with residuals; nothing here raises on a
failed check. A fixed seed gives the same random states and the same
residuals on every run.

Suites:
- algebra: Jacobi, antisymmetry, Killing invariance, Cartan split,
  basis round trip and document round trip
- isotropy: [ijk] symmetry, odd-p vanishing, sum identity, Schur
  certificates and seed invariance of the module data
- curvature: awesome invariance on tied and untied states, eigen vs full
  route, scaling, trace and the curvature bounds on random states
- flow: closed-form and regime runs, extinction time at two tolerances
- asymptotics: blow-down and blow-up verdicts on reference runs, blow-down
  of seeded random starts on contractible spaces and the random search for
  invariant Einstein metrics
"""

import logging
from collections.abc import Callable
from functools import partial

import numpy as np

from .algebra import (
    ad_invariance_residual,
    cartan_validate,
    killing_form,
    validate_algebra,
)
from .asymptotics import blowdown_profile, blowup_profile, einstein_search
from .catalog import CatalogEntry, list_catalog, make_catalog_algebra
from .curvature import (
    bound_suite,
    diagonality_defect,
    fiber_split_ricci,
    lp_block_residual,
    ricci_eigen,
    scalar_curvature,
)
from .errors import HRFlowError, InputError
from .flow import integrate_flow, random_initial_state
from .isotropy import (
    bracket_coefficients,
    build_space,
    casimir_constants,
    classify_topology,
    odd_p_residual,
    sum_identity_check,
)
from .models import CheckReport, FlowConfig, MetricState, Tolerances
from .monitors import detect_extinction, monitor_suite
from .parse import algebra_from_document, dump_algebra_document

logger = logging.getLogger(__name__)

SUITES = ("algebra", "isotropy", "curvature", "flow", "asymptotics")
RANDOM_STATES = 1000
SEED_DRAWS = 10
STATE_RANGE = (0.1, 10.0)
TOLERANCE_PAIR = (1e-8, 1e-10)
# four significant digits
T_AGREEMENT = 5e-4
NO_EINSTEIN_KEYS = ("sl2r_trivial", "so_3_2_mod_so_3")
BLOWDOWN_T_END = 1e4


def catalog_entries() -> list[CatalogEntry]:
    """Every preset with its default params."""
    return [make_catalog_algebra(key) for key in list_catalog()]


def _guard(name: str, body: Callable[[CheckReport], None], tol: float) -> CheckReport:
    """Run one check body; an HRFlowError becomes a failed 'error' sub-check."""
    report = CheckReport(name=name, tolerance=tol)
    try:
        body(report)
    except HRFlowError as exc:
        report.record("error", 1.0, False)
        report.notes.append(f"{exc.kind}: {exc.message}")
    return report


# =============================================================================
# ALGEBRA
# =============================================================================


def algebra_suite(seed: int = 0, tol: Tolerances | None = None) -> list[CheckReport]:
    tol = tol or Tolerances()
    reports = []
    for entry in catalog_entries():

        def body(report: CheckReport, entry=entry) -> None:
            alg = entry.algebra
            valid = validate_algebra(alg, tol.algebra)
            for key, value in valid.residuals.items():
                report.record(key, value, key not in valid.failed)
            B = killing_form(alg)
            invariance = ad_invariance_residual(alg, B)
            report.record("killing_invariance", invariance, invariance <= tol.algebra)
            cartan = cartan_validate(alg, B, entry.split, tol.algebra)
            report.record("cartan_split", float(len(cartan.failed)), cartan.passed)

            space = build_space(entry, seed=seed, tol=tol.algebra)
            mapped = alg.change_basis(space.change_of_basis).tensor
            drift = float(np.max(np.abs(mapped - space.alg.tensor)))
            report.record("basis_round_trip", drift, drift <= tol.algebra)

            text = dump_algebra_document(entry)
            again = algebra_from_document(entry.to_document())
            same = dump_algebra_document(again) == text
            report.record("document_round_trip", 0.0 if same else 1.0, same)

        reports.append(_guard(f"algebra/{entry.label}", body, tol.algebra))
    return reports


# =============================================================================
# ISOTROPY
# =============================================================================


def _module_signature(space) -> list[tuple[int, float]]:
    casimir = space.casimir if space.casimir is not None else casimir_constants(space)
    return sorted(
        (len(m), round(float(c), 9))
        for m, c in zip(space.modules, casimir, strict=True)
    )


def isotropy_suite(seed: int = 0, tol: Tolerances | None = None) -> list[CheckReport]:
    tol = tol or Tolerances()
    reports = []
    for entry in catalog_entries():

        def body(report: CheckReport, entry=entry) -> None:
            space = build_space(entry, seed=seed, tol=tol.algebra)
            tensor = bracket_coefficients(space)
            sym = tensor.symmetry_residual()
            report.record("symmetry", sym, sym <= tol.algebra)
            odd = odd_p_residual(space, tensor)
            report.record("odd_p", odd, odd <= tol.algebra)
            identity = sum_identity_check(space, tensor, tol.identity)
            values = [v for v in identity.residuals.values() if v is not None]
            worst = max(values, default=0.0)
            report.record("sum_identity", worst, identity.passed)
            extra = max((d - 1 for d in space.commutant_dims), default=0)
            report.record("schur", float(extra), extra == 0)

            reference = _module_signature(space)
            mismatches = 0
            for draw in range(SEED_DRAWS):
                other = build_space(entry, seed=seed + 1 + draw, tol=tol.algebra)
                mismatches += _module_signature(other) != reference
            report.record("seed_invariance", float(mismatches), mismatches == 0)

            regime = classify_topology(space, tensor)
            report.notes.append(f"regime {regime.regime}")

        reports.append(_guard(f"isotropy/{entry.label}", body, tol.algebra))
    return reports


# =============================================================================
# CURVATURE
# =============================================================================


def curvature_suite(
    seed: int = 0, tol: Tolerances | None = None, states: int = RANDOM_STATES
) -> list[CheckReport]:
    tol = tol or Tolerances()
    reports = []
    for entry in catalog_entries():

        def body(report: CheckReport, entry=entry) -> None:
            space = build_space(entry, seed=seed, tol=tol.algebra)
            tensor = bracket_coefficients(space)
            rng = np.random.default_rng(seed)
            worst_diag = worst_scale = worst_trace = worst_fiber = 0.0
            worst_lp = 0.0
            bound_failures = 0
            for _ in range(states):
                state = random_initial_state(space, *STATE_RANGE, rng)
                untied = random_initial_state(space, *STATE_RANGE, rng, tied=False)
                worst_lp = max(
                    worst_lp,
                    lp_block_residual(state, space),
                    lp_block_residual(untied, space),
                )
                r = ricci_eigen(state, space, tensor)
                defect = diagonality_defect(state, space, r)
                worst_diag = max(worst_diag, defect["relative"])

                factor = float(rng.uniform(0.5, 2.0))
                r_scaled = ricci_eigen(state.scaled(factor), space, tensor)
                scale = max(float(np.max(np.abs(r))), 1.0)
                worst_scale = max(
                    worst_scale, float(np.max(np.abs(factor * r_scaled - r))) / scale
                )

                R = scalar_curvature(state, space, tensor)
                trace = abs(R - float(np.sum(space.dims * r))) / max(abs(R), 1.0)
                worst_trace = max(worst_trace, trace)

                bounds = bound_suite(state, space, tensor, tol.bound_slack, r=r)
                bound_failures += not bounds.passed

                if space.n_l:
                    split = fiber_split_ricci(state, space)
                    worst_fiber = max(worst_fiber, split.residual)

            report.record("awesome_invariance", worst_lp, worst_lp <= tol.awesome)
            report.record(
                "eigen_full_agreement", worst_diag, worst_diag <= tol.diagonality
            )
            report.record("scaling", worst_scale, worst_scale <= tol.algebra)
            report.record("trace", worst_trace, worst_trace <= tol.identity)
            report.record("bounds", float(bound_failures), bound_failures == 0)
            if space.n_l:
                report.record("fiber_split", worst_fiber, worst_fiber <= tol.identity)
            else:
                report.mark_na("fiber_split")

        reports.append(_guard(f"curvature/{entry.label}", body, tol.algebra))
    return reports


# =============================================================================
# FLOW
# =============================================================================


def _reference_space(key: str, seed: int, tol: Tolerances):
    space = build_space(make_catalog_algebra(key), seed=seed, tol=tol.algebra)
    return space, bracket_coefficients(space)


def flow_suite(seed: int = 0, tol: Tolerances | None = None) -> list[CheckReport]:
    tol = tol or Tolerances()

    def hyperbolic(report: CheckReport) -> None:
        # r = -1/(2x) on the hyperbolic plane, so x(t) = x0 + t
        space, tensor = _reference_space("hyperbolic_plane", seed, tol)
        config = FlowConfig(t_end=10.0, rel_tol=1e-10, abs_tol=1e-12)
        state = MetricState(np.ones(space.n_modules), 0)
        traj = integrate_flow(state, space, tensor, config)
        exact = 1.0 + traj.times
        error = float(np.max(np.abs(traj.x_matrix[:, 0] - exact) / exact))
        report.record("closed_form", error, error <= 1e-7)

    def immortal(report: CheckReport) -> None:
        space, tensor = _reference_space("sl2r_trivial", seed, tol)
        rng = np.random.default_rng(seed)
        state = random_initial_state(space, *STATE_RANGE, rng)
        traj = integrate_flow(state, space, tensor, FlowConfig(t_end=50.0))
        report.record("no_extinction", float(traj.is_extinct), not traj.is_extinct)
        monitors = monitor_suite(traj, space)
        report.record("monitors", float(len(monitors.violations)), monitors.passed)

    def extinct(report: CheckReport) -> None:
        space, tensor = _reference_space("sl3r_trivial", seed, tol)
        state = MetricState(np.ones(space.n_modules), space.n_l)
        traj = integrate_flow(state, space, tensor, FlowConfig(t_end=100.0))
        report.record("extinction", float(not traj.is_extinct), traj.is_extinct)
        if not traj.is_extinct:
            return
        regime = classify_topology(space, tensor)
        extinction = detect_extinction(traj, space, regime)
        report.record("T_finite", 0.0, bool(np.isfinite(extinction.T)))
        monitors = monitor_suite(traj, space)
        report.record("monitors", float(len(monitors.violations)), monitors.passed)
        first = extinction.first_positive_R_time
        before = first is not None and first < extinction.T
        report.record("R_positive_before_T", 0.0 if before else 1.0, before)
        report.notes.append(f"T = {extinction.T:.9g}")

    def two_tolerances(report: CheckReport) -> None:
        space, tensor = _reference_space("sl3r_trivial", seed, tol)
        regime = classify_topology(space, tensor)
        state = MetricState(np.ones(space.n_modules), space.n_l)
        estimates = []
        for rel_tol in TOLERANCE_PAIR:
            config = FlowConfig(t_end=100.0, rel_tol=rel_tol, abs_tol=1e-2 * rel_tol)
            traj = integrate_flow(state, space, tensor, config)
            estimates.append(detect_extinction(traj, space, regime).T)
        drift = abs(estimates[0] - estimates[1]) / abs(estimates[1])
        report.record("T_agreement", drift, drift <= T_AGREEMENT)
        report.notes.append(f"T = {estimates[0]:.9g} / {estimates[1]:.9g}")

    return [
        _guard("flow/hyperbolic_closed_form", hyperbolic, tol.algebra),
        _guard("flow/sl2r_immortal", immortal, tol.algebra),
        _guard("flow/sl3r_extinct", extinct, tol.algebra),
        _guard("flow/sl3r_two_tolerances", two_tolerances, tol.algebra),
    ]


# =============================================================================
# ASYMPTOTICS
# =============================================================================


def asymptotics_suite(
    seed: int = 0, tol: Tolerances | None = None
) -> list[CheckReport]:
    tol = tol or Tolerances()

    def blowdown(report: CheckReport) -> None:
        space, tensor = _reference_space("hyperbolic_plane", seed, tol)
        traj = integrate_flow(
            MetricState(np.ones(space.n_modules), 0),
            space,
            tensor,
            FlowConfig(t_end=1000.0),
        )
        profile = blowdown_profile(traj, space)
        for name, value in profile.final.items():
            report.record(name, value, value < profile.threshold)
        report.record("consistent", 0.0, profile.consistent)

    def blowup(report: CheckReport) -> None:
        space, tensor = _reference_space("sl3r_trivial", seed, tol)
        state = MetricState(np.ones(space.n_modules), space.n_l)
        traj = integrate_flow(state, space, tensor, FlowConfig(t_end=100.0))
        extinction = detect_extinction(traj, space, classify_topology(space, tensor))
        profile = blowup_profile(traj, space, extinction.T)
        for name, ok in profile.extras["checks"].items():
            report.record(name, profile.final.get(_CHECK_VALUES[name], 0.0), ok)

    def contractible_blowdown(report: CheckReport, key: str) -> None:
        space, tensor = _reference_space(key, seed, tol)
        state = random_initial_state(space, 0.5, 2.0, np.random.default_rng(seed))
        config = FlowConfig(t_end=BLOWDOWN_T_END)
        profile = blowdown_profile(integrate_flow(state, space, tensor, config), space)
        for name, value in profile.final.items():
            report.record(name, value, profile.monotone[name])
        report.record("consistent", 0.0, profile.consistent)

    def no_einstein(report: CheckReport, key: str) -> None:
        space, tensor = _reference_space(key, seed, tol)
        best, state = einstein_search(space, tensor, np.random.default_rng(seed))
        report.record("einstein_floor", best, best >= tol.einstein_floor)
        report.notes.append(f"closest state {state.x.tolist()}")

    reports = [
        _guard("asymptotics/hyperbolic_blowdown", blowdown, tol.algebra),
        _guard("asymptotics/sl3r_blowup", blowup, tol.algebra),
    ]
    for key in NO_EINSTEIN_KEYS:
        body = partial(contractible_blowdown, key=key)
        reports.append(_guard(f"asymptotics/{key}_blowdown", body, tol.algebra))
        body = partial(no_einstein, key=key)
        reports.append(_guard(f"asymptotics/no_einstein_{key}", body, tol.algebra))
    return reports


_CHECK_VALUES = {
    "type_I": "type_I_ratio",
    "p_normalized": "p_normalized_sum",
    "near_zero_count": "near_zero_directions",
}

SUITE_FUNCTIONS = {
    "algebra": algebra_suite,
    "isotropy": isotropy_suite,
    "curvature": curvature_suite,
    "flow": flow_suite,
    "asymptotics": asymptotics_suite,
}


def run_checks(
    suite: str = "all", seed: int = 0, tol: Tolerances | None = None
) -> list[CheckReport]:
    """Run one suite (or "all") and return its reports in a fixed order."""
    if suite != "all" and suite not in SUITE_FUNCTIONS:
        raise InputError(
            f"unknown check suite {suite!r}",
            check="suite",
            details={"known": ["all", *SUITES]},
        )
    names = SUITES if suite == "all" else (suite,)
    reports = []
    for name in names:
        logger.info("running %s checks (seed %d)", name, seed)
        reports.extend(SUITE_FUNCTIONS[name](seed=seed, tol=tol))
    failed = [r.name for r in reports if not r.passed]
    if failed:
        logger.warning("%d checks failed: %s", len(failed), failed)
    return reports
