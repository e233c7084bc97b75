#!/usr/bin/env python3
"""Command line for Ricci-flat ALE Kahler numerics.

Usage:
    alekahler calabi --m 2
    alekahler poisson --n 4 --source "inverse_quadratic_power 3 8"
    alekahler ma-solve --m 2 --source "compact_bump 3 0.5"
    alekahler pipeline --m 2 --R 10 --steps 8
    alekahler quotient 4 2 1 1 1 1
    alekahler identities --samples 1000
    alekahler norms --source "inverse_quadratic_power 2" --k 2
    alekahler --config jobs.json [--jobs 4]
    alekahler --check

Writes <name>.json and <name>-<profile>.csv under --out (default
$ALEKAHLER_OUT, else ./alekahler-out). Returns exit code 0 if every check of
every job passed, 1 if a check failed or a job raised, 2 for configuration
errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from collections.abc import Callable
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from alekahler.calabi_metric import (
    RadialKahlerPotential,
    asymptotic_coefficient,
    asymptotic_constant,
    calabi_imaginary_residue,
    metric_decay_profile,
    remainder_decay,
    ricci_flat_residual,
)
from alekahler.config import FORMATS, ConfigError, JobConfig, load_jobs
from alekahler.flat_laplacian import (
    PoissonProblem,
    delta_radius_identity,
    leading_profile,
    poisson_bound_ratio,
    solve_poisson,
    solve_poisson_bvp,
    symmetry_residual,
)
from alekahler.hermitian_algebra import (
    HermitianForm,
    flat_complex_hessian,
    flat_laplacian_value,
    primitive_square_identity_residual,
    trace_identity_residual,
)
from alekahler.monge_ampere import (
    MAProblem,
    MASolution,
    calabi_deviation,
    flatten,
    formula_coefficient,
    ma_ratio,
    newton_contraction,
    pipeline_problem,
    predicted_leading_coefficient,
    ricci_potential,
    solve_ma_continuity,
    solve_ma_quadrature,
    total_potential,
)
from alekahler.quotient_group import (
    CyclicQuotient,
    acts_freely,
    in_special_unitary,
    is_terminal,
    satisfies_symplectic_pairing,
    summarize,
    symplectic_family,
)
from alekahler.radial_field import RadialFunction, RadialGrid, smoothed_radius, weighted_ck_norm
from alekahler.reports import Check, RunReport, atomic_write, to_json, write_report
from alekahler.source_terms import build_source, closed_form_coefficient, closed_form_solution

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(name)s:%(levelname)s:%(message)s"
CHECK_SUMMARY = "check-summary.json"

CLOSED_FORM_TOLERANCE = 1e-13
FINITE_DIFFERENCE_TOLERANCE = 1e-8
DECAY_TOLERANCE = 0.05
WEIGHT_DECAY_TOLERANCE = 0.02
COEFFICIENT_TOLERANCE = 1e-10
BVP_TOLERANCE = 1e-8
INTEGRAL_TOLERANCE = 1e-6
IDENTITY_TOLERANCE = 1e-12
LAPLACIAN_TOLERANCE = 1e-10
METRIC_TOLERANCE = 1e-6
NEWTON_QUADRATIC_CONSTANT = 1e3


class RunError(RuntimeError):
    """A job failed inside a library call; the message names the job."""


def run_calabi(config: JobConfig) -> RunReport:
    p = config.parameters
    m = int(p["m"])
    c = float(p.get("class_constant", 1.0))
    grid = config.build_grid()

    residual = ricci_flat_residual(m, grid, class_constant=c)
    fd_residual = ricci_flat_residual(m, grid, "finite_difference", c)
    fitted = asymptotic_coefficient(m, class_constant=c)
    exact = asymptotic_constant(m, c)
    slopes = {k: metric_decay_profile(m, k) for k in (0, 1, 2)}
    remainder = {k: remainder_decay(m, k) for k in (0, 1)}

    checks = [
        Check.close("ricci_flat_closed_form", "(Phi')^(m-1) (Phi' + t Phi'') = 1, closed form",
                    residual, 0.0, CLOSED_FORM_TOLERANCE),
        Check.close("ricci_flat_finite_difference",
                    "(Phi')^(m-1) (Phi' + t Phi'') = 1, stencil derivatives",
                    fd_residual, 0.0, FINITE_DIFFERENCE_TOLERANCE),
        Check.close("asymptotic_coefficient", "Phi - t ~ A t^(1-m), A = -c/(m(m-1))",
                    fitted, exact, config.tolerances["fit"], relative=True),
        Check.below("coefficient_negative", "A < 0", fitted, 0.0),
    ]
    for k, slope in slopes.items():
        checks.append(Check.close(f"metric_decay_k{k}", f"d^{k}(g - g0) ~ r^(-2m-{k})",
                                  slope, -2.0 * m - k, DECAY_TOLERANCE, relative=True))
    for k, slope in remainder.items():
        bound = -(2.0 * m + k) * (1.0 - DECAY_TOLERANCE)
        checks.append(Check.below(f"remainder_decay_k{k}",
                                  f"d^{k} chi decays at least like r^(-2m-{k})", slope, bound))

    potential = RadialKahlerPotential.calabi(m, grid, c)
    transverse = potential.transverse_eigenvalue()
    profile = {
        "r": grid.r,
        "phi": potential.phi.values,
        "phi_prime": transverse,
        "eig_radial": potential.radial_eigenvalue(),
        "eig_transverse": transverse,
    }
    results = {
        "m": m,
        "class_constant": c,
        "ricci_residual_closed_form": residual,
        "ricci_residual_finite_difference": fd_residual,
        "imaginary_residue": calabi_imaginary_residue(m, grid.t, c),
        "A_fitted": fitted,
        "A_exact": exact,
        "metric_decay_orders": {str(k): v for k, v in slopes.items()},
        "remainder_decay_orders": {str(k): v for k, v in remainder.items()},
    }
    return RunReport(config, results, checks, {"profile": profile})


def run_poisson(config: JobConfig) -> RunReport:
    p = config.parameters
    n = int(p["n"])
    grid = config.build_grid("log_r")
    f, beta = build_source(p["source"], grid, n, p.get("beta"))
    problem = PoissonProblem(n, f, beta, int(p.get("group_order", 1)))
    solution = solve_poisson(problem)
    u = solution.u.values
    scale = max(float(np.max(np.abs(u))), np.finfo(float).tiny)
    bvp_deviation = float(np.max(np.abs(u - solve_poisson_bvp(problem).values))) / scale

    checks = [
        Check.close("bvp_agreement", "Green representation vs sparse boundary-value solve",
                    bvp_deviation, 0.0, BVP_TOLERANCE),
    ]
    if solution.case_tag == "a" and solution.measured_decay_u is not None:
        checks.append(Check.close("decay_u", "u ~ r^(beta+2) for -n < beta < -2",
                                  solution.measured_decay_u, beta + 2.0,
                                  WEIGHT_DECAY_TOLERANCE, relative=True))
    if solution.case_tag == "b":
        decay_v = solution.measured_decay_v
        faster = decay_v is None or decay_v < 2.0 - n
        checks.append(Check("remainder_faster", "v = u - A rho^(2-n) decays faster than r^(2-n)",
                            decay_v, 2.0 - n, None, faster))
    exact_a = closed_form_coefficient(p["source"], n)
    if exact_a is not None:
        checks.append(Check.close("leading_coefficient_closed_form",
                                  "A = int f dV / ((n-2) Omega_{n-1}), closed form",
                                  solution.A, exact_a, COEFFICIENT_TOLERANCE, relative=True))
    exact_u = closed_form_solution(p["source"], n)
    if exact_u is not None:
        deviation = float(np.max(np.abs(u - exact_u(grid.r))))
        checks.append(Check.close("closed_form_solution", "u against its closed form",
                                  deviation, 0.0, config.tolerances["quadrature"]))

    profile = {
        "r": grid.r,
        "u": u,
        "A*rho^{2-n}": leading_profile(solution, n),
        "v": solution.v.values,
    }
    results = {
        "n": n,
        "beta": beta,
        "group_order": problem.group_order,
        "bvp_deviation": bvp_deviation,
        "bound_ratio": poisson_bound_ratio(problem, solution),
        **solution.summary(),
    }
    return RunReport(config, results, checks, {"profile": profile})


def _background(m: int, grid: RadialGrid, p: dict) -> RadialKahlerPotential:
    kind = p.get("background", "flattened")
    if kind == "flat":
        return RadialKahlerPotential.flat(m, grid)
    calabi = RadialKahlerPotential.calabi(m, grid, float(p.get("background_class", 1.0)))
    if kind == "calabi":
        return calabi
    if kind == "flattened":
        return flatten(calabi, float(p.get("R", 10.0)))
    raise ValueError(f"unknown background {kind!r}; expected flat, calabi or flattened")


def _solve_and_check(
    config: JobConfig, problem: MAProblem, class_constant: float, pipeline: bool
) -> RunReport:
    p = config.parameters
    tol = config.tolerances
    method = p.get("method", "both")
    if method not in ("quadrature", "continuity", "both"):
        raise ValueError(f"unknown method {method!r}")

    quadrature = solve_ma_quadrature(problem, class_constant)
    continuity: MASolution | None = None
    if method != "quadrature":
        continuity = solve_ma_continuity(
            problem, class_constant, int(p.get("steps", 8)), tol["newton"]
        )
    primary = continuity or quadrature

    ma_residual = np.log(ma_ratio(problem.background, primary.phi).values) - problem.f.values
    interior = float(np.max(np.abs(ma_residual[2:-2])))
    checks = [
        Check.holds("positive_metric", "omega_hat + dd^c phi > 0", primary.positivity_margin > 0),
        Check.close("ma_residual", "(omega_hat + dd^c phi)^m = e^f omega_hat^m at interior nodes",
                    interior, 0.0, tol["quadrature"]),
    ]
    results = {
        "m": problem.m,
        "beta": problem.beta,
        "class_constant": class_constant,
        "ma_residual": interior,
        "quadrature": quadrature.summary(),
    }
    if continuity is not None:
        agreement = float(np.max(np.abs(quadrature.phi.values - continuity.phi.values)))
        contraction = newton_contraction(continuity.residual_history, tol["newton"])
        checks += [
            Check.close("newton_residual", "continuity endpoint solves the discrete equation",
                        continuity.final_residual, 0.0, tol["newton"]),
            Check.close("solver_agreement", "quadrature and continuity solutions agree",
                        agreement, 0.0, tol["quadrature"]),
            Check.below("newton_quadratic", "r_(k+1) <= C r_k^2 once Newton residuals are small",
                        contraction, NEWTON_QUADRATIC_CONSTANT),
        ]
        results["newton_contraction"] = contraction
        results["continuity"] = continuity.summary()
        results["solver_agreement"] = agreement
        results["newton_residual_history"] = continuity.residual_history
    if primary.case_tag == "b":
        predicted = predicted_leading_coefficient(problem, class_constant)
        results["A_formula"] = formula_coefficient(problem)
        results["A_predicted"] = predicted
        checks.append(Check.close("leading_coefficient",
                                  "fitted A against the volume integral and class change",
                                  primary.A, predicted, tol["fit"], relative=True))
    if pipeline:
        solved = total_potential(problem, primary.phi)
        ricci = float(np.max(np.abs(ricci_potential(solved).values[2:-2])))
        deviation = calabi_deviation(problem, primary)
        results["ricci_potential"] = ricci
        results["calabi_deviation"] = deviation
        checks += [
            Check.close("ricci_potential", "Ricci potential of the solved metric vanishes",
                        ricci, 0.0, tol["quadrature"]),
            Check.below("coefficient_negative", "A < 0", primary.A, 0.0),
            Check.close("calabi_recovered", "solved potential equals the Calabi potential",
                        deviation, 0.0, METRIC_TOLERANCE),
        ]

    grid = problem.grid
    profile = {
        "r": grid.r,
        "f": problem.f.values,
        "phi": primary.phi.values,
        "psi": primary.psi.values,
        "ma_residual": ma_residual,
    }
    results.update(primary.summary())
    return RunReport(config, results, checks, {"profile": profile})


def run_ma_solve(config: JobConfig) -> RunReport:
    p = config.parameters
    m = int(p["m"])
    grid = config.build_grid()
    background = _background(m, grid, p)
    f, beta = build_source(p["source"], grid, 2 * m, p.get("beta"))
    problem = MAProblem(m, background, f, beta, int(p.get("group_order", 1)))
    class_constant = float(p.get("class_constant", background.class_constant))
    return _solve_and_check(config, problem, class_constant, pipeline=False)


def run_pipeline(config: JobConfig) -> RunReport:
    p = config.parameters
    m = int(p["m"])
    c = float(p.get("class_constant", 1.0))
    problem = pipeline_problem(m, float(p.get("R", 10.0)), config.build_grid(), c)
    return _solve_and_check(config, problem, c, pipeline=True)


def run_quotient(config: JobConfig) -> RunReport:
    p = config.parameters
    if "exponents" in p:
        q = CyclicQuotient.from_dict(p)
        summary = summarize(q)
        checks = []
        if summary.get("symplectic_pairing") and "terminal" in summary:
            checks.append(Check.holds("terminal", "free SU action with symplectic pairing",
                                      summary["terminal"]))
        return RunReport(config, summary, checks)

    m_values = [int(m) for m in p.get("m_values", [4, 6])]
    max_order = int(p.get("max_order", 20))
    scanned: dict[str, int] = {}
    failures: list[dict] = []
    checks = []
    for m in m_values:
        count = 0
        bad = []
        for k in range(2, max_order + 1):
            for q in symplectic_family(m, k):
                count += 1
                hypotheses = (
                    acts_freely(q) and in_special_unitary(q) and satisfies_symplectic_pairing(q)
                )
                if not (hypotheses and is_terminal(q)):
                    bad.append(q.to_dict())
        scanned[str(m)] = count
        failures.extend(bad)
        checks.append(Check.holds(f"terminal_scan_m{m}",
                                  f"every symplectic free SU action with k <= {max_order}",
                                  not bad and count > 0))
        logger.info("quotient scan m=%d: %d groups, %d not terminal", m, count, len(bad))
    results = {"max_order": max_order, "scanned": scanned, "not_terminal": failures}
    return RunReport(config, results, checks)


def _hermitian_quadratic(entries: np.ndarray) -> Callable[[np.ndarray], float]:
    """u(z) = z^* Z z, whose complex Hessian is Z^T and Laplacian -trace Z."""
    def u(z):
        return float(np.real(np.conj(z) @ entries @ z))
    return u


def _inverse_power(grid: RadialGrid, p: float) -> RadialFunction:
    return RadialFunction.closed_form(
        grid,
        lambda r: (1.0 + r * r) ** -p,
        {
            1: lambda r: -2.0 * p * r * (1.0 + r * r) ** (-p - 1.0),
            2: lambda r: -2.0 * p * (1.0 + r * r) ** (-p - 1.0)
            + 4.0 * p * (p + 1.0) * r * r * (1.0 + r * r) ** (-p - 2.0),
        },
    )


def run_identities(config: JobConfig) -> RunReport:
    p = config.parameters
    m_values = [int(m) for m in p.get("m_values", [2, 3, 4, 5])]
    samples = int(p.get("samples", 1000))
    seed = int(p.get("seed", 0))
    checks = []
    results: dict = {"samples": samples, "seed": seed, "pointwise": {}, "integral": {}}

    for m in m_values:
        rng = np.random.default_rng([seed, m])
        trace_max = primitive_max = laplacian_max = 0.0
        for _ in range(samples):
            z = HermitianForm.random(m, rng)
            z0 = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            u = _hermitian_quadratic(z.entries)
            hessian = flat_complex_hessian(u, z0)
            laplacian_value = flat_laplacian_value(u, z0)
            trace_max = max(trace_max, trace_identity_residual(hessian, laplacian_value))
            laplacian_max = max(
                laplacian_max, abs(laplacian_value + float(np.trace(z.entries).real))
            )
            zeta = HermitianForm.random(m, rng, trace_free=True)
            primitive_max = max(primitive_max, primitive_square_identity_residual(zeta))
        results["pointwise"][str(m)] = {
            "trace_residual": trace_max,
            "primitive_square_residual": primitive_max,
            "laplacian_residual": laplacian_max,
        }
        checks += [
            Check.close(f"trace_identity_m{m}", "dd^c u ^ omega^(m-1) against Delta u",
                        trace_max, 0.0, IDENTITY_TOLERANCE),
            Check.close(f"primitive_square_m{m}",
                        "zeta^2 ^ omega^(m-2) against |zeta|^2 for trace-free zeta",
                        primitive_max, 0.0, IDENTITY_TOLERANCE),
            Check.close(f"laplacian_closed_form_m{m}", "Delta (z^* Z z) = -trace Z",
                        laplacian_max, 0.0, LAPLACIAN_TOLERANCE),
        ]

    grid = config.build_grid("log_r")
    for n, group_order in p.get("integral_cases", [[4, 1], [4, 2], [6, 1]]):
        computed, target = delta_radius_identity(int(n), int(group_order), grid)
        results["integral"][f"n{n}_g{group_order}"] = {"computed": computed, "target": target}
        checks.append(Check.close(f"delta_radius_n{n}_g{group_order}",
                                  "int Delta(rho^(2-n)) dV = (n-2) Omega_{n-1} / |G|",
                                  computed, target, INTEGRAL_TOLERANCE, relative=True))

    residual, boundary = symmetry_residual(_inverse_power(grid, 1.0), _inverse_power(grid, 1.5),
                                           4, -2.0, -3.0)
    results["symmetry"] = {"residual": residual, "boundary_term": boundary}
    checks.append(Check.close("symmetry_n4", "int (u Delta v - v Delta u) dV = 0",
                              residual, 0.0, FINITE_DIFFERENCE_TOLERANCE))
    return RunReport(config, results, checks)


def run_norms(config: JobConfig) -> RunReport:
    p = config.parameters
    n = int(p.get("n", 4))
    grid = config.build_grid("log_r")
    f, beta = build_source(p["source"], grid, n, p.get("beta"))
    rho = smoothed_radius(grid)
    report = weighted_ck_norm(f, rho, beta, int(p.get("k", 2)), float(p.get("alpha", 0.5)))
    finite = math.isfinite(report.ck_norm) and math.isfinite(report.holder_seminorm)
    checks = [Check.holds("norm_finite", f"f in C^k,alpha_beta with beta={beta}", finite)]
    profile = {"r": grid.r, "f": f.values, "weighted": rho.values ** (-beta) * f.values}
    return RunReport(config, {"n": n, **report.to_dict()}, checks, {"profile": profile})


RUNNERS: dict[str, Callable[[JobConfig], RunReport]] = {
    "calabi": run_calabi,
    "poisson": run_poisson,
    "ma-solve": run_ma_solve,
    "pipeline": run_pipeline,
    "quotient": run_quotient,
    "identities": run_identities,
    "norms": run_norms,
}


def run(config: JobConfig) -> RunReport:
    """Dispatch one job to its runner and time it.

    Raises:
        RunError: Wrapping any library error, prefixed with the job name.
    """
    start = time.perf_counter()
    try:
        report = RUNNERS[config.command](config)
    except (ValueError, ArithmeticError, KeyError) as e:
        raise RunError(f"{config.name}: {e}") from e
    report.wall_time = time.perf_counter() - start
    logger.info("%s finished in %.2fs", config.name, report.wall_time)
    return report


def run_jobs(configs: list[JobConfig], n_jobs: int = 1) -> list[RunReport]:
    """Run jobs in order, in parallel when n_jobs != 1."""
    if n_jobs == 1 or len(configs) == 1:
        return [run(config) for config in configs]
    return Parallel(n_jobs=n_jobs)(delayed(run)(config) for config in configs)


CHECK_SUITE = [
    *({"command": "calabi", "name": f"check-calabi-m{m}", "parameters": {"m": m}}
      for m in (2, 3, 4, 5)),
    {"command": "poisson", "name": "check-poisson-oracle",
     "parameters": {"n": 4, "source": "inverse_quadratic_power 3 8"}},
    {"command": "poisson", "name": "check-poisson-slow-decay",
     "parameters": {"n": 4, "source": "inverse_quadratic_power 1.5"}},
    {"command": "poisson", "name": "check-poisson-zero-mean",
     "parameters": {"n": 4, "source": "laplacian_of_bump 2"}},
    {"command": "poisson", "name": "check-poisson-n6",
     "parameters": {"n": 6, "source": "delta_rho_power"}},
    {"command": "identities", "name": "check-identities"},
    {"command": "pipeline", "name": "check-pipeline-m2",
     "parameters": {"m": 2, "R": 10.0, "steps": 8}},
    {"command": "quotient", "name": "check-quotient-scan",
     "parameters": {"m_values": [4, 6], "max_order": 20}},
    {"command": "quotient", "name": "check-quotient-m4",
     "parameters": {"m": 4, "k": 2, "exponents": [1, 1, 1, 1]}},
]


def check_suite(default_directory: str | None = None) -> list[JobConfig]:
    """The named acceptance experiments, JSON summaries only."""
    return [
        JobConfig.from_dict({**job, "output": {"formats": ["json"]}}, default_directory)
        for job in CHECK_SUITE
    ]


def write_check_summary(reports: list[RunReport], directory: str | Path) -> Path:
    experiments = {
        report.config.name: {
            "passed": report.passed,
            "checks": len(report.checks),
            "failed": [check.name for check in report.checks if not check.passed],
        }
        for report in reports
    }
    summary = {"experiments": experiments, "passed": all(r.passed for r in reports)}
    return atomic_write(Path(directory) / CHECK_SUMMARY, to_json(summary))


def _add_grid_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--name", help="Job name, used for output file names")
    parser.add_argument("--t-min", type=float, help="Smallest t = r^2 on the grid")
    parser.add_argument("--t-max", type=float, help="Largest t = r^2 on the grid")
    parser.add_argument("--n-points", type=int, help="Number of grid nodes")
    parser.add_argument("--formats", nargs="+", choices=FORMATS,
                        help="Output formats (default: json csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alekahler",
        description="Ricci-flat ALE Kahler metrics: Calabi metric, Poisson and "
                    "Monge-Ampere solvers, quotient terminality",
    )
    parser.add_argument("--config", help="JSON job or {\"jobs\": [...]} batch file")
    parser.add_argument("--out", help="Output directory (default: $ALEKAHLER_OUT or ./alekahler-out)")
    parser.add_argument("--jobs", type=int, default=1,
                        help="Parallel workers for batches (default: 1, -1 for all cores)")
    parser.add_argument("--check", action="store_true", help="Run the acceptance suite")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    sub = parser.add_subparsers(dest="command", metavar="command")

    calabi = sub.add_parser("calabi", help="Calabi metric checks and profile")
    calabi.add_argument("--m", type=int, required=True, help="Complex dimension (>= 2)")
    calabi.add_argument("--class-constant", type=float, help="Kahler class c > 0 (default: 1)")

    poisson = sub.add_parser("poisson", help="Radial Poisson solve on R^n/G")
    poisson.add_argument("--n", type=int, required=True, help="Real dimension (> 2)")
    poisson.add_argument("--beta", type=float, help="Decay weight of f (default: from source)")
    poisson.add_argument("--group-order", type=int, help="|G| (default: 1)")

    ma = sub.add_parser("ma-solve", help="Radial Monge-Ampere solve")
    ma.add_argument("--m", type=int, required=True, help="Complex dimension (>= 2)")
    ma.add_argument("--beta", type=float, help="Decay weight of f (default: from source)")
    ma.add_argument("--background", choices=("flat", "calabi", "flattened"),
                    help="Background potential (default: flattened)")
    ma.add_argument("--R", type=float, help="Flattening radius (default: 10)")
    ma.add_argument("--class-constant", type=float, help="Target class (default: background's)")
    ma.add_argument("--steps", type=int, help="Homotopy steps (default: 8)")
    ma.add_argument("--method", choices=("quadrature", "continuity", "both"),
                    help="Solver(s) to run (default: both)")

    for source_parser in (poisson, ma):
        source_parser.add_argument("--source", help="Registry source, e.g. \"compact_bump 3\"")
        source_parser.add_argument("--source-csv", help="CSV of (r, f) samples")

    pipeline = sub.add_parser("pipeline", help="Flatten, Ricci potential, solve, compare")
    pipeline.add_argument("--m", type=int, required=True, help="Complex dimension (>= 2)")
    pipeline.add_argument("--R", type=float, help="Flattening radius (default: 10)")
    pipeline.add_argument("--class-constant", type=float, help="Kahler class (default: 1)")
    pipeline.add_argument("--steps", type=int, help="Homotopy steps (default: 8)")
    pipeline.add_argument("--method", choices=("quadrature", "continuity", "both"),
                          help="Solver(s) to run (default: both)")

    quotient = sub.add_parser("quotient", help="Age and terminality of C^m/G")
    quotient.add_argument("values", nargs="*", type=int, metavar="m k a_1 ... a_m",
                          help="One quotient; omit to scan symplectic actions")
    quotient.add_argument("--m-values", nargs="+", type=int, help="Scan dimensions (default: 4 6)")
    quotient.add_argument("--max-order", type=int, help="Scan group orders up to this (default: 20)")

    identities = sub.add_parser("identities", help="Pointwise and integral identity sweeps")
    identities.add_argument("--m-values", nargs="+", type=int, help="Dimensions (default: 2 3 4 5)")
    identities.add_argument("--samples", type=int, help="Random samples per m (default: 1000)")
    identities.add_argument("--seed", type=int, help="Random seed (default: 0)")

    norms = sub.add_parser("norms", help="Weighted C^k,alpha norm of a source")
    norms.add_argument("--source", required=True, help="Registry source")
    norms.add_argument("--n", type=int, help="Real dimension (default: 4)")
    norms.add_argument("--beta", type=float, help="Weight (default: from source)")
    norms.add_argument("--k", type=int, help="Derivative order (default: 2)")
    norms.add_argument("--alpha", type=float, help="Holder exponent (default: 0.5)")

    for command_parser in (calabi, poisson, ma, pipeline, quotient, identities, norms):
        _add_grid_arguments(command_parser)
    return parser


PARAMETER_FLAGS = {
    "calabi": ("m", "class_constant"),
    "poisson": ("n", "beta", "group_order", "source"),
    "ma-solve": ("m", "beta", "background", "R", "class_constant", "steps", "method", "source"),
    "pipeline": ("m", "R", "class_constant", "steps", "method"),
    "quotient": ("m_values", "max_order"),
    "identities": ("m_values", "samples", "seed"),
    "norms": ("source", "n", "beta", "k", "alpha"),
}


def job_from_args(args: argparse.Namespace) -> dict:
    """Raw job object from subcommand flags; unset flags keep defaults."""
    command = args.command
    parameters = {
        key: getattr(args, key)
        for key in PARAMETER_FLAGS[command]
        if getattr(args, key, None) is not None
    }
    if getattr(args, "source_csv", None):
        if "source" in parameters:
            raise ConfigError("give either --source or --source-csv")
        parameters["source"] = {"csv": args.source_csv}
    if command == "quotient" and args.values:
        if len(args.values) < 3:
            raise ConfigError("quotient needs m k a_1 ... a_m")
        m, k, *exponents = args.values
        parameters.update({"m": m, "k": k, "exponents": exponents})
    job: dict = {"command": command, "parameters": parameters}
    if args.name:
        job["name"] = args.name
    grid = {
        key: getattr(args, key)
        for key in ("t_min", "t_max", "n_points")
        if getattr(args, key) is not None
    }
    if grid:
        job["grid"] = grid
    if args.formats:
        job["output"] = {"formats": args.formats}
    return job


def main(argv: list[str] | None = None) -> int:
    """CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format=LOG_FORMAT,
        stream=sys.stderr,
    )

    modes = sum([bool(args.check), bool(args.config), bool(args.command)])
    if modes != 1:
        parser.print_usage(sys.stderr)
        print("Error: give exactly one of --check, --config or a command", file=sys.stderr)
        return 2
    if args.jobs == 0:
        print("Error: --jobs must be nonzero", file=sys.stderr)
        return 2

    try:
        if args.check:
            configs = check_suite(args.out)
        elif args.config:
            configs = load_jobs(args.config, args.out)
        else:
            configs = [JobConfig.from_dict(job_from_args(args), args.out)]
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2

    try:
        reports = run_jobs(configs, args.jobs)
        for report in reports:
            write_report(report)
        if args.check:
            write_check_summary(reports, configs[0].output_directory)
    except (RunError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    for report in reports:
        passed = sum(check.passed for check in report.checks)
        print(f"{report.config.name}: {passed}/{len(report.checks)} checks passed")
        for check in report.checks:
            if not check.passed:
                print(f"  failed {check.name}: computed {check.computed}, "
                      f"target {check.target}", file=sys.stderr)
    return 0 if all(report.passed for report in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
