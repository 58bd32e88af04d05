"""Command-line controller: one subcommand per experiment, outputs through the report repository."""
import argparse
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np

from vrlab.config import settings
from vrlab.exceptions import LabError, NumericalError, PreconditionError
from vrlab.models.coefficients import BoundarySpec, DiffusionSpec, DriftSpec, FrozenCoefficients
from vrlab.models.lattice import AdaptedField, LatticeModel, TimeGrid
from vrlab.models.presets import make_boundary, make_diffusion, make_drift
from vrlab.schemas.scenario_schema import BoundaryConfig, CoefficientsConfig, ScenarioConfig
from vrlab.services.analysis_service import AnalysisService
from vrlab.services.coefficient_service import CoefficientService
from vrlab.services.representation_service import RepresentationService
from vrlab.services.scene_service import SceneService
from vrlab.services.skorohod_service import SkorohodService
from vrlab.services.vrbdsde_service import VrbdsdeService
from vrlab.storage.repository import ReportRepository

logger = logging.getLogger(__name__)

EXPERIMENTS = ("solve", "represent", "skorohod", "compare", "stability", "validate", "bounds")
EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 2, 3


@dataclass
class Scenario:
    config: ScenarioConfig
    model: LatticeModel
    f: DriftSpec
    g: DiffusionSpec
    X: BoundarySpec

    @property
    def strict(self) -> bool:
        return self.config.solver.strict

    @property
    def solver_opts(self) -> Dict[str, Any]:
        s = self.config.solver
        return {"tol_fp": s.tol_fp, "max_iter": s.max_iter, "y0_policy": s.y0_policy,
                "bracket": s.bracket, "tol_l": s.tol_l}


@dataclass
class Outcome:
    passed: bool
    summary: Dict[str, Any] = field(default_factory=dict)
    report: Dict[str, Any] = field(default_factory=dict)
    fields: Dict[str, AdaptedField] = field(default_factory=dict)


def build_coefficients(config: CoefficientsConfig):
    d = config.drift
    f = make_drift(d.preset, d.lipschitz_y, d.lower_slope, d.upper_slope, **d.params)
    g = make_diffusion(config.diffusion.preset, config.diffusion.lipschitz_y, **config.diffusion.params)
    return f, g


def build_boundary(model: LatticeModel, config: BoundaryConfig) -> BoundarySpec:
    return make_boundary(model, config.preset, **config.params)


def build_scenario(config: ScenarioConfig) -> Scenario:
    model = SceneService.build_lattice(TimeGrid(horizon=config.grid.T, steps=config.grid.N))
    f, g = build_coefficients(config.coefficients)
    return Scenario(config=config, model=model, f=f, g=g, X=build_boundary(model, config.boundary))


def _solution_payload(sol) -> Dict[str, Any]:
    return {
        "iterations": sol.iterations,
        "residual_history": sol.residual_history,
        "contraction_constant": sol.contraction_constant,
        "certified": sol.certified,
        "y0_policy": sol.y0_policy,
        "tol_fp": sol.tol_fp,
        "checks": sol.checks,
        "flat_off_residual": sol.skorohod.flat_off_residual,
        "max_jump": sol.skorohod.max_jump,
        "measurability_gap": sol.skorohod.measurability_gap(),
        "clamp_count": sol.skorohod.clamp_count,
    }


def run_validate(sc: Scenario) -> Outcome:
    probes = CoefficientService.default_probes(sc.model, sc.X, sc.config.solver.bracket or (-1.0, 1.0))
    report = CoefficientService.validate_assumptions(sc.model, sc.f, sc.g, sc.X, probes, strict=sc.strict,
                                                     gamma_declared=sc.config.coefficients.gamma,
                                                     family=sc.config.family)
    summary = {"gamma_estimate": report.gamma_estimate, "assumptions_ok": report.ok}
    return Outcome(passed=report.ok, summary=summary, report=report.model_dump(mode="json"),
                   fields={"X": sc.X.values})


def run_represent(sc: Scenario) -> Outcome:
    coeffs = FrozenCoefficients(sc.model, sc.f, sc.g)
    s = sc.config.solver
    rep = RepresentationService.index_process(sc.model, coeffs, sc.X, s.bracket, s.tol_l, strict=sc.strict)
    residual = RepresentationService.verify_representation(sc.model, coeffs, sc.X, rep)
    summary = {"clamp_count": rep.clamp_count, "max_residual": residual.max_residual,
               "residual_ok": residual.ok, "tol_l": rep.tol_l}
    return Outcome(passed=residual.ok, summary=summary, report=residual.model_dump(mode="json"),
                   fields={"X": sc.X.values, "L": rep.L})


def run_skorohod(sc: Scenario) -> Outcome:
    s = sc.config.solver
    sol = SkorohodService.solve_skorohod(sc.model, FrozenCoefficients(sc.model, sc.f, sc.g), sc.X,
                                         s.bracket, s.tol_l, sc.strict)
    checks = VrbdsdeService.theorem_checks(sol, sc.f)
    summary = {"clamp_count": sol.clamp_count, "flat_off_residual": sol.flat_off_residual,
               "max_jump": sol.max_jump, "tol_l": sol.representation.tol_l}
    report = {"checks": checks, "flat_off_residual": sol.flat_off_residual, "max_jump": sol.max_jump,
              "measurability_gap": sol.measurability_gap()}
    return Outcome(passed=all(checks.values()), summary=summary, report=report, fields=sol.node_fields())


def run_solve(sc: Scenario) -> Outcome:
    sol = VrbdsdeService.solve(sc.model, sc.f, sc.g, sc.X, strict=sc.strict, **sc.solver_opts)
    summary = {"clamp_count": sol.skorohod.clamp_count, "iterations": sol.iterations, "certified": sol.certified,
               "tol_fp": sol.tol_fp, "tol_l": sol.skorohod.representation.tol_l,
               "flat_off_residual": sol.skorohod.flat_off_residual}
    report = _solution_payload(sol)
    steps = sc.config.refinement_steps
    if steps:
        rows = AnalysisService.refinement_table(
            sc.config.grid.T, steps, sc.f, sc.g, lambda m: build_boundary(m, sc.config.boundary),
            strict=sc.strict, **sc.solver_opts)
        report["refinement"] = [row.model_dump(mode="json") for row in rows]
    return Outcome(passed=sol.passed, summary=summary, report=report, fields=sol.skorohod.node_fields())


def run_compare(sc: Scenario) -> Outcome:
    second = sc.config.comparison.second
    f2, g2 = (sc.f, sc.g) if second.coefficients is None else build_coefficients(second.coefficients)
    X2 = sc.X if second.boundary is None else build_boundary(sc.model, second.boundary)
    report, sol1, _ = AnalysisService.compare_runs(sc.model, (sc.f, sc.g, sc.X), (f2, g2, X2),
                                                   sc.config.comparison.epsilon, sc.strict, **sc.solver_opts)
    summary = {"a_order_ok": report.a_order_ok, "y_order_ok": report.y_order_ok,
               "comparison_status": report.status, "epsilon": report.epsilon}
    # failed hypotheses leave nothing to assert
    passed = report.ok or bool(report.failed_hypotheses)
    return Outcome(passed=passed, summary=summary, report=report.model_dump(mode="json"),
                   fields=sol1.skorohod.node_fields())


def run_stability(sc: Scenario) -> Outcome:
    st = sc.config.stability
    perturbations = [(f"{st.kind}:n={n}", AnalysisService.perturb(sc.model, sc.X, st.kind, n)) for n in st.ns]
    reports = AnalysisService.stability_experiment(sc.model, sc.f, sc.g, sc.X, perturbations, sc.config.family,
                                                   sc.strict, **sc.solver_opts)
    passed = all(r.bound_ok and r.a_bound_ok for r in reports)
    summary = {"perturbations": len(reports), "bounds_ok": passed,
               "max_y_gap": max(r.y_gap for r in reports)}
    return Outcome(passed=passed, summary=summary,
                   report={"stability": [r.model_dump(mode="json") for r in reports]},
                   fields={"X": sc.X.values})


def run_bounds(sc: Scenario) -> Outcome:
    b = sc.config.bounds
    perturbed = None if b.perturbation is None else sc.X.shifted(b.perturbation)
    report = AnalysisService.apriori_bounds(sc.model, sc.f, sc.g, sc.X, sc.model.constant(b.y),
                                            sc.model.constant(b.y_prime), sc.config.family, perturbed,
                                            **sc.solver_opts)
    summary = {"gamma_estimate": report.gamma_estimate, "bounds_ok": report.ok}
    summary.update({f"slack_{c.name}": c.slack for c in report.checks})
    return Outcome(passed=report.ok, summary=summary, report=report.model_dump(mode="json"),
                   fields={"X": sc.X.values})


HANDLERS = {
    "solve": run_solve,
    "represent": run_represent,
    "skorohod": run_skorohod,
    "compare": run_compare,
    "stability": run_stability,
    "validate": run_validate,
    "bounds": run_bounds,
}


def base_summary(config: ScenarioConfig, sc: Optional[Scenario]) -> Dict[str, Any]:
    summary = {
        "schema_version": config.schema_version,
        "experiment": config.experiment,
        "mode": "strict" if config.solver.strict else "exploration",
        "seed": config.seed,
        "grid_T": config.grid.T,
        "grid_N": config.grid.N,
        "tol_fp": config.solver.tol_fp,
        "tol_l": config.solver.tol_l if config.solver.tol_l is not None else settings.tol_l,
        "clamp_count": 0,
    }
    if sc is not None:
        T = sc.model.grid.horizon
        summary["contraction_constant"] = CoefficientService.contraction_constant(sc.f, sc.g, T)
        summary["stability_constant"] = CoefficientService.stability_constant(sc.f, sc.g, T)
    return summary


def run(config_path: Path, out_dir: Path, experiment: Optional[str] = None, strict: Optional[bool] = None,
        seed: Optional[int] = None) -> int:
    """
    Execute one experiment and write its outputs.

    Returns:
        0 when every assertion passed, 2 when a theorem assertion failed, 3 on a precondition or config error
    """
    try:
        config = ScenarioConfig.load(config_path)
    except PreconditionError as e:
        logger.error(f"Invalid config {config_path}: {e}")
        ReportRepository.save_summary(out_dir, {"error": str(e), "error_type": type(e).__name__})
        ReportRepository.save_verdict(out_dir, EXIT_ERROR)
        return EXIT_ERROR

    update: Dict[str, Any] = {}
    if experiment is not None:
        update["experiment"] = experiment
    if seed is not None:
        update["seed"] = seed
    if strict is not None:
        update["solver"] = config.solver.model_copy(update={"strict": strict})
    config = config.model_copy(update=update)
    logger.info(f"Running {config.experiment} from {config_path} into {out_dir}")

    sc = None
    try:
        sc = build_scenario(config)
        outcome = HANDLERS[config.experiment](sc)
        code = EXIT_PASS if outcome.passed else EXIT_FAIL
    except PreconditionError as e:
        logger.error(f"Precondition failed: {e}")
        outcome, code = Outcome(passed=False, summary={"error": str(e), "error_type": type(e).__name__}), EXIT_ERROR
    except NumericalError as e:
        logger.warning(f"Theorem assertion failed: {e}")
        outcome, code = Outcome(passed=False, summary={"error": str(e), "error_type": type(e).__name__}), EXIT_FAIL
    except LabError as e:
        logger.error(f"Run failed: {e}", exc_info=True)
        outcome, code = Outcome(passed=False, summary={"error": str(e), "error_type": type(e).__name__}), EXIT_ERROR

    summary = base_summary(config, sc)
    summary.update(outcome.summary)
    summary["verdict"] = code
    report = {"config": config.model_dump(mode="json"), "experiment": config.experiment,
              "result": outcome.report, "verdict": code}
    ReportRepository.save_summary(out_dir, summary)
    ReportRepository.save_report(out_dir, _jsonable(report))
    if sc is not None and outcome.fields:
        ReportRepository.save_nodes(out_dir, sc.model, outcome.fields)
    ReportRepository.save_verdict(out_dir, code)
    return code


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vrlab", description="Variant reflected BDSDE desk laboratory")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, type=Path, help="scenario JSON file")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--strict", action=argparse.BooleanOptionalAction, default=None,
                       help="override solver.strict")
        p.add_argument("--seed", type=int, default=None, help="echoed into the summary")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.config, args.out, args.experiment, args.strict, args.seed)
