"""
Command-line front door: band scans, gap-eigenvalue analyses, verification and the embedded demo

    python -m app.main bands --config configs/cos_potential.toml --out out/
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from app.config.problem_loader import load_problem
from app.config.settings import get_settings
from app.core.exceptions import ComparisonFailure, ConfigError, GapEdgeError
from app.schemas.band_edges import EdgeSide
from app.schemas.perturbation import PerturbationKind
from app.schemas.problem_config import ProblemConfig
from app.schemas.reports import (
    ComplexDTO,
    EmbeddedDemoDTO,
    ExistenceVerdict,
    GapEigenvalueReportDTO,
    VerifyRowDTO,
)
from app.services.bands.band_service import BandScan, BandService
from app.services.ode.coefficients import OperatorCoefficients
from app.services.oracle.direct_oracle_service import (
    DirectOracleService,
    DiscreteBands,
    SpectralWindow,
)
from app.services.perturbation.perturbation_service import PerturbationService
from app.tasks.gap_tasks import gap_payloads, half_gap, run_gap_job, select_edges
from app.tasks.oracle_tasks import oracle_payloads, rows_from_results, run_oracle_job
from app.utils.csv_writer import eps_tag, write_csv, write_report
from app.utils.my_logging import setup_logging
from app.worker import run_jobs

logger = logging.getLogger(__name__)

EMBEDDED_DIAGNOSTIC_TOL = 1e-6
EMBEDDED_ORACLE_TOL = 1e-3
EMBEDDED_TAIL_MAX = 1e-4
EMBEDDED_BOX_MARGIN = 1.0
SCALED_ERROR_GROWTH = 1.5


# ============================================================================
# bands
# ============================================================================

def command_bands(config: ProblemConfig, out_dir: Path, args) -> int:
    coeffs = OperatorCoefficients.from_spec(config.coefficients)
    scan = BandService.find_band_edges(coeffs, config.run.lambda_max)
    rows = [
        (lam.real, d.real, d.imag, abs(d.real) <= 2.0)
        for lam, d in zip(scan.lambdas, scan.discriminants)
        if lam.real <= config.run.lambda_max
    ]
    write_csv(out_dir / "bands.csv", ["lambda", "ReD", "ImD", "in_band"], rows)
    _write_edges(out_dir, scan)
    print(f"bands: {len(scan.edges)} edges, {len(scan.lacunas)} lacunas up to lambda_max={config.run.lambda_max}")
    return 0


def _write_edges(out_dir: Path, scan: BandScan) -> None:
    write_csv(
        out_dir / "edges.csv",
        ["n", "side", "parity", "mu", "ddot", "degenerate"],
        [(e.n, e.side, e.parity, e.mu, e.ddot, e.degenerate) for e in scan.edges],
    )


# ============================================================================
# gap-eig
# ============================================================================

def _epsilons(config: ProblemConfig) -> List[float]:
    if config.run.epsilons:
        return list(config.run.epsilons)
    if config.embedded_epsilon is not None:
        return [config.embedded_epsilon]
    raise ConfigError("run.epsilons is empty", {"field": "run.epsilons"})


def _analyse(config: ProblemConfig, args):
    coeffs = OperatorCoefficients.from_spec(config.coefficients)
    scan = BandService.find_band_edges(coeffs, config.run.lambda_max)
    refs = select_edges(scan, config)
    payloads = gap_payloads(config, refs, _epsilons(config))
    results = run_jobs(run_gap_job, payloads, args.jobs, verbose=not args.quiet)
    return coeffs, scan, results


def _write_gap_outputs(out_dir: Path, result: Dict[str, Any]) -> GapEigenvalueReportDTO:
    dto = GapEigenvalueReportDTO.model_validate(result["report"])
    tag = f"n{dto.n}_{dto.side.value}_eps{eps_tag(dto.epsilon)}"
    write_report(out_dir / f"report_{tag}.txt", dto)
    if "eigenfunction" in result:
        ef = result["eigenfunction"]
        write_csv(out_dir / f"eigenfunction_{tag}.csv", ["x", "Re psi", "Im psi"], zip(ef["x"], ef["re"], ef["im"]))
    for kind, table in result.get("kernels", {}).items():
        write_csv(out_dir / f"kernel_{kind}_{tag}.csv", ["x", "t", "Re", "Im"],
                  zip(table["x"], table["t"], table["re"], table["im"]))
    return dto


def command_gap_eig(config: ProblemConfig, out_dir: Path, args) -> int:
    _, scan, results = _analyse(config, args)
    _write_edges(out_dir, scan)
    for result in results:
        dto = _write_gap_outputs(out_dir, result)
        exact = f"{complex(dto.lambda_exact.re, dto.lambda_exact.im):.12g}" if dto.lambda_exact else "-"
        print(f"n={dto.n} side={dto.side.value} eps={dto.epsilon:g}: exists={dto.exists.value} "
              f"lambda_order2={complex(dto.lambda_order2.re, dto.lambda_order2.im):.12g} lambda_exact={exact}")
    return 0


# ============================================================================
# verify
# ============================================================================

def _value(dto: Optional[ComplexDTO]) -> Optional[complex]:
    return None if dto is None else complex(dto.re, dto.im)


def oracle_window(config: ProblemConfig, scan: BandScan, dto: GapEigenvalueReportDTO,
                  bands: DiscreteBands) -> SpectralWindow:
    """Half-gap next to the edge, kept clear of the discrete bands"""
    lam_pred = _value(dto.lambda_exact) or _value(dto.lambda_order2)
    half_height = config.oracle.half_height
    for lo, hi in config.oracle.windows:
        if lo <= lam_pred.real <= hi:
            return SpectralWindow(lo, hi, half_height, im_center=lam_pred.imag)

    edge = scan.edge(dto.n, dto.side)
    lo, hi = half_gap(edge, scan, lam_pred)
    guard = 2.0 * bands.margin + 1e-9 * max(1.0, abs(edge.mu))
    touching = [b for b in bands.bands if b[1] >= lo and b[0] <= hi]
    if dto.side == EdgeSide.PLUS:
        hi = min([hi] + [b[0] for b in touching]) - guard
    else:
        lo = max([lo] + [b[1] for b in touching]) + guard
    width = config.oracle.window_halfwidth
    if width is not None:
        lo, hi = max(lo, lam_pred.real - width), min(hi, lam_pred.real + width)
    return SpectralWindow(lo, hi, half_height, im_center=lam_pred.imag)


def _oracle_half_width(config: ProblemConfig, dto: GapEigenvalueReportDTO, window: SpectralWindow, x1: float) -> float:
    if config.oracle.R is not None:
        return config.oracle.R
    if dto.exists == ExistenceVerdict.YES:
        reference = _value(dto.lambda_exact) or _value(dto.lambda_order2)
    else:
        reference = dto.mu - dto.side.sign * (window.hi - window.lo)
    return DirectOracleService.default_half_width(reference, dto.mu, x1)


def _check(dto: GapEigenvalueReportDTO, count: int, max_count: int, oracle: Optional[complex],
           error_bar: Optional[float]) -> List[str]:
    reasons = []
    if max_count > 1:
        reasons.append(f"{max_count} eigenvalues in one half-gap")
    if dto.exists == ExistenceVerdict.YES and count != 1:
        reasons.append(f"criterion yes but oracle found {count}")
    if dto.exists == ExistenceVerdict.NO and count != 0:
        reasons.append(f"criterion no but oracle found {count}")
    exact = _value(dto.lambda_exact)
    if exact is not None and oracle is not None and error_bar is not None:
        tolerance = 3.0 * error_bar + 1e-3 * abs(oracle - dto.mu) + 1e-12
        if abs(exact - oracle) > tolerance:
            reasons.append(f"exact eigenvalue off the oracle by {abs(exact - oracle):.3e} (> {tolerance:.3e})")
    return reasons


def command_verify(config: ProblemConfig, out_dir: Path, args) -> int:
    if config.perturbation.kind == PerturbationKind.EMBEDDED_EXAMPLE:
        return command_embedded_demo(config, out_dir, args)

    coeffs, scan, results = _analyse(config, args)
    h0 = config.oracle.h
    bands = DirectOracleService.discrete_bands(coeffs, h0 / 2 ** (config.oracle.refinements - 1),
                                               config.run.lambda_max + 10.0)
    x1 = PerturbationService.build(config.perturbation).support.x1

    verify_rows: List[VerifyRowDTO] = []
    for result in results:
        dto = _write_gap_outputs(out_dir, result)
        window = oracle_window(config, scan, dto, bands)
        R0 = _oracle_half_width(config, dto, window, x1)
        payloads = oracle_payloads(config, dto.epsilon, window, R0, h0, bands)
        rows = rows_from_results(run_jobs(run_oracle_job, payloads, args.jobs, verbose=not args.quiet))
        study = DirectOracleService.summarize(rows)
        tag = f"n{dto.n}_{dto.side.value}_eps{eps_tag(dto.epsilon)}"
        write_csv(
            out_dir / f"oracle_{tag}.csv", ["R", "h", "Re lambda", "Im lambda", "residual"],
            [(row.R, row.h, p.value.real, p.value.imag, p.residual) for row in rows for p in row.eigenpairs],
        )

        finest = rows[-1]
        count = len(finest.eigenpairs)
        max_count = max(len(row.eigenpairs) for row in rows)
        oracle = study.extrapolated if count == 1 else None
        asymptotic = _value(dto.lambda_order2)
        reasons = _check(dto, count, max_count, oracle, study.error_bar)
        error = abs(asymptotic - oracle) if oracle is not None else None
        verify_rows.append(VerifyRowDTO(
            n=dto.n, side=dto.side, epsilon=dto.epsilon, exists=dto.exists, oracle_count=count,
            lambda_asymptotic=ComplexDTO.of(asymptotic), lambda_exact=dto.lambda_exact,
            lambda_oracle=ComplexDTO.of(oracle), error_bar=study.error_bar, error=error,
            scaled_error=error / dto.epsilon ** 3 if error is not None else None,
            passed=not reasons, reason="; ".join(reasons),
        ))

    _check_scaling(verify_rows)
    write_csv(
        out_dir / "verify.csv",
        ["n", "side", "epsilon", "exists", "oracle_count", "Re lambda_asym", "Im lambda_asym",
         "Re lambda_exact", "Im lambda_exact", "Re lambda_oracle", "Im lambda_oracle",
         "error_bar", "error", "scaled_error", "passed", "reason"],
        [
            (r.n, r.side, r.epsilon, r.exists, r.oracle_count,
             r.lambda_asymptotic.re, r.lambda_asymptotic.im,
             r.lambda_exact.re if r.lambda_exact else None, r.lambda_exact.im if r.lambda_exact else None,
             r.lambda_oracle.re if r.lambda_oracle else None, r.lambda_oracle.im if r.lambda_oracle else None,
             r.error_bar, r.error, r.scaled_error, r.passed, r.reason)
            for r in verify_rows
        ],
    )
    failed = [r for r in verify_rows if not r.passed]
    print(f"verify: {len(verify_rows) - len(failed)}/{len(verify_rows)} checks passed")
    if failed:
        first = failed[0]
        raise ComparisonFailure(
            f"{len(failed)} of {len(verify_rows)} checks failed; first: n={first.n} {first.side.value} "
            f"eps={first.epsilon:g}: {first.reason}",
            {"failed": len(failed)},
        )
    return 0


def _check_scaling(rows: List[VerifyRowDTO]) -> None:
    """error / eps^3 must stay bounded as eps decreases along each edge"""
    by_edge: Dict[tuple, List[VerifyRowDTO]] = {}
    for row in rows:
        if row.scaled_error is not None:
            by_edge.setdefault((row.n, row.side), []).append(row)
    for series in by_edge.values():
        series.sort(key=lambda r: -r.epsilon)
        for coarse, fine in zip(series, series[1:]):
            if fine.scaled_error > SCALED_ERROR_GROWTH * coarse.scaled_error + 1e-6:
                fine.passed = False
                fine.reason = "; ".join(filter(None, [
                    fine.reason, f"error/eps^3 grew from {coarse.scaled_error:.3e} to {fine.scaled_error:.3e}",
                ]))


# ============================================================================
# embedded-demo
# ============================================================================

def command_embedded_demo(config: Optional[ProblemConfig], out_dir: Path, args) -> int:
    alpha, epsilon, h, R, half_width = 2.0, 0.3, 1.0 / 256.0, None, None
    if config is not None:
        if config.perturbation.kind == PerturbationKind.EMBEDDED_EXAMPLE:
            alpha, epsilon = config.perturbation.alpha, config.embedded_epsilon
        h, R, half_width = config.oracle.h, config.oracle.R, config.oracle.window_halfwidth

    witness = PerturbationService.embedded_witness(alpha, epsilon)
    psi = witness.psi
    write_csv(out_dir / "embedded_witness.csv", ["x", "Re psi", "Im psi"],
              zip(psi.points, psi.values.real, psi.values.imag))

    lam = witness.lambda_e
    passed = witness.max_diagnostic <= EMBEDDED_DIAGNOSTIC_TOL
    dto = EmbeddedDemoDTO(alpha=alpha, epsilon=epsilon, nu=witness.perturbation.nu, lambda_e=lam,
                          diagnostics=witness.diagnostics, passed=passed)
    if not args.skip_oracle:
        R = R or witness.perturbation.support.x1 + EMBEDDED_BOX_MARGIN
        width = half_width or 0.02 * lam
        refined = DirectOracleService.two_grid_eigenvalue(
            OperatorCoefficients.constant(0.0), witness.perturbation, epsilon,
            SpectralWindow(lam - width, lam + width, width), R, h, interior_only=False,
        )
        if refined is not None:
            dto.oracle_value = ComplexDTO.of(refined.fine.value)
            dto.oracle_extrapolated = ComplexDTO.of(refined.extrapolated)
            dto.oracle_error = abs(refined.extrapolated - lam)
            dto.oracle_tail_mass = refined.fine.tail_mass
            dto.oracle_residual = refined.fine.residual
            write_csv(
                out_dir / "oracle_embedded.csv", ["h", "Re lambda", "Im lambda", "tail_mass", "residual"],
                [(h / 2 ** level, p.value.real, p.value.imag, p.tail_mass, p.residual)
                 for level, p in enumerate((refined.coarse, refined.fine))],
            )
            dto.passed = (passed and dto.oracle_error <= EMBEDDED_ORACLE_TOL
                          and dto.oracle_tail_mass <= EMBEDDED_TAIL_MAX)
        else:
            dto.passed = False

    write_report(out_dir / "report_embedded.txt", dto)
    print(f"embedded-demo: lambda={lam:.12g} max diagnostic={witness.max_diagnostic:.3e} passed={dto.passed}")
    if not dto.passed:
        raise ComparisonFailure(f"embedded eigenvalue checks failed for alpha={alpha}, eps={epsilon}",
                                {"max_diagnostic": witness.max_diagnostic})
    return 0


# ============================================================================
# Entry point
# ============================================================================

COMMANDS = {
    "bands": command_bands,
    "gap-eig": command_gap_eig,
    "verify": command_verify,
    "embedded-demo": command_embedded_demo,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML problem file")
    common.add_argument("--out", type=Path, help="Output directory (overrides output_dir)")
    common.add_argument("--lambda-max", type=float, dest="lambda_max", help="Upper end of the band scan")
    common.add_argument("--jobs", type=int, default=get_settings().DEFAULT_JOBS, help="Worker processes")
    common.add_argument("--quiet", action="store_true", help="Only warnings and errors in the log")

    parser = argparse.ArgumentParser(prog="gapedge", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("bands", parents=[common], help="Discriminant, band edges and lacunas")
    sub.add_parser("gap-eig", parents=[common], help="Gap-eigenvalue reports per (edge, epsilon)")
    sub.add_parser("verify", parents=[common], help="Compare the asymptotics with the finite-difference oracle")
    demo = sub.add_parser("embedded-demo", parents=[common], help="Embedded eigenvalue construction")
    demo.add_argument("--skip-oracle", action="store_true", help="Only the quadrature diagnostics")
    return parser


def _error_line(kind: str, code: int, message: str) -> str:
    text = message.replace('"', "'").replace("\n", " ")
    return f'ERROR code={code} kind={kind} message="{text}"'


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if not hasattr(args, "skip_oracle"):
        args.skip_oracle = False
    setup_logging(verbose=not args.quiet)
    settings = get_settings()

    try:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be at least 1, got {args.jobs}", {"field": "jobs"})
        if args.config is None and args.command != "embedded-demo":
            raise ConfigError(f"{args.command} needs --config", {"field": "config"})
        config = load_problem(args.config) if args.config is not None else None
        if config is not None and args.lambda_max is not None:
            config.run.lambda_max = args.lambda_max
        out_dir = Path(args.out or (config.output_dir if config and config.output_dir else settings.OUTPUT_DIR))
        out_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"🚀 {args.command}: writing to {out_dir}")
        return COMMANDS[args.command](config, out_dir, args)
    except GapEdgeError as exc:
        logger.error(f"{exc.kind}: {exc.message}")
        print(exc.as_line(), file=sys.stderr)
        return exc.code
    except Exception as exc:
        logger.exception(f"Unexpected failure in {args.command}")
        print(_error_line("InternalError", 3, f"{type(exc).__name__}: {exc}"), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
