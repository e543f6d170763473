"""
Graph KMS Toolkit - command line entry point
Loads a graph, decides the critical KMS state, evaluates it on expressions,
builds the orthogonal filtration and runs the verification suites
"""

import sys
import json
import logging
from contextlib import contextmanager
from fractions import Fraction
from typing import Any, Dict, List, Optional

import click
import pandas as pd

from config import get_settings
from filtration import build_filtration, verify_density, verify_orthogonality
from graph_model import (
    Graph,
    GraphValidationError,
    has_no_sink,
    is_connected,
    is_cuntz,
    is_strongly_connected,
    is_weakly_connected,
    load_graph_file,
    vertex_matrix,
)
from kms_functional import KmsState, TauFunctional, format_scalar, in_tau_domain, phi, tau
from spectral_kms import KmsVerdict, SpectralConvergenceError, is_row_regular, kms_verdict
from star_algebra import (
    ExpressionSyntaxError,
    ExpressionVocabularyError,
    degree_decompose,
    parse_element,
    render_element,
)
from verify_suites import SUITES, all_passed, run_verification

logger = logging.getLogger(__name__)

__version__ = "0.1.0"
TOOLKIT_NAME = "graph-kms-toolkit"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2


def _fail(message: str, code: int) -> None:
    logger.error(message)
    click.echo(f"❌ {message}", err=True)
    sys.exit(code)


@contextmanager
def _exit_codes():
    """Map toolkit errors onto the process exit code"""
    try:
        yield
    except (GraphValidationError, ExpressionSyntaxError, ExpressionVocabularyError) as e:
        _fail(str(e), EXIT_INVALID)
    except (SpectralConvergenceError, ArithmeticError, ValueError) as e:
        _fail(str(e), EXIT_FAILURE)


# Report sections


def _header(arithmetic: str) -> Dict[str, Any]:
    return {"toolkit": {"name": TOOLKIT_NAME, "version": __version__}, "arithmetic": arithmetic}


def graph_summary(g: Graph) -> Dict[str, Any]:
    return {
        "vertices": list(g.vertices),
        "edges": [e.id for e in g.edges],
        "no_sink": has_no_sink(g),
        "connected": is_connected(g),
        "weakly_connected": is_weakly_connected(g),
        "strongly_connected": is_strongly_connected(g),
        "row_regular": is_row_regular(vertex_matrix(g)),
        "cuntz": is_cuntz(g),
        "vertex_matrix": vertex_matrix(g).to_list(),
    }


def verdict_summary(verdict: KmsVerdict) -> Dict[str, Any]:
    spectral = verdict.spectral
    return {
        "spectral": {
            "rho": format_scalar(spectral.rho),
            "exact": spectral.is_exact,
            "eigenspace_dimension": spectral.eigenspace_dimension,
            "iterations": spectral.iterations,
            "residual": spectral.residual,
        },
        "kms": {
            "beta_critical": verdict.beta_critical,
            "exists_on_graph_algebra": verdict.exists_on_graph_algebra,
            "state_vector": None if verdict.state_vector is None else [format_scalar(x) for x in verdict.state_vector],
            "non_unique": verdict.non_unique,
            "unique_by_strong_connectivity": verdict.unique_by_strong_connectivity,
            "diagnostics": verdict.diagnostics,
        },
    }


def _state_for(g: Graph, verdict: KmsVerdict, measure: Optional[List[Fraction]] = None) -> KmsState:
    if measure is not None:
        return KmsState.from_measure(g, measure)
    if not verdict.exists_on_graph_algebra:
        _fail("no faithful-on-F_k critical KMS state on this graph", EXIT_FAILURE)
    return KmsState.from_verdict(g, verdict)


def _banner(title: str) -> None:
    click.echo(f"\n{'=' * 70}")
    click.echo(title)
    click.echo("=" * 70)


def _emit(report: Dict[str, Any], as_json: bool, render) -> None:
    if as_json:
        click.echo(json.dumps(report, indent=2))
    else:
        render(report)


def _render_analysis(report: Dict[str, Any]) -> None:
    graph, spectral, kms = report["graph"], report["spectral"], report["kms"]
    _banner(f"KMS ANALYSIS: {len(graph['vertices'])} vertices, {len(graph['edges'])} edges")
    click.echo(f"No sink: {graph['no_sink']}   Strongly connected: {graph['strongly_connected']}   "
               f"Row-regular: {graph['row_regular']}   Cuntz: {graph['cuntz']}")
    click.echo(f"Spectral radius: {spectral['rho']} ({'exact' if spectral['exact'] else 'float'})")
    click.echo(f"Critical beta: {kms['beta_critical']:.12g}")
    if kms["exists_on_graph_algebra"]:
        click.echo(f"✅ Critical KMS state exists, vertex weights {', '.join(kms['state_vector'])}")
    else:
        click.echo("⚠️  No faithful-on-F_k critical KMS state")
    if kms["non_unique"]:
        click.echo("⚠️  Eigenspace is degenerate: the state is one representative of many")
    click.echo(f"Diagnostics: {kms['diagnostics']}")


def _render_evaluation(report: Dict[str, Any]) -> None:
    ev = report["evaluation"]
    _banner(f"EVALUATION: {ev['expression']}")
    click.echo(f"Element: {ev['element']}")
    click.echo(f"phi = {ev['phi']}")
    if ev["tau"] is not None:
        click.echo(f"tau = {ev['tau']}")


def _render_filtration(report: Dict[str, Any]) -> None:
    section = report["filtration"]
    _banner(f"ORTHOGONAL FILTRATION: K={section['max_k']}, R={section['max_r']}")
    click.echo(pd.DataFrame(section["components"]).to_string(index=False))
    orth = section["orthogonality"]
    mark = "✅" if orth["passed"] else "❌"
    click.echo(f"\n{mark} Orthogonality over {len(orth['pairs'])} pairs, max |<a,b>| = {orth['max_abs_inner']}")
    density = section["density"]
    if density is None:
        click.echo("Span density: skipped")
    else:
        mark = "✅" if density["passed"] else "❌"
        click.echo(f"{mark} Span density at level {density['level']}: {density['words_checked']} words, "
                   f"max residual {density['max_residual_norm']:.3e}")


def _render_verification(report: Dict[str, Any]) -> None:
    section = report["verification"]
    _banner(f"VERIFICATION: suite {section['suite']}, max length {section['max_len']}")
    frame = pd.DataFrame(section["checks"], columns=["suite", "name", "status", "cases", "detail"])
    click.echo(frame.to_string(index=False))
    click.echo(f"\n{'✅ All checks passed' if section['passed'] else '❌ Some checks failed'}")


def _parse_measure(ctx, param, value: Optional[str]) -> Optional[List[Fraction]]:
    if value is None:
        return None
    try:
        return [Fraction(part.strip()) for part in value.split(",")]
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter("expected comma-separated numbers such as 1/2,1/2") from None


# Commands


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log pipeline progress at INFO level")
@click.version_option(version=__version__)
def cli(verbose: bool):
    """Critical KMS states and orthogonal filtrations of graph C*-algebras."""
    level = "INFO" if verbose else get_settings().log_level
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(asctime)s - %(levelname)s - %(message)s")


@cli.command()
@click.argument("graph_file", type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON")
def analyze(graph_file: str, as_json: bool):
    """Validate a graph and decide the critical KMS state."""
    with _exit_codes():
        g = load_graph_file(graph_file)
        verdict = kms_verdict(g)
        report = _header("exact" if verdict.is_exact else "float")
        report["graph"] = graph_summary(g)
        report.update(verdict_summary(verdict))
    _emit(report, as_json, _render_analysis)


@cli.command("eval")
@click.argument("graph_file", type=click.Path())
@click.option("--expr", "expression", required=True, help='Expression such as "S[e1]S*[e1] + 1/2*p[v]"')
@click.option("--measure", callback=_parse_measure, help="Vertex weights of a KMS measure, e.g. 1/2,1/4,1/4")
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON")
def eval_command(graph_file: str, expression: str, measure: Optional[List[Fraction]], as_json: bool):
    """Evaluate the critical KMS state (and tau when defined) on an expression."""
    with _exit_codes():
        g = load_graph_file(graph_file)
        element = parse_element(g, expression)
        verdict = kms_verdict(g)
        state = _state_for(g, verdict, measure)
        value = phi(state, element)
        report = _header("exact" if state.exact else "float")
        report["graph"] = graph_summary(g)
        report.update(verdict_summary(verdict))
        report["evaluation"] = {
            "expression": expression,
            "element": render_element(element),
            "measure": [format_scalar(w) for w in state.weights],
            "degrees": {str(d): render_element(part) for d, part in degree_decompose(element).items()},
            "phi": format_scalar(value),
            "tau": format_scalar(tau(TauFunctional(g), element)) if in_tau_domain(element) and not element.is_zero() else None,
        }
    _emit(report, as_json, _render_evaluation)


@cli.command()
@click.argument("graph_file", type=click.Path())
@click.option("--max-k", type=click.IntRange(min=0), default=None, help="Highest W level (default KMS_MAX_K)")
@click.option("--max-r", type=click.IntRange(min=0), default=None, help="Longest shift for V components (default KMS_MAX_R)")
@click.option("--density/--no-density", default=True, help="Run the span-density pass")
@click.option("--jobs", type=int, default=None, help="Parallel workers for cross-Gram blocks")
@click.option("--tol", type=float, default=None, help="Absolute tolerance for float mode")
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON")
def filtration(graph_file: str, max_k, max_r, density: bool, jobs, tol, as_json: bool):
    """Build W_k and the V components, then check orthogonality and span density."""
    settings = get_settings()
    max_k = settings.max_k if max_k is None else max_k
    max_r = settings.max_r if max_r is None else max_r
    with _exit_codes():
        g = load_graph_file(graph_file)
        verdict = kms_verdict(g)
        state = _state_for(g, verdict)
        components = build_filtration(state, max_k, max_r)
        orth = verify_orthogonality(state, components, tol=tol, n_jobs=jobs)

        density_section = None
        if density and is_cuntz(g):
            dense = verify_density(state, components, min(max_k, max_r), tol=tol)
            density_section = {
                "level": dense.level,
                "words_checked": dense.words_checked,
                "max_residual_norm": dense.max_residual_norm,
                "failures": dense.failures,
                "passed": dense.passed,
            }

        report = _header("exact" if state.exact else "float")
        report["graph"] = graph_summary(g)
        report.update(verdict_summary(verdict))
        report["filtration"] = {
            "max_k": max_k,
            "max_r": max_r,
            "components": [
                {"label": str(c.label), "dimension": c.dimension, "orthonormal": c.orthonormal} for c in components
            ],
            "orthogonality": {
                "passed": orth.passed,
                "max_abs_inner": format_scalar(orth.max_abs_inner),
                "pairs": [
                    {"pair": f"{p.first}|{p.second}", "max_abs_inner": format_scalar(p.max_abs_inner)}
                    for p in orth.pairs
                ],
            },
            "density": density_section,
        }
    _emit(report, as_json, _render_filtration)
    if not orth.passed or (density_section is not None and not density_section["passed"]):
        sys.exit(EXIT_FAILURE)


@cli.command()
@click.argument("graph_file", type=click.Path())
@click.option("--suite", type=click.Choice(SUITES + ("all",)), default="all", show_default=True)
@click.option("--max-len", type=click.IntRange(min=0), default=3, show_default=True)
@click.option("--tol", type=float, default=None, help="Absolute tolerance for float comparisons")
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON")
def verify(graph_file: str, suite: str, max_len: int, tol, as_json: bool):
    """Run the algebra, KMS and lemma property suites."""
    tol = get_settings().tolerance if tol is None else tol
    with _exit_codes():
        g = load_graph_file(graph_file)
        verdict = kms_verdict(g)
        state = _state_for(g, verdict)
        results = run_verification(state, suite, max_len, tol)
        report = _header("exact" if state.exact else "float")
        report["verification"] = {
            "suite": suite,
            "max_len": max_len,
            "tol": tol,
            "passed": all_passed(results),
            "checks": [
                {"suite": r.suite, "name": r.name, "status": r.status, "cases": r.cases, "detail": r.detail}
                for r in results
            ],
        }
    _emit(report, as_json, _render_verification)
    if not report["verification"]["passed"]:
        sys.exit(EXIT_FAILURE)


def main():
    """Main entry point"""
    cli(prog_name="graph-kms")


if __name__ == "__main__":
    main()
