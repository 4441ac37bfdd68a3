#!/usr/bin/env python3
"""
distnorm command line.

Every subcommand builds a :class:`~distnorm.report.Report`, which is written
to standard output (or ``--out``) as JSON or CSV, tagged with the seed, the
sample count and the tolerance. Exit codes: 0 success, 1 invalid input or
configuration, 2 a checked bound failed, 64 usage error, 65 malformed file.
"""

from __future__ import annotations

import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np

from . import bipartite, designs, formats, information, uniform
from .config import Settings, set_settings
from .errors import ConfigError, FileFormatError, ValidationError
from .log import configure_logging
from .operators import HermitianOp, trace_norm
from .permutations import PermutationOracle, burnside_class_count
from .report import OUTPUT_FORMATS, Report, RunConfig, emit
from .sampling import RandomStream, haar_state, random_orthogonal_pair, random_traceless

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VIOLATION = 2
EXIT_USAGE = 64
EXIT_DATAERR = 65

DEFAULT_SAMPLES = 20000
ACCINFO_SAMPLES = 100000
DEFAULT_TOL = 1e-9


class _Run:
    """Global options shared by the subcommands."""

    def __init__(self, seed: int, samples: Optional[int], output: str, out: Optional[str],
                 tol: Optional[float]):
        self.seed = seed
        self.samples = samples
        self.output = output
        self.out = out
        self.tol = tol

    def stream(self) -> RandomStream:
        return RandomStream(self.seed, "cli")

    def sample_count(self, default: int = DEFAULT_SAMPLES) -> int:
        return default if self.samples is None else self.samples

    def tolerance(self) -> float:
        return DEFAULT_TOL if self.tol is None else self.tol


def _finish(report: Report, samples: int = 0) -> Tuple[Report, RunConfig]:
    ctx = click.get_current_context()
    run: _Run = ctx.obj
    cfg = RunConfig(command=ctx.info_name, params=dict(ctx.params), seed=run.seed,
                    samples=samples, output=run.output, out_path=run.out, tol=run.tolerance())
    return report, cfg


def _unit_trace_norm(xi: HermitianOp) -> HermitianOp:
    norm = trace_norm(xi)
    if norm == 0:
        raise ValidationError("operator is zero", invariant="nonzero")
    return xi * (1.0 / norm)


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Root random seed.")
@click.option("--samples", type=click.IntRange(min=1), default=None,
              help="Monte-Carlo samples (per-command default when omitted).")
@click.option("--output", type=click.Choice(OUTPUT_FORMATS), default="json", show_default=True)
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None,
              help="Write the report to this file instead of standard output.")
@click.option("--tol", type=float, default=None, help="Audit tolerance, never below 1e-12.")
@click.option("--threads", type=click.IntRange(min=1), default=None,
              help="Worker threads (default DISTNORM_THREADS or the CPU count).")
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR.")
@click.option("--json-logs", is_flag=True, default=False, envvar="DISTNORM_LOG_JSON",
              help="Write log events to stderr as JSON lines.")
@click.pass_context
def cli(ctx, seed, samples, output, out, tol, threads, log_level, json_logs):
    """Distinguishability norms of restricted measurement families."""
    configure_logging(log_level, json_logs)
    settings = Settings.from_env({"threads": threads} if threads else None)
    if tol is not None and tol < settings.min_tol:
        raise ConfigError(f"--tol {tol!r} is below the floor {settings.min_tol!r}")
    set_settings(settings)
    ctx.obj = _Run(seed, samples, output, out, tol)


@cli.result_callback()
def _emit(result, **_):
    report, cfg = result
    payload = emit(report, cfg)
    if cfg.out_path:
        try:
            with open(cfg.out_path, "wb") as handle:
                handle.write(payload)
        except OSError as exc:
            raise ConfigError(f"cannot write {cfg.out_path}: {exc}") from exc
    else:
        click.echo(payload, nl=False)
    report.log(command=cfg.command, seed=cfg.seed, samples=cfg.samples)
    return EXIT_OK if report.ok else EXIT_VIOLATION


@cli.command("lambda-uniform")
@click.option("--d", "d", type=int, required=True)
@click.pass_obj
def lambda_uniform_cmd(run: _Run, d: int):
    """Domination constant of the uniform POVM and its optimal rank split."""
    value, split = uniform.lambda_uniform(d)
    report = Report("lambda-uniform", {"d": d, "lambda": value, "argmin_split": split.as_list(),
                                       "mu": uniform.mu_uniform(),
                                       "asymptote": uniform.lambda_uniform_asymptote(d)})
    if d % 2 == 0:
        even = uniform.lambda_uniform_even_form(d)
        report.data["even_form"] = even
        report.check("even_form", abs(even - value) <= run.tolerance(), even_form=even, value=value)
    return _finish(report)


@cli.command("mc-bias")
@click.option("--d", "d", type=int, default=None)
@click.option("--split", "split", default=None, help="Ranks a,b of the test direction.")
@click.option("--operator", "operator", type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def mc_bias_cmd(run: _Run, d: Optional[int], split: Optional[str], operator: Optional[str]):
    """Sampled uniform-POVM bias of a direction against its closed form or lambda."""
    samples = run.sample_count()
    if operator:
        xi = _unit_trace_norm(formats.load_operator(operator))
        expected = None
    else:
        if d is None:
            raise click.UsageError("mc-bias needs --d or --operator")
        if split:
            a, b = (int(x) for x in split.split(","))
            rank_split = uniform.RankSplit(a, b)
        else:
            rank_split = uniform.lambda_uniform(d)[1]
        xi = uniform.rank_split_operator(rank_split, d)
        expected = uniform.split_bias_closed_form(rank_split)
    estimate = uniform.mc_uniform_bias(xi, samples, run.stream())
    value, _ = uniform.lambda_uniform(xi.dim)
    report = Report("mc-bias", {"d": xi.dim, "estimate": estimate, "lambda": value,
                                "closed_form": expected})
    report.check("lambda_bound", estimate.mean >= value - 5 * estimate.std_error - run.tolerance(),
                 estimate=estimate.mean, bound=value)
    if expected is not None:
        report.check("closed_form", estimate.within(expected, slack=run.tolerance()),
                     estimate=estimate.mean, expected=expected)
    return _finish(report, samples)


@cli.command("mub")
@click.option("--d", "d", type=int, required=True)
@click.option("--trials", type=click.IntRange(min=1), default=100, show_default=True)
@click.pass_obj
def mub_cmd(run: _Run, d: int, trials: int):
    """Complete MUB set: 2-design defect, Gram structure and the 1/(d+1) bound."""
    design = designs.mub_design(d)
    tol = run.tolerance()
    gram = designs.pairwise_overlaps(design)
    allowed = np.array([0.0, 1.0 / d, 1.0])
    gaps = np.min(np.abs(gram[..., None] - allowed), axis=-1)
    report = Report("mub", {"d": d, "vectors": design.n, "design_defect": designs.design_defect(design, 2),
                            "max_overlap_gap": float(gaps.max())})
    report.check("overlaps", float(gaps.max()) <= tol, gap=float(gaps.max()))
    report.check("two_design", report.data["design_defect"] <= 1e-6,
                 defect=report.data["design_defect"])
    report.merge(designs.two_design_bound_check(design, trials, run.stream()))
    return _finish(report)


def _design_from(path: Optional[str], mub: Optional[int], strict: bool = True) -> designs.WeightedDesign:
    if path:
        return formats.load_design(path, strict=strict)
    if mub:
        return designs.mub_design(mub)
    raise click.UsageError("give --design FILE or --mub D")


@cli.command("design-check")
@click.option("--design", "design_path", type=click.Path(dir_okay=False), default=None)
@click.option("--mub", type=int, default=None)
@click.option("--t", "t", type=click.IntRange(min=1), default=None)
@click.pass_obj
def design_check_cmd(run: _Run, design_path: Optional[str], mub: Optional[int], t: Optional[int]):
    """Frame residual and t-design defect of a weighted design."""
    design = _design_from(design_path, mub, strict=False)
    order = t or design.t
    defect = designs.design_defect(design, order)
    residual = designs.frame_residual(design)
    report = Report("design-check", {"d": design.d, "n": design.n, "t": order, "proper": design.proper,
                                     "frame_residual": residual, "design_defect": defect})
    report.check("design", defect <= max(run.tolerance(), 1e-6), defect=defect, t=order)
    return _finish(report)


@cli.command("moments")
@click.option("--d", "d", type=int, default=None)
@click.option("--operator", "operator", type=click.Path(dir_okay=False), default=None)
@click.option("--mub", is_flag=True, help="Also take the exact moments over the MUB design.")
@click.pass_obj
def moments_cmd(run: _Run, d: Optional[int], operator: Optional[str], mub: bool):
    """Second and fourth moments of the uniform-POVM outcome against their closed forms."""
    samples = run.sample_count()
    stream = run.stream()
    if operator:
        xi = formats.load_operator(operator)
    elif d:
        xi = random_traceless(d, stream.split(1)[0])
    else:
        raise click.UsageError("moments needs --d or --operator")
    moments = designs.haar_moments(xi, samples, stream)
    errors = moments.std_errors
    report = Report("moments", {"d": xi.dim, "haar": moments,
                                "four_design_bounds": list(designs.four_design_bias_bound(xi, xi.dim))})
    report.check("second_moment", abs(moments.second_moment - moments.closed_form_second)
                 <= 5 * errors["second_moment"] + run.tolerance())
    report.check("fourth_moment", abs(moments.fourth_moment - moments.closed_form_fourth)
                 <= 5 * errors["fourth_moment"] + run.tolerance())
    report.check("berger", moments.berger_bound <= moments.mean_abs + 5 * errors["mean_abs"]
                 + 5 * errors["fourth_moment"] + run.tolerance())
    if mub:
        exact = designs.design_moments(designs.mub_design(xi.dim), xi, include_fourth=False)
        report.data["mub"] = exact
        report.check("mub_second_moment",
                     abs(exact.second_moment - exact.closed_form_second) <= run.tolerance())
    return _finish(report, samples)


@cli.command("two-design-audit")
@click.option("--design", "design_path", type=click.Path(dir_okay=False), default=None)
@click.option("--mub", type=int, default=None)
@click.option("--trials", type=click.IntRange(min=1), default=200, show_default=True)
@click.option("--refine", "refine", type=int, default=None,
              help="Also audit the refinement of a weighted design into N pieces.")
@click.pass_obj
def two_design_audit_cmd(run: _Run, design_path: Optional[str], mub: Optional[int], trials: int,
                         refine: Optional[int]):
    """The 1/(d+1) bound on random orthogonal pairs, and the weighted refinement."""
    design = _design_from(design_path, mub)
    stream = run.stream()
    first, second = stream.split(2)
    report = Report("two-design-audit", {"d": design.d, "n": design.n, "trials": trials})
    if design.proper:
        report.merge(designs.two_design_bound_check(design, trials, first))
    report.merge(designs.second_moment_audit(design, trials, first, tol=max(run.tolerance(), 1e-9)))
    if refine:
        report.merge(designs.weighted_design_audit(design, refine, trials, second))
    return _finish(report)


@cli.command("bipartite-report")
@click.option("--dA", "d_a", type=int, default=2, show_default=True)
@click.option("--dB", "d_b", type=int, default=2, show_default=True)
@click.option("--operator", "operator", type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def bipartite_report_cmd(run: _Run, d_a: int, d_b: int, operator: Optional[str]):
    """Local-uniform bias of a bipartite direction against the 1/sqrt(153) bounds."""
    samples = run.sample_count()
    stream = run.stream()
    draw, sample = stream.split(2)
    if operator:
        xi = formats.load_operator(operator)
        if xi.shape is None:
            raise ValidationError("bipartite operator needs a shape", invariant="shape")
    else:
        rho, sigma = random_orthogonal_pair(d_a * d_b, draw)
        xi = ((rho - sigma) * 0.5).with_shape((d_a, d_b))
    bounds = bipartite.local_bias_lower_bound(xi)
    moments = bipartite.mc_local_uniform_moments(xi, samples, sample)
    estimate = moments.data["mean_abs"]
    report = Report("bipartite-report", {"shape": list(xi.shape), "trace_norm": trace_norm(xi),
                                         "l2_bound": bounds.l2, "l1_bound": bounds.l1,
                                         "sep_l2_bound": bipartite.sep_l2_lower_bound(xi)[0]})
    report.merge(moments, "moments")
    report.check("l2_bound", estimate["mean"] >= bounds.l2 - 5 * estimate["std_error"] - run.tolerance(),
                 estimate=estimate["mean"], bound=bounds.l2)
    return _finish(report, samples)


@cli.command("hiding")
@click.option("--d", "d", type=int, required=True)
@click.pass_obj
def hiding_cmd(run: _Run, d: int):
    """PPT bias of the symmetric/antisymmetric hiding pair."""
    report = bipartite.hiding_report(d, run.tolerance())
    report.data["operator"] = formats.operator_doc(bipartite.hiding_pair(d).direction())
    return _finish(report)


@cli.command("perm-audit")
@click.option("--dA", "d_a", type=int, default=2, show_default=True)
@click.option("--dB", "d_b", type=int, default=2, show_default=True)
@click.option("--trials", type=click.IntRange(min=1), default=10, show_default=True)
@click.pass_obj
def perm_audit_cmd(run: _Run, d_a: int, d_b: int, trials: int):
    """Permutation-pair class audits on random traceless bipartite operators."""
    config: Dict[str, Any] = {}
    if run.tol is not None:
        config = {"bound_tol": run.tol, "zero_tol": run.tol}
    oracle = PermutationOracle(config)
    streams = run.stream().split(trials)
    report = Report("perm-audit", {"classes": len(oracle.classes), "burnside": burnside_class_count(),
                                   "members": sum(c.size for c in oracle.classes),
                                   "shape": [d_a, d_b], "trials": trials})
    worst = np.inf
    for k, child in enumerate(streams):
        xi = random_traceless(d_a * d_b, child, (d_a, d_b))
        audit = oracle.audit(xi)
        margins = [row["margin"] for row in audit.data["classwise_bounds"]["classes"]
                   if row.get("margin") is not None and row["bound_name"] != "0"]
        worst = min([worst, *margins])
        report.violations.extend({**v, "trial": k} for v in audit.violations)
    report.data["min_class_margin"] = float(worst)
    return _finish(report)


@cli.command("certainty")
@click.option("--d", "d", type=int, required=True)
@click.option("--states", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--design", "design_path", type=click.Path(dir_okay=False), default=None,
              help="Proper 2-design to use instead of the MUB set.")
@click.pass_obj
def certainty_cmd(run: _Run, d: int, states: int, design_path: Optional[str]):
    """MUB and 2-design entropic certainty relations on Haar-random pure states."""
    design = formats.load_design(design_path) if design_path else designs.mub_design(d)
    tol = run.tolerance()
    report = Report("certainty", {"d": d, "states": states})
    mub_sums, gaps = [], []
    for k, child in enumerate(run.stream().split(states)):
        state = haar_state(d, child)
        sub = information.design_certainty_check(design, state, tol)
        gaps.append(sub.data["collision_gap"])
        report.violations.extend({**v, "state": k, "source": "design"} for v in sub.violations)
        if not design_path:
            mub = information.mub_certainty_check(d, state, tol)
            mub_sums.append(mub.data["sum"])
            report.violations.extend({**v, "state": k, "source": "mub"} for v in mub.violations)
    report.data["min_collision_gap"] = float(min(gaps))
    if mub_sums:
        report.data.update(min_mub_sum=float(min(mub_sums)), max_mub_sum=float(max(mub_sums)))
    return _finish(report)


@cli.command("l1-sweep")
@click.option("--n", "ns", type=click.IntRange(min=3), multiple=True, default=(100, 1000, 10000),
              show_default=True)
@click.option("--pairs", type=click.IntRange(min=0), default=1000, show_default=True,
              help="Random classical and quantum pairs checked against the inequality.")
@click.option("--d", "d", type=int, default=4, show_default=True)
@click.pass_obj
def l1_sweep_cmd(run: _Run, ns: Sequence[int], pairs: int, d: int):
    """Sharpness of ||p - q||_1 >= 1 - n p.q along the near-tight family."""
    report = information.montanaro_ratio_sweep(ns)
    gen = run.stream().generator
    worst_classical = worst_fidelity = worst_quantum = np.inf
    for _ in range(pairs):
        p, q = gen.dirichlet(np.ones(d)), gen.dirichlet(np.ones(d))
        worst_classical = min(worst_classical, information.l1_inner_gap(p, q))
        worst_fidelity = min(worst_fidelity, information.fidelity_gap(p, q))
    for child in run.stream().split(min(pairs, 200)):
        rho, sigma = random_orthogonal_pair(d, child)
        mixed = rho * 0.5 + sigma * 0.5
        worst_quantum = min(worst_quantum, information.quantum_l1_inner_gap(rho, mixed))
    report.data.update(min_classical_gap=float(worst_classical),
                       min_fidelity_gap=float(worst_fidelity),
                       min_quantum_gap=float(worst_quantum))
    tol = run.tolerance()
    report.check("classical", worst_classical >= -tol, gap=float(worst_classical))
    report.check("fidelity", worst_fidelity >= -tol, gap=float(worst_fidelity))
    report.check("quantum", worst_quantum >= -tol, gap=float(worst_quantum))
    return _finish(report)


def _random_ensemble(d: int, size: int, stream: RandomStream,
                     shape: Optional[Tuple[int, int]]) -> information.Ensemble:
    gen = stream.generator
    weights = gen.dirichlet(np.ones(size))
    weights[-1] = 1.0 - weights[:-1].sum()
    items = []
    for child in stream.split(size):
        psi = haar_state(d, child)
        items.append((weights[len(items)], psi.projector().with_shape(shape)))
    return information.Ensemble(items)


@cli.command("accinfo")
@click.option("--ensemble", "ensemble_path", type=click.Path(dir_okay=False), default=None)
@click.option("--mode", type=click.Choice(["single", "bipartite"]), default="single", show_default=True)
@click.option("--d", "d", type=int, default=2, show_default=True)
@click.option("--size", type=click.IntRange(min=1), default=3, show_default=True)
@click.pass_obj
def accinfo_cmd(run: _Run, ensemble_path: Optional[str], mode: str, d: int, size: int):
    """Accessible information of the uniform (or local uniform) POVM against its lower bound."""
    samples = run.sample_count(ACCINFO_SAMPLES)
    stream = run.stream()
    build, sample = stream.split(2)
    if ensemble_path:
        ensemble = formats.load_ensemble(ensemble_path)
    else:
        shape = (d, d) if mode == "bipartite" else None
        ensemble = _random_ensemble(d * d if shape else d, size, build, shape)
    report = information.mc_accessible_info_lower(ensemble, mode, samples, sample)
    return _finish(report, samples)


@cli.command("chain")
@click.option("--d", "d", type=int, required=True)
@click.pass_obj
def chain_cmd(run: _Run, d: int):
    """Domination chain on the data-hiding direction."""
    samples = run.sample_count()
    report = bipartite.chain_report(d, samples, run.stream(), run.tolerance())
    return _finish(report, samples)


def run(argv: Optional[List[str]] = None) -> int:
    """Run the CLI on ``argv`` and return its exit code."""
    try:
        code = cli.main(args=argv, prog_name="distnorm", standalone_mode=False)
    except click.UsageError as exc:
        click.echo(exc.format_message(), err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return EXIT_USAGE
    except FileFormatError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATAERR
    except (ValidationError, ConfigError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    except click.ClickException as exc:
        click.echo(exc.format_message(), err=True)
        return EXIT_INVALID
    return code if isinstance(code, int) else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
