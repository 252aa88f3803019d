"""Command-line front end: sampling, solving, clustering and validation suites.

Subcommands write plain-text artifacts (see fileio) plus a manifest hashing
every produced file. Exit codes: 0 success, 1 usage or validation error,
2 solver non-convergence, 3 validation-suite failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .clustering import cluster_plan
from .entropic import solve_entropic
from .mixture import MixtureSpec, epsilon_star, sample_mixture
from .quadratic import SolverConfig, solve_quadratic
from .transport import CostMatrix, cost_matrix, feasibility_report
from .validation import SUITES, run_suites


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_reals(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",") if x != ""])
    except ValueError:
        raise ValueError(f"could not parse {text!r} as comma-separated reals")


def _parse_means(text: str) -> np.ndarray:
    rows = [_parse_reals(part) for part in text.split(";") if part != ""]
    if not rows:
        raise ValueError("empty --means")
    if len({row.size for row in rows}) != 1:
        raise ValueError("all mean components must share one dimension")
    return np.stack(rows)


def _spec_from_args(args) -> MixtureSpec:
    if args.spec_json is not None:
        raw = json.loads(Path(args.spec_json).read_text())
        return MixtureSpec(
            theta=np.asarray(raw["theta"], dtype=float),
            means=np.atleast_2d(np.asarray(raw["means"], dtype=float)),
            sigma2=float(raw["sigma2"]),
            aniso=np.asarray(raw["aniso"], dtype=float) if raw.get("aniso") is not None else None,
        )
    if args.theta is None or args.means is None or args.sigma2 is None:
        raise ValueError("provide --spec-json or all of --theta, --means, --sigma2")
    spec = MixtureSpec(theta=_parse_reals(args.theta), means=_parse_means(args.means), sigma2=args.sigma2)
    if args.k is not None and spec.k != args.k:
        raise ValueError(f"--k {args.k} disagrees with {spec.k} mixture weights")
    if args.d is not None and spec.d != args.d:
        raise ValueError(f"--d {args.d} disagrees with {spec.d}-dimensional means")
    return spec


def _cmd_sample(args) -> int:
    spec = _spec_from_args(args)
    sample = sample_mixture(spec, args.n, args.seed)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    points_path = fileio.write_matrix(outdir / "points.csv", sample.points)
    labels_path = fileio.write_labels(outdir / "labels.csv", sample.labels)
    fileio.write_manifest(
        outdir / "manifest.json",
        "sample",
        {
            "n": args.n, "k": spec.k, "d": spec.d, "sigma2": spec.sigma2,
            "theta": [float(t) for t in spec.theta],
            "out": str(args.out),
        },
        args.seed,
        [points_path, labels_path],
    )
    counts = ",".join(str(int(c)) for c in sample.counts)
    print(f"sampled n={sample.n} d={sample.d} K={spec.k} counts={counts}")
    return 0


def _resolve_epsilon(args, n: int) -> float:
    if args.epsilon is not None:
        return args.epsilon
    if args.reg != "quadratic":
        raise ValueError(
            "--epsilon-auto applies to the quadratic regulariser only; "
            "no selection rule is known for the entropic case"
        )
    if args.sigma2 is None or args.theta is None:
        raise ValueError("--epsilon-auto requires --sigma2 and --theta")
    theta = _parse_reals(args.theta)
    k = args.k if args.k is not None else theta.size
    choice = epsilon_star(n, args.sigma2, theta, k)
    if choice.degenerate:
        raise ValueError("epsilon_star is degenerate (single-mass weights); pass --epsilon")
    return choice.value


def _cmd_solve(args) -> int:
    if args.input is not None:
        points = fileio.read_matrix(args.input)
        cost = cost_matrix(points)
    else:
        cost = CostMatrix(fileio.read_matrix(args.cost), from_points=False)
    epsilon = _resolve_epsilon(args, cost.n)
    cfg = SolverConfig(epsilon=epsilon, tol=args.tol, max_iter=args.max_iter)
    plan = solve_quadratic(cost, cfg) if args.reg == "quadratic" else solve_entropic(cost, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    plan_path = fileio.write_matrix(out, plan.matrix)
    potentials_path = fileio.write_potentials(
        out.parent / "potentials.csv", plan.potentials[0], plan.potentials[1]
    )
    fileio.write_manifest(
        out.parent / "manifest.json",
        "solve",
        {
            "input": str(args.input or args.cost),
            "reg": args.reg,
            "epsilon": float(epsilon),
            "epsilon_mode": "auto" if args.epsilon is None else "explicit",
            "tol": args.tol,
            "max_iter": args.max_iter,
            "out": str(args.out),
        },
        None,
        [plan_path, potentials_path],
    )
    diag = plan.diagnostics
    report = feasibility_report(plan.matrix, tol=max(10 * args.tol, 1e-12))
    print(
        f"solved n={cost.n} reg={args.reg} epsilon={epsilon:.6g} "
        f"iterations={diag.iterations} converged={diag.converged} "
        f"marginal_violation={diag.marginal_violation:.3e} feasible={report.feasible}"
    )
    if not diag.converged:
        print("warning: solver hit the iteration cap before reaching tolerance", file=sys.stderr)
        return 2
    return 0


def _cmd_cluster(args) -> int:
    plan = fileio.read_matrix(args.plan)
    points = fileio.read_matrix(args.points)
    if plan.shape[0] != points.shape[0]:
        raise ValueError("plan and points disagree on the number of rows")
    report = feasibility_report(plan, tol=1e-4)
    if not report.feasible:
        raise ValueError(
            "plan fails feasibility at 1e-4: "
            f"row={report.max_row_violation:.3e} col={report.max_col_violation:.3e} "
            f"min_entry={report.min_entry:.3e} diag={report.max_abs_diagonal:.3e}"
        )
    k = None if args.k == "auto" else int(args.k)
    result = cluster_plan(plan, points, k=k, seed=args.seed)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    assign_path = fileio.write_labels(outdir / "assignments.csv", result.labels)
    estimates_path = fileio.write_estimates(outdir / "estimates.csv", result)
    fileio.write_manifest(
        outdir / "manifest.json",
        "cluster",
        {"plan": str(args.plan), "points": str(args.points), "k": str(args.k), "out": str(args.out)},
        args.seed,
        [assign_path, estimates_path],
    )
    theta = ",".join(f"{t:.4f}" for t in result.theta_hat)
    print(
        f"clustered n={points.shape[0]} k_hat={result.k_hat} theta_hat={theta} "
        f"sigma2_hat={result.sigma2_hat:.6g} epsilon_implied={result.epsilon_implied:.6g}"
    )
    return 0


def _cmd_validate(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    records, passed = run_suites(names, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report_path = fileio.write_records(out, records)
    outputs = [report_path]
    if not args.no_figures:
        from .figures import render_suite_figures

        outputs.extend(render_suite_figures(records, out.parent))
    fileio.write_manifest(
        out.parent / "manifest.json",
        "validate",
        {"suite": args.suite, "out": str(args.out), "figures": not args.no_figures},
        args.seed,
        outputs,
    )
    for name in names:
        subset = [r for r in records if r["suite"] == name]
        failed = sum(r["verdict"] == "fail" for r in subset)
        checked = sum(r["verdict"] != "info" for r in subset)
        print(f"{name}: {checked - failed}/{checked} checks passed ({len(subset)} records)")
    print("verdict:", "pass" if passed else "fail")
    return 0 if passed else 3


def _build_parser() -> _Parser:
    parser = _Parser(prog="qot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a Gaussian mixture sample")
    p.add_argument("--n", type=int, required=True, help="number of points")
    p.add_argument("--k", type=int, help="number of components (checked against --theta)")
    p.add_argument("--d", type=int, help="dimension (checked against --means)")
    p.add_argument("--theta", help="comma-separated mixture weights")
    p.add_argument("--means", help="semicolon-separated components, comma-separated coordinates")
    p.add_argument("--sigma2", type=float, help="isotropic variance")
    p.add_argument("--spec-json", help="JSON file with theta/means/sigma2 (and optional aniso)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("solve", help="solve the regularised self-transport problem")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", help="points CSV; cost built as half squared distances")
    source.add_argument("--cost", help="precomputed cost CSV")
    p.add_argument("--reg", choices=("quadratic", "entropic"), default="quadratic")
    eps = p.add_mutually_exclusive_group(required=True)
    eps.add_argument("--epsilon", type=float)
    eps.add_argument("--epsilon-auto", action="store_true", help="epsilon = n sigma2 H(theta) / K")
    p.add_argument("--sigma2", type=float, help="variance for --epsilon-auto")
    p.add_argument("--theta", help="weights for --epsilon-auto")
    p.add_argument("--k", type=int, help="component count for --epsilon-auto")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--out", default="plan.csv", help="plan output path")
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("cluster", help="spectral clustering of a transport plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--k", default="auto", help="component count, or 'auto' for the eigengap rule")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(handler=_cmd_cluster)

    p = sub.add_parser("validate", help="run validation suites")
    p.add_argument("--suite", choices=(*sorted(SUITES), "all"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="report.jsonl", help="JSON-lines report path")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(handler=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, RuntimeError, FloatingPointError, AssertionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
