"""Command-line entry point: ``fracvar <subcommand> ...``.

Data goes out as CSV (header row, LF line endings, ``%.17g`` numbers) and
reports as JSON with sorted keys, so identical arguments give byte-identical
output. Exit status: 0 on success, 1 on computation errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from fracvar import expr as ex
from fracvar import ibp
from fracvar.eulerlagrange import classical_residual, el_report
from fracvar.fracops import (
    Grid,
    SampledPath,
    caputo_left,
    left_frac_integral,
    read_path_csv,
    right_frac_integral,
    rl_left_derivative,
    rl_right_derivative,
)
from fracvar.functional import evaluate_fields, evaluate_J
from fracvar.problem import (
    ProblemSpec,
    Trajectory,
    _is_example,
    builtin_example,
    linear_interpolant,
    load_problem,
    make_reference,
)
from fracvar.solver import METHODS, SolverConfig, minimize
from fracvar.sufficiency import certify

log = logging.getLogger("fracvar")

SWEEP_NS = (64, 128, 256, 512)
OPERATORS = ("caputo", "rl-left", "rl-right", "left-integral", "right-integral")


# {{{ output helpers


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def _write(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _emit(args, text: str) -> None:
    """Write to ``--out`` if given, else to stdout."""
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)


# }}}


# {{{ problem and trajectory loading


def _load_spec(args, n: int | None = None) -> ProblemSpec:
    name = args.problem
    if name == "example":
        spec = builtin_example(args.alpha if args.alpha is not None else 0.5, 256)
    else:
        path = Path(name)
        if not path.is_file():
            raise FileNotFoundError(f"problem file not found: {name}")
        spec = load_problem(path.read_text(encoding="utf-8"))
        if args.alpha is not None:
            spec = spec.as_fractional(args.alpha)
    n = n if n is not None else args.n
    if n is not None:
        spec = spec.with_n(n)
    return spec


def _trajectory(spec: ProblemSpec, args) -> tuple[Trajectory, str]:
    """A trajectory from ``--trajectory``, else the reference or the straight line."""
    source = getattr(args, "trajectory", None)
    if source:
        path = Path(source)
        if not path.is_file():
            raise FileNotFoundError(f"trajectory file not found: {source}")
        sp = read_path_csv(path.read_text(encoding="utf-8"), spec.grid)
        if (sp.lo, sp.hi) != (0, spec.grid.size - 1):
            raise ValueError("trajectory CSV must cover every node of [a - tau, b]")
        return Trajectory(spec.grid, sp.values), "file"
    if _is_example(spec):
        return make_reference(spec), "reference"
    return linear_interpolant(spec), "linear-interpolant"


# }}}


# {{{ subcommands


def _operator(name: str, path: SampledPath, order: float) -> SampledPath:
    if name == "caputo":
        return caputo_left(path, order)
    if name == "rl-left":
        return rl_left_derivative(path, order)
    if name == "rl-right":
        return rl_right_derivative(path, order)
    if name == "left-integral":
        return left_frac_integral(path, order)
    return right_frac_integral(path, order)


def _func(text: str):
    e = ex.parse(text, frozenset({"x"}))

    def f(x):
        return np.broadcast_to(np.asarray(ex.evaluate(e, {"x": x}), dtype=float), x.shape)

    return f


def cmd_frac_op(args) -> int:
    order = args.alpha if args.alpha is not None else 0.5
    f = _func(args.func)
    exact = _func(args.exact) if args.exact else None
    if not args.sweep:
        grid = Grid.interval(args.a, args.b, args.n or 256)
        out = _operator(args.op, SampledPath.sample(grid, f), order)
        if exact is None:
            _emit(args, out.to_csv())
        else:
            ref = exact(out.x)
            rows = zip(out.x, out.values, ref, np.abs(out.values - ref))
            _emit(args, _csv(["node", "value", "exact", "abs_error"], rows))
        return 0

    rows = []
    prev = None
    for n in SWEEP_NS:
        grid = Grid.interval(args.a, args.b, n)
        out = _operator(args.op, SampledPath.sample(grid, f), order)
        if exact is not None:
            err = float(np.max(np.abs(out.values - exact(out.x))[1:-1]))
        elif prev is not None:
            # change against the coarser grid at its nodes
            err = float(np.max(np.abs(out.values[::2] - prev)[1:-1]))
        else:
            err = float("nan")
        rows.append((n, grid.h, err))
        prev = out.values
    errs = [r[2] for r in rows]
    orders = [float("nan")]
    for coarse, fine in zip(errs, errs[1:]):
        orders.append(math.log2(coarse / fine) if coarse > 0 and fine > 0 else float("nan"))
    col = "max_abs_error" if exact is not None else "max_abs_change"
    _emit(args, _csv(["n", "h", col, "order"], [(*r, p) for r, p in zip(rows, orders)]))
    return 0


def cmd_verify_ibp(args) -> int:
    alpha = args.alpha if args.alpha is not None else 0.5
    ns = SWEEP_NS if args.sweep else (args.n or 256,)
    rows = ibp.ibp_sweep(ns, alpha=alpha, beta=args.beta)
    _emit(args, ibp.sweep_csv(rows))
    return 0


def cmd_eval(args) -> int:
    if args.sweep:
        rows = []
        for n in SWEEP_NS:
            spec = _load_spec(args, n)
            traj, _ = _trajectory(spec, args)
            rows.append((n, spec.grid.h, evaluate_J(traj, spec)))
        _emit(args, _csv(["n", "h", "J"], rows))
        return 0
    spec = _load_spec(args)
    traj, source = _trajectory(spec, args)
    J = evaluate_J(traj, spec)
    if args.out:
        _write(args.out, evaluate_fields(traj, spec).to_csv())
    sys.stdout.write(_json({"J": J, "n": spec.n, "trajectory": source}))
    return 0


def _residual_report(spec: ProblemSpec, args):
    traj, source = _trajectory(spec, args)
    if args.classical:
        spec = spec.as_classical()
        traj = Trajectory(spec.grid, traj.values, traj.derivative)
        return classical_residual(traj, spec), source
    return el_report(traj, spec), source


def cmd_residual(args) -> int:
    if args.sweep:
        rows = []
        for n in SWEEP_NS:
            spec = _load_spec(args, n)
            rep, _ = _residual_report(spec, args)
            rows.append((n, rep.grid_h, rep.terminal_residual, rep.inner_norm, rep.outer_norm))
        _emit(args, _csv(["n", "h", "terminal_residual", "inner_norm", "outer_norm"], rows))
        return 0
    spec = _load_spec(args)
    rep, source = _residual_report(spec, args)
    if args.out:
        _write(args.out, rep.to_csv())
    summary = rep.summary()
    summary.update(n=spec.n, trajectory=source, mode="classical" if args.classical else spec.mode)
    sys.stdout.write(_json(summary))
    return 0


def cmd_solve(args) -> int:
    spec = _load_spec(args, args.n if args.n is not None else (128 if args.problem == "example" else None))
    config = SolverConfig(method=args.method, max_iters=args.max_iters)
    result = minimize(spec, config)
    summary = {
        "J_init": result.J_init,
        "J_final": result.J_final,
        "iterations": result.iterations,
        "converged": result.converged,
        "n": spec.n,
        "method": config.method,
        "el": result.el.summary(),
    }
    if _is_example(spec):
        ref = make_reference(spec)
        summary["max_abs_error_vs_reference"] = float(
            np.max(np.abs(result.trajectory.values - ref.values))
        )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "history.csv", result.history_csv())
        _write(out / "trajectory.csv", result.trajectory.path.to_csv())
        _write(out / "summary.json", _json(summary))
    sys.stdout.write(_json(summary))
    return 0


def cmd_suffcheck(args) -> int:
    spec = _load_spec(args)
    traj, source = _trajectory(spec, args)
    cert = certify(spec, traj, args.inflation, trials=args.trials, seed=args.seed)
    report = cert.as_dict()
    report.update(seed=args.seed, trials=args.trials, trajectory=source)
    _emit(args, _json(report))
    return 0


def cmd_example(args) -> int:
    spec = builtin_example(args.alpha if args.alpha is not None else 0.5, args.n or 256)
    ref = make_reference(spec)
    rep = el_report(ref, spec)
    cert = certify(spec, ref, args.inflation, trials=args.trials, seed=args.seed)
    report = {
        "alpha": spec.alpha,
        "n": spec.n,
        "J": evaluate_J(ref, spec),
        "terminal_residual": rep.terminal_residual,
        "inner_norm": rep.inner_norm,
        "outer_norm": rep.outer_norm,
        "certificate": cert.conclusion,
        "dLdz_min": cert.dLdz_min,
        "dLdz_max": cert.dLdz_max,
        "L_verdict": cert.L_verdict.status,
        "l_verdict": cert.l_verdict.status,
    }
    _emit(args, _json(report))
    return 0


# }}}


# {{{ argument parsing


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 2:
        raise argparse.ArgumentTypeError(f"need at least 2, got {v}")
    return v


def _order(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {v}")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fracvar",
        description="Delayed fractional variational problems: operators, residuals, solver.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, problem=True, sweep=True):
        if problem:
            sp.add_argument("problem", help="path to a .fvp file, or 'example'")
        sp.add_argument("--n", type=_positive_int, help="grid resolution on [a, b]")
        sp.add_argument("--alpha", type=_order, help="fractional order in (0, 1)")
        sp.add_argument("--out", help="output path")
        if sweep:
            sp.add_argument(
                "--sweep", action="store_true", help="run n = 64, 128, 256, 512 and print a table"
            )

    sp = sub.add_parser("frac-op", help="apply a fractional operator to a function of x")
    sp.add_argument("op", choices=OPERATORS)
    sp.add_argument("--func", required=True, help="expression in x")
    sp.add_argument("--exact", help="closed form of the result, for error columns")
    sp.add_argument("--a", type=float, default=0.0)
    sp.add_argument("--b", type=float, default=2.0)
    common(sp, problem=False)
    sp.set_defaults(run=cmd_frac_op)

    sp = sub.add_parser("verify-ibp", help="check the integration-by-parts identities")
    sp.add_argument("--beta", type=float, default=0.5, help="integral order (> 0)")
    common(sp, problem=False)
    sp.set_defaults(run=cmd_verify_ibp)

    sp = sub.add_parser("eval", help="evaluate J along a trajectory")
    common(sp)
    sp.add_argument("--trajectory", help="node,value CSV over the whole grid")
    sp.set_defaults(run=cmd_eval)

    sp = sub.add_parser("residual", help="optimality-system residuals along a trajectory")
    common(sp)
    sp.add_argument("--trajectory", help="node,value CSV over the whole grid")
    sp.add_argument("--classical", action="store_true", help="integer-order residuals")
    sp.set_defaults(run=cmd_residual)

    sp = sub.add_parser("solve", help="minimize the discretized functional")
    common(sp, sweep=False)
    sp.add_argument("--method", choices=METHODS, default=METHODS[0])
    sp.add_argument("--max-iters", type=_positive_int, default=5000)
    sp.set_defaults(run=cmd_solve)

    def certificate_flags(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--trials", type=_positive_int, default=10_000)
        sp.add_argument("--inflation", type=_nonneg, default=0.5)

    sp = sub.add_parser("suffcheck", help="sampled sufficiency certificate (JSON)")
    common(sp, sweep=False)
    sp.add_argument("--trajectory", help="node,value CSV over the whole grid")
    certificate_flags(sp)
    sp.set_defaults(run=cmd_suffcheck)

    sp = sub.add_parser("example", help="the built-in example end to end")
    common(sp, problem=False, sweep=False)
    certificate_flags(sp)
    sp.set_defaults(run=cmd_example)
    return p


# }}}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "beta", None) is not None and not args.beta > 0:
        parser.error("--beta must be positive")
    try:
        return args.run(args)
    except FileNotFoundError as err:
        print(f"fracvar: {err}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, RuntimeError, OSError) as err:
        print(f"fracvar: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
