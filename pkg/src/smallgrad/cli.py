"""Command-line front end.

Four verbs: ``run`` executes a configured experiment and writes its artifact
directory, ``check`` re-certifies recorded runs, ``sweep-lb`` sweeps the
worst-case instance family of a stationary method, and ``compare`` tabulates
measured decay against the certified envelopes across run directories.

Exit codes: 0 on success; 1 when a certified inequality or guaranteed bound
fails, or the run hits non-finite numbers; 2 for bad usage, unreadable
inputs, or an invalid configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import certificates, harness, lowerbound


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="smallgrad",
        description="first-order methods with executable convergence certificates",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one configured experiment")
    run.add_argument("--config", help="key-value config file; flags below override it")
    run.add_argument("--problem", help="problem file (kvdoc)")
    run.add_argument("--method", choices=harness.METHODS)
    run.add_argument("-K", "--horizon", dest="K", type=int, help="iteration budget")
    run.add_argument("--eps", type=float, help="early-stop threshold on the norm")
    run.add_argument("--eta", type=float, help="forward step for gda")
    run.add_argument("--alpha", type=float, help="averaging weight for km")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help=f"artifact directory (default under ${harness.OUT_DIR_ENV} or runs/)")
    run.add_argument("--certificate", choices=("on", "off"))
    run.add_argument("--plot", choices=("on", "off"))

    check = sub.add_parser("check", help="re-certify recorded runs")
    check.add_argument("run_dir", nargs="+", help="directories written by `run`")

    sweep = sub.add_parser("sweep-lb", help="sweep worst-case instances of a stationary method")
    sweep.add_argument("--method", choices=("gda", "km", "halpern"), required=True)
    sweep.add_argument("-K", "--horizon", dest="K", type=int, required=True)
    sweep.add_argument("--L", type=float, default=1.0)
    sweep.add_argument("--eta", type=float, help="gda step (default 1/L)")
    sweep.add_argument("--alpha", type=float, help="km averaging weight (default 1/2)")
    sweep.add_argument("--steps", type=int, help="halpern steps folded into one application")
    sweep.add_argument("--grid-size", dest="grid_size", type=int, default=10_000)
    sweep.add_argument("--out", help="write the sweep as CSV here")

    comp = sub.add_parser("compare", help="tabulate measured decay against envelopes")
    comp.add_argument("run_dir", nargs="+", help="directories written by `run`")
    return ap


def _cmd_run(args) -> int:
    if args.config is not None:
        cfg = harness.config_from_text(Path(args.config).read_text(encoding="utf-8"))
        # problem file references resolve beside the config that names them
        base_dir = str(Path(args.config).parent)
    else:
        if args.method is None or args.K is None or args.problem is None:
            raise ValueError("without --config, --method, --horizon and --problem are required")
        cfg = harness.ExperimentConfig(method=args.method, K=args.K, problem_file=args.problem)
        base_dir = "."

    patches = {}
    if args.config is not None:
        if args.method is not None:
            patches["method"] = args.method
        if args.K is not None:
            patches["K"] = args.K
        if args.problem is not None:
            patches["problem_file"] = args.problem
            patches["problem_inline"] = None
    if args.eps is not None:
        patches["eps"] = args.eps
    if args.eta is not None:
        patches["eta"] = args.eta
    if args.alpha is not None:
        patches["alpha"] = args.alpha
    if args.seed is not None:
        patches["seed"] = args.seed
    if args.out is not None:
        patches["out"] = args.out
    if args.certificate is not None:
        patches["certificate"] = args.certificate == "on"
    if args.plot is not None:
        patches["plot"] = args.plot == "on"
    if patches:
        cfg = dataclasses.replace(cfg, **patches)

    summary = harness.run_config(cfg, base_dir)
    out = harness.resolve_out_dir(cfg, base_dir)
    sys.stdout.write((out / "summary.kv").read_text(encoding="utf-8"))
    print(f"artifacts = {out}")
    if summary.certificate_passed is False:
        print("FAIL: a certified inequality exceeded its tolerance; see "
              "worst_violation above and certificate.csv", file=sys.stderr)
        return 1
    return 0


def _cmd_check(args) -> int:
    status = 0
    for d in args.run_dir:
        p, trace, _ = harness.load_run(d)
        for name, r in harness.run_certificates(trace, p):
            print(f"{d}: {name} passed={str(r.passed).lower()} "
                  f"worst_violation={r.worst_violation:.6g} tol={r.tol:.6g}")
            for sc in r.side_checks:
                if not sc.passed:
                    print(f"{d}:   check {sc.name}: violation={sc.violation:.6g} "
                          f"tol={sc.tol:.6g}")
            if not r.passed:
                status = 1
    return status


def _cmd_sweep(args) -> int:
    eta = args.eta
    if args.method == "gda" and eta is None:
        eta = 1.0 / args.L
    alpha = args.alpha
    if args.method == "km" and alpha is None:
        alpha = 0.5
    m = lowerbound.method_to_scli(
        args.method, L=args.L, eta=eta, alpha=alpha, steps=args.steps
    )
    sweep = lowerbound.sweep_hard_instances(m, K=args.K, L=args.L, grid_size=args.grid_size)
    if args.out is not None:
        Path(args.out).write_text(lowerbound.sweep_to_csv(sweep), encoding="utf-8", newline="\n")
    print(f"p = {m.p}")
    print(f"sup = {sweep.sup:.17g}")
    print(f"bound = {sweep.theorem_bound:.17g}")
    print(f"margin = {sweep.margin:.6g}")
    print(f"argmax: eta = {sweep.eta[int(sweep.ratio.argmax())]:.6g}, "
          f"alpha = {sweep.alpha[int(sweep.ratio.argmax())]:.6g}")
    return 0


def _cmd_compare(args) -> int:
    traces, envelopes, probs = [], [], []
    for d in args.run_dir:
        p, trace, _ = harness.load_run(d)
        tag = harness.ENVELOPE_TAG[trace.method]
        envelopes.append(certificates.rate_envelope(tag, p, trace.x[0], trace.K))
        traces.append(trace)
        probs.append(p)
    rows = harness.compare_envelopes(traces, envelopes, probs)
    sys.stdout.write(harness.comparison_to_text(rows))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "sweep-lb":
            return _cmd_sweep(args)
        return _cmd_compare(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
