"""One experiment, from a flat config file to a checkable artifact directory.

Everything a run leaves behind is plain text: the config, the problem, the
full trace (re-certifiable later without rerunning), a CSV with 17
significant digits for exact round trips, the certificate rows, and a
summary. The same artifacts back the command-line verbs, e.g.

    smallgrad run --config config.kv
    smallgrad check runs/gd-K200-seed0
    smallgrad compare runs/*
"""

from pathlib import Path

from smallgrad import harness

CONFIG = """\
method = fgm
K = 200
seed = 11
problem.kind = random_quadratic
problem.dim = 16
problem.L = 1
problem.seed = 2
problem.lo_frac = 0.001
"""

if __name__ == "__main__":
    cfg = harness.config_from_text(CONFIG)
    summary = harness.run_config(cfg)
    out = harness.resolve_out_dir(cfg)

    print(f"artifacts in {out}:")
    for f in sorted(out.iterdir()):
        print(f"  {f.name:16s} {f.stat().st_size:>7d} bytes")
    print()
    print(f"final ||grad|| = {summary.final_grad_norm:.6e}")
    print(f"min   ||grad|| = {summary.min_grad_norm:.6e}")
    print(f"oracle calls   = {summary.oracle_calls}")
    print(f"certificate    = {summary.certificate_passed}")
    print(f"envelope margin = {summary.envelope_margin:.6e}")
    print()

    # the trace file is the certificate's input: reload and re-check
    p, trace, loaded_cfg = harness.load_run(out)
    for name, rep in harness.run_certificates(trace, p):
        print(f"re-checked {name}: passed = {rep.passed}")

    head = (out / "trace.csv").read_text(encoding="utf-8").splitlines()[:3]
    print()
    print("trace.csv head:")
    for line in head:
        print(f"  {line}")
