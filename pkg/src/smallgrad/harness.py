"""Experiment harness: declarative configs, run artifacts, and comparison tables.

A run is described by a flat key-value config: which problem (inline keys or
a file reference), which method with which parameters, the horizon, an
optional stopping threshold on the gradient norm, whether to certify, where
to write, and a seed. ``run_config`` executes it and leaves a self-contained
directory behind: ``config.kv``, ``problem.kv``, ``trace.kv`` (the full
replayable record), ``trace.csv``, ``certificate.csv``, ``summary.kv``, and
optionally an SVG plot. Reruns with the same config and seed produce
byte-identical CSV artifacts.

Unknown config keys are rejected rather than ignored. These files are the
reproducibility record of an experiment, and a silently dropped typo
(``pss = 1e-6``) would fabricate a result that never ran.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import certificates as cert
from . import kvdoc, problems
from .methods import (
    GdaParams,
    NonexpansiveMap,
    Trace,
    run_fgm,
    run_fgm_then_ogmg,
    run_gd,
    run_gda,
    run_halpern,
    run_km,
    run_ogmg,
)
from .problems import OperatorProblem, SmoothProblem
from .schedules import FgmSchedule, schedule_from_text, schedule_to_text

__all__ = [
    "OUT_DIR_ENV",
    "METHODS",
    "ENVELOPE_TAG",
    "ExperimentConfig",
    "RunSummary",
    "EnvelopeComparison",
    "config_from_text",
    "config_to_text",
    "problem_from_spec",
    "load_problem",
    "run_config",
    "run_batch",
    "run_certificates",
    "summary_to_text",
    "emit_trace_csv",
    "parse_trace_csv",
    "trace_to_text",
    "trace_from_text",
    "load_run",
    "measured_series",
    "envelope_margin",
    "fit_loglog_slope",
    "compare_envelopes",
    "comparison_to_text",
    "plot_trace",
    "resolve_out_dir",
]

OUT_DIR_ENV = "SMALLGRAD_OUT_DIR"

_SMOOTH_METHODS = ("gd", "fgm", "ogmg", "fgm+ogmg")
_OPERATOR_METHODS = ("gda", "km", "halpern")
METHODS = _SMOOTH_METHODS + _OPERATOR_METHODS
_HORIZON_FIXED = ("ogmg", "fgm+ogmg")

# envelope used for summary margins, plots, and `compare`, by method tag;
# the averaged iteration is measured against the forward-step envelope and
# the fast gradient method against its min-gradient bound
ENVELOPE_TAG = {
    "gd": "gd",
    "fgm": "fgm_min_grad",
    "ogmg": "ogmg",
    "fgm+ogmg": "ogmg",
    "gda": "gda",
    "km": "gda",
    "halpern": "halpern",
}


def _num(x) -> str:
    return format(float(x), ".17g")


def _write(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: problem, method, horizon, and what to record.

    Attributes
    ----------
    method : str
        One of ``gd, fgm, ogmg, fgm+ogmg, gda, km, halpern``.
    K : int
        Horizon, at least 1.
    problem_file, problem_inline : exactly one of them
        Path to a problem document, or its key-value pairs inline.
    eps : float
        Early-stop threshold on the gradient/operator norm; 0 disables it.
        The horizon-fixed methods reject a positive threshold, their
        schedules bake the final iteration count into every step.
    eta, alpha : float, optional
        Forward step for ``gda`` and averaging weight for ``km``.
    certificate : bool
        Re-check the per-step inequalities after the run.
    plot : bool
        Also emit a log-log SVG of the decay against its envelope.
    seed : int
        Drives both instance generation (for generator kinds) and the
        starting point.
    out : str, optional
        Artifact directory; defaults to ``$SMALLGRAD_OUT_DIR`` (or
        ``runs/``) plus a name derived from method, horizon, and seed.
    """

    method: str
    K: int
    problem_file: Optional[str] = None
    problem_inline: Optional[dict] = None
    eps: float = 0.0
    eta: Optional[float] = None
    alpha: Optional[float] = None
    certificate: bool = True
    plot: bool = False
    seed: int = 0
    out: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; choose from {', '.join(METHODS)}"
            )
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.eps < 0.0:
            raise ValueError("eps must be >= 0")
        if self.eps > 0.0 and self.method in _HORIZON_FIXED:
            raise ValueError(
                f"{self.method} is horizon-fixed and cannot stop early; set eps = 0"
            )
        if (self.problem_file is None) == (self.problem_inline is None):
            raise ValueError(
                "config needs exactly one of a problem file or inline problem.* keys"
            )
        if self.eta is not None and self.method != "gda":
            raise ValueError("method.eta only applies to gda")
        if self.alpha is not None and self.method != "km":
            raise ValueError("method.alpha only applies to km")
        if self.problem_inline is not None:
            norm = {
                k: v if isinstance(v, str) else kvdoc.fmt(v)
                for k, v in self.problem_inline.items()
            }
            object.__setattr__(self, "problem_inline", norm)


_CONFIG_KEYS = {
    "problem",
    "method",
    "method.eta",
    "method.alpha",
    "K",
    "eps",
    "certificate",
    "plot",
    "seed",
    "out",
}


def config_from_text(text: str) -> ExperimentConfig:
    """Parse a config document; unknown keys are an error, not a warning."""
    doc = kvdoc.loads(text)
    inline = {k[len("problem."):]: v for k, v in doc.items() if k.startswith("problem.")}
    unknown = [k for k in doc if k not in _CONFIG_KEYS and not k.startswith("problem.")]
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("method", "K"):
        if key not in doc:
            raise ValueError(f"config is missing required key {key!r}")
    if "problem" in doc and inline:
        raise ValueError("give either a problem file or inline problem.* keys, not both")
    return ExperimentConfig(
        method=doc["method"],
        K=kvdoc.get_int(doc, "K"),
        problem_file=doc.get("problem"),
        problem_inline=inline or None,
        eps=kvdoc.get_float(doc, "eps") if "eps" in doc else 0.0,
        eta=kvdoc.get_float(doc, "method.eta") if "method.eta" in doc else None,
        alpha=kvdoc.get_float(doc, "method.alpha") if "method.alpha" in doc else None,
        certificate=kvdoc.get_bool(doc, "certificate") if "certificate" in doc else True,
        plot=kvdoc.get_bool(doc, "plot") if "plot" in doc else False,
        seed=kvdoc.get_int(doc, "seed") if "seed" in doc else 0,
        out=doc.get("out"),
    )


def config_to_text(cfg: ExperimentConfig) -> str:
    pairs = []
    if cfg.problem_file is not None:
        pairs.append(("problem", cfg.problem_file))
    else:
        pairs += [("problem." + k, v) for k, v in cfg.problem_inline.items()]
    pairs.append(("method", cfg.method))
    if cfg.eta is not None:
        pairs.append(("method.eta", cfg.eta))
    if cfg.alpha is not None:
        pairs.append(("method.alpha", cfg.alpha))
    pairs += [
        ("K", cfg.K),
        ("eps", cfg.eps),
        ("certificate", cfg.certificate),
        ("plot", cfg.plot),
        ("seed", cfg.seed),
    ]
    if cfg.out is not None:
        pairs.append(("out", cfg.out))
    return kvdoc.dumps(pairs)


# ---------------------------------------------------------------------------
# problems from specs

_PROBLEM_KEYS = {
    "quadratic": {"kind", "dim", "L", "Q.shape", "Q.data", "c", "x_star", "f_star"},
    "logsumexp": {"kind", "dim", "L", "rows.shape", "rows.data", "rho", "x_star", "f_star"},
    "rotation": {"kind", "dim", "L", "eta", "alpha", "b", "u_star"},
    "saddle": {"kind", "dim", "L", "eta", "alpha", "b1", "b2", "u_star"},
    "random_quadratic": {"kind", "dim", "L", "seed", "lo_frac"},
    "centered_logsumexp": {"kind", "dim", "m", "rho", "seed"},
    "random_rotation": {"kind", "half_dim", "L", "seed"},
}


def problem_from_spec(doc: dict, seed: int = 0):
    """Build a problem from spec keys; generator kinds draw from the seed.

    Accepts every serialized problem kind plus three generators:
    ``random_quadratic`` (rotated log-spaced spectrum), ``centered_logsumexp``
    (rows sum to zero, so the origin is the known optimum), and
    ``random_rotation`` (a cocoercive block instance with random offset).
    An explicit ``seed`` key inside the spec overrides the argument.
    """
    doc = {k: v if isinstance(v, str) else kvdoc.fmt(v) for k, v in doc.items()}
    if "kind" not in doc:
        raise ValueError("problem spec is missing 'kind'")
    kind = doc["kind"]
    if kind not in _PROBLEM_KEYS:
        raise ValueError(f"unknown problem kind {kind!r}")
    unknown = set(doc) - _PROBLEM_KEYS[kind]
    if unknown:
        raise ValueError(
            f"unknown problem keys for kind {kind!r}: {', '.join(sorted(unknown))}"
        )
    if "seed" in doc:
        seed = kvdoc.get_int(doc, "seed")

    if kind == "random_quadratic":
        return problems.random_quadratic(
            dim=kvdoc.get_int(doc, "dim"),
            L=kvdoc.get_float(doc, "L") if "L" in doc else 1.0,
            seed=seed,
            lo_frac=kvdoc.get_float(doc, "lo_frac") if "lo_frac" in doc else 1e-3,
        )
    if kind == "centered_logsumexp":
        rho = kvdoc.get_float(doc, "rho") if "rho" in doc else 1.0
        p = problems.centered_logsumexp(
            kvdoc.get_int(doc, "dim"), kvdoc.get_int(doc, "m"), rho=rho, seed=seed
        )
        star = np.zeros(p.dim)
        star.setflags(write=False)
        return replace(p, x_star=star, f_star=p.value(star))
    if kind == "random_rotation":
        rng = np.random.default_rng(seed)
        L = kvdoc.get_float(doc, "L") if "L" in doc else 1.0
        h = kvdoc.get_int(doc, "half_dim")
        eta = rng.uniform(0.05, 0.95) * L
        alpha = rng.uniform(0.2, 1.0) * np.sqrt(L * eta - eta * eta)
        spec = problems.LinearOperatorSpec(
            eta=eta, alpha=alpha, half_dim=h, offset=rng.standard_normal(2 * h)
        )
        return problems.make_rotation_operator(spec, L)
    return problems.problem_from_keyvals(doc)


def load_problem(cfg: ExperimentConfig, base_dir="."):
    if cfg.problem_file is not None:
        path = Path(base_dir) / cfg.problem_file
        return problems.problem_from_text(path.read_text(encoding="utf-8"))
    return problem_from_spec(cfg.problem_inline, seed=cfg.seed)


# ---------------------------------------------------------------------------
# running


@dataclass(frozen=True)
class RunSummary:
    """What one run left behind, in numbers.

    ``oracle_calls`` counts actual oracle spend, including the retries the
    early-stopping search makes; without a threshold it equals K+1 for the
    single-phase methods and K+2 for the composed one (the seam gradient is
    evaluated by both phases). ``envelope_margin`` is the minimum over
    compared steps of bound(k) minus measured(k); nan when the problem
    carries no optimum to anchor an envelope. ``certificate_passed`` is
    None when checking was switched off.
    """

    method: str
    K: int
    final_grad_norm: float
    min_grad_norm: float
    oracle_calls: int
    certificate_passed: Optional[bool]
    envelope_margin: float


def summary_to_text(s: RunSummary, reports=()) -> str:
    pairs = [
        ("method", s.method),
        ("K", s.K),
        ("final_grad_norm", s.final_grad_norm),
        ("min_grad_norm", s.min_grad_norm),
        ("oracle_calls", s.oracle_calls),
        ("envelope_margin", s.envelope_margin),
    ]
    if s.certificate_passed is not None:
        pairs.append(("certificate_passed", s.certificate_passed))
    for name, r in reports:
        pairs.append((f"certificate.{name}.passed", r.passed))
        pairs.append((f"certificate.{name}.worst_violation", r.worst_violation))
        pairs.append((f"certificate.{name}.tolerance", r.tol))
        for sc in r.side_checks:
            pairs.append((f"certificate.{name}.check.{sc.name}.passed", sc.passed))
    return kvdoc.dumps(pairs)


def _dispatch(cfg: ExperimentConfig, p, x0):
    m = cfg.method
    if m in _SMOOTH_METHODS and not isinstance(p, SmoothProblem):
        raise ValueError(f"method {m!r} needs a smooth problem, got an operator")
    if m in _OPERATOR_METHODS and not isinstance(p, OperatorProblem):
        raise ValueError(f"method {m!r} needs an operator problem")
    if m == "gd":
        return lambda K: run_gd(p, x0, K)
    if m == "fgm":
        return lambda K: run_fgm(p, x0, K)
    if m == "ogmg":
        return lambda K: run_ogmg(p, x0, K)
    if m == "fgm+ogmg":
        return lambda K: run_fgm_then_ogmg(p, x0, K)
    if m == "gda":
        params = None if cfg.eta is None else GdaParams(eta=cfg.eta)
        return lambda K: run_gda(p, x0, K, params)
    if m == "km":
        alpha = 0.5 if cfg.alpha is None else cfg.alpha
        return lambda K: run_km(NonexpansiveMap.from_problem(p), x0, K, alphas=alpha)
    return lambda K: run_halpern(p, x0, K)


def _truncated(trace: Trace, j: int) -> Trace:
    """Cut a trace to horizon j (method-aware bookkeeping slices)."""
    sl = slice(0, j + 1)
    kw = dict(
        K=j,
        x=trace.x[sl].copy(),
        g=trace.g[sl].copy(),
        grad_norm_sq=trace.grad_norm_sq[sl].copy(),
        oracle_calls=j + 1,
    )
    if trace.values is not None:
        kw["values"] = trace.values[sl].copy()
    if trace.method == "fgm":
        s = trace.schedule
        kw["schedule"] = FgmSchedule(
            K=j, L=s.L, b=s.b[sl].copy(), B=s.B[sl].copy(), a=s.a[sl].copy()
        )
        kw["aux"] = {"v": trace.aux["v"][: j + 2].copy()}
    elif trace.method == "halpern":
        kw["params"] = {"lambdas": trace.params["lambdas"][sl].copy()}
    elif trace.method == "km":
        kw["params"] = {"alphas": trace.params["alphas"][:j].copy()}
    return replace(trace, **kw)


def _run_with_stop(runner, K: int, eps: float):
    """Run to the horizon, or until the recorded norm first drops to eps.

    The stopping search runs geometrically growing horizons. Every method
    that admits early stopping has horizon-independent prefixes, so each
    retry reproduces the previous iterates bitwise and the total oracle
    spend stays within a constant factor of the stopping index. Returns
    the (possibly truncated) trace and the total spend.
    """
    if eps <= 0.0:
        t = runner(K)
        return t, t.oracle_calls
    spent = 0
    k_try = min(K, 8)
    while True:
        t = runner(k_try)
        spent += t.oracle_calls
        hit = np.flatnonzero(t.grad_norms <= eps)
        if hit.size:
            j = max(1, int(hit[0]))
            if j < t.K:
                t = _truncated(t, j)
            return t, spent
        if k_try == K:
            return t, spent
        k_try = min(K, 2 * k_try)


def _km_as_forward_step(trace: Trace, p) -> Trace:
    """View an averaged trace as the forward-step run it is arithmetically.

    u_{k+1} = u_k - (2 alpha / L) F(u_k) is the forward step with
    eta = 2 alpha / L; relabeling lets the forward-step certificate judge
    the recorded iterates. Only a constant weight has a stationary step.
    """
    alphas = trace.params["alphas"]
    if alphas.size and float(np.ptp(alphas)) != 0.0:
        raise ValueError("averaged runs certify only with a constant alpha")
    eta = (2.0 * float(alphas[0])) / p.L
    return replace(trace, method="gda", params={"eta": eta})


def run_certificates(trace: Trace, p) -> list:
    """(name, report) pairs re-certifying a trace against its analysis.

    The composed method yields one report per phase, each checked by its
    own potential; the averaged iteration is certified through its
    forward-step form.
    """
    m = trace.method
    if m == "gd":
        return [("gd", cert.check_gd(trace, p))]
    if m == "fgm":
        return [("fgm", cert.check_fgm(trace, p))]
    if m == "ogmg":
        return [("ogmg", cert.check_ogmg(trace, p))]
    if m == "fgm+ogmg":
        t1, t2 = trace.phases
        return [("fgm", cert.check_fgm(t1, p)), ("ogmg", cert.check_ogmg(t2, p))]
    if m == "gda":
        return [("gda", cert.check_gda(trace, p))]
    if m == "km":
        return [("gda", cert.check_gda(_km_as_forward_step(trace, p), p))]
    if m == "halpern":
        return [("halpern", cert.check_halpern(trace, p))]
    raise ValueError(f"no certificate for method {m!r}")


def _known_f_star(p) -> Optional[float]:
    f_star = getattr(p, "f_star", None)
    if f_star is not None:
        return float(f_star)
    x_star = getattr(p, "x_star", None)
    if x_star is not None:
        return float(p.value(x_star))
    return None


def measured_series(trace: Trace, envelope, p=None) -> np.ndarray:
    """The per-step sequence an envelope's quantity refers to."""
    q = envelope.quantity
    if q in ("grad_norm_sq", "grad_norm_sq_at_horizon"):
        return trace.grad_norm_sq
    if q == "min_grad_norm_sq":
        return np.minimum.accumulate(trace.grad_norm_sq)
    if q == "value_gap":
        f_star = _known_f_star(p) if p is not None else None
        if trace.values is None or f_star is None:
            raise ValueError("value_gap needs recorded values and a known optimum")
        return trace.values - f_star
    if q == "operator_norm":
        return trace.grad_norms
    raise ValueError(f"unknown envelope quantity {q!r}")


def envelope_margin(trace: Trace, envelope, p=None) -> float:
    """Minimum of bound(k) - measured(k) over the compared steps.

    The horizon-anchored envelope compares at k = K only; tabulated bounds
    at earlier k describe shorter runs, not this one.
    """
    m = measured_series(trace, envelope, p)
    if envelope.quantity == "grad_norm_sq_at_horizon":
        return float(envelope.bounds[trace.K] - m[trace.K])
    n = min(len(m), len(envelope.bounds))
    return float(np.min(envelope.bounds[:n] - m[:n]))


def default_out_dir(cfg: ExperimentConfig) -> Path:
    root = Path(os.environ.get(OUT_DIR_ENV, "runs"))
    name = cfg.method.replace("+", "-")
    return root / f"{name}-K{cfg.K}-seed{cfg.seed}"


def resolve_out_dir(cfg: ExperimentConfig, base_dir=".") -> Path:
    out = Path(cfg.out) if cfg.out is not None else default_out_dir(cfg)
    if not out.is_absolute():
        out = Path(base_dir) / out
    return out


def run_config(cfg: ExperimentConfig, base_dir=".") -> RunSummary:
    """Execute one configured run and write its artifact directory.

    Artifacts: ``config.kv``, ``problem.kv``, ``trace.kv`` (complete record,
    reloadable for re-certification), ``trace.csv``, ``certificate.csv``
    (when checking is on), ``summary.kv``, and ``plot.svg`` (when asked).
    Relative paths resolve against ``base_dir``. Non-finite oracle output
    aborts the run with ``FloatingPointError``.

    Returns
    -------
    RunSummary
    """
    p = load_problem(cfg, base_dir)
    rng = np.random.default_rng(cfg.seed)
    x0 = rng.standard_normal(p.dim)
    runner = _dispatch(cfg, p, x0)
    trace, spent = _run_with_stop(runner, cfg.K, cfg.eps)

    reports = run_certificates(trace, p) if cfg.certificate else []
    passed = all(r.passed for _, r in reports) if cfg.certificate else None

    try:
        envelope = cert.rate_envelope(ENVELOPE_TAG[cfg.method], p, x0, trace.K)
        margin = envelope_margin(trace, envelope, p)
    except ValueError:
        envelope, margin = None, float("nan")

    norms = trace.grad_norms
    summary = RunSummary(
        method=cfg.method,
        K=trace.K,
        final_grad_norm=float(norms[-1]),
        min_grad_norm=float(np.min(norms)),
        oracle_calls=spent,
        certificate_passed=passed,
        envelope_margin=margin,
    )

    out = resolve_out_dir(cfg, base_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "config.kv", config_to_text(cfg))
    _write(out / "problem.kv", problems.problem_to_text(p))
    _write(out / "trace.kv", trace_to_text(trace))
    potential = reports[0][1].potential if len(reports) == 1 else None
    emit_trace_csv(
        trace,
        out / "trace.csv",
        f_star=_known_f_star(p),
        potential=potential,
        envelope=envelope,
    )
    if reports:
        _write(out / "certificate.csv", certificate_csv_text(reports))
    _write(out / "summary.kv", summary_to_text(summary, reports))
    if cfg.plot:
        plot_trace(trace, out / "plot.svg", envelope=envelope)
    return summary


def run_batch(cfgs, base_dir=".", workers: Optional[int] = None) -> list:
    """Run several configs concurrently, one worker per config.

    Output directories must be pairwise distinct; every write stays inside
    its own run directory, so runs cannot contend.
    """
    outs = [str(resolve_out_dir(c, base_dir)) for c in cfgs]
    if len(set(outs)) != len(outs):
        raise ValueError("output directories collide; give each run its own")
    if not cfgs:
        return []
    with ThreadPoolExecutor(max_workers=workers or min(8, len(cfgs))) as pool:
        return list(pool.map(lambda c: run_config(c, base_dir), cfgs))


# ---------------------------------------------------------------------------
# CSV and full-trace artifacts

CSV_HEADER = "k,grad_norm,grad_norm_sq,value,gap,potential,envelope"


def emit_trace_csv(trace: Trace, path=None, f_star=None, potential=None, envelope=None) -> str:
    """Render the per-step record as CSV, one row per recorded step.

    Floats carry 17 significant digits, so parsing a column reproduces the
    recorded doubles bit for bit. Columns without a source stay empty:
    function values on operator problems, the gap without a known optimum,
    the potential when no certificate ran, the envelope when no optimum
    anchors one. Writes UTF-8 with bare newlines when a path is given, and
    returns the text either way.
    """
    K = trace.K
    bounds = None
    if envelope is not None:
        bounds = envelope.bounds if hasattr(envelope, "bounds") else np.asarray(envelope, float)
        if len(bounds) < K + 1:
            raise ValueError(f"envelope covers {len(bounds)} steps, trace has {K + 1}")
    if potential is not None and len(potential) != K + 1:
        raise ValueError(f"potential has {len(potential)} entries, trace has {K + 1}")

    norms = trace.grad_norms
    lines = [CSV_HEADER]
    for k in range(K + 1):
        cells = [str(k), _num(norms[k]), _num(trace.grad_norm_sq[k])]
        if trace.values is not None:
            cells.append(_num(trace.values[k]))
            cells.append(_num(trace.values[k] - f_star) if f_star is not None else "")
        else:
            cells += ["", ""]
        cells.append(_num(potential[k]) if potential is not None else "")
        cells.append(_num(bounds[k]) if bounds is not None else "")
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if path is not None:
        _write(path, text)
    return text


def parse_trace_csv(text: str) -> dict:
    """Columns back from ``emit_trace_csv`` output; empty cells become nan."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    names = lines[0].split(",")
    cols = {n: [] for n in names}
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(names):
            raise ValueError(f"row has {len(cells)} cells, header has {len(names)}")
        for n, cell in zip(names, cells):
            cols[n].append(float(cell) if cell != "" else np.nan)
    return {n: np.array(v) for n, v in cols.items()}


def certificate_csv_text(reports) -> str:
    """Certificate rows as CSV, one block per report, summaries as comments."""
    lines = ["method,k,potential,delta,slack,violation"]
    for name, r in reports:
        for k in range(r.K + 1):
            lines.append(
                ",".join(
                    [name, str(k), _num(r.potential[k]), _num(r.delta[k]),
                     _num(r.slack[k]), _num(r.violation[k])]
                )
            )
    for name, r in reports:
        lines.append(
            f"# {name}: passed={str(r.passed).lower()}"
            f" worst_violation={_num(r.worst_violation)} tol={_num(r.tol)}"
        )
    return "\n".join(lines) + "\n"


def _trace_keyvals(t: Trace, prefix="") -> list:
    pairs = [
        (prefix + "method", t.method),
        (prefix + "K", t.K),
        (prefix + "oracle_calls", t.oracle_calls),
        (prefix + "x", t.x),
        (prefix + "g", t.g),
    ]
    if t.values is not None:
        pairs.append((prefix + "values", t.values))
    for name in sorted(t.aux):
        pairs.append((prefix + "aux." + name, t.aux[name]))
    for name in sorted(t.params):
        pairs.append((prefix + "params." + name, t.params[name]))
    if t.schedule is not None:
        sched = kvdoc.loads(schedule_to_text(t.schedule))
        pairs += [(prefix + "schedule." + k, v) for k, v in sched.items()]
    if t.split is not None:
        pairs.append((prefix + "split", t.split))
        for i, phase in enumerate(t.phases):
            pairs += _trace_keyvals(phase, prefix + f"phase{i}.")
    return pairs


def trace_to_text(t: Trace) -> str:
    """Serialize a complete trace (17 significant digits, exact round-trip)."""
    return kvdoc.dumps(_trace_keyvals(t))


def _subdoc_text(doc: dict, prefix: str) -> str:
    lines = [f"{k[len(prefix):]} = {v}" for k, v in doc.items() if k.startswith(prefix)]
    return "\n".join(lines) + "\n"


def _trace_from_doc(doc: dict, p, prefix="") -> Trace:
    method = doc[prefix + "method"]
    K = kvdoc.get_int(doc, prefix + "K")
    x = kvdoc.get_matrix(doc, prefix + "x")
    g = kvdoc.get_matrix(doc, prefix + "g")
    values = kvdoc.get_vector(doc, prefix + "values") if prefix + "values" in doc else None

    aux = {}
    aux_prefix = prefix + "aux."
    names = {k[len(aux_prefix):].split(".")[0] for k in doc if k.startswith(aux_prefix)}
    for name in sorted(names):
        aux[name] = kvdoc.get_matrix(doc, aux_prefix + name)

    params = {}
    if prefix + "params.eta" in doc:
        params["eta"] = kvdoc.get_float(doc, prefix + "params.eta")
    for name in ("alphas", "lambdas"):
        if prefix + "params." + name in doc:
            params[name] = kvdoc.get_vector(doc, prefix + "params." + name)

    schedule = None
    if prefix + "schedule.kind" in doc:
        schedule = schedule_from_text(_subdoc_text(doc, prefix + "schedule."))

    split, phases = None, ()
    if prefix + "split" in doc:
        split = kvdoc.get_int(doc, prefix + "split")
        phases = (
            _trace_from_doc(doc, p, prefix + "phase0."),
            _trace_from_doc(doc, p, prefix + "phase1."),
        )

    return Trace(
        method=method,
        K=K,
        x=x,
        g=g,
        grad_norm_sq=np.einsum("ij,ij->i", g, g),
        values=values,
        problem=p,
        schedule=schedule,
        aux=aux,
        params=params,
        split=split,
        phases=phases,
        oracle_calls=kvdoc.get_int(doc, prefix + "oracle_calls"),
    )


def trace_from_text(text: str, p) -> Trace:
    """Rebuild a trace from its document; the problem is supplied separately."""
    return _trace_from_doc(kvdoc.loads(text), p)


def load_run(run_dir):
    """(problem, trace, config) back from a run directory.

    The config is None when ``config.kv`` is absent (a directory assembled
    by hand still checks fine; only the problem and trace are needed).
    """
    d = Path(run_dir)
    p = problems.problem_from_text((d / "problem.kv").read_text(encoding="utf-8"))
    trace = trace_from_text((d / "trace.kv").read_text(encoding="utf-8"), p)
    cfg_path = d / "config.kv"
    cfg = config_from_text(cfg_path.read_text(encoding="utf-8")) if cfg_path.exists() else None
    return p, trace, cfg


# ---------------------------------------------------------------------------
# envelope comparison


@dataclass(frozen=True)
class EnvelopeComparison:
    """One table row: measured decay slope and worst bound margin for a method."""

    method: str
    quantity: str
    n_traces: int
    n_points: int
    slope: float
    margin: float


def fit_loglog_slope(ks, ys) -> float:
    """Least-squares slope of log(y) against log(k).

    Zero and non-finite measurements are dropped first (a run that lands
    exactly on a stationary point has no decay left to fit); at least 4
    surviving points are required.
    """
    ks = np.asarray(ks, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (ks > 0.0) & (ys > 0.0) & np.isfinite(ys)
    ks, ys = ks[keep], ys[keep]
    if ks.size < 4:
        raise ValueError(f"need at least 4 positive points for a log-log fit, got {ks.size}")
    return float(np.polyfit(np.log(ks), np.log(ys), 1)[0])


def compare_envelopes(traces, envelopes, problems_=None) -> list:
    """Regression table of measured decay against certified bounds.

    Pairs are grouped by method tag. A group whose traces share one horizon
    is reduced to its pointwise worst (max) measured series and the slope is
    fitted along that curve from k = 1; a group spanning at least 4 distinct
    horizons is fitted across horizons on the terminal measurement, which is
    how the horizon-fixed methods expose their rate. The margin is the
    smallest bound-minus-measured gap anywhere in the group.

    Returns
    -------
    list of EnvelopeComparison, in first-seen method order.
    """
    if len(traces) != len(envelopes):
        raise ValueError("traces and envelopes must come in matched pairs")
    if problems_ is not None and len(problems_) != len(traces):
        raise ValueError("problems_ must match traces one to one")

    groups: dict = {}
    for i, t in enumerate(traces):
        groups.setdefault(t.method, []).append(i)

    rows = []
    for method, idx in groups.items():
        quantity = envelopes[idx[0]].quantity
        if any(envelopes[i].quantity != quantity for i in idx):
            raise ValueError(f"mixed envelope quantities for method {method!r}")
        prob = lambda i: problems_[i] if problems_ is not None else None
        series = [measured_series(traces[i], envelopes[i], prob(i)) for i in idx]
        margins = [envelope_margin(traces[i], envelopes[i], prob(i)) for i in idx]
        horizons = [traces[i].K for i in idx]

        per_step = quantity != "grad_norm_sq_at_horizon"
        if per_step and len(set(horizons)) == 1:
            worst = np.max(np.vstack(series), axis=0)
            slope = fit_loglog_slope(np.arange(1, horizons[0] + 1), worst[1:])
            n_points = horizons[0]
        else:
            if len(set(horizons)) < 4:
                raise ValueError(
                    f"need at least 4 distinct horizons for a terminal fit of "
                    f"{method!r}, got {len(set(horizons))}"
                )
            slope = fit_loglog_slope(horizons, [s[-1] for s in series])
            n_points = len(idx)
        rows.append(
            EnvelopeComparison(method, quantity, len(idx), n_points, slope,
                               float(np.min(margins)))
        )
    return rows


def comparison_to_text(rows) -> str:
    header = f"{'method':<10} {'quantity':<26} {'traces':>6} {'points':>6} {'slope':>9} {'margin':>13}"
    out = [header]
    for r in rows:
        out.append(
            f"{r.method:<10} {r.quantity:<26} {r.n_traces:>6} {r.n_points:>6} "
            f"{r.slope:>9.3f} {r.margin:>13.4e}"
        )
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# plotting


def plot_trace(trace: Trace, path, envelope=None) -> None:
    """Log-log SVG of the recorded decay, with the envelope overlaid."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    k = np.arange(1, trace.K + 1)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    if trace.values is None:
        ax.loglog(k, trace.grad_norms[1:], label="operator norm")
        ax.set_ylabel("||F(u_k)||")
    else:
        ax.loglog(k, trace.grad_norm_sq[1:], label="squared gradient norm")
        ax.set_ylabel("||grad f(x_k)||^2")
    if envelope is not None and trace.K >= 1:
        ax.loglog(k, np.asarray(envelope.bounds)[1 : trace.K + 1], "--", label="bound")
    ax.set_xlabel("k")
    ax.set_title(trace.method)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
