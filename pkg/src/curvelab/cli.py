"""Command line driver for the counting laboratory.

Exit codes: 0 success, 1 a checked verdict or target failed, 2 a
computation refused to start within the memory budget, 3 bad usage.
Every record the driver emits is a single JSON line with sorted keys,
so equal inputs produce equal bytes apart from the wall_time_s field.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass

import click
import numpy as np

from .extension import (
    CurveSystem,
    WeightedSequence,
    make_set,
    monte_carlo_moment,
)
from .intpoly import IntPolynomial, parse_polynomial
from .lemmas import (
    LemmaVerdict,
    dyadic_level_sets,
    layer_cake_extend,
    measure_subset_constant,
    verify_c2_zero,
    verify_c3_zero,
    verify_cubic_identity,
    verify_sde,
)
from .moments import (
    DEFAULT_MEM_BUDGET,
    MemoryBudgetError,
    MomentReport,
    append_jsonl,
    c_table,
    conjectured_moment_scale,
    divisor,
    eighth_moment_bound,
    even_moment,
    max_divisor,
    tenth_moment_bound,
)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_RESOURCE = 2
EXIT_USAGE = 3

_CURVE_ALIASES = {
    "cubic": "x^3, x",
    "parabola": "x^2, x",
    "moment3": "x, x^2, x^3",
}


# -- spec parsing -----------------------------------------------------------


def parse_curve_spec(spec: str) -> CurveSystem:
    text = _CURVE_ALIASES.get(spec.strip(), spec)
    try:
        return CurveSystem.from_string(text)
    except ValueError as exc:
        raise click.UsageError(f"bad curve spec {spec!r}: {exc}")


def parse_set_spec(spec: str) -> WeightedSequence:
    """kind:key=value,... specs, or @file.json for a saved sequence.

    Examples: ``full:N=32``, ``random:N=64,density=0.5,seed=7``,
    ``progression:N=100,start=-100,step=5``, ``explicit:N=9,points=-3+1+8``.
    """
    if spec.startswith("@"):
        with open(spec[1:]) as fh:
            return WeightedSequence.from_json_obj(json.load(fh))
    kind, _, rest = spec.partition(":")
    raw: dict[str, str] = {}
    if rest:
        for part in rest.split(","):
            key, eq, val = part.partition("=")
            if not eq:
                raise click.UsageError(f"bad set parameter {part!r} (need key=value)")
            raw[key.strip()] = val.strip()
    try:
        n = int(raw.pop("N"))
    except KeyError:
        raise click.UsageError("set spec needs N=<radius>")
    except ValueError:
        raise click.UsageError("N must be an integer")
    kwargs = {}
    try:
        if "density" in raw:
            kwargs["density"] = float(raw.pop("density"))
        if "seed" in raw:
            kwargs["seed"] = int(raw.pop("seed"))
        if "start" in raw:
            kwargs["start"] = int(raw.pop("start"))
        if "step" in raw:
            kwargs["step"] = int(raw.pop("step"))
        if "points" in raw:
            kwargs["points"] = [int(tok) for tok in raw.pop("points").split("+") if tok]
    except ValueError as exc:
        raise click.UsageError(f"bad set parameter value: {exc}")
    if raw:
        raise click.UsageError(f"unknown set parameters: {sorted(raw)}")
    try:
        return make_set(kind, n, **kwargs)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _seq_descriptor(seq: WeightedSequence) -> str:
    kind = "indicator" if seq.is_indicator() else "weighted"
    blob = json.dumps(seq.to_json_obj(), sort_keys=True, default=str)
    digest = hashlib.sha256(blob.encode()).hexdigest()[:12]
    return f"{kind}:A={seq.cardinality()}:{digest}"


# -- programmatic operations used by the commands ---------------------------


def compute_moment_report(
    seq: WeightedSequence,
    curve: CurveSystem,
    s: int,
    *,
    method: str = "exact",
    samples: int = 20000,
    seed: int = 0,
    mem_budget: int = DEFAULT_MEM_BUDGET,
) -> MomentReport:
    start = time.perf_counter()
    stderr = None
    if method == "exact":
        moment: int | float = even_moment(seq, curve, s, mem_budget=mem_budget)
    elif method == "mc":
        est = monte_carlo_moment(seq, curve, 2 * s, samples=samples, seed=seed)
        moment, stderr = est.estimate, est.stderr
    else:
        raise click.UsageError(f"unknown method {method!r}")
    wall = time.perf_counter() - start
    scale = conjectured_moment_scale(seq, curve, s)
    ratio = float(moment) / float(scale) if scale else 0.0
    return MomentReport(
        curve=curve.descriptor(),
        set_descriptor=_seq_descriptor(seq),
        N=seq.N,
        cardinality=seq.cardinality(),
        s=s,
        moment=moment,
        bound=scale,
        ratio=ratio,
        method="exact" if method == "exact" else "monte-carlo",
        stderr=stderr,
        wall_time_s=wall,
    )


@dataclass
class SlopeFit:
    """Least squares slope of log(moment) against log(N)."""

    slope: float
    intercept: float
    r_squared: float
    n_values: tuple[int, ...]

    def to_json_obj(self) -> dict:
        return {
            "record": "slope-fit",
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_values": list(self.n_values),
        }


@dataclass
class ScanConfig:
    """Inputs of one moment-growth scan over a family of radii."""

    curve: str = "cubic"
    s: int = 3
    kind: str = "full"
    density: float = 0.5
    n_values: tuple[int, ...] = (8, 12, 16, 24, 32)
    seed: int = 0
    method: str = "exact"
    samples: int = 20000
    target_slope: float | None = None
    tolerance: float = 0.15
    mem_budget: int = DEFAULT_MEM_BUDGET

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ScanConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise click.UsageError(f"unknown scan config keys: {sorted(unknown)}")
        cfg = cls(**obj)
        return dataclasses.replace(cfg, n_values=tuple(int(n) for n in cfg.n_values))


@dataclass
class ScanResult:
    config: ScanConfig
    reports: list[MomentReport]
    fit: SlopeFit


def fit_slope(n_values, moments) -> SlopeFit:
    pairs = [(n, float(m)) for n, m in zip(n_values, moments) if float(m) > 0]
    if len(pairs) < 2 or len({n for n, _ in pairs}) < 2:
        raise click.UsageError("slope fit needs at least two distinct radii with positive moments")
    xs = np.log([n for n, _ in pairs])
    ys = np.log([m for _, m in pairs])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    total = ys - ys.mean()
    denom = float(total @ total)
    r2 = 1.0 - float(resid @ resid) / denom if denom else 1.0
    return SlopeFit(float(slope), float(intercept), r2, tuple(n for n, _ in pairs))


def run_scan(cfg: ScanConfig) -> ScanResult:
    """Compute the 2s-th moment at every radius in the config and fit
    the log-log growth exponent."""
    curve = parse_curve_spec(cfg.curve)
    reports = []
    for n in cfg.n_values:
        child = cfg.seed * 1000003 + n
        if cfg.kind == "full":
            seq = make_set("full", n)
        elif cfg.kind == "random":
            seq = make_set("random", n, density=cfg.density, seed=child)
        else:
            raise click.UsageError(f"scan supports kinds full and random, not {cfg.kind!r}")
        reports.append(
            compute_moment_report(
                seq, curve, cfg.s,
                method=cfg.method, samples=cfg.samples, seed=child,
                mem_budget=cfg.mem_budget,
            )
        )
    fit = fit_slope([r.N for r in reports], [r.moment for r in reports])
    return ScanResult(cfg, reports, fit)


_CUBIC_POOL = ("x^3", "x^2", "x^4", "x^3 - x", "2x^3 + x^2")


def _suite_cubic_identity(seed, trials, radius, mem_budget):
    rng = np.random.Generator(np.random.PCG64(seed))
    out = [verify_cubic_identity(-20, 20)]
    for _ in range(max(0, trials - 1)):
        half = int(rng.integers(5, 41))
        out.append(verify_cubic_identity(-half, half))
    return out


def _random_poly(rng) -> IntPolynomial:
    nvars = int(rng.integers(1, 4))
    while True:
        p = IntPolynomial.zero(nvars)
        for _ in range(int(rng.integers(1, 6))):
            coeff = int(rng.integers(1, 10)) * (1 if rng.random() < 0.5 else -1)
            term = IntPolynomial.constant(coeff, nvars)
            for i in range(nvars):
                e = int(rng.integers(0, 4))
                if e:
                    term = term * IntPolynomial.variable(i, nvars) ** e
            p = p + term
        if not p.is_zero() and not p.is_constant():
            return p


def _suite_sde(seed, trials, radius, mem_budget):
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for _ in range(trials):
        p = _random_poly(rng)
        size = int(rng.integers(3, 11))
        pts = rng.choice(np.arange(-12, 13), size=size, replace=False)
        out.append(verify_sde(p, [int(v) for v in pts]))
    return out


def _random_indicator(rng, max_radius, floor=4):
    n = int(rng.integers(floor, max_radius + 1))
    density = float(rng.uniform(0.25, 0.95))
    seed = int(rng.integers(0, 2 ** 31))
    seq = make_set("random", n, density=density, seed=seed)
    if seq.is_empty():
        seq = make_set("explicit", n, points=[0])
    return seq


def _suite_c2_zero(seed, trials, radius, mem_budget):
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for i in range(trials):
        phi = parse_polynomial(_CUBIC_POOL[i % len(_CUBIC_POOL)])
        seq = _random_indicator(rng, min(radius, 12))
        out.append(verify_c2_zero(seq, phi, mem_budget=mem_budget))
    return out


def _suite_c3_zero(seed, trials, radius, mem_budget):
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for _ in range(trials):
        seq = _random_indicator(rng, min(radius, 12))
        out.append(verify_c3_zero(seq, mem_budget=mem_budget))
    return out


def _suite_layer_cake(seed, trials, radius, mem_budget):
    rng = np.random.Generator(np.random.PCG64(seed))
    curve = CurveSystem.cubic_linear()
    s = 2
    out = []
    for i in range(trials):
        n = int(rng.integers(4, min(radius, 16) + 1))
        support = _random_indicator(rng, n, floor=max(4, n)).support()
        weights = {}
        for pt in support:
            if rng.random() < 0.5:
                weights[pt] = int(rng.integers(1, 9))
            else:
                weights[pt] = float(2.0 ** -int(rng.integers(0, 5)))
        seq = WeightedSequence(n, weights)
        c = measure_subset_constant(
            n, curve, s, trials=10, seed=seed * 7919 + i,
            include=dyadic_level_sets(seq).values(), mem_budget=mem_budget,
        )
        out.append(layer_cake_extend(seq, curve, s, c, mem_budget=mem_budget))
    return out


_SUITES = {
    "cubic-identity": _suite_cubic_identity,
    "sde": _suite_sde,
    "c2-zero": _suite_c2_zero,
    "c3-zero": _suite_c3_zero,
    "layer-cake": _suite_layer_cake,
}


def run_verify(
    suites,
    *,
    trials: int = 10,
    seed: int = 0,
    radius: int = 12,
    mem_budget: int = DEFAULT_MEM_BUDGET,
) -> tuple[int, list[LemmaVerdict]]:
    """Run the named lemma suites on randomized instances.

    Returns (exit_code, verdicts); the code is 1 when any verdict fails
    outright.  Vacuous layer-cake verdicts count as non-failures and are
    reported in the verdict stream.
    """
    for name in suites:
        if name not in _SUITES:
            raise click.UsageError(
                f"unknown suite {name!r}; choose from {sorted(_SUITES)}")
    verdicts: list[LemmaVerdict] = []
    for idx, name in enumerate(suites):
        verdicts.extend(_SUITES[name](seed * 1000003 + idx, trials, radius, mem_budget))
    failed = sum(1 for v in verdicts if not v.holds)
    return (EXIT_VERDICT if failed else EXIT_OK), verdicts


# -- the click surface ------------------------------------------------------


@click.group()
@click.option("--mem-budget-gib", type=float, default=8.0, show_default=True,
              help="refuse table builds projected to exceed this many GiB")
@click.pass_context
def cli(ctx, mem_budget_gib):
    """Exact moment computations for truncated extension operators."""
    ctx.obj = {"mem_budget": int(mem_budget_gib * 2 ** 30)}


@cli.command()
@click.option("--set", "set_spec", required=True, help="set spec, see parse_set_spec")
@click.option("--curve", "curve_spec", default="cubic", show_default=True)
@click.option("-s", "half_exponent", type=int, required=True,
              help="half moment order; the moment computed is the 2s-th")
@click.option("--method", type=click.Choice(["exact", "mc"]), default="exact",
              show_default=True)
@click.option("--samples", type=int, default=20000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="append the report to this JSONL file")
@click.pass_obj
def moment(obj, set_spec, curve_spec, half_exponent, method, samples, seed, out):
    """Even moment of E_a, exact by solution counting or Monte Carlo."""
    if half_exponent < 1:
        raise click.UsageError("-s must be a positive integer")
    seq = parse_set_spec(set_spec)
    curve = parse_curve_spec(curve_spec)
    report = compute_moment_report(
        seq, curve, half_exponent,
        method=method, samples=samples, seed=seed, mem_budget=obj["mem_budget"],
    )
    click.echo(report.to_json_line())
    if out:
        append_jsonl(out, report)


@cli.command()
@click.option("--set", "set_spec", required=True)
@click.option("--phi", "phi_spec", default="x^3", show_default=True)
@click.option("-t", "t", type=int, default=2, show_default=True)
@click.option("--flavor", type=click.Choice(["constrained", "unconstrained"]),
              default="constrained", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="write the table (.csv or .bin by extension)")
@click.pass_obj
def ctable(obj, set_spec, phi_spec, t, flavor, out):
    """Level/representation counts c_t(l) for an indicator set."""
    if t < 1:
        raise click.UsageError("-t must be a positive integer")
    seq = parse_set_spec(set_spec)
    phi = _parse_phi(phi_spec)
    table = c_table(seq, phi, t, flavor, mem_budget=obj["mem_budget"])
    summary = {
        "record": "ctable",
        "phi": str(phi),
        "t": t,
        "flavor": flavor,
        "N": seq.N,
        "A": seq.cardinality(),
        "entries": int(table.keys.size),
        "zero": table.zero(),
        "max_nonzero": table.max_nonzero(),
        "total": table.total(),
    }
    click.echo(json.dumps(summary, sort_keys=True))
    if out:
        if out.endswith(".bin"):
            table.to_binary(out)
        else:
            table.to_csv(out)


def _parse_phi(text: str) -> IntPolynomial:
    try:
        phi = parse_polynomial(text)
    except ValueError as exc:
        raise click.UsageError(f"bad polynomial {text!r}: {exc}")
    if phi.variables != 1:
        raise click.UsageError("phi must be univariate")
    return phi


@cli.command()
@click.option("--set", "set_spec", required=True)
@click.option("--which", type=click.Choice(["tenth", "eighth"]), default="tenth",
              show_default=True)
@click.option("--phi", "phi_spec", default="x^3", show_default=True,
              help="top curve component for the eighth-moment bound")
@click.option("--check/--no-check", default=False,
              help="also compute the exact moment and compare")
@click.pass_obj
def bound(obj, set_spec, which, phi_spec, check):
    """Foliation upper bounds for the tenth or eighth moment."""
    seq = parse_set_spec(set_spec)
    budget = obj["mem_budget"]
    try:
        if which == "tenth":
            b = tenth_moment_bound(seq, mem_budget=budget)
            curve = CurveSystem.cubic_linear()
            s, bound_value = 5, b.bound
        else:
            phi = _parse_phi(phi_spec)
            b = eighth_moment_bound(seq, phi, mem_budget=budget)
            curve = CurveSystem.with_linear(phi)
            s, bound_value = 4, b.refined_bound
    except ValueError as exc:
        raise click.UsageError(str(exc))
    payload = {"record": f"{which}-bound", "s": s}
    payload.update(dataclasses.asdict(b))
    code = EXIT_OK
    if check:
        m = even_moment(seq, curve, s, mem_budget=budget)
        payload["moment"] = m
        payload["within"] = bool(m <= bound_value)
        if not payload["within"]:
            code = EXIT_VERDICT
    click.echo(json.dumps(payload, sort_keys=True))
    return code


@cli.command()
@click.option("--suite", default="cubic-identity,sde,c2-zero,c3-zero,layer-cake",
              show_default=True, help="comma separated suite names")
@click.option("--trials", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--radius", type=int, default=12, show_default=True,
              help="largest truncation radius for randomized instances")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def verify(obj, suite, trials, seed, radius, out):
    """Check the counting lemmas on randomized exact instances."""
    names = [tok.strip() for tok in suite.split(",") if tok.strip()]
    if not names:
        raise click.UsageError("no suites named")
    code, verdicts = run_verify(
        names, trials=trials, seed=seed, radius=radius, mem_budget=obj["mem_budget"])
    for v in verdicts:
        click.echo(v.to_json_line())
        if out:
            append_jsonl(out, v.to_json_obj())
    summary = {
        "record": "verify-summary",
        "suites": names,
        "verdicts": len(verdicts),
        "failures": sum(1 for v in verdicts if not v.holds),
        "vacuous": sum(1 for v in verdicts if v.vacuous),
    }
    click.echo(json.dumps(summary, sort_keys=True))
    return code


@cli.command()
@click.option("--curve", default=None, help="curve spec or alias")
@click.option("-s", "half_exponent", type=int, default=None)
@click.option("--kind", type=click.Choice(["full", "random"]), default=None)
@click.option("--density", type=float, default=None)
@click.option("--n-values", "n_values", default=None,
              help="comma separated truncation radii")
@click.option("--seed", type=int, default=None)
@click.option("--method", type=click.Choice(["exact", "mc"]), default=None)
@click.option("--samples", type=int, default=None)
@click.option("--target-slope", type=float, default=None,
              help="fail (exit 1) if the fitted slope misses this target")
@click.option("--tolerance", type=float, default=None)
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with ScanConfig fields; flags override it")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_obj
def scan(obj, config_path, out, **flags):
    """Moment growth in N: compute, fit log-log slope, compare to target."""
    if config_path:
        with open(config_path) as fh:
            cfg = ScanConfig.from_json_obj(json.load(fh))
    else:
        cfg = ScanConfig()
    overrides = {}
    rename = {"half_exponent": "s"}
    for key, value in flags.items():
        if value is not None:
            overrides[rename.get(key, key)] = value
    if "n_values" in overrides:
        try:
            overrides["n_values"] = tuple(
                int(tok) for tok in overrides["n_values"].split(",") if tok.strip())
        except ValueError:
            raise click.UsageError("--n-values must be comma separated integers")
    cfg = dataclasses.replace(cfg, mem_budget=obj["mem_budget"], **overrides)
    if cfg.s is None or cfg.s < 1:
        raise click.UsageError("scan needs a positive -s")
    result = run_scan(cfg)
    for report in result.reports:
        click.echo(report.to_json_line())
        if out:
            append_jsonl(out, report)
    fit_obj = result.fit.to_json_obj()
    if cfg.target_slope is not None:
        fit_obj["target_slope"] = cfg.target_slope
        fit_obj["tolerance"] = cfg.tolerance
        fit_obj["within_tolerance"] = bool(
            abs(result.fit.slope - cfg.target_slope) <= cfg.tolerance)
    click.echo(json.dumps(fit_obj, sort_keys=True))
    if out:
        append_jsonl(out, fit_obj)
    if cfg.target_slope is not None and not fit_obj["within_tolerance"]:
        return EXIT_VERDICT
    return EXIT_OK


@cli.command("divisor")
@click.argument("n", type=int)
@click.option("-k", type=int, default=2, show_default=True)
@click.option("--max-below", "max_below", type=int, default=None,
              help="print the maximum of tau_k over 1..B instead")
def divisor_cmd(n, k, max_below):
    """tau_k(n), the number of ordered k-factorizations."""
    if k < 1:
        raise click.UsageError("-k must be positive")
    if max_below is not None:
        if max_below < 1:
            raise click.UsageError("--max-below must be positive")
        value = max_divisor(max_below, k)
        click.echo(json.dumps({"record": "divisor-max", "bound": max_below,
                               "k": k, "max": value}, sort_keys=True))
        return
    if n < 1:
        raise click.UsageError("n must be positive")
    click.echo(json.dumps({"record": "divisor", "n": n, "k": k,
                           "tau": divisor(n, k)}, sort_keys=True))


def main(argv=None) -> int:
    """Entry point mapping exceptions onto the documented exit codes."""
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        return EXIT_USAGE
    except MemoryBudgetError as exc:
        click.echo(f"resource refusal: {exc}", err=True)
        return EXIT_RESOURCE
    return int(rv) if isinstance(rv, int) else EXIT_OK
