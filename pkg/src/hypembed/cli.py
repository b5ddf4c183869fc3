"""Command-line experiment runner.

Each subcommand evaluates one criterion and writes a report either as CSV
rows (``--format rows``) or as a readable summary. Configuration comes from
a ``key = value`` file, then ``--set key=value`` overrides, then the
dedicated ``--seed`` flag. Exit status: 0 pass, 1 criterion failed,
2 usage error, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import boundary, cocycle, conformal, treeembed, walls
from .group import FreeGroup, ResourceCapError, format_word

SCHEMA = "hypembed-report/1"

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3

EXACT = "exact"
TAIL = "truncated-with-tail"


def mc_tag(sigma: float) -> str:
    return f"monte-carlo±{sigma:.3g}"


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("grid must be start:stop:step")
        start, stop, step = map(float, parts)
        if step <= 0 or stop < start:
            raise ValueError("grid needs step > 0 and stop ≥ start")
        n = math.floor((stop - start) / step + 1e-9) + 1
        return [round(start + i * step, 12) for i in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: str
    help: str = ""


COMMON = {"seed": Param(int, "0", "random seed")}

EXPERIMENTS: dict[str, dict[str, Param]] = {
    "threshold": {
        "k": Param(int, "2", "free-group rank"),
        "a": Param(float, "3", "visual parameter"),
        "p_grid": Param(parse_grid, "0.8:1.2:0.05", "exponents"),
        "T": Param(int, "30", "truncation radius"),
        "tol": Param(float, "0.05", "allowed |frontier - Q|"),
    },
    "compression": {
        "k": Param(int, "2"),
        "a": Param(float, "4"),
        "p": Param(float, "2"),
        "cover_radius": Param(float, "0.25", "C̄"),
        "lengths": Param(parse_ints, "8,16,32"),
        "samples": Param(int, "20", "words per length"),
        "margin": Param(float, "0.05", "allowed shortfall below 1/p"),
    },
    "properness": {
        "k": Param(int, "2"),
        "a": Param(float, "4"),
        "p": Param(float, "2"),
        "cover_radius": Param(float, "0.25"),
        "count": Param(int, "200", "random words"),
        "max_length": Param(int, "30"),
        "extra_radius": Param(int, "20", "T - |g|"),
    },
    "embed-tree": {
        "alpha": Param(float, "0.5"),
        "p": Param(float, "2"),
        "depth": Param(int, "12"),
        "pairs": Param(int, "10000"),
        "quad_tol": Param(float, "1e-6"),
    },
    "walls": {
        "p": Param(float, "3"),
        "distances": Param(parse_grid, "1,2,4,8"),
        "samples": Param(int, "1000000"),
        "slope_tol": Param(float, "0.02"),
        "sigma": Param(float, "3", "allowed ratio deviation in standard errors"),
        "cnd_points": Param(int, "30"),
        "cnd_seeds": Param(int, "100"),
        "cnd_tol": Param(float, "1e-8"),
    },
    "regularity": {
        "k": Param(int, "2"),
        "a": Param(float, "3"),
        "depth_min": Param(int, "1"),
        "depth_max": Param(int, "18"),
        "R": Param(float, "2", "shadow radius for the sandwich"),
        "sandwich_length": Param(int, "8"),
    },
    "cover": {
        "k": Param(int, "2"),
        "region": Param(int, "6"),
        "R": Param(float, "1.25"),
        "v": Param(int, "0", "V radius; 0 picks the default 2⌊2R⌋"),
        "a": Param(float, "3", "visual parameter for the chain inequality"),
        "p": Param(float, "2"),
    },
}


def read_config_file(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def merge_config(experiment: str, file_values: dict[str, str], overrides: dict[str, str]) -> dict[str, str]:
    schema = {**COMMON, **EXPERIMENTS[experiment]}
    merged = {k: p.default for k, p in schema.items()}
    for source in (file_values, overrides):
        for key, value in source.items():
            if key not in schema:
                raise ConfigError(f"unknown field {key!r} for {experiment}; known: {', '.join(sorted(schema))}")
            merged[key] = value
    return merged


def parse_config(experiment: str, raw: dict[str, str]) -> dict[str, Any]:
    schema = {**COMMON, **EXPERIMENTS[experiment]}
    out = {}
    for key, value in raw.items():
        try:
            out[key] = schema[key].parse(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field {key!r}: cannot parse {value!r} ({exc})") from None
    return out


@dataclass
class Report:
    experiment: str
    config: dict[str, str]
    columns: list[str]
    criterion: str
    rows: list[tuple[list[Any], str]] = field(default_factory=list)
    summary: list[tuple[str, Any, str]] = field(default_factory=list)
    passed: bool = False

    def add_row(self, cells: list[Any], provenance: str) -> None:
        if len(cells) != len(self.columns):
            raise ValueError("row width does not match the header")
        self.rows.append((list(cells), provenance))

    def note(self, key: str, value: Any, provenance: str = EXACT) -> None:
        self.summary.append((key, value, provenance))


def fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return repr(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def emit(report: Report, fmt_name: str = "rows") -> str:
    if fmt_name == "rows":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.columns + ["provenance"])
        for cells, prov in report.rows:
            w.writerow([fmt(c) for c in cells] + [prov])
        return buf.getvalue()
    if fmt_name == "summary":
        lines = [f"schema: {SCHEMA}", f"experiment: {report.experiment}", f"seed: {report.config['seed']}"]
        lines += [f"config.{k}: {v}" for k, v in sorted(report.config.items()) if k != "seed"]
        lines += [f"{k}: {fmt(v)} [{prov}]" for k, v, prov in report.summary]
        lines.append(f"rows: {len(report.rows)}")
        lines.append(f"criterion: {report.criterion}")
        lines.append(f"result: {'PASS' if report.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt_name!r}")


def run_threshold(c: dict[str, Any], raw: dict[str, str], workers: int) -> Report:
    res = conformal.conformal_threshold_experiment(c["k"], c["a"], c["p_grid"], c["T"])
    rep = Report("threshold", raw, ["p", "converged", "lower", "upper"], f"|frontier - Q| <= {raw['tol']}")
    for r in res.rows:
        rep.add_row([r.p, r.converged, r.lower, r.upper], TAIL)
    rep.note("Q", res.Q)
    rep.note("frontier", res.frontier)
    rep.note("empirical_frontier", res.empirical_frontier, TAIL)
    rep.note("distance_to_Q", res.distance_to_Q)
    rep.passed = bool(res.distance_to_Q <= c["tol"])
    return rep


def run_compression(c: dict[str, Any], raw: dict[str, str], workers: int) -> Report:
    group = FreeGroup(c["k"])
    vm = boundary.VisualMetric(c["a"])
    fam = cocycle.observable_cover(c["cover_radius"], vm, group)
    fit = cocycle.compression_fit(fam, c["p"], c["lengths"], c["samples"], c["seed"], group)
    target = 1 / c["p"] - c["margin"]
    rep = Report("compression", raw, ["length", "word", "lower", "upper"], f"envelope slope >= {target!r}")
    for L, word, lo, hi in fit.samples:
        rep.add_row([L, word, lo, hi], TAIL)
    rep.note("observables", len(fam))
    rep.note("exponent", fit.exponent, TAIL)
    rep.note("fit_quality", fit.fit_quality, TAIL)
    rep.note("envelope_exponent", fit.envelope_exponent, TAIL)
    rep.note("envelope_quality", fit.envelope_quality, TAIL)
    rep.passed = bool(fit.envelope_exponent >= target)
    return rep


def run_properness(c: dict[str, Any], raw: dict[str, str], workers: int) -> Report:
    group = FreeGroup(c["k"])
    vm = boundary.VisualMetric(c["a"])
    fam = cocycle.observable_cover(c["cover_radius"], vm, group)
    rng = np.random.default_rng(c["seed"])
    rep = Report(
        "properness",
        raw,
        ["word", "length", "bound", "norm_lower", "norm_upper", "separated", "k0"],
        "bound <= norm_upper for every word",
    )
    violations = below_lower = 0
    for _ in range(c["count"]):
        L = int(rng.integers(3, c["max_length"] + 1))
        g = group.random_word(L, rng)
        pb = cocycle.properness_lower(g, fam, c["p"])
        est = cocycle.family_norm(g, fam, c["p"], L + c["extra_radius"], group)
        if not pb.bound <= est.upper:
            violations += 1
        # stronger: the bound also sits under the certified lower endpoint
        below_lower += pb.bound <= est.lower
        rep.add_row([format_word(g), L, pb.bound, est.lower, est.upper, pb.count, pb.k0], TAIL)
    rep.note("violations", violations)
    rep.note("below_lower", below_lower)
    rep.passed = violations == 0
    return rep


def run_embed_tree(c: dict[str, Any], raw: dict[str, str], workers: int) -> Report:
    spec = treeembed.CompressionSpec.power(c["alpha"], c["p"])
    crit = treeembed.integral_criterion(spec, c["p"])
    rep = Report(
        "embed-tree",
        raw,
        ["distance", "min_norm", "lower_bound"],
        "finite Lipschitz certificate, no pair below rho(d/2)/2^(1/p) - w1, quadrature matches closed form",
    )
    rep.note("criterion", crit.status)
    rep.note("criterion_value", crit.value)
    if not crit.converges:
        rep.passed = False
        return rep
    quad, _ = treeembed.quadrature_integral(spec, c["p"])
    tree = treeembed.binary_tree(c["depth"])
    emb = treeembed.build_embedding(tree, spec)
    m = treeembed.measure_embedding(emb, treeembed.sample_pairs(tree, c["pairs"], c["seed"]))
    for d, v in m.lower_envelope:
        bound = spec.rho(d / 2) / 2 ** (1 / c["p"]) - m.slack if d else 0.0
        rep.add_row([d, v, bound], EXACT)
    rep.note("quadrature_value", quad, EXACT)
    rep.note("lipschitz", m.lipschitz)
    rep.note("max_ratio", m.max_ratio)
    rep.note("violations", m.violations)
    rep.note("fitted_exponent", m.fitted_exponent)
    rep.passed = bool(
        math.isfinite(m.lipschitz) and m.violations == 0 and abs(quad - crit.value) <= c["quad_tol"]
    )
    return rep


def run_walls(c: dict[str, Any], raw: dict[str, str], workers: int) -> Report:
    p = c["p"]
    if p < 1:
        raise ConfigError("field 'p': must be at least 1")
    mc = walls.MCConfig(c["samples"], c["seed"], workers)
    cr = walls.crofton_ratios(c["distances"], mc)
    norms = [e.estimate ** (1 / p) for e in cr.estimates]
    slope, _ = cocycle.loglog_slope(c["distances"], norms)
    # linear propagation of the per-point log errors into the fitted slope
    lx = np.log(c["distances"])
    wts = (lx - lx.mean()) / np.sum((lx - lx.mean()) ** 2)
    slope_se = float(np.sqrt(np.sum((wts * [e.stderr / (p * e.estimate) for e in cr.estimates]) ** 2)))
    rep = Report(
        "walls",
        raw,
        ["distance", "measure", "stderr", "ratio", "norm"],
        f"slope within {raw['slope_tol']} of 1/p, ratios within {raw['sigma']} sigma, CND on every seed",
    )
    for d, e, r, n in zip(c["distances"], cr.estimates, cr.ratios, norms):
        rep.add_row([d, e.estimate, e.stderr, r, n], mc_tag(e.stderr))
    cnd_min = math.inf
    cnd_ok = True
    for s in range(c["cnd_seeds"]):
        res = walls.cnd_check(walls.random_disk_points(c["cnd_points"], c["seed"] + s), c["cnd_tol"])
        cnd_min = min(cnd_min, res.min_eigenvalue)
        cnd_ok &= res.passed
    rep.note("inverse_k", cr.inverse_k, mc_tag(cr.inverse_k_stderr))
    rep.note("max_ratio_deviation_sigma", cr.max_z, mc_tag(1.0))
    rep.note("slope", slope, mc_tag(slope_se))
    rep.note("cnd_min_eigenvalue", cnd_min)
    rep.passed = bool(abs(slope - 1 / p) <= c["slope_tol"] and cr.max_z <= c["sigma"] and cnd_ok)
    return rep


def run_regularity(c: dict[str, Any], raw: dict[str, str], workers: int) -> Report:
    k, a = c["k"], c["a"]
    depths = range(c["depth_min"], c["depth_max"] + 1)
    ar = conformal.ahlfors_check(k, a, depths)
    dbl = conformal.doubling_check(k, a, [0, *depths[:6]])
    rep = Report("regularity", raw, ["depth", "min_ratio", "max_ratio"], "stable C_AR and exact sandwich inclusions")
    for m, lo, hi in ar.per_depth:
        rep.add_row([m, lo, hi], EXACT)
    group = FreeGroup(k)
    vm = boundary.VisualMetric(a)
    cfg = boundary.ShadowConfig(c["R"])
    failures = 0
    D = math.nan
    for g in group.ball(c["sandwich_length"]):
        s = boundary.shadow_ball_sandwich(g, cfg, vm)
        D = s.D
        failures += not s.ok
    rep.note("Q", ar.Q)
    rep.note("C_AR", ar.C_AR)
    rep.note("stable", ar.stable)
    rep.note("doubling", dbl)
    rep.note("sandwich_D", D)
    rep.note("sandwich_failures", failures)
    rep.passed = bool(ar.stable and math.isfinite(ar.C_AR) and failures == 0)
    return rep


def run_cover(c: dict[str, Any], raw: dict[str, str], workers: int) -> Report:
    group = FreeGroup(c["k"])
    cov = conformal.greedy_separated_cover(group, c["region"], c["R"], c["v"] or None)
    nu = conformal.CylinderMeasure(c["k"])
    rep = Report("cover", raw, ["pick", "length", "shadow_mass"], "separated, covering, shell-disjoint")
    for g in cov.picks:
        rep.add_row([format_word(g), len(g), conformal.shadow_measure(g, c["R"], nu)], EXACT)
    chain = conformal.chain_inequality(0, c["p"], c["a"], cov, group)
    rep.note("v", cov.v)
    rep.note("separated", cov.separated)
    rep.note("covers", cov.covers)
    rep.note("shells_disjoint", cov.shells_disjoint)
    rep.note("chain_lhs", chain.lhs)
    rep.note("chain_rhs", chain.rhs)
    rep.note("chain_C2", chain.C2)
    rep.note("chain_holds", chain.holds)
    rep.passed = cov.certified
    return rep


RUNNERS = {
    "threshold": run_threshold,
    "compression": run_compression,
    "properness": run_properness,
    "embed-tree": run_embed_tree,
    "walls": run_walls,
    "regularity": run_regularity,
    "cover": run_cover,
}


def run(experiment: str, raw: dict[str, str], workers: int = 1) -> Report:
    """Validate the merged config and run one experiment."""
    if experiment not in RUNNERS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    parsed = parse_config(experiment, raw)
    try:
        return RUNNERS[experiment](parsed, raw, workers)
    except ValueError as exc:
        # precondition failures of the numerical layer mean a bad config
        raise ConfigError(f"{experiment}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypembed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, schema in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="key = value file")
        sp.add_argument("--seed", help="random seed (overrides config)")
        sp.add_argument("--workers", type=int, default=1, help="parallel workers; does not change results")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=["rows", "summary"], default="summary")
        sp.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a field: " + ", ".join(f"{k} (default {p.default})" for k, p in schema.items()),
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value.strip()
        if args.seed is not None:
            overrides["seed"] = args.seed
        raw = merge_config(args.experiment, file_values, overrides)
        report = run(args.experiment, raw, args.workers)
    except (ConfigError, OSError) as exc:
        print(f"hypembed: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceCapError as exc:
        print(f"hypembed: aborted: {exc}", file=sys.stderr)
        return EXIT_CAP
    text = emit(report, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
