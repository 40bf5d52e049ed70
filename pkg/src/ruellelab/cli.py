"""Command-line experiment runner.

Every experiment writes tidy CSV tables (one coordinate column, then
``quantity, value, ci``), a ``summary.json`` with scalars and fits, and a
``manifest.json``.  Exit status 2 signals a configuration or definition
error, 3 a numerical guard; both leave an ``error.json`` behind.
"""

import argparse
import csv
import json
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, config, fixtures
from ._backend import BACKEND
from .dynamics import as_word, periodic_word
from .errors import ConfigError, NumericalGuardError, SystemDefinitionError
from .fitting import geometric_fit
from .transfer import DEFAULT_N

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class Artifacts:
    """Collects tables and scalars before they are written in one go."""

    def __init__(self):
        self.tables = {}
        self.summary = {}

    def table(self, name, coord):
        t = self.tables.setdefault(name, {"coord": coord, "rows": []})
        if t["coord"] != coord:
            raise ValueError(f"table {name} already uses coordinate {t['coord']}")
        return t["rows"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _clean(obj):
    """Convert numpy scalars and arrays to JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_artifacts(out_dir, art):
    out_dir = Path(out_dir)
    files = []
    for name, t in sorted(art.tables.items()):
        path = out_dir / f"{name}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([t["coord"], "quantity", "value", "ci"])
            for row in t["rows"]:
                coord, q, v = row[:3]
                ci = row[3] if len(row) > 3 else None
                w.writerow([_fmt(coord), q, _fmt(v), _fmt(ci)])
        files.append(path.name)
    write_json(out_dir / "summary.json", art.summary)
    files.append("summary.json")
    return files


def _fit(fit):
    if fit is None:
        return None
    return {"rate": fit.rate, "r2": fit.r2}


def _word(spec, sys_k, what):
    try:
        w = as_word(spec)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None
    if any(c > sys_k for c in w):
        raise ConfigError(f"{what} uses letters beyond the alphabet size {sys_k}")
    return w


def _pattern(spec, sys_k, n, what):
    w = _word(spec, sys_k, what)
    if len(w) == 0:
        raise ConfigError(f"{what} must be nonempty")
    return periodic_word(w, n)


def _range(spec):
    lo, hi = int(spec[0]), int(spec[1])
    if lo < 1 or hi < lo:
        raise ConfigError(f"bad range {spec}")
    return range(lo, hi + 1)


# -- experiments ---------------------------------------------------------------

def run_quenched_measure(doc, obj, art):
    from .grid import circle_nodes
    from .measures import quenched_conformal
    sys_, p = obj["system"], doc["parameters"]
    N, scheme = doc["grid_n"], doc["scheme"]
    depth = int(p["depth"])
    u = _word(p["u"], sys_.k, "u")
    omega = _pattern(p["omega"], sys_.k, depth, "omega")
    gaps = art.table("gaps", "n")
    values = []
    qm = None
    for l in range(1, depth + 1):
        qm = quenched_conformal(sys_, u, omega, l=l, N=N, scheme=scheme, gap=True)
        gaps.append((l, "gap", qm.gap))
        values.append(qm.gap)
    rows = art.table("measure", "x")
    for x, m in zip(circle_nodes(N), qm.measure):
        rows.append((x, "mass", m))
    try:
        fit = geometric_fit(np.arange(1, depth + 1), np.array(values), 1e-14)
    except NumericalGuardError:
        fit = None
    art.summary.update(depth=depth, u=str(u), omega=str(omega), total_mass=qm.measure.sum(),
                       last_gap=qm.gap, gap_fit=_fit(fit))


def run_contraction_rate(doc, obj, art):
    from .measures import contraction_rate
    sys_, p = obj["system"], doc["parameters"]
    rng = np.random.default_rng(doc["seed"])
    rows = art.table("contraction", "n")
    for kind in p["kinds"]:
        if kind not in ("measure", "function"):
            raise ConfigError(f"unknown contraction kind {kind!r}")
        cf = contraction_rate(sys_, int(p["trials"]), _range(p["lengths"]), rng, kind,
                              doc["grid_n"], int(p["span"]))
        for n, r in zip(cf.lengths, cf.worst):
            rows.append((n, f"worst_ratio_{kind}", r))
        art.summary[kind] = {"k0_hat": cf.k0_hat, "s_hat": cf.s_hat, "r2": cf.r2,
                             "fit_lengths": cf.fit_lengths}


def run_eigen_cocycle(doc, obj, art):
    from .measures import eigen_data
    sys_, p = obj["system"], doc["parameters"]
    N, scheme, depth = doc["grid_n"], doc["scheme"], int(p["depth"])
    rows = art.table("cocycle", "word")
    worst = 0.0
    for pair in p["pairs"]:
        u = _word(pair[0], sys_.k, "u")
        v = _word(pair[1], sys_.k, "v")
        omega = _pattern(p["omega"], sys_.k, depth + len(v), "omega")
        e_uv = eigen_data(sys_, u + v, omega, depth, N, scheme)
        e_u = eigen_data(sys_, u, v + omega, depth, N, scheme)
        e_v = eigen_data(sys_, v, omega, depth, N, scheme)
        defect = abs(e_uv.log_lam - e_u.log_lam - e_v.log_lam)
        key = f"{u}|{v}"
        rows.append((key, "log_lambda_uv", e_uv.log_lam))
        rows.append((key, "log_lambda_u_shifted", e_u.log_lam))
        rows.append((key, "log_lambda_v", e_v.log_lam))
        rows.append((key, "log_cocycle_defect", defect))
        rows.append((key, "h_integral", float(e_uv.mu_omega @ e_uv.h)))
        worst = max(worst, defect)
    art.summary.update(max_log_cocycle_defect=worst, depth=depth)


def _analytic_beta(sys_, env):
    if not sys_.has_constant_potentials():
        return None
    m = np.array([T.branches * np.exp(float(pot(np.zeros(1))[0]))
                  for T, pot in zip(sys_.maps, sys_.potentials)])
    return float(np.max(np.abs(np.linalg.eigvals(m[:, None] * env.transition))))


def run_annealed_spectrum(doc, obj, art):
    from .annealed import annealed_convergence, iota_spectrum
    sys_, env, p = obj["system"], obj["environment"], doc["parameters"]
    N, scheme = doc["grid_n"], doc["scheme"]
    f = config.observable(p["f"])
    spectral = iota_spectrum(sys_, env, int(p["depth"]), N=N, scheme=scheme)
    rep = annealed_convergence(sys_, env, f, _range(p["n_range"]), spectral=spectral,
                               N=N, scheme=scheme)
    rows = art.table("convergence", "n")
    for n, e, r in zip(rep.n, rep.errors, rep.ratio_errors):
        rows.append((n, "error", e))
        rows.append((n, "ratio_error", r))
    art.summary.update(beta_hat=rep.beta_hat, beta_iota=rep.beta_iota, pi_f=rep.pi_f,
                       pi_f_iota=rep.pi_f_iota, n_ref=rep.n_ref, fit=_fit(rep.fit),
                       depth_gap=spectral.depth_gap, beta_analytic=_analytic_beta(sys_, env),
                       markov=not env.is_bernoulli)


def run_annealed_decay(doc, obj, art):
    from .annealed import annealed_decay
    sys_, env, p = obj["system"], obj["environment"], doc["parameters"]
    rep = annealed_decay(sys_, env, config.observable(p["f"]), config.observable(p["g"]),
                         _range(p["n_range"]), int(p["samples"]), doc["seed"],
                         l=int(p["depth"]), N=doc["grid_n"], scheme=doc["scheme"],
                         threads=int(doc["threads"]))
    rows = art.table("decay", "n")
    for n, d, c in zip(rep.n, rep.discrepancy, rep.ci):
        rows.append((n, "discrepancy", d, c))
    art.summary.update(pi_tilde_f=rep.pi_tilde_f, pi_tilde_ci=rep.pi_tilde_ci,
                       mean_g=rep.mean_g, fit=_fit(rep.fit), significant=rep.significant,
                       samples=int(p["samples"]))


def run_equidistribution(doc, obj, art):
    from .annealed import equidistribution
    sys_, env, p = obj["system"], obj["environment"], doc["parameters"]
    rep = equidistribution(sys_, env, tuple(p["points"]), _range(p["n_range"]),
                           doc["grid_n"], doc["scheme"])
    rows = art.table("equidistribution", "n")
    for i, n in enumerate(rep.n):
        rows.append((n, "distance", rep.distance[i]))
        rows.append((n, "pressure", rep.pressure[i]))
        if rep.limit_distance is not None:
            rows.append((n, "limit_distance", rep.limit_distance[i]))
    art.summary.update(fit=_fit(rep.fit), final_pressure=rep.pressure[-1],
                       beta_analytic=_analytic_beta(sys_, env))


def run_asip(doc, obj, art):
    from .stats import build_decomposition, quenched_clt_check, variance_growth
    sys_, p = obj["system"], doc["parameters"]
    n, depth = int(p["n"]), int(p["depth"])
    omega = _pattern(p["omega"], sys_.k, n + depth, "omega")
    f = config.observable(p["f"])
    dec = build_decomposition(sys_, omega, f, n, depth, doc["grid_n"], doc["scheme"])
    clt_seed, orbit_seed = np.random.SeedSequence(doc["seed"]).spawn(2)
    clt = quenched_clt_check(sys_, omega, f, n, int(p["samples"]), np.random.default_rng(clt_seed),
                             dec=dec)
    rows = art.table("decomposition", "n")
    for k in range(n + 1):
        rows.append((k, "s_sq", dec.s_sq[k]))
        rows.append((k, "sigma_sq", dec.sigma_sq[k]))
        rows.append((k, "h_sup", dec.h_sup[k]))
        rows.append((k, "mean_f", dec.means[k]))
    orbit = dec.sample_orbits(sys_, n, 200, np.random.default_rng(orbit_seed))
    vg = variance_growth(dec, min(10, n - 3))
    art.summary.update(
        clt={"status": clt.status, "ks_distance": clt.ks_distance, "ks_pvalue": clt.ks_pvalue,
             "variance_ratio": clt.variance_ratio, "s_n_sq": clt.s_n_sq},
        telescoping_error=dec.telescoping_error(orbit, n), h_sup_max=dec.h_sup.max(),
        variance_growth={"gamma": vg.gamma, "r2": vg.r2, "partial_sum_s_minus4": vg.partial_sum,
                         "summable_hint": vg.summable_hint, "sigma_minus_s": vg.sigma_minus_s})


def run_ncifs_pressure(doc, obj, art):
    from .ncifs import NCIFS_N, affine_pressure, annealed_pressure
    ifs, p = obj["ifs"], doc["parameters"]
    lo, hi, count = p["deltas"]
    deltas = np.linspace(float(lo), float(hi), int(count))
    N = doc.get("grid_n_explicit") or NCIFS_N
    n_range = _range(p["n_range"])

    def cell(d):
        return annealed_pressure(ifs, d, n_range, N, doc["scheme"])

    with ThreadPoolExecutor(max_workers=int(doc["threads"])) as pool:
        est = list(pool.map(cell, deltas))
    rows = art.table("pressure", "delta")
    values = np.array([e.value for e in est])
    for d, e in zip(deltas, est):
        rows.append((d, "pressure", e.value))
        rows.append((d, "fit_slope", e.fit_slope))
        rows.append((d, "slope_change", e.slope_change))
        if ifs.is_affine:
            rows.append((d, "closed_form", affine_pressure(ifs, d)))
    dd, dp = np.diff(deltas), np.diff(values)
    lower = -np.log(ifs.eta_minus) * dd
    upper = -np.log(ifs.eta_plus) * dd
    art.summary.update(
        strictly_decreasing=bool(np.all(dp < 0)),
        lipschitz_ok=bool(np.all((-dp <= lower + 1e-9) & (-dp >= upper - 1e-9))),
        eta_minus=ifs.eta_minus, eta_plus=ifs.eta_plus)


def run_bowen_root(doc, obj, art):
    from scipy.optimize import brentq

    from .ncifs import NCIFS_N, affine_pressure, annealed_pressure, bowen_root
    ifs, p = obj["ifs"], doc["parameters"]
    N = doc.get("grid_n_explicit") or NCIFS_N

    def pressure(d):
        return annealed_pressure(ifs, d, N=N, scheme=doc["scheme"]).value

    root = bowen_root(ifs, float(p["tol"]), pressure=pressure)
    art.summary.update(delta0=root.delta0, bracket=list(root.bracket), iterations=root.iterations)
    if ifs.is_affine:
        hi = 1.0
        while affine_pressure(ifs, hi) > 0:
            hi *= 2
        art.summary["delta0_scalar"] = brentq(lambda d: affine_pressure(ifs, d), 0.0, hi,
                                              xtol=1e-14)


def run_boundary_probe(doc, obj, art):
    from .boundary import EquilibriumCache, cauchy_probe, holder_regression, nested_words
    sys_, p = obj["system"], doc["parameters"]
    cache = EquilibriumCache(sys_, int(p["depth"]), doc["grid_n"], doc["scheme"])
    words = nested_words(_word(p["core"], sys_.k, "core"), _word(p["left"], sys_.k, "left"),
                         _word(p["right"], sys_.k, "right"), int(p["n_max"]))
    rep = cauchy_probe(sys_, words, cache)
    rows = art.table("cauchy", "n")
    for i, (g, wg) in enumerate(zip(rep.gaps, rep.wbar_gaps)):
        rows.append((i, "d_G_gap", g))
        rows.append((i, "wbar_gap", wg))
    hf = holder_regression(sys_, int(p["pairs"]), int(p["max_shared"]), rng=doc["seed"],
                           cache=cache)
    rows = art.table("holder", "word_distance")
    for d, w in zip(hf.word_distance, hf.wbar):
        rows.append((d, "wbar", w))
    art.summary.update(cauchy={"rate": rep.rate, "r2": rep.r2, "is_cauchy": rep.is_cauchy,
                               "offending": rep.offending, "words": [str(w) for w in words]},
                       holder={"exponent": hf.exponent, "r2": hf.r2})


RUNNERS = {
    "quenched-measure": run_quenched_measure,
    "contraction-rate": run_contraction_rate,
    "eigen-cocycle": run_eigen_cocycle,
    "annealed-spectrum": run_annealed_spectrum,
    "annealed-decay": run_annealed_decay,
    "equidistribution": run_equidistribution,
    "asip": run_asip,
    "ncifs-pressure": run_ncifs_pressure,
    "bowen-root": run_bowen_root,
    "boundary-probe": run_boundary_probe,
}


# -- driver --------------------------------------------------------------------

def _error(out_dir, kind, exc, experiment):
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "error.json", {"error": kind, "type": type(exc).__name__,
                                        "message": str(exc), "experiment": experiment})
    print(f"ruellelab: {kind}: {exc}", file=sys.stderr)


def run(experiment, config_path=None, seed=None, out_dir=None, threads=None, grid_n=None):
    """Run one experiment; returns the exit status."""
    out = Path(out_dir) if out_dir else None
    try:
        doc = config.load(config_path) if config_path else {}
        if experiment is None:
            experiment = doc.get("experiment")
            if experiment is None:
                raise ConfigError("no experiment given on the command line or in the config")
        if out is None:
            out = Path(doc.get("output", {}).get("dir", f"ruellelab-out/{experiment}"))
        resolved = config.resolve(doc, experiment, seed, grid_n, threads)
        if "grid_n" in resolved:
            resolved["grid_n_explicit"] = resolved["grid_n"]
        resolved.setdefault("grid_n", DEFAULT_N)
        obj = config.objects(resolved)
    except (ConfigError, SystemDefinitionError) as exc:
        _error(out or Path("ruellelab-out"), "config", exc, experiment)
        return EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)
    art = Artifacts()
    t0 = time.perf_counter()
    try:
        RUNNERS[experiment](resolved, obj, art)
    except ConfigError as exc:
        _error(out, "config", exc, experiment)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        _error(out, "numerical-guard", exc, experiment)
        return EXIT_NUMERICAL
    wall = time.perf_counter() - t0
    files = write_artifacts(out, art)
    public = {k: v for k, v in resolved.items() if k != "grid_n_explicit"}
    write_json(out / "manifest.json", {
        "experiment": experiment, "config": public, "config_hash": config.config_hash(public),
        "version": __version__, "backend": BACKEND, "wall_time_s": wall,
        "python": platform.python_version(), "numpy": np.__version__, "artifacts": files,
    })
    return 0


def list_fixtures():
    """Catalog lines ``name: reference [kind, source]``."""
    return [f"{f.line()}  [{f.kind}, {f.source}]" for f in fixtures.CATALOG.values()]


def build_parser():
    parser = argparse.ArgumentParser(prog="ruellelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML experiment configuration")
        sp.add_argument("--seed", type=int, help="seed for Monte Carlo experiments")
        sp.add_argument("--out-dir", help="directory for CSV/JSON artifacts")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("--grid-n", type=int, help="grid size N")

    common(sub.add_parser("run", help="run the experiment named in --config"))
    for name in config.EXPERIMENTS:
        common(sub.add_parser(name, help=f"run the {name} experiment"))
    sub.add_parser("list-fixtures", help="print the built-in fixtures")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list-fixtures":
        for line in list_fixtures():
            print(line)
        return 0
    experiment = None if args.command == "run" else args.command
    return run(experiment, args.config, args.seed, args.out_dir, args.threads, args.grid_n)


if __name__ == "__main__":
    sys.exit(main())
