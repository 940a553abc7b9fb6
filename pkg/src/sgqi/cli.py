"""Batch experiment driver.

Subcommands: gridinfo (budget/cardinality audit), recover (L_q convergence
sweep), integrate (cubature convergence sweep), compare (anisotropic vs
Smolyak vs full-grid budgets at matched accuracy targets), export-rule
(cubature weights as CSV), dump-grid (level-set text dump).

Configuration comes from an INI file ([problem]/[sweep]/[output]) plus
repeatable --set section.key=value overrides; explicit flags win over both.
Runs are deterministic for a fixed config and every emitted row carries a
short hash of the resolved config.  Exit codes: 0 ok, 2 bad config, 3
numerical failure.
"""

from __future__ import annotations

import os

# honor the thread cap before numpy spins up its BLAS pools
_cap = os.environ.get("SGQI_MAX_THREADS")
if _cap and _cap.strip().isdigit():
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS",
                 "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(_var, _cap.strip())

import argparse
import configparser
import hashlib
import json
import math
import sys

import numpy as np

from . import analysis, cubature, grids, recovery


class ConfigError(Exception):
    pass


_DEFAULTS = {
    "problem": {},
    "sweep": {"seed": "7", "corpus": "poly,sinprod,kink", "offset": "false",
              "method": "auto", "resolution": "auto"},
    "output": {"format": "csv", "path": "-"},
}


def _parse_args(argv):
    ap = argparse.ArgumentParser(prog="sgqi", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("gridinfo", "recover", "integrate", "compare",
                 "export-rule", "dump-grid"):
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="INI config file")
        p.add_argument("--set", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", dest="overrides")
        p.add_argument("-o", "--output", help="output path (- for stdout)")
        p.add_argument("--format", choices=("csv", "jsonl"))
    return ap.parse_args(argv)


def _load_config(args) -> dict:
    cfg = {sec: dict(kv) for sec, kv in _DEFAULTS.items()}
    if args.config:
        parser = configparser.ConfigParser()
        read = parser.read(args.config)
        if not read:
            raise ConfigError(f"cannot read config file {args.config!r}")
        for sec in parser.sections():
            if sec not in cfg:
                raise ConfigError(f"unknown config section [{sec}]")
            cfg[sec].update(parser[sec])
    for item in args.overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not section.key=value")
        target, value = item.split("=", 1)
        sec, key = target.split(".", 1)
        if sec not in cfg:
            raise ConfigError(f"unknown config section [{sec}]")
        cfg[sec][key.strip()] = value.strip()
    if args.output:
        cfg["output"]["path"] = args.output
    if args.format:
        cfg["output"]["format"] = args.format
    return cfg


def _config_hash(cfg: dict) -> str:
    # provenance covers what was computed, not where it was written
    experiment = {sec: cfg[sec] for sec in ("problem", "sweep")}
    canon = json.dumps(experiment, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _need(cfg, sec, key):
    try:
        return cfg[sec][key]
    except KeyError:
        raise ConfigError(f"missing required config key {sec}.{key}")


def _as_float(raw, what):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{what}: not a number: {raw!r}")


def _as_int(raw, what):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{what}: not an integer: {raw!r}")


def _float_list(raw, what):
    return tuple(_as_float(tok, what) for tok in raw.split(",") if tok.strip())


def _spec_from_config(cfg) -> tuple:
    prob = cfg["problem"]
    family = _need(cfg, "problem", "family")
    if family not in ("mixed", "hybrid", "energy"):
        raise ConfigError(f"unknown family {family!r}")
    d = _as_int(_need(cfg, "problem", "d"), "problem.d")
    r = _as_int(_need(cfg, "problem", "r"), "problem.r")
    p = _as_float(_need(cfg, "problem", "p"), "problem.p")
    theta = _as_float(_need(cfg, "problem", "theta"), "problem.theta")
    q = _as_float(_need(cfg, "problem", "q"), "problem.q")
    eps = prob.get("epsilon")
    eps = None if eps in (None, "", "auto") else _as_float(eps, "epsilon")
    kw = dict(d=d, r=r, p=p, theta=theta, q=q, epsilon=eps)
    if family == "mixed":
        a = _float_list(_need(cfg, "problem", "a"), "problem.a")
        if len(a) != d:
            raise ConfigError("problem.a length must equal problem.d")
        spec = grids.SmoothnessSpec(kind="mixed", a=a, **kw)
    else:
        alpha = _as_float(_need(cfg, "problem", "alpha"), "problem.alpha")
        beta = _as_float(prob.get("beta", "0"), "problem.beta")
        gamma = prob.get("gamma")
        gamma = None if gamma in (None, "") else _as_float(gamma, "gamma")
        if family == "energy" and gamma is None:
            raise ConfigError("energy family needs problem.gamma")
        spec = grids.SmoothnessSpec(kind="hybrid", alpha=alpha, beta=beta,
                                    gamma=gamma, **kw)
    tau = _as_float(prob.get("tau", prob.get("q", "2")), "problem.tau")
    try:
        spec.validate(strict=False)
    except ValueError as e:
        raise ConfigError(str(e))
    return spec, family, tau


def _delta_factory(spec, family, tau):
    if family == "mixed":
        make = lambda xi: grids.delta_mixed(xi, spec)
    elif family == "hybrid":
        make = lambda xi: grids.delta_hybrid(xi, spec)
    else:
        flag = grids.theta_le_taustar(spec.theta, tau)
        make = lambda xi: grids.delta_energy(xi, spec, flag)
    try:
        make(0.0)  # surface epsilon/monotonicity problems as config errors
    except ValueError as e:
        raise ConfigError(str(e))
    return make


def _budget_sweep(cfg, make_delta):
    budgets = [_as_int(tok, "sweep.budgets") for tok in
               _need(cfg, "sweep", "budgets").split(",") if tok.strip()]
    if not budgets or any(b <= 0 for b in budgets):
        raise ConfigError("sweep.budgets must be positive integers")
    out = []
    for n in budgets:
        xi = grids.xi_for_budget(n, make_delta)
        out.append((n, xi, make_delta(xi)))
    return out


def _corpus_selection(cfg, spec):
    funcs = analysis.corpus(spec.d, spec.r, spec)
    wanted = [tok.strip() for tok in cfg["sweep"]["corpus"].split(",")
              if tok.strip()]
    by_label = {tf.label: tf for tf in funcs}
    sel = []
    for label in wanted:
        if label not in by_label:
            raise ConfigError(f"unknown corpus function {label!r}")
        sel.append(by_label[label])
    return sel


def _error_kwargs(cfg, spec):
    sw = cfg["sweep"]
    q_raw = sw.get("lq", "") or str(spec.q)
    q_norm = math.inf if q_raw.strip() in ("inf", "Inf") else \
        _as_float(q_raw, "sweep.lq")
    res = sw["resolution"]
    if res.strip() == "auto":
        resolution = None
    else:
        vals = [_as_int(tok, "sweep.resolution") for tok in res.split(",")
                if tok.strip()]
        resolution = vals[0] if len(vals) == 1 else tuple(vals)
    method = sw["method"].strip()
    method = None if method == "auto" else method
    points = sw.get("points")
    points = None if points in (None, "", "auto") else \
        _as_int(points, "sweep.points")
    offset = sw.get("offset", "false").strip().lower() in ("1", "true", "yes")
    seed = _as_int(sw.get("seed", "7"), "sweep.seed")
    return dict(q_norm=q_norm, resolution=resolution, offset=offset,
                method=method, points=points, seed=seed)


# ---------------------------------------------------------------------------
# commands (each returns header, rows, dat-file map)

def cmd_gridinfo(cfg):
    spec, family, tau = _spec_from_config(cfg)
    make_delta = _delta_factory(spec, family, tau)
    nu = grids.nu_exponent(spec, family)
    h = _config_hash(cfg)
    rows = []
    for n, xi, delta in _budget_sweep(cfg, make_delta):
        scale = 2.0 ** (-xi / nu)
        rows.append([delta.family, spec.d, spec.r, n, xi, len(delta),
                     delta.budget(), delta.distinct_points(),
                     delta.budget() * scale, delta.distinct_points() * scale,
                     h])
    header = ["family", "d", "r", "n_target", "xi", "n_levels", "n_declared",
              "n_distinct", "ratio_declared", "ratio_distinct", "config_hash"]
    return header, rows, {}


def _sweep_command(cfg, integrate: bool):
    spec, family, tau = _spec_from_config(cfg)
    make_delta = _delta_factory(spec, family, tau)
    nu = grids.nu_exponent(spec, family, integration=integrate)
    predicted = -nu
    h = _config_hash(cfg)
    sweep = _budget_sweep(cfg, make_delta)
    funcs = _corpus_selection(cfg, spec)
    ekw = _error_kwargs(cfg, spec)
    rows = []
    dats = {}
    rules = {}
    if integrate:
        for n, xi, delta in sweep:
            rules[xi] = cubature.assemble_weights(delta, spec.r)
    for tf in funcs:
        pts = []
        for n, xi, delta in sweep:
            if integrate:
                approx = cubature.apply_rule(rules[xi], tf.handle)
                err = abs(approx - tf.exact_integral)
                n_samples = delta.distinct_points()
            else:
                rec = recovery.build(tf.handle, delta, spec.r)
                err = analysis.discrete_lq_error(tf.handle, rec, **ekw)
                n_samples = rec.sample_budget
            pts.append((n_samples, err))
            slope = ""
            ns = [m for m, _ in pts]
            # running fit needs enough points, positive errors, and no
            # plateau (nearby targets can resolve to the same grid)
            if (len(pts) >= 4 and all(e > 0 for _, e in pts)
                    and all(u < v for u, v in zip(ns, ns[1:]))):
                slope = analysis.fit_rate(pts).slope
            rows.append([delta.family, tf.label, n, xi, delta.budget(),
                         n_samples, err, slope, predicted, h])
        dats[tf.label] = pts
    header = ["family", "label", "n_target", "xi", "n_declared", "n_distinct",
              "error", "slope_so_far", "predicted_slope", "config_hash"]
    return header, rows, dats


def cmd_recover(cfg):
    return _sweep_command(cfg, integrate=False)


def cmd_integrate(cfg):
    return _sweep_command(cfg, integrate=True)


def cmd_compare(cfg):
    spec, family, tau = _spec_from_config(cfg)
    make_delta = _delta_factory(spec, family, tau)
    nu = grids.nu_exponent(spec, family)
    h = _config_hash(cfg)
    xis = _float_list(_need(cfg, "sweep", "xi"), "sweep.xi")
    rows = []
    for xi in xis:
        aniso = make_delta(xi)
        smol = grids.comparison_sets(xi, nu, "smolyak", spec.d)
        full = grids.comparison_sets(xi, nu, "fullgrid", spec.d)
        if not (aniso.issubset(smol) and smol.issubset(full)):
            raise ValueError("comparison sets failed the containment check")
        na, ns, nf = aniso.budget(), smol.budget(), full.budget()
        rows.append([aniso.family, spec.d, spec.r, xi, na, ns, nf,
                     ns / na, nf / na, h])
    header = ["family", "d", "r", "xi", "n_aniso", "n_smolyak", "n_fullgrid",
              "ratio_smolyak", "ratio_fullgrid", "config_hash"]
    return header, rows, {}


def _single_xi(cfg, make_delta):
    sw = cfg["sweep"]
    if sw.get("xi"):
        return _as_float(sw["xi"], "sweep.xi")
    if sw.get("budgets"):
        n = _as_int(sw["budgets"].split(",")[0], "sweep.budgets")
        return grids.xi_for_budget(n, make_delta)
    raise ConfigError("need sweep.xi or sweep.budgets")


def cmd_export_rule(cfg, out_fh):
    spec, family, tau = _spec_from_config(cfg)
    make_delta = _delta_factory(spec, family, tau)
    xi = _single_xi(cfg, make_delta)
    rule = cubature.assemble_weights(make_delta(xi), spec.r)
    cubature.export_csv(rule, out_fh)


def cmd_dump_grid(cfg, out_fh):
    prob = cfg["problem"]
    family = _need(cfg, "problem", "family")
    if family in ("fullgrid", "smolyak"):
        d = _as_int(_need(cfg, "problem", "d"), "problem.d")
        lam = _as_float(prob.get("lam", "1"), "problem.lam")
        xi = _as_float(_need(cfg, "sweep", "xi"), "sweep.xi")
        delta = grids.comparison_sets(xi, lam, family, d)
    else:
        spec, family, tau = _spec_from_config(cfg)
        make_delta = _delta_factory(spec, family, tau)
        delta = make_delta(_single_xi(cfg, make_delta))
    out_fh.write(delta.to_text())


# ---------------------------------------------------------------------------
# output plumbing

def _format_cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit(cfg, header, rows, dats):
    fmt = cfg["output"]["format"]
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"unknown output format {fmt!r}")
    if fmt == "csv":
        lines = [",".join(header)]
        lines += [",".join(_format_cell(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        out = []
        for row in rows:
            obj = dict(zip(header, row))
            out.append(json.dumps(obj, sort_keys=True))
        text = "\n".join(out) + "\n"
    path = cfg["output"]["path"]
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    dat_dir = cfg["output"].get("dat_dir")
    if dat_dir:
        os.makedirs(dat_dir, exist_ok=True)
        for label, pts in dats.items():
            fname = os.path.join(dat_dir, f"{label}.dat")
            with open(fname, "w", newline="") as fh:
                for n, e in pts:
                    fh.write(f"{n} {repr(float(e))}\n")


_TABLE_COMMANDS = {
    "gridinfo": cmd_gridinfo,
    "recover": cmd_recover,
    "integrate": cmd_integrate,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        if args.command in _TABLE_COMMANDS:
            header, rows, dats = _TABLE_COMMANDS[args.command](cfg)
            _emit(cfg, header, rows, dats)
        else:
            path = cfg["output"]["path"]
            run = cmd_export_rule if args.command == "export-rule" \
                else cmd_dump_grid
            if path == "-":
                run(cfg, sys.stdout)
            else:
                with open(path, "w", newline="") as fh:
                    run(cfg, fh)
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
