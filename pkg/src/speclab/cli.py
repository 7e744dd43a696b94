"""Command-line front end: config parsing, experiment dispatch, sweeps,
and artifact persistence (JSON + RFC-4180 CSV, atomic writes).

Exit codes: 0 success, 2 validation error, 3 numeric-contract violation,
4 resource exhaustion. SPECLAB_THREADS (or --threads) sets the sweep
fan-out; results are byte-identical across thread counts.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import cocycles as coc
from . import diophantine as dio
from . import duality as dua
from . import ehm
from . import operators as ops
from . import reducibility as red
from .errors import SpeclabError, ValidationError

COMMANDS = ("beta", "winding", "lyapunov", "ids", "rotation", "duality-check",
            "cohomology", "conjugacy", "gordon", "transition", "atlas")

_PARAM_KEYS = {
    "beta": {"alpha", "depth", "window"},
    "winding": {"lambda", "alpha", "grid"},
    "lyapunov": {"lambda", "alpha", "energy", "kind", "n_iter", "n_phases",
                 "epsilon", "dual"},
    "ids": {"lambda", "alpha", "N", "n_phases", "e_min", "e_max", "n_e",
            "dual"},
    "rotation": {"lambda", "alpha", "e_min", "e_max", "n_e", "n_iter"},
    "duality-check": {"lambda", "alpha", "N", "n_phases"},
    "cohomology": {"lambda", "alpha", "k_out", "rhs_mode"},
    "conjugacy": {"lambda", "alpha", "energy", "K_B", "grid", "n_iter",
                  "tau", "m_max", "eigenvector"},
    "gordon": {"lambda", "alpha", "theta", "energy", "level", "phi_count"},
    "transition": {"lambda", "alpha", "N", "n_phases", "thresholds", "q_cap"},
    "atlas": {"l13", "l2", "ratio"},
}


def fmt(x):
    """Floats with 17 significant digits; containers recursively."""
    if isinstance(x, float):
        return float(f"{x:.17g}")
    if isinstance(x, dict):
        return {k: fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [fmt(v) for v in x]
    return x


def parse_alpha(spec: str, depth: int = 40) -> dio.ContinuedFraction:
    s = str(spec)
    if s.startswith("beta:"):
        parts = s.split(":")[1:]
        target = float(parts[0])
        levels = int(parts[1]) if len(parts) > 1 else 4
        q2 = int(parts[2]) if len(parts) > 2 else None
        return dio.synth_alpha(target, levels, q2=q2)
    if s.startswith("quotients:"):
        quots = [int(t) for t in s.split(":", 1)[1].split(",")]
        cf = dio._from_quotients(quots, None, None, "quotients")
        from fractions import Fraction
        exact = Fraction(cf.p[-1], cf.q[-1])
        return dio.ContinuedFraction(cf.quotients, cf.p, cf.q, exact, exact,
                                     "quotients")
    return dio.expand(s, depth)


def parse_lambda(spec) -> tuple:
    if isinstance(spec, (list, tuple)):
        vals = [float(v) for v in spec]
    else:
        vals = [float(t) for t in str(spec).split(",")]
    if len(vals) != 3:
        raise ValidationError(f"lambda needs three components, got {spec!r}")
    return tuple(vals)


def _atomic_write(path: str, data: bytes) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj) -> None:
    _atomic_write(path, (json.dumps(fmt(obj), indent=1, sort_keys=True)
                         + "\n").encode())


def write_csv(path: str, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf)           # RFC-4180: CRLF, quoting as needed
    w.writerow(header)
    for row in rows:
        w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])
    _atomic_write(path, buf.getvalue().encode())


def config_hash(config: dict) -> str:
    blob = json.dumps(fmt(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# command implementations: each returns (result dict, list of extra csv files)
# ---------------------------------------------------------------------------

def _model_from(params, dio_depth=40):
    cf = parse_alpha(params.get("alpha", "golden"), dio_depth)
    lam = parse_lambda(params["lambda"])
    model = ehm.ehm_model(lam, cf)
    if params.get("dual"):
        model = ehm.ehm_model(ehm.sigma(lam), cf)
    return lam, cf, model


def _cmd_beta(params, seed, out_dir):
    cf = parse_alpha(params["alpha"], int(params.get("depth", 30)))
    window = params.get("window")
    est = dio.beta(cf, int(window) if window is not None else None)
    rows = [(n + 1, v) for n, v in enumerate(est.per_level)]
    write_csv(os.path.join(out_dir, "per_level.csv"),
              ["level", "ln_q_next_over_q"], rows)
    return {"beta": est.to_json(), "alpha": cf.to_json()}


def _cmd_winding(params, seed, out_dir):
    lam, cf, model = _model_from(params)
    from .symbols import winding, zeros_on_torus
    w = winding(model.c, int(params.get("grid", 4096)))
    zer = zeros_on_torus(model.c)
    return {"winding": w,
            "roots": [[z.real, z.imag] for z in zer.roots],
            "on_circle_phases": list(zer.torus_phases)}


def _cmd_lyapunov(params, seed, out_dir):
    lam, cf, model = _model_from(params)
    E = float(params["energy"]) if "energy" in params else \
        float(ops.spectrum_samples(model, 1, N=600, n_theta=4)[0])
    co = coc.Cocycle(model, E, kind=params.get("kind", "normalized"),
                     epsilon=float(params.get("epsilon", 0.0)))
    est = coc.lyapunov(co, int(float(params.get("n_iter", 1e5))),
                       int(params.get("n_phases", 8)), seed)
    return {"estimate": est.to_json(), "energy": E, "lambda": list(lam)}


def _cmd_ids(params, seed, out_dir):
    lam, cf, model = _model_from(params)
    hull = model.sup_bound() + 0.5
    e_min = float(params.get("e_min", -hull))
    e_max = float(params.get("e_max", hull))
    grid = np.linspace(e_min, e_max, int(params.get("n_e", 50)))
    curve = ops.ids(model, grid, int(params.get("N", 500)),
                    int(params.get("n_phases", 8)), seed)
    write_csv(os.path.join(out_dir, "ids.csv"), ["E", "N_of_E"], curve.rows())
    return {"N": curve.N, "n_phases": curve.n_phases,
            "e_range": [e_min, e_max]}


def _cmd_rotation(params, seed, out_dir):
    lam, cf, model = _model_from(params)
    hull = model.sup_bound() + 0.5
    grid = np.linspace(float(params.get("e_min", -hull)),
                       float(params.get("e_max", hull)),
                       int(params.get("n_e", 50)))
    rhos = coc.rotation_sweep(model, grid,
                              int(float(params.get("n_iter", 2e5))))
    write_csv(os.path.join(out_dir, "rotation.csv"), ["E", "rho"],
              list(zip(grid.tolist(), rhos.tolist())))
    return {"n_e": len(grid)}


def _cmd_duality_check(params, seed, out_dir):
    lam, cf, model = _model_from(params)
    ref = ehm.ehm_model(ehm.sigma(lam), cf)
    rep = dua.duality_checks(model, lam[1], ref, int(params.get("N", 500)),
                             int(params.get("n_phases", 8)), seed)
    return {"hausdorff": rep.hausdorff,
            "hausdorff_half_window": rep.hausdorff_half_window,
            "kolmogorov": rep.kolmogorov,
            "kolmogorov_half_window": rep.kolmogorov_half_window,
            "N": rep.N, "n_phases": rep.n_phases}


def _cmd_cohomology(params, seed, out_dir):
    cf = parse_alpha(params.get("alpha", "golden"))
    k_out = int(params.get("k_out", 48))
    if "rhs_mode" in params:
        k, amp = str(params["rhs_mode"]).split(":")
        from .symbols import from_dict
        rhs = from_dict({int(k): float(amp), -int(k): float(amp)})
        k_out = max(k_out, abs(int(k)))
    else:
        lam = parse_lambda(params["lambda"])
        d = ehm.ehm_model(ehm.sigma(lam), cf).c
        rhs = red.phase_rhs(d, k_out)
    sol = red.solve_cohomology(rhs, cf, k_out)
    return {"residual_sup": sol.residual_sup,
            "small_divisor_floor": sol.small_divisor_floor,
            "k_out": k_out}


def _cmd_conjugacy(params, seed, out_dir):
    lam = parse_lambda(params["lambda"])
    cf = parse_alpha(params.get("alpha", "golden"))
    model = ehm.ehm_model(ehm.sigma(lam), cf)   # subcritical dual side
    n_iter = int(float(params.get("n_iter", 4e5)))
    if "energy" in params:
        E = float(params["energy"])
    else:
        cands = ops.spectrum_samples(model, 8, N=800, n_theta=4)
        rhos = coc.rotation_sweep(model, cands, n_iter)
        tau = float(params.get("tau", 2.0))
        m_max = int(params.get("m_max", 10_000))
        gammas = [dio.dc_membership(cf, float(r), tau, m_max) for r in rhos]
        E = float(cands[int(np.argmax(gammas))])
    co = coc.Cocycle(model, E, kind="normalized")
    rho = coc.rotation_number(co, n_iter=n_iter)
    cand = red.fit_conjugacy(co, rho, int(params.get("K_B", 64)),
                             int(params.get("grid", 1024)))
    out = {"candidate": cand.to_json(), "energy": E}
    if params.get("eigenvector"):
        u, resid = red.dual_eigenvector_from_conjugacy(cand, co)
        out["eigenvector_residual"] = resid
    return out


def _cmd_gordon(params, seed, out_dir):
    lam, cf, model = _model_from(params)
    E = float(params["energy"]) if "energy" in params else \
        float(ops.spectrum_samples(model, 1, N=600, n_theta=4)[0])
    rep = ops.gordon_test(model, float(params.get("theta", 0.137)), E, cf,
                          int(params.get("level", 8)),
                          int(params.get("phi_count", 8)))
    return {"q": rep.q, "passed": rep.passed,
            "min_max_norm": rep.min_max_norm,
            "trace_log_abs": rep.trace_log_abs,
            "det_abs": rep.det_abs, "det_direct": rep.det_direct,
            "cayley_residual": rep.cayley_residual,
            "product_bound": rep.product_bound, "energy": E}


def _cmd_transition(params, seed, out_dir):
    lam = parse_lambda(params["lambda"])
    cf = parse_alpha(params.get("alpha", "golden"))
    report = ehm.transition_experiment(
        lam, cf, int(params.get("N", 2000)), seeds=(seed,),
        n_phases=int(params.get("n_phases", 32)),
        thresholds=params.get("thresholds"),
        q_cap=int(params.get("q_cap", 5000)))
    return report


def _cmd_atlas(params, seed, out_dir):
    def grid_spec(s, default):
        if s is None:
            return default
        lo, hi, n = str(s).split(":")
        return np.linspace(float(lo), float(hi), int(n)).tolist()

    rows = ehm.atlas_rows(grid_spec(params.get("l13"), [0.2, 0.5, 0.8, 1.2]),
                          grid_spec(params.get("l2"), [0.3, 0.6, 0.9, 1.5]),
                          float(params.get("ratio", 1.0)))
    write_csv(os.path.join(out_dir, "atlas.csv"),
              ["l1", "l2", "l3", "region", "singular", "L", "dual_winding"],
              [(r["l1"], r["l2"], r["l3"], r["region"], r["singular"],
                "" if r["L"] is None else r["L"],
                "" if r["dual_winding"] is None else r["dual_winding"])
               for r in rows])
    return {"rows": len(rows)}


_DISPATCH = {
    "beta": _cmd_beta, "winding": _cmd_winding, "lyapunov": _cmd_lyapunov,
    "ids": _cmd_ids, "rotation": _cmd_rotation,
    "duality-check": _cmd_duality_check, "cohomology": _cmd_cohomology,
    "conjugacy": _cmd_conjugacy, "gordon": _cmd_gordon,
    "transition": _cmd_transition, "atlas": _cmd_atlas,
}


# ---------------------------------------------------------------------------
# run / sweep drivers
# ---------------------------------------------------------------------------

def _validate(config: dict) -> dict:
    cmd = config.get("command")
    if cmd not in COMMANDS:
        raise ValidationError(f"unknown command {cmd!r}")
    params = dict(config.get("params", {}))
    unknown = set(params) - _PARAM_KEYS[cmd]
    if unknown:
        raise ValidationError(f"unknown parameter keys {sorted(unknown)}")
    return {"command": cmd, "params": params,
            "seed": int(config.get("seed", 0)),
            "out_dir": config.get("out_dir", "."),
            "threads": config.get("threads", "auto")}


def run(config: dict) -> int:
    """Execute one command; write manifest + result artifacts; exit code."""
    try:
        config = _validate(config)
    except SpeclabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    out_dir = config["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"config": config, "version": __version__,
                "config_hash": config_hash(config), "status": "ok",
                "error": None}
    code = 0
    try:
        result = _DISPATCH[config["command"]](config["params"],
                                              config["seed"], out_dir)
        write_json(os.path.join(out_dir, "result.json"), result)
    except SpeclabError as exc:
        manifest["status"] = "error"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        code = exc.exit_code
        sys.stderr.write(f"error: {manifest['error']}\n")
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return code


def _expand_axes(axes: dict) -> list:
    """Cartesian grid over {key: [values...]} in sorted-key order."""
    keys = sorted(axes)
    points = [{}]
    for k in keys:
        points = [dict(p, **{k: v}) for p in points for v in axes[k]]
    return points


def _parse_axis(spec: str) -> tuple:
    key, vals = spec.split("=", 1)
    if ":" in vals:
        lo, hi, n = vals.split(":")
        return key, np.linspace(float(lo), float(hi), int(n)).tolist()
    out = []
    for tok in vals.split(","):
        try:
            out.append(float(tok) if "." in tok or "e" in tok.lower()
                       else int(tok))
        except ValueError:
            out.append(tok)
    return key, out


def sweep(template: dict, axes: dict) -> int:
    """One sub-run per grid point with derived seeds; resumable by
    manifest hash; emits an index CSV joining parameters to artifacts."""
    try:
        template = _validate(template)
    except SpeclabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    base = template["out_dir"]
    os.makedirs(base, exist_ok=True)
    points = _expand_axes(axes)
    jobs = []
    for i, point in enumerate(points):
        cfg = {"command": template["command"],
               "params": dict(template["params"], **point),
               "seed": template["seed"] + i,
               "out_dir": os.path.join(base, f"point_{i:04d}"),
               "threads": 1}
        jobs.append((i, point, cfg))

    def should_skip(cfg):
        path = os.path.join(cfg["out_dir"], "manifest.json")
        if not os.path.exists(path):
            return False
        try:
            with open(path) as fh:
                m = json.load(fh)
        except (OSError, json.JSONDecodeError):
            return False
        return (m.get("config_hash") == config_hash(_validate(cfg))
                and m.get("status") == "ok")

    threads = template["threads"]
    if threads == "auto":
        threads = int(os.environ.get("SPECLAB_THREADS", "1"))
    threads = max(1, int(threads))

    results = {}

    def work(job):
        i, point, cfg = job
        if should_skip(cfg):
            return i, point, cfg, 0, True
        return i, point, cfg, run(cfg), False

    if threads == 1:
        done = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(work, jobs))

    rows = []
    codes = []
    keys = sorted(axes)
    for i, point, cfg, code, skipped in sorted(done):
        codes.append(code)
        rows.append([i] + [point[k] for k in keys] + [cfg["seed"],
                    os.path.relpath(cfg["out_dir"], base),
                    "skipped" if skipped else ("ok" if code == 0 else
                                               f"exit{code}")])
    write_csv(os.path.join(base, "index.csv"),
              ["index"] + keys + ["seed", "path", "status"], rows)
    if any(c == 3 for c in codes):
        return 3
    if all(c != 0 for c in codes) and codes:
        return max(codes)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="speclab",
        description="quasiperiodic Jacobi operator laboratory")
    p.add_argument("command", choices=COMMANDS + ("sweep",))
    p.add_argument("--config", help="JSON config file (flags override)")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", default=None)
    p.add_argument("--axis", action="append", default=[],
                   help="sweep axis key=v1,v2,... or key=lo:hi:n")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="set a command parameter")
    # common convenience flags
    p.add_argument("--alpha", default=None)
    p.add_argument("--lambda", dest="lam", default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--energy", type=float, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--n-iter", type=float, default=None)
    p.add_argument("--n-phases", type=int, default=None)
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--K-B", type=int, default=None)
    return p


def _config_from_args(args) -> tuple:
    config = {"command": None, "params": {}, "seed": 0, "out_dir": ".",
              "threads": "auto"}
    if args.config:
        with open(args.config) as fh:
            config.update(json.load(fh))
    if args.command != "sweep":
        config["command"] = args.command
    # sweeps take the template command from the config file
    for key, val in (("out_dir", args.out_dir), ("seed", args.seed),
                     ("threads", args.threads)):
        if val is not None:
            config[key] = val
    flag_params = {"alpha": args.alpha, "lambda": args.lam,
                   "depth": args.depth, "energy": args.energy, "N": args.N,
                   "n_iter": args.n_iter, "n_phases": args.n_phases,
                   "level": args.level, "K_B": args.K_B}
    for k, v in flag_params.items():
        if v is not None:
            config["params"][k] = v
    for item in args.set:
        if "=" not in item:
            raise ValidationError(f"--set needs KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            config["params"][k] = json.loads(v)
        except json.JSONDecodeError:
            config["params"][k] = v
    axes = dict(_parse_axis(a) for a in args.axis)
    return config, axes


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config, axes = _config_from_args(args)
    except SpeclabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    if args.command == "sweep":
        if not axes:
            sys.stderr.write("error: sweep needs at least one --axis\n")
            return 2
        return sweep(config, axes)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
