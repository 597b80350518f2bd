"""Command-line runner: ``bhlab <experiment> --config cfg.json --out dir``.

Exit codes: 0 success, 2 invalid config, 3 budget exceeded, 4 a checked
invariant failed (including golden-file mismatches).
"""

from __future__ import annotations

import argparse
import csv
import json
import shutil
import subprocess
import sys
import tempfile
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__
from .archimedean import bh_integral, cones_to_box_experiment, epsilon_cutting, write_report_csv
from .enumeration import DEFAULT_BUDGET, Patch, Region, count_primes
from .errors import BhlabError, BudgetExceededError, ConfigError, InvariantError
from .localdensity import check_local_equidistribution, count_mod, singular_series, write_factors_csv
from .oracles import bootstrap, fixture_root, golden_check
from .siegel import class_number_asymptotic, class_number_bruteforce, mass_bruteforce, siegel_mass
from .sieve import remainder_experiment, rough_count, small_prime_contribution, write_remainder_csv
from .spaces import MatrixSpace

EXPERIMENTS = (
    "count", "predict", "compare", "density", "series", "equidist", "sieve",
    "mass", "classnumber", "cutting", "pipeline",
)
EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_INVARIANT = 0, 2, 3, 4

DEFAULTS = {"seed": 0, "samples": 10**6, "threads": None, "budget": DEFAULT_BUDGET, "params": {}}


def _schema() -> dict:
    text = resources.files("bhlab").joinpath("schema/experiment.v1.json").read_text()
    return json.loads(text)


def validate(config: dict) -> None:
    try:
        jsonschema.validate(config, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    if config["experiment"] == "pipeline":
        for step in config["steps"]:
            step = dict(step)
            step.setdefault("version", config["version"])
            if step.get("experiment") == "pipeline":
                raise ConfigError("pipelines do not nest")
            validate(step)


def resolve(config: dict, overrides: dict) -> dict:
    """Defaults, then the file, then command-line flags."""
    out = {**DEFAULTS, **config}
    out["params"] = dict(out.get("params") or {})
    for k, v in overrides.items():
        if v is not None:
            out[k] = v
    return out


def _region(cfg) -> Region:
    spec = cfg.get("region") or {"kind": "box", "T": (cfg.get("T_list") or [10])[0]}
    mode = spec.get("sign_mode", "positive_prime")
    if spec["kind"] == "box":
        return Region.box(spec["T"], mode)
    patch = Patch(**(spec.get("patch") or {}))
    return Region.cone(patch, spec["T"], mode)


def _need(params: dict, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConfigError(f"params missing {', '.join(missing)}")
    return [params[k] for k in keys]


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _git_hash() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


# ---------------------------------------------------------------- experiments


def _run_count(cfg, space, out):
    region = _region(cfg)
    prog = cfg["params"].get("progression")
    r = count_primes(space, region, tuple(prog) if prog else None, cfg["threads"], int(cfg["budget"]))
    _write_csv(out / "values.csv", ["value", "count"], sorted(r.by_value.items()))
    return {"total": r.total, "region": region.describe(), "distinct_values": len(r.by_value)}, True


def _series_value(space, cfg) -> float:
    P = cfg["params"].get("P", 1000)
    return singular_series(space, P, cfg["params"].get("brute_bound", 31), int(cfg["budget"])).truncated_product


def _T_list(cfg):
    if "T_list" in cfg:
        return cfg["T_list"]
    if "region" in cfg:
        return [cfg["region"]["T"]]
    raise ConfigError("T_list or region required")


def _run_predict(cfg, space, out):
    S = _series_value(space, cfg)
    rows = []
    for i, T in enumerate(_T_list(cfg)):
        est = bh_integral(space, Region.box(T), cfg["samples"], cfg["seed"] + i, cfg["params"].get("strata", 16))
        rows.append([T, repr(S * est.value), repr(S * est.stderr), repr(est.value)])
    _write_csv(out / "predict.csv", ["T", "predicted", "stderr", "bh_integral"], rows)
    return {"singular_series": S, "rows": len(rows)}, True


def _run_compare(cfg, space, out):
    S = _series_value(space, cfg)
    rows = []
    for i, T in enumerate(_T_list(cfg)):
        region = Region.box(T)
        emp = count_primes(space, region, None, cfg["threads"], int(cfg["budget"])).total
        est = bh_integral(space, region, cfg["samples"], cfg["seed"] + i, cfg["params"].get("strata", 16))
        pred = S * est.value
        ratio = emp / pred
        rows.append([T, emp, repr(pred), repr(ratio), repr(ratio * est.stderr / est.value)])
    _write_csv(out / "compare.csv", ["T", "empirical", "predicted", "ratio", "stderr"], rows)
    return {"singular_series": S, "ratios": [float(r[3]) for r in rows]}, True


def _run_density(cfg, space, out):
    q, k = _need(cfg["params"], "q", "k")
    m = cfg["params"].get("m", 0)
    d = count_mod(space, q, k, m, cfg["params"].get("method", "auto"))
    return d.to_json(), True


def _run_series(cfg, space, out):
    P = cfg["params"].get("P", 1000)
    s = singular_series(space, P, cfg["params"].get("brute_bound", 31), int(cfg["budget"]))
    write_factors_csv(s, out / "factors.csv")
    res = {
        "truncation": s.truncation,
        "truncated_product": s.truncated_product,
        "closed_form": s.closed_form,
        "closed_form_symbolic": s.closed_form_symbolic,
        "relative_error": s.relative_error,
    }
    return res, True


def _run_equidist(cfg, space, out):
    q, k = _need(cfg["params"], "q", "k")
    r = check_local_equidistribution(space, q, k)
    res = {"q": q, "k": k, "passed": r.passed, "counts": {str(a): c for a, c in sorted(r.counts.items())}}
    return res, r.passed


def _run_sieve(cfg, space, out):
    region = _region(cfg)
    z = cfg["params"].get("z", 5)
    vol = cfg["params"].get("volume", "cell")
    budget = int(cfg["budget"])
    res = rough_count(space, region, z, cfg["params"].get("sieve_constant", 1.0), vol, cfg["threads"], budget)
    primes = count_primes(space, region, None, cfg["threads"], budget).total
    small = small_prime_contribution(space, region, z, cfg["threads"], budget)
    rows = remainder_experiment(space, region, cfg["params"].get("d_max", 30), vol, cfg["threads"], budget)
    write_remainder_csv(rows, out / "remainders.csv")
    contained = primes <= small + res.exact_rough_count
    out_json = dict(res.to_json(), primes=primes, small_primes=small, contained=contained,
                    max_remainder_ratio=max(r.ratio for r in rows))
    return out_json, contained


def _run_mass(cfg, space, out):
    params = cfg["params"]
    if "S" in params:
        return siegel_mass(params["S"]).to_json(), True
    n, D = _need(params, "n", "D")
    genera = mass_bruteforce(n, D, int(cfg["budget"]))
    rows, ok = [], True
    for g in genera:
        siegel = None
        if n >= 3 and D % 2:
            siegel = siegel_mass(g.representative).exact
            ok &= siegel == g.mass
        rows.append(dict(g.to_json(), siegel=None if siegel is None else str(siegel)))
    total = sum((g.mass for g in genera), Fraction(0))
    return {"n": n, "D": D, "genera": rows, "total_mass": str(total)}, ok


def _run_classnumber(cfg, space, out):
    params = cfg["params"]
    n = params.get("n", 3)
    eq = params.get("equivalence", "SL")
    Ds = params.get("D_list") or [_need(params, "D")[0]]
    rows = []
    for D in Ds:
        h = class_number_bruteforce(n, D, eq)
        asym = class_number_asymptotic(n, D) if n >= 3 else float("nan")
        rows.append([D, h, repr(asym), repr(h / asym)])
    _write_csv(out / "classnumber.csv", ["D", "h", "asymptotic", "ratio"], rows)
    return {"n": n, "equivalence": eq, "h": {str(r[0]): r[1] for r in rows}}, True


def _run_cutting(cfg, space, out):
    eps = cfg["params"].get("epsilon", 0.1)
    z = cfg["params"].get("z", 5)
    T_list = _T_list(cfg)
    cut = epsilon_cutting(space, Region.box(T_list[0]), eps, cfg["samples"], cfg["seed"])
    rep = cones_to_box_experiment(space, T_list, eps, cfg["samples"], cfg["seed"], z,
                                  threads=cfg["threads"], budget=int(cfg["budget"]))
    write_report_csv(rep, out / "cutting.csv")
    frac = cut.exceptional_fraction
    ok = all(r.empirical <= r.empirical_pieces + r.exceptional_bound for r in rep.rows)
    res = {
        "epsilon": eps,
        "pieces": cut.count,
        "exceptional_fraction": frac.value,
        "exceptional_stderr": frac.stderr,
        "contained": ok,
    }
    return res, ok


_RUNNERS = {
    "count": _run_count,
    "predict": _run_predict,
    "compare": _run_compare,
    "density": _run_density,
    "series": _run_series,
    "equidist": _run_equidist,
    "sieve": _run_sieve,
    "mass": _run_mass,
    "classnumber": _run_classnumber,
    "cutting": _run_cutting,
}


def run(config: dict, out_dir, overrides: dict | None = None) -> int:
    """Validate, run and write outputs; returns the exit status."""
    validate(config)
    cfg = resolve(config, overrides or {})
    final = Path(out_dir)
    final.parent.mkdir(parents=True, exist_ok=True)
    # stage everything so a failed run leaves nothing behind
    out = Path(tempfile.mkdtemp(prefix=".bhlab-", dir=final.parent))
    try:
        status = _run_staged(cfg, out, overrides)
    except BaseException:
        shutil.rmtree(out, ignore_errors=True)
        raise
    final.mkdir(exist_ok=True)
    for item in out.iterdir():
        target = final / item.name
        if target.is_dir():
            shutil.rmtree(target)
        item.replace(target)
    out.rmdir()
    return status


def _run_staged(cfg: dict, out: Path, overrides) -> int:
    resolved = {k: v for k, v in cfg.items() if v is not None}
    (out / "config.resolved.json").write_text(json.dumps(resolved, sort_keys=True, indent=1) + "\n")
    start = time.perf_counter()
    if cfg["experiment"] == "pipeline":
        status = EXIT_OK
        for i, step in enumerate(cfg["steps"]):
            step = {"version": cfg["version"], **step}
            sub = out / f"step{i:02d}_{step['experiment']}"
            status = max(status, run(step, sub, overrides))
        result, ok = {"steps": len(cfg["steps"]), "status": status}, status == EXIT_OK
    else:
        space = MatrixSpace.from_spec(cfg["space"]) if "space" in cfg else None
        result, ok = _RUNNERS[cfg["experiment"]](cfg, space, out)
    (out / "result.json").write_text(json.dumps(result, sort_keys=True, indent=1, default=str) + "\n")
    meta = {
        "version": __version__,
        "git": _git_hash(),
        "seed": cfg["seed"],
        "threads": cfg["threads"],
        "wall_time": time.perf_counter() - start,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    (out / "metadata.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    return EXIT_OK if ok else EXIT_INVARIANT


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bhlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--budget", type=float)
    p = sub.add_parser("bootstrap-oracles", help="run brute-force oracles and freeze fixtures")
    p.add_argument("--out", default=None)
    p.add_argument("--only", nargs="*")
    p = sub.add_parser("golden-check", help="recompute fixtures and diff them")
    p.add_argument("--fixtures", default=None)
    p.add_argument("--only", nargs="*")
    p.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "bootstrap-oracles":
            root = Path(args.out) if args.out else fixture_root()
            for path in bootstrap(root, args.only):
                print(path)
            return EXIT_OK
        if args.command == "golden-check":
            root = Path(args.fixtures) if args.fixtures else fixture_root()
            summary = golden_check(root, args.only)
            for name in summary.checked:
                print(f"{'FAIL' if name in summary.failures else 'ok  '} {name}")
            for name, msg in summary.failures.items():
                if name not in summary.checked:
                    print(f"FAIL {name}: {msg}")
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "golden.json").write_text(json.dumps(summary.to_json(), indent=1) + "\n")
            return EXIT_OK if summary.passed else EXIT_INVARIANT
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        if config.get("experiment", args.command) != args.command:
            raise ConfigError(f"config is for {config.get('experiment')!r}, not {args.command!r}")
        config.setdefault("experiment", args.command)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        overrides = {"seed": args.seed, "threads": args.threads, "budget": args.budget}
        return run(config, args.out, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvariantError as exc:
        print(f"invariant failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (BhlabError, ValueError) as exc:
        # unsupported or malformed requests that passed the schema
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
