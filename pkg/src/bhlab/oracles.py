"""Frozen oracle values: generation (bootstrap) and exact re-checking.

Every fixture is a JSON file holding the inputs, the expected output and a
tolerance.  A null tolerance means the canonical JSON of the recomputed
output must equal the stored one byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .archimedean import bh_integral
from .enumeration import Region, count_primes, value_counts
from .localdensity import count_mod, local_factor_formula, residue_counts
from .siegel import alpha_p_bruteforce, class_number_bruteforce, mass_bruteforce, siegel_mass
from .sieve import rough_count, small_prime_contribution
from .spaces import MatrixSpace

__all__ = ["FIXTURES", "GoldenSummary", "fixture_root", "compute", "bootstrap", "golden_check", "canonical"]


def _space(spec) -> MatrixSpace:
    return MatrixSpace.from_spec(spec)


def _count_primes(inp):
    r = count_primes(_space(inp["space"]), Region.box(inp["T"], inp["sign_mode"]))
    return {"total": r.total, "by_value": {str(k): v for k, v in sorted(r.by_value.items())}}


def _histogram(inp):
    values, counts = value_counts(_space(inp["space"]), Region.box(inp["T"]))
    return {"by_value": {str(int(v)): int(c) for v, c in zip(values, counts)}}


def _sieve(inp):
    space = _space(inp["space"])
    box = Region.box(inp["T"])
    res = rough_count(space, box, inp["z"])
    return {
        "primes": count_primes(space, box).total,
        "small_primes": small_prime_contribution(space, box, inp["z"]),
        "rough": res.exact_rough_count,
    }


def _count_mod(inp):
    d = count_mod(_space(inp["space"]), inp["q"], inp["k"], inp["m"])
    return {"raw_count": d.raw_count, "normalized": str(d.normalized)}


def _local_factors(inp):
    space = _space(inp["space"])
    dim = space.ambient_dim
    out = {}
    for p in inp["primes"]:
        zeros = int(residue_counts(space, p)[0])
        brute = (1 - Fraction(zeros, p**dim)) / (1 - Fraction(1, p))
        if brute != local_factor_formula(space, p):
            raise AssertionError(f"local factor at {p} disagrees with the closed form")
        out[str(p)] = str(brute)
    return out


def _mass(inp):
    return {
        "genera": [
            {"classes": [list(map(list, c)) for c in g.classes], "mass": str(g.mass)}
            for g in mass_bruteforce(inp["n"], inp["D"])
        ]
    }


def _class_number(inp):
    return {"h": class_number_bruteforce(inp["n"], inp["D"], inp["equivalence"])}


def _alpha(inp):
    r = alpha_p_bruteforce(inp["S"], inp["p"], inp["k"])
    return {"count": r.count, "value": str(r.value)}


def _siegel(inp):
    m = siegel_mass(inp["S"])
    return {"mass": m.mass, "exact": None if m.exact is None else str(m.exact)}


def _bh(inp):
    est = bh_integral(_space(inp["space"]), Region.box(inp["T"]), inp["samples"], inp["seed"])
    return {"value": est.value, "stderr": est.stderr}


_KINDS = {
    "count_primes": _count_primes,
    "value_histogram": _histogram,
    "sieve": _sieve,
    "count_mod": _count_mod,
    "local_factors": _local_factors,
    "mass_bruteforce": _mass,
    "class_number": _class_number,
    "alpha_bruteforce": _alpha,
    "siegel_mass": _siegel,
    "bh_integral": _bh,
}

_F2 = {"family": "full", "size": 2}
_F3 = {"family": "full", "size": 3}
_K4 = {"family": "skew", "size": 4}
_S3 = {"family": "sym", "size": 3}


def _fixtures() -> list[dict]:
    fx = [
        {"name": "sym3_box10_positive", "kind": "count_primes",
         "inputs": {"space": _S3, "T": 10, "sign_mode": "positive_prime"}},
        {"name": "sym3_box10_ideal", "kind": "count_primes",
         "inputs": {"space": _S3, "T": 10, "sign_mode": "prime_ideal"}},
        {"name": "skew4_box10_positive", "kind": "count_primes",
         "inputs": {"space": _K4, "T": 10, "sign_mode": "positive_prime"}},
        {"name": "skew4_box10_ideal", "kind": "count_primes",
         "inputs": {"space": _K4, "T": 10, "sign_mode": "prime_ideal"}},
        {"name": "full2_box20_positive", "kind": "count_primes",
         "inputs": {"space": _F2, "T": 20, "sign_mode": "positive_prime"}},
        {"name": "full2_box1_histogram", "kind": "value_histogram", "inputs": {"space": _F2, "T": 1}},
        {"name": "full2_box20_sieve_z5", "kind": "sieve", "inputs": {"space": _F2, "T": 20, "z": 5}},
        {"name": "full2_box40_sieve_z5", "kind": "sieve", "inputs": {"space": _F2, "T": 40, "z": 5}},
    ]
    for q, k, m in [(3, 1, 1), (3, 1, 0), (5, 1, 2), (3, 2, 3), (2, 2, 1)]:
        fx.append({"name": f"full2_mod{q}^{k}_m{m}", "kind": "count_mod",
                   "inputs": {"space": _F2, "q": q, "k": k, "m": m}})
    fx.append({"name": "skew4_mod3_m0", "kind": "count_mod", "inputs": {"space": _K4, "q": 3, "k": 1, "m": 0}})
    for label, spec, primes in [
        ("full2", _F2, [2, 3, 5, 7, 11, 13]),
        ("full3", _F3, [2, 3, 5, 7]),
        ("skew4", _K4, [2, 3, 5, 7, 11]),
        ("sym3", _S3, [2, 3, 5, 7, 11, 13]),
    ]:
        fx.append({"name": f"{label}_local_factors", "kind": "local_factors",
                   "inputs": {"space": spec, "primes": primes}})
    for D in [1, 2, 3, 4, 5, 7, 11, 13]:
        fx.append({"name": f"mass_n3_D{D}", "kind": "mass_bruteforce", "inputs": {"n": 3, "D": D}})
    for D in [1, 3, 7, 11]:
        fx.append({"name": f"mass_n2_D{D}", "kind": "mass_bruteforce", "inputs": {"n": 2, "D": D}})
    for q in [53, 101, 149, 197]:
        fx.append({"name": f"h3_{q}_SL", "kind": "class_number", "inputs": {"n": 3, "D": q, "equivalence": "SL"}})
    for D in [1, 3, 5]:
        fx.append({"name": f"h2_{D}_GL", "kind": "class_number", "inputs": {"n": 2, "D": D, "equivalence": "GL"}})
    fx += [
        {"name": "alpha3_diag113_k3", "kind": "alpha_bruteforce",
         "inputs": {"S": [[1, 0, 0], [0, 1, 0], [0, 0, 3]], "p": 3, "k": 3}},
        {"name": "alpha2_I3_k3", "kind": "alpha_bruteforce",
         "inputs": {"S": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "p": 2, "k": 3}},
        {"name": "alpha3_I2_k2", "kind": "alpha_bruteforce", "inputs": {"S": [[1, 0], [0, 1]], "p": 3, "k": 2}},
        {"name": "mass_I3", "kind": "siegel_mass", "inputs": {"S": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
         "tolerance": 1e-12},
        {"name": "mass_A4", "kind": "siegel_mass",
         "inputs": {"S": [[2, 1, 0, 0], [1, 2, 1, 0], [0, 1, 2, 1], [0, 0, 1, 2]]}, "tolerance": 1e-9},
        {"name": "bh_full2_box20_seed7", "kind": "bh_integral",
         "inputs": {"space": _F2, "T": 20, "samples": 100000, "seed": 7}, "tolerance": 1e-9},
    ]
    for f in fx:
        f.setdefault("tolerance", None)
    return fx


FIXTURES = _fixtures()


def fixture_root(default: str | os.PathLike | None = None) -> Path:
    """BHLAB_FIXTURES if set, else the given default, else ./fixtures."""
    env = os.environ.get("BHLAB_FIXTURES")
    if env:
        return Path(env)
    return Path(default) if default is not None else Path("fixtures")


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def compute(fixture: dict):
    return _KINDS[fixture["kind"]](fixture["inputs"])


def bootstrap(root, names=None) -> list[Path]:
    """Run the oracles and freeze their outputs as fixture files."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for f in FIXTURES:
        if names is not None and f["name"] not in names:
            continue
        record = dict(f, expected=compute(f))
        path = root / f"{f['name']}.json"
        path.write_text(json.dumps(record, sort_keys=True, indent=1) + "\n")
        written.append(path)
    return written


@dataclass
class GoldenSummary:
    root: str
    checked: list[str] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.checked) and not self.failures

    def to_json(self) -> dict:
        return {"root": self.root, "passed": self.passed, "checked": self.checked, "failures": self.failures}


def _close(a, b, tol) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_close(a[k], b[k], tol) for k in a)
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))
    return a == b


def golden_check(root, names=None) -> GoldenSummary:
    """Recompute every fixture (or the named ones) and compare."""
    root = Path(root)
    summary = GoldenSummary(str(root))
    wanted = [f["name"] for f in FIXTURES if names is None or f["name"] in names]
    present = {p.stem for p in root.glob("*.json")} if root.is_dir() else set()
    if not present:
        summary.failures["<none>"] = f"no fixtures in {root}; run `bhlab bootstrap-oracles --out {root}` first"
        return summary
    for name in wanted:
        if name not in present:
            summary.failures[name] = "missing fixture file"
            continue
        record = json.loads((root / f"{name}.json").read_text())
        got = _KINDS[record["kind"]](record["inputs"])
        tol = record.get("tolerance")
        ok = canonical(got) == canonical(record["expected"]) if tol is None else _close(got, record["expected"], tol)
        summary.checked.append(name)
        if not ok:
            summary.failures[name] = "recomputed value differs from the fixture"
    return summary
