"""Command-line entry point ``kel``.

Exit codes: 0 success, 1 usage or configuration error, 2 an asserted threshold failed.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .curves import PolygonCurve, curve_from_spec
from .energies import EnergyParams, _json_default, ohara_energy, random_ohara_energy, weighted_ohara_energy
from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run_experiment
from .oracles import circle_energy_oracle
from .polygonal import cos_energy, kim_kusner_energy, simon_energy
from .sampling import density_from_spec, sample_iid
from .sobolev import blatt_report, sobolev_seminorm

FUNCTIONALS = ("ohara", "ohara-weighted", "ohara-random", "kim-kusner", "simon", "cos", "sobolev", "blatt")
POLYGONAL = {"kim-kusner", "simon", "cos"}


def _load_spec(text: str):
    """JSON given inline or as a path to a .json file."""
    p = Path(text)
    if not text.lstrip().startswith("{") and p.is_file():
        return json.loads(p.read_text()), p.parent
    return json.loads(text), None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kel", description="Knot energies, random discretizations and TL^q tools.")
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("energy", help="evaluate one energy functional and print a JSON report")
    e.add_argument("--functional", choices=FUNCTIONALS, default="ohara")
    e.add_argument("--curve", required=True, help="curve spec as JSON or a path to a JSON file")
    e.add_argument("--alpha", type=float, default=2.0)
    e.add_argument("--p", type=float, default=1.0)
    e.add_argument("--N", type=int, default=2048, help="grid size for quadratures")
    e.add_argument("--n", type=int, default=512, help="sample count for ohara-random")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--density", default='{"kind": "uniform"}', help="density spec as JSON or file")
    e.add_argument("--variant", choices=("endpoint", "averaged"), default="endpoint")
    e.add_argument("--s", type=float, default=None, help="order for --functional sobolev")

    x = sub.add_parser("experiment", help="run an experiment and write CSV plus JSON sidecar")
    x.add_argument("name", choices=EXPERIMENTS)
    x.add_argument("--config", default=None, help="JSON config; defaults are used when omitted")
    x.add_argument("--out", default=".", help="output directory")

    o = sub.add_parser("oracle", help="reference values")
    osub = o.add_subparsers(dest="oracle", required=True)
    c = osub.add_parser("circle-energy", help="circle energy by 1-D adaptive quadrature")
    c.add_argument("--quad-tol", type=float, default=1e-10)
    c.add_argument("--length", type=float, default=2 * math.pi)
    c.add_argument("--alpha", type=float, default=2.0)
    c.add_argument("--p", type=float, default=1.0)
    return ap


def _energy(args) -> dict:
    spec, base = _load_spec(args.curve)
    curve = curve_from_spec(spec, base)
    params = EnergyParams(args.alpha, args.p)
    f = args.functional
    if f in POLYGONAL:
        if not isinstance(curve, PolygonCurve):
            raise ValueError(f"--functional {f} needs a polygonal curve spec")
        P = curve.polygon
        rep = {"kim-kusner": lambda: kim_kusner_energy(P, args.variant),
               "simon": lambda: simon_energy(P),
               "cos": lambda: cos_energy(P)}[f]()
    elif f == "ohara":
        rep = ohara_energy(curve, params, args.N)
    elif f in ("ohara-weighted", "ohara-random"):
        dspec, dbase = _load_spec(args.density)
        dens = density_from_spec(dspec, curve.length, dbase)
        if f == "ohara-weighted":
            rep = weighted_ohara_energy(curve, dens, params, args.N)
        else:
            rep = random_ohara_energy(curve, sample_iid(dens, args.n, args.seed), params)
    elif f == "sobolev":
        s = params.s if args.s is None else args.s
        rep = sobolev_seminorm(curve, s, 2.0 * params.p, args.N)
    else:
        rep = blatt_report(curve, params, args.N)
    return rep.to_dict()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.command == "energy":
            print(json.dumps(_energy(args), indent=2, default=_json_default))
            return 0
        if args.command == "oracle":
            val = circle_energy_oracle(args.length, args.alpha, args.p, args.quad_tol)
            print(json.dumps({"oracle": "circle-energy", "length": args.length, "alpha": args.alpha,
                              "p": args.p, "quad_tol": args.quad_tol, "value": val}, indent=2))
            return 0
        cfg = (ExperimentConfig.from_file(args.name, args.config) if args.config
               else ExperimentConfig.build(args.name))
        res = run_experiment(cfg)
        csv_path, json_path = res.write(args.out)
        for name, ok in res.checks.items():
            print(f"{'PASS' if ok else 'FAIL'} {name}")
        if res.aborted:
            print(f"ABORTED {res.aborted}")
        print(f"wrote {csv_path} and {json_path}")
        return 0 if res.passed else 2
    except (ConfigError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"kel: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
