"""Command-line entry point.

Every subcommand reads one JSON run config (``--config``), applies flag
overrides, writes a JSON report plus CSV tables to ``--out`` and echoes the
effective config into the report.  Exit codes: 0 success, 2 parse errors,
3 refused preconditions, 4 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from dirac_spectra.core import BoundaryError, BoundaryMatrix, classify, complex_from_json, tau0
from dirac_spectra.potentials import Potential, builtin_potential
from dirac_spectra.solver import SolverConfig, SolverError

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_NUMERIC = 0, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "boundary": {"periodic_type_a": [1, 0]},
    "potential": {"kind": "builtin", "name": "endpoint-smooth"},
    "n_range": [-10, 10],
    "tol": 1e-10,
    "tol_cluster": 1e-8,
    "grid": 129,
    "lambda": None,
    "kernel": "H",
    "lambdas": None,
    "eps": 0.05,
    "a": [1, 0],
    "K": 5,
    "C": None,
    "slot": "Q",
    "verify": True,
    "band": 100.0,
    "f": None,
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def load_config(path: str | None) -> dict:
    cfg = dict(DEFAULTS)
    if path is None:
        return cfg
    text = Path(path).read_text()
    try:
        user = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno <= len(text.splitlines()) else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from exc
    if not isinstance(user, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = set(user) - set(DEFAULTS) - {"command", "out"}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    cfg.update(user)
    return cfg


def parse_n_range(text: str) -> list[int]:
    try:
        for sep in (":", ","):
            if sep in text:
                lo, hi = text.split(sep, 1)
                return [int(lo), int(hi)]
        n = int(text)
    except ValueError:
        raise ConfigError(f"bad index range {text!r}; expected 'lo:hi' or N") from None
    return [-n, n]


def _boundary(cfg) -> BoundaryMatrix:
    return BoundaryMatrix.from_json(cfg["boundary"])


def _potential(cfg) -> Potential:
    try:
        return Potential.from_json(cfg["potential"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"cannot parse potential descriptor: {exc}") from exc


def _n_range(cfg) -> tuple[int, int]:
    lo, hi = cfg["n_range"]
    return int(lo), int(hi)


def _locate_config(cfg):
    from dirac_spectra.spectrum import LocateConfig
    return LocateConfig(tol_root=cfg["tol"], tol_cluster=cfg["tol_cluster"],
                        solver=SolverConfig(tol=cfg["tol"]))


# -- commands ---------------------------------------------------------------------

def cmd_classify(cfg: dict, out: Path) -> dict:
    bm = _boundary(cfg)
    cls = classify(bm.minors)
    report = cls.to_json()
    if cls.strongly_regular:
        report["note"] = ("strongly regular: root functions form a Riesz basis; the "
                          "diagnostics here target regular, not strongly regular conditions")
    return report


def cmd_spectrum(cfg: dict, out: Path) -> dict:
    from dirac_spectra.spectrum import locate_eigenvalues
    bm = _boundary(cfg)
    sp = locate_eigenvalues(_potential(cfg), bm.minors, _n_range(cfg), config=_locate_config(cfg))
    sp.write_csv(out / "spectrum.csv")
    sp.write_json(out / "spectrum.json")
    by_n: dict[int, float] = {}
    for e in sp.entries:
        by_n[abs(e.n)] = max(by_n.get(abs(e.n), 0.0), abs(e.eps))
    ks = sorted(by_n)
    drops = sum(by_n[b] <= by_n[a] for a, b in zip(ks, ks[1:]))
    return {"n0": sp.n0, "T_set": sp.T_set, "failures": sp.failures,
            "n_eigenvalues": len(sp.entries),
            "eps_trend": {"max_abs_eps_by_abs_n": [[k, by_n[k]] for k in ks],
                          "nonincreasing_fraction": drops / max(1, len(ks) - 1)}}


def cmd_diagnose(cfg: dict, out: Path) -> dict:
    from dirac_spectra.diagnostics import (branch_one_endpoints, diagnostics_report,
                                           periodic_type_verdicts, theorem1_verdict)
    from dirac_spectra.spectrum import locate_eigenvalues
    bm = _boundary(cfg)
    cls = classify(bm.minors)
    cls.require_regular()
    pot = _potential(cfg)
    if cls.strongly_regular:
        raise BoundaryError("strongly regular conditions: basis property holds without "
                            "further diagnosis", "precondition")
    if cls.periodic_type and pot.name == "theorem2":
        from dirac_spectra.counterexample import build_theorem2, verify_divergence
        p = pot.meta.get("params", {})
        a = complex_from_json(p.get("a", cfg["a"]))
        built = build_theorem2(p.get("eps", cfg["eps"]), a, p.get("K", cfg["K"]),
                               p.get("C", cfg["C"]), p.get("slot", cfg["slot"]))
        rep = verify_divergence(built, a, band=cfg["band"], locate=_locate_config(cfg))
        rep.write_csv(out / "divergence.csv")
        v1, v2 = rep.verdict_lemma1, rep.verdict
        v2.write_csv(out / "ratio_lemma2.csv")
        return {"mode": "periodic-type", "verdict": v2.label, "agree": v1.label == v2.label,
                "lemma1": v1.to_json(), "lemma2": v2.to_json(), "divergence": rep.to_json()}
    sp = locate_eigenvalues(pot, bm.minors, _n_range(cfg), config=_locate_config(cfg))
    if cls.periodic_type:
        a = cls.a
        v1, v2 = periodic_type_verdicts(pot, sp, a, cfg["band"], tol_cluster=cfg["tol_cluster"])
        v2.write_csv(out / "ratio_lemma2.csv")
        rep = diagnostics_report([v1, v2], E_end=branch_one_endpoints(pot, sp))
        rep.update({"mode": "periodic-type", "verdict": v2.label, "agree": v1.label == v2.label})
        return rep
    v = theorem1_verdict(sp, cls, pot, bm.minors, cfg["tol_cluster"], m=cfg["grid"])
    rep = diagnostics_report([v])
    rep.update({"mode": "theorem1", "verdict": v.label})
    return rep


def cmd_green(cfg: dict, out: Path) -> dict:
    from dirac_spectra.green import dense_solution, kernel_grid
    bm = _boundary(cfg)
    if cfg["lambda"] is None:
        raise ConfigError("green needs a 'lambda' entry")
    lam = complex_from_json(cfg["lambda"])
    fm = dense_solution(_potential(cfg), lam, int(cfg["grid"]))
    kg = kernel_grid(fm, bm.minors, cfg["kernel"])
    kg.write_csv(out / f"kernel_{cfg['kernel']}.csv")
    norms = np.sqrt(np.sum(np.abs(kg.values) ** 2, axis=(0, 1))) * (math.pi / (len(kg.grid) - 1))
    return {"lambda": lam, "kind": kg.kind, "grid": len(kg.grid),
            "entry_l2_norms": norms, "max_abs": float(np.max(np.abs(kg.values)))}


def cmd_counterexample(cfg: dict, out: Path) -> dict:
    from dirac_spectra.counterexample import build_theorem2, verify_divergence
    a = complex_from_json(cfg["a"])
    # the full gap ratio leaves room for only a few indices in double precision
    K = int(cfg["K"]) if cfg["C"] is not None else min(int(cfg["K"]), 3)
    built = build_theorem2(cfg["eps"], a, K, cfg["C"], cfg["slot"])
    (out / "built.json").write_text(json.dumps(_jsonable(built.to_json()), indent=2))
    report = {"plan": built.plan.to_json(), "checks": built.to_json()["checks"],
              "closeness": built.closeness}
    if cfg["verify"]:
        rep = verify_divergence(built, a, band=cfg["band"], locate=_locate_config(cfg))
        rep.write_csv(out / "verification.csv")
        report["divergence"] = rep.to_json()
    return report


def cmd_asym_check(cfg: dict, out: Path) -> dict:
    from dirac_spectra.asymptotics import compare_asymptotics
    bm = _boundary(cfg)
    cls = classify(bm.minors)
    if cfg["lambdas"] is not None:
        lams = [complex_from_json(v) for v in cfg["lambdas"]]
    else:
        t = tau0(cls.a) if cls.periodic_type else 0j
        lams = [t + 2 * n for n in (8, 16, 32, 64)]
    table = compare_asymptotics(_potential(cfg), lams, SolverConfig(tol=min(cfg["tol"], 1e-12)))
    table.write_csv(out / "asym_errors.csv")
    return table.to_json()


def cmd_expand(cfg: dict, out: Path) -> dict:
    from dirac_spectra.diagnostics import expansion_conditioning, periodic_type_records
    from dirac_spectra.spectrum import locate_eigenvalues
    bm = _boundary(cfg)
    cls = classify(bm.minors)
    if not cls.periodic_type:
        raise BoundaryError("expansion diagnostics need periodic-type conditions", "precondition")
    pot = _potential(cfg)
    sp = locate_eigenvalues(pot, bm.minors, _n_range(cfg), config=_locate_config(cfg))
    recs = periodic_type_records(pot, sp, cls.a, m=int(cfg["grid"]) | 1,
                                 tol_cluster=cfg["tol_cluster"])
    f = (Potential.from_json(cfg["f"]) if cfg["f"] is not None
         else builtin_potential("endpoint-smooth"))
    rep = expansion_conditioning(lambda x: np.stack([f.P(x), f.Q(x)], axis=-1), recs)
    with open(out / "expansion.csv", "w") as fh:
        fh.write("n,j,term,plain_norm\n")
        for (n, j), t, p in zip(rep.indices, rep.terms, rep.plain_norms):
            fh.write(f"{n},{j},{t!r},{p!r}\n")
    return {"f_norm": rep.f_norm, "final_plain": float(rep.plain_norms[-1]),
            "final_grouped": float(rep.grouped_norms[-1]),
            "grouped_norms": rep.grouped_norms, "max_term": float(np.max(rep.terms))}


COMMANDS = {"classify": cmd_classify, "spectrum": cmd_spectrum, "diagnose": cmd_diagnose,
            "green": cmd_green, "counterexample": cmd_counterexample,
            "asym-check": cmd_asym_check, "expand": cmd_expand}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirac-spectra", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--desk-scale", action="store_true",
                   help="use the reduced gap ratio C = 40 for the lacunary construction")
    p.add_argument("--n-range", help="index range 'lo:hi' or a bound N for -N:N")
    p.add_argument("--tol", type=float, help="solver and root tolerance")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.n_range:
            cfg["n_range"] = parse_n_range(args.n_range)
        if args.tol is not None:
            cfg["tol"] = args.tol
        if args.desk_scale:
            cfg["C"] = 40
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report = COMMANDS[args.command](cfg, out)
    except (ConfigError, json.JSONDecodeError, ValueError) as exc:
        code = EXIT_PARSE
        if isinstance(exc, BoundaryError) and exc.code not in ("parse", "invalid"):
            code = EXIT_PRECONDITION
        elif _is_numeric(exc):
            code = EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return code
    except (SolverError, RuntimeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    doc = {"command": args.command, "config": cfg, "report": report}
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True)
    (out / f"{args.command}.json").write_text(text)
    print(text)
    return EXIT_OK


def _is_numeric(exc: Exception) -> bool:
    from dirac_spectra.counterexample import ConstructionError, PlanOverflowError
    from dirac_spectra.diagnostics import DegenerateEigenvectorError, PairingError
    from dirac_spectra.green import PoleProximityError
    return isinstance(exc, (ConstructionError, PlanOverflowError, DegenerateEigenvectorError,
                            PairingError, PoleProximityError))


if __name__ == "__main__":
    sys.exit(main())
