"""Endpoint entries of the lacunary potential at the resonant eigenvalues.

Prints one row per lacunary index and the log-log slopes in ``a_k``; writes
``divergence.json`` and ``divergence.csv`` to ``--out``.

    python3 scripts/divergence_scaling.py --out runs/divergence
"""

import argparse
import json
import time
from pathlib import Path

from dirac_spectra.counterexample import build_theorem2, verify_divergence


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--C", type=int, default=40, help="gap ratio (40 = desk scale)")
    p.add_argument("--slot", choices=("P", "Q"), default="Q")
    p.add_argument("--out", default="runs/divergence")
    args = p.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    built = build_theorem2(args.eps, 1.0, args.K, args.C, args.slot)
    rep = verify_divergence(built)
    print(f"a_seq = {built.plan.a_seq}  (closeness {built.closeness:.4f})")
    print(f"{'a_k':>10} {'route':>10} {'|e12|':>11} {'|e21|':>11} {'ratio':>9} "
          f"{'|I1|sqrt(a)':>12} {'|I2|a^(2/3)':>12}")
    for r in rep.rows:
        print(f"{r['a_k']:>10} {r['route']:>10} {abs(r['e12']):11.3e} {abs(r['e21']):11.3e} "
              f"{r['ratio']:9.3f} {r['I1_scaled']:12.6f} {r['I2_scaled']:12.2e}")
    print(f"slopes: e21 {rep.slope_e21:+.4f}  e12 {rep.slope_e12:+.4f}  ratio {rep.slope_ratio:+.4f}")
    print(f"verdict: {rep.verdict.label}  witness {rep.verdict.blowup_witness}")
    print(f"elapsed {time.perf_counter() - t:.1f} s")
    (out / "divergence.json").write_text(json.dumps(rep.to_json(), indent=2))
    rep.write_csv(out / "divergence.csv")


if __name__ == "__main__":
    main()
