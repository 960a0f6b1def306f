"""Endpoint-ratio tests for a smooth potential under periodic-type conditions.

    python3 scripts/positive_case.py --N 30 --a 1 -1 2
"""

import argparse

from dirac_spectra.core import periodic_type_matrix
from dirac_spectra.diagnostics import periodic_type_verdicts
from dirac_spectra.potentials import builtin_potential
from dirac_spectra.spectrum import locate_eigenvalues, split_indices


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, default=30)
    p.add_argument("--a", type=float, nargs="+", default=[1.0, -1.0])
    p.add_argument("--potential", default="endpoint-smooth")
    args = p.parse_args()

    pot = builtin_potential(args.potential)
    for a in args.a:
        sp = locate_eigenvalues(pot, periodic_type_matrix(a).minors, (-args.N, args.N))
        v1, v2 = periodic_type_verdicts(pot, sp, a)
        T = split_indices(sp, 1e-8)
        print(f"a = {a:+g}: {len(T)} split indices, n0 = {sp.n0}")
        print(f"  endpoint ratio   spread {v2.spread:.4f} (band {v2.band:g}) -> {v2.label}")
        print(f"  coefficient ratio spread {v1.spread:.4f} (band {v1.band:g}) -> {v1.label}")


if __name__ == "__main__":
    main()
