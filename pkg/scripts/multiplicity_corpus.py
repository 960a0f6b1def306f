"""Asymptotic multiplicity against residue norm-product growth.

Runs the non-periodic corpus (regular, not strongly regular conditions)
and prints the norm products ``||y_n|| ||z_n||`` of the split indices.

    python3 scripts/multiplicity_corpus.py --N 12
"""

import argparse

import numpy as np

from dirac_spectra.core import BoundaryMatrix, classify
from dirac_spectra.diagnostics import signals_consistent, theorem1_verdict
from dirac_spectra.potentials import ExpPoly, Potential, builtin_potential
from dirac_spectra.spectrum import locate_eigenvalues

MATRICES = {
    "[[1,0,1,0],[0,1,1,1]]": [[1, 0, 1, 0], [0, 1, 1, 1]],
    "[[1,0,1,1],[0,1,0,1]]": [[1, 0, 1, 1], [0, 1, 0, 1]],
}
POTENTIALS = {
    "zero": builtin_potential("zero"),
    "q-only": Potential(ExpPoly.zero(), ExpPoly([0.3, -0.3, 0.2], [1.0, -1.0, 0.0])),
    "endpoint-smooth": builtin_potential("endpoint-smooth"),
}


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, default=12)
    args = p.parse_args()

    for mname, mat in MATRICES.items():
        bm = BoundaryMatrix(np.array(mat, dtype=complex))
        cls = classify(bm.minors)
        for pname, pot in POTENTIALS.items():
            sp = locate_eigenvalues(pot, bm.minors, (-args.N, args.N))
            v = theorem1_verdict(sp, cls, pot, bm.minors)
            prods = ", ".join(f"{n}:{q:.2f}" for n, q in sorted(v.norm_products, key=lambda t: abs(t[0])))
            print(f"{mname} {pname:>16}: {v.label:<10} consistent={signals_consistent(v)} "
                  f"witness={v.blowup_witness}")
            if prods:
                print(f"    products {prods}")


if __name__ == "__main__":
    main()
