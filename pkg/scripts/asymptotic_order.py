"""Solver against the large-lambda endpoint forms along ``tau0 + 2n``.

    python3 scripts/asymptotic_order.py --n 8 16 32 64 128
"""

import argparse

from dirac_spectra.asymptotics import compare_asymptotics
from dirac_spectra.core import tau0
from dirac_spectra.potentials import builtin_potential


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[8, 16, 32, 64])
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--potential", default="endpoint-smooth")
    args = p.parse_args()

    lams = [tau0(args.a) + 2 * n for n in args.n]
    table = compare_asymptotics(builtin_potential(args.potential), lams)
    print(f"{'|lambda|':>10}" + "".join(f"{name:>12}" for name in ("e11", "e12", "e21", "e22")))
    for lam, err in zip(table.lams, table.abs_err):
        print(f"{abs(lam):10.2f}" + "".join(f"{v:12.3e}" for v in err.ravel()))
    print("fitted order" + "".join(f"{v:12.3f}" for v in table.orders.ravel()))


if __name__ == "__main__":
    main()
