"""Fibre geometry of the radial and ellipsoid maps: T, mean curvature, umbilicity,
and both sign conventions for the |T_X JX|^2 term of the mu-plane curvature balance."""

import argparse

import numpy as np

from sublab.fixtures import get_fixture
from sublab.oneill import ProjectorField, curvature_checks, mean_curvature, tensor_T, umbilical_residual


def point_at(r, rng):
    d = rng.normal(size=4)
    return r * d / np.linalg.norm(d)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radii", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    print(f"{'map':>9} {'|x|':>6} {'|T_XX|':>10} {'|H|':>10} {'umbilic':>9} "
          f"{'K_hat':>10} {'minus':>9} {'plus':>9}")
    for name in ("radial", "ellipsoid"):
        fld = ProjectorField(get_fixture(name).map)
        for r in args.radii:
            p = point_at(r, rng)
            x = fld.local(p).vertical.basis[:, 0]
            c = curvature_checks(fld, p, "mu")
            plus = abs(c["rhs"] + 2 * c["TXJX_sq"])
            print(f"{name:>9} {r:6.2f} {np.linalg.norm(tensor_T(fld, p, x, x)):10.6f} "
                  f"{np.linalg.norm(mean_curvature(fld, p)):10.6f} {umbilical_residual(fld, p):9.1e} "
                  f"{c['K_hat']:10.6f} {c['imbalance']:9.1e} {plus:9.1e}")


if __name__ == "__main__":
    main()
