"""Write the level-surface and sheet-eigenvalue tables behind the figures.

Produces ``surface_C<level>.csv`` for each determinant level and
``eigen_grid_<branch>.csv`` for both sheets in the output directory.
"""

import argparse
from pathlib import Path

from kummerbs.output import eigen_grid_csv, read_csv, surface_csv

LEVELS = (0.9, 0.5, 0.1, 0.0, -0.5, -3.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=Path("figure_data"))
    ap.add_argument("--resolution", type=int, default=64)
    ap.add_argument("--eigen-resolution", type=int, default=101)
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    for c in LEVELS:
        path = args.out_dir / f"surface_C{c:+.1f}.csv"
        text = surface_csv(c, args.resolution)
        path.write_text(text)
        print(f"{path}: {len(read_csv(text)[2])} points")
    for branch in ("plus", "minus"):
        path = args.out_dir / f"eigen_grid_{branch}.csv"
        path.write_text(eigen_grid_csv(branch, args.eigen_resolution))
        print(path)


if __name__ == "__main__":
    main()
