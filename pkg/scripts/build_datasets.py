"""Rebuild the bundled CSVs under data/ from dataset copies shipped in PyPI wheels.

The UCI archive is not reachable from every build machine, so the four
desk-scale datasets are extracted from wheels that vendor them:

* ``keel-ds`` (``keel_ds/data/...``): Breast Cancer Wisconsin (683 rows, NA rows
  already removed) and Glass (multi-class label rebuilt from the aligned
  one-vs-rest files).
* ``Orange3`` (``Orange/...``): Boston Housing and Ionosphere.

Usage::

    pip download keel-ds Orange3 --no-deps -d wheels/
    (unzip both wheels into wheels/keel and wheels/orange)
    python scripts/build_datasets.py --keel wheels/keel --orange wheels/orange --out data/
"""

import argparse
import csv
from pathlib import Path

BREAST_NAMES = [
    "clump_thickness", "cell_size_uniformity", "cell_shape_uniformity",
    "marginal_adhesion", "single_epithelial_cell_size", "bare_nuclei",
    "bland_chromatin", "normal_nucleoli", "mitoses",
]
GLASS_NAMES = ["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe"]
# one-vs-rest KEEL file -> UCI glass type; rows matching none of them are type 3
# (glass2.dat is stored in a different row order and cannot be aligned)
GLASS_FILES = {"glass0": 1, "glass1": 2, "glass4": 5, "glass5": 6, "glass6": 7}


def _keel_rows(path):
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("@"):
            rows.append([c.strip() for c in line.split(",")])
    return rows


def _orange_rows(path):
    lines = Path(path).read_text().splitlines()
    header = lines[0].split("\t")
    return header, [line.split("\t") for line in lines[3:] if line.strip()]


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    print(f"{path}: {len(rows)} rows x {len(header)} columns")


def build(keel: Path, orange: Path, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    data = keel / "keel_ds" / "data"

    breast = _keel_rows(data / "balanced" / "raw" / "wisconsin.dat")
    _write(out / "breast.csv", BREAST_NAMES + ["class"], breast)

    per_file = {name: _keel_rows(data / "imbalanced" / "raw" / f"{name}.dat") for name in GLASS_FILES}
    base = per_file["glass0"]
    glass = []
    for i, row in enumerate(base):
        label = 3
        for name, glass_type in GLASS_FILES.items():
            other = per_file[name][i]
            if other[:-1] != row[:-1]:
                raise ValueError(f"{name}.dat is not row-aligned with glass0.dat at row {i}")
            if other[-1] == "positive":
                label = glass_type
        glass.append(row[:-1] + [str(label)])
    _write(out / "glass.csv", GLASS_NAMES + ["type"], glass)

    header, rows = _orange_rows(orange / "Orange" / "datasets" / "housing.tab")
    _write(out / "boston.csv", header, rows)

    header, rows = _orange_rows(orange / "Orange" / "tests" / "datasets" / "ionosphere.tab")
    _write(out / "ionosphere.csv", header[:-1] + ["class"], rows)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--keel", type=Path, required=True, help="unpacked keel-ds wheel")
    parser.add_argument("--orange", type=Path, required=True, help="unpacked Orange3 wheel")
    parser.add_argument("--out", type=Path, default=Path("data"))
    args = parser.parse_args()
    build(args.keel, args.orange, args.out)


if __name__ == "__main__":
    main()
