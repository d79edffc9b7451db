# SPDX-License-Identifier: Apache-2.0
"""Materialize the benchmark datasets as CSV files.

breast  (WDBC, 569 x 30)         -- written from scikit-learn's bundled copy.
diabetes (Pima Indians, 768 x 8) -- not redistributable via any offline
    package; downloaded from public mirrors when the network allows, otherwise
    the script prints where to place the file manually.

Both files use one header row, comma separators, and a two-valued label
column named `target`. Existing files are left untouched.
"""

import argparse
import csv
import hashlib
import sys
import urllib.request
from pathlib import Path

BREAST_COLUMNS = [
    "radius", "texture", "perimeter", "area", "smoothness", "compactness",
    "concavity", "concave_points", "symmetry", "fractal_dimension",
]
BREAST_GROUPS = ["mean", "se", "worst"]

DIABETES_COLUMNS = [
    "pregnancies", "glucose", "blood_pressure", "skin_thickness",
    "insulin", "body_mass_index", "diabetes_pedigree", "age",
]

PIMA_URLS = [
    "https://raw.githubusercontent.com/jbrownlee/Datasets/master/pima-indians-diabetes.data.csv",
    "https://raw.githubusercontent.com/plotly/datasets/master/diabetes.csv",
]


def write_breast(path: Path) -> None:
    if path.exists():
        print(f"keep existing {path}")
        return
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError:
        print("scikit-learn is required to materialize breast.csv", file=sys.stderr)
        return
    bunch = load_breast_cancer()
    names = [f"{col}_{grp}" for grp in BREAST_GROUPS for col in BREAST_COLUMNS]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["target"])
        for row, label in zip(bunch.data, bunch.target):
            # sklearn encodes malignant as 0; write the usual B/M labels
            writer.writerow([repr(float(v)) for v in row] + ["M" if label == 0 else "B"])
    print(f"wrote {path} (569 rows x 30 features)")


def write_diabetes(path: Path) -> None:
    if path.exists():
        print(f"keep existing {path}")
        return
    for url in PIMA_URLS:
        try:
            with urllib.request.urlopen(url, timeout=20) as resp:
                raw = resp.read().decode("utf-8")
        except Exception as exc:  # noqa: BLE001 - report and try the next mirror
            print(f"  {url}: {exc}")
            continue
        lines = [ln for ln in raw.strip().splitlines() if ln.strip()]
        if lines and not lines[0][0].isdigit():
            lines = lines[1:]  # drop a header if the mirror ships one
        rows = [ln.split(",") for ln in lines]
        if len(rows) != 768 or any(len(r) != 9 for r in rows):
            print(f"  {url}: unexpected shape, skipping")
            continue
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(DIABETES_COLUMNS + ["target"])
            writer.writerows(rows)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()[:16]
        print(f"wrote {path} (768 rows x 8 features, sha256 {digest}...)")
        return
    print(
        f"could not obtain the Pima diabetes data; place a CSV with columns\n"
        f"  {','.join(DIABETES_COLUMNS)},target\n"
        f"(768 rows, target in {{0,1}}) at {path} to enable the diabetes runs",
        file=sys.stderr,
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("data"))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    write_breast(args.out / "breast.csv")
    write_diabetes(args.out / "diabetes.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
