"""Convert raw KEEL ``.dat`` files into the headered CSVs shipped in ``fgrt/datasets``.

Usage: python scripts/bundle_keel.py <dir containing KEEL raw .dat files>

The raw files come from the ``keel-ds`` wheel (``keel_ds/data/balanced/raw``).
"""
import csv
import json
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "fgrt" / "datasets"

WINE = ["alcohol", "malic_acid", "ash", "alcalinity_of_ash", "magnesium", "total_phenols",
        "flavanoids", "nonflavanoid_phenols", "proanthocyanins", "color_intensity", "hue",
        "od280_od315", "proline"]
PIMA = ["preg", "plas", "pres", "skin", "insu", "mass", "pedi", "age"]
SAHEART = ["sbp", "tobacco", "ldl", "adiposity", "famhist", "typea", "obesity", "alcohol", "age"]

DATASETS = {
    "wine": WINE,
    "australian": [f"a{i}" for i in range(1, 15)],
    "pima": PIMA,
    "ring": [f"a{i}" for i in range(1, 21)],
    "saheart": SAHEART,
    "spambase": [f"word{i}" for i in range(1, 58)],
}

# the only non-numeric feature among the bundled files
ENCODINGS = {("saheart", "famhist"): {"Absent": "0", "Present": "1"}}


def convert(src: Path, name: str, features: list[str]) -> int:
    rows = []
    for line in src.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(features) + 1:
            raise ValueError(f"{src}: expected {len(features) + 1} cells, got {len(cells)}")
        for j, feat in enumerate(features):
            mapping = ENCODINGS.get((name, feat))
            if mapping is not None:
                cells[j] = mapping[cells[j]]
        rows.append(cells)
    with open(OUT / f"{name}.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(features + ["class"])
        writer.writerows(rows)
    return len(rows)


def main(raw_dir: str) -> None:
    manifest = {}
    for name, features in DATASETS.items():
        n = convert(Path(raw_dir) / f"{name}.dat", name, features)
        manifest[name] = {"file": f"{name}.csv", "label_column": "class", "instances": n,
                          "features": len(features), "source": "KEEL repository"}
        print(name, n)
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main(sys.argv[1])
