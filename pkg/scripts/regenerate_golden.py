"""Rewrite tests/golden/*.csv.gz from the current figure presets.

Run only after an intentional change to the figure data:

    python3 scripts/regenerate_golden.py
"""

import gzip
import shutil
import tempfile
from pathlib import Path

from ptlab.report import FIGURE_SWEEPS, figures

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        for number in FIGURE_SWEEPS:
            figures(number, tmp)
        for csv_path in sorted(Path(tmp).glob("*.csv")):
            target = GOLDEN / (csv_path.name + ".gz")
            # mtime=0 keeps the archives byte-stable across regenerations
            with open(csv_path, "rb") as src, gzip.GzipFile(target, "wb", mtime=0) as dst:
                shutil.copyfileobj(src, dst)
            print(f"wrote {target}")


if __name__ == "__main__":
    main()
