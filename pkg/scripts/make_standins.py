"""Generate deterministic stand-in CSVs for the registered benchmark datasets.

The real benchmark files are not bundled; this writes synthetic files with the
registered shapes plus a datasets.manifest, so the CLI examples run as-is.

Usage: python scripts/make_standins.py [DEST_DIR]   (default: data/)
"""

import sys
from pathlib import Path

from pnml_linreg.data import TABLE_SHAPES, write_standin_csv


def main() -> int:
    dest = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data")
    dest.mkdir(parents=True, exist_ok=True)
    lines = ["# name = path, target_column"]
    for name in sorted(TABLE_SHAPES):
        write_standin_csv(name, dest / f"{name}.csv")
        lines.append(f"{name} = {name}.csv, target")
        print(f"wrote {dest / (name + '.csv')}")
    manifest = dest / "datasets.manifest"
    manifest.write_text("\n".join(lines) + "\n")
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
