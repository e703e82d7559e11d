"""Regenerate the packaged golden files from configs/*.json.

Run after an intentional numerical change, then review the diff: goldens are
cross-checked against independent oracles in tests/.
"""
import json
import sys
from pathlib import Path

from nodalshoot.harness import golden_dir, make_golden

ROOT = Path(__file__).resolve().parents[1]


def main(names):
    out = golden_dir()
    out.mkdir(exist_ok=True)
    for path in sorted((ROOT / "configs").glob("*.json")):
        if names and path.stem not in names:
            continue
        golden = make_golden(json.loads(path.read_text()))
        (out / path.name).write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n")
        print("wrote", out / path.name)


if __name__ == "__main__":
    main(sys.argv[1:])
