"""Run every config in configs/ with --check and write outputs to results/."""

import argparse
import json
import sys
from pathlib import Path

from laserstate.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent
SUFFIX = {"two-laser-ratio": ".csv", "two-laser-phase": ".csv", "two-laser-sim": ".jsonl"}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("configs", nargs="*", type=Path, help="config files (default: configs/*.json)")
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    args = ap.parse_args(argv)
    paths = args.configs or sorted((ROOT / "configs").glob("*.json"))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    failed = []
    for path in paths:
        experiment = json.loads(path.read_text())["experiment"]
        out = args.out_dir / (path.stem + SUFFIX.get(experiment, ".json"))
        code = cli_main(["--config", str(path), "--out", str(out), "--check"])
        print(f"{'ok  ' if code == 0 else 'FAIL'} {path.name} -> {out}")
        if code:
            failed.append(path.name)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
