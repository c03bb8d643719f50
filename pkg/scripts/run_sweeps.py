"""Run every sweep configuration in configs/ through the CLI."""
import argparse
import sys
from pathlib import Path

from leosec.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]
SWEEPS = ("power_sweep", "antenna_sweep", "latitude_sweep")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", nargs="*", choices=SWEEPS)
    args = ap.parse_args()
    worst = 0
    for name in args.only or SWEEPS:
        code = cli(["sweep", str(ROOT / "configs" / f"{name}.cfg"), "--threads", str(args.threads),
                    "--out", str(ROOT / "out" / name)])
        print(f"{name}: exit {code}")
        worst = max(worst, code)
    sys.exit(worst)


if __name__ == "__main__":
    main()
