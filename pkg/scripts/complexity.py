"""Operation-count model of the antenna-position update against array size.

Writes the SCA and DE counts for N = 4..36 and their ratio.
"""
import argparse
import csv
from pathlib import Path

from leosec.driver import complexity_estimate
from leosec.experiment import svg_line_plot


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", type=int, default=8)
    ap.add_argument("--eavesdroppers", type=int, default=2)
    ap.add_argument("--sca-steps", type=int, default=10)
    ap.add_argument("--generations", type=int, default=30)
    ap.add_argument("--population", type=int, default=50)
    ap.add_argument("--part", choices=("position", "total"), default="position")
    ap.add_argument("--out", default="out/complexity")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kw = dict(outer=1, beam_iterations=1, position_iterations=args.sca_steps,
              generations=args.generations, population=args.population, part=args.part)
    ns = list(range(4, 37))
    sca = [complexity_estimate("sca", n, args.slots, args.eavesdroppers, **kw) for n in ns]
    de = [complexity_estimate("de", n, args.slots, args.eavesdroppers, **kw) for n in ns]
    with open(out / "complexity.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "sca", "de", "ratio"])
        for n, a, b in zip(ns, sca, de):
            w.writerow([n, a, b, f"{a / b:.6g}"])
    (out / "complexity.svg").write_text(svg_line_plot(
        {"SCA": (ns, [float(x) for x in sca]), "DE": (ns, [float(x) for x in de])},
        "number of elements N", "operations", f"{args.part} complexity"))
    cross = next((n for n, a, b in zip(ns, sca, de) if a > b), None)
    print(f"SCA exceeds DE from N = {cross}")


if __name__ == "__main__":
    main()
