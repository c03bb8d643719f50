"""AO convergence on one configuration: objective against outer iteration.

    python scripts/convergence.py configs/desk.cfg --out out/convergence
"""
import argparse
import csv
from pathlib import Path

from leosec.channel import fmt
from leosec.config import load_config
from leosec.experiment import build_experiment_scenes, run_variant, svg_line_plot


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", default="out/convergence")
    args = ap.parse_args()
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenes = build_experiment_scenes(cfg)
    series = {}
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "iteration", "objective"])
        for variant in cfg.solver.variants:
            _, _, res = run_variant(cfg, variant, scenes)
            trace = res.objective_trace()
            for i, v in enumerate(trace):
                w.writerow([variant, i, fmt(v)])
            series[variant.upper()] = (list(range(len(trace))), list(trace))
            print(f"{variant}: {trace[0]:.4f} -> {trace[-1]:.4f} bit/s/Hz in {len(trace) - 1} outer iterations")
    (out / "convergence.svg").write_text(
        svg_line_plot(series, "outer iteration", "average secrecy rate (bit/s/Hz)", "AO convergence"))


if __name__ == "__main__":
    main()
