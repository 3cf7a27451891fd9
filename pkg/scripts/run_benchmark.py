"""Train a ROM on a bundled or user config and report errors and speed-up.

Examples::

    python scripts/run_benchmark.py schnakenberg2d --thetas 0.4,0.5,0.6,0.7,0.8 --test 0.65
    python scripts/run_benchmark.py brusselator3d_small --thetas 19,20,21,22,23 --test 21.5
"""

import argparse
import time
from pathlib import Path

from xdiff import io
from xdiff.fom import run_fom
from xdiff.metrics import BenchmarkReport, median_time, time_avg_relative_error
from xdiff.rom import BuildTimings, build_rom, predict


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config", help="config file or bundled config name")
    p.add_argument("--thetas", required=True)
    p.add_argument("--test", type=float, required=True)
    p.add_argument("--tau1", type=float, default=1e-2)
    p.add_argument("--tau2", type=float, default=1e-8)
    p.add_argument("--criterion", default="sum", choices=("sum", "energy"))
    p.add_argument("--workdir", default="runs")
    p.add_argument("--keyvalue", help="also write key=value output here")
    args = p.parse_args()

    cfg = io.load_config(args.config)
    thetas = [float(x) for x in args.thetas.split(",")]
    work = Path(args.workdir) / Path(args.config).stem
    start = time.perf_counter()
    io.ensure_snapshots(cfg, thetas + [args.test], work / "snapshots", log=print)
    fom_phase = time.perf_counter() - start

    timings = BuildTimings()
    model = build_rom(io.SnapshotDirectory(work / "snapshots", thetas), args.tau1, args.tau2,
                      criterion=args.criterion, timings=timings)
    io.save_rom(work / "model.cdr", model)
    print("level-I ranks:", timings.level1_ranks)

    ref = io.SnapshotDirectory(work / "snapshots", [args.test])[0]
    pred, rom_seconds = median_time(lambda: predict(model, args.test))
    e_u, e_v = time_avg_relative_error(ref, pred)
    del pred, ref
    fom_seconds = median_time(lambda: run_fom(cfg, args.test).seconds)[1]

    report = BenchmarkReport(
        errors={"u": e_u, "v": e_v}, ranks=model.ranks, saved_memory=model.saved_memory(),
        fom_seconds=fom_seconds, rom_seconds=rom_seconds, theta=args.test,
        offline={"fom_runs": fom_phase, "level1": timings.level1, "level2": timings.level2,
                 "projection": timings.projection, "rbf": timings.rbf},
    )
    print(report.to_text())
    if args.keyvalue:
        Path(args.keyvalue).write_text(report.to_keyvalue())


if __name__ == "__main__":
    main()
