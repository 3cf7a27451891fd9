"""Command-line interface: ``xdiff fom | rom build | rom predict | compare | bench hosvd | report``."""

from __future__ import annotations

import argparse
import sys

from . import io
from .errors import ConfigError, NumericalError, StorageError
from .fom import run_fom
from .metrics import BenchmarkReport, median_time, time_avg_relative_error, timing_comparison
from .rom import predict, BuildTimings, build_rom

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of reals, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _order(text: str | None):
    """1-based permutation on the command line, 0-based internally."""
    if text is None or text == "ascending":
        return text
    return [p - 1 for p in _ints(text)]


def _log(msg: str):
    print(msg, file=sys.stderr)


def cmd_fom(args):
    cfg = io.load_config(args.config)
    pair = run_fom(cfg, args.theta, seed=args.seed)
    io.save_snapshot_pair(pair, args.out_u, args.out_v)
    print(f"steps={cfg.n_steps} seconds={pair.seconds:.6f}")


def cmd_rom_build(args):
    cfg = io.load_config(args.config)
    thetas = _floats(args.thetas)
    snaps = io.ensure_snapshots(cfg, thetas, args.snapshot_dir, seed=args.seed, log=_log)
    timings = BuildTimings()
    model = build_rom(snaps, args.tau1, args.tau2, criterion=args.criterion,
                      order=_order(args.order), kernel=args.kernel, timings=timings)
    io.save_rom(args.out, model)
    for name, ranks in model.ranks.items():
        print(f"{name}: ranks={ranks} saved_memory={model.saved_memory()[name]:.4f}%")
    print(f"level1={timings.level1:.3f}s level2={timings.level2:.3f}s "
          f"projection={timings.projection:.3f}s rbf={timings.rbf:.3f}s")


def cmd_rom_predict(args):
    model = io.load_rom(args.model)
    pred = predict(model, args.theta)
    meta = {"theta": pred.theta, "config_digest": model.config_digest,
            "extrapolated": pred.extrapolated}
    io.save_tensor(args.out_u, pred.u, {**meta, "species": "u"})
    io.save_tensor(args.out_v, pred.v, {**meta, "species": "v"})
    if pred.extrapolated:
        _log(f"warning: theta={pred.theta!r} lies outside the training interval")
    print(f"seconds={pred.seconds:.6f}")


def cmd_compare(args):
    ref = (io.load_tensor(args.ref_u)[0], io.load_tensor(args.ref_v)[0])
    approx = (io.load_tensor(args.approx_u)[0], io.load_tensor(args.approx_v)[0])
    e_u, e_v = time_avg_relative_error(ref, approx)
    print(f"e_u={e_u!r}")
    print(f"e_v={e_v!r}")


def cmd_bench_hosvd(args):
    t, _ = io.load_tensor(args.input)
    ranks = _ints(args.ranks)
    if len(ranks) == 1:
        ranks = ranks * t.ndim
    result = timing_comparison(t, ranks, _order(args.order), repeats=args.repeats)
    print(result.to_text())


def cmd_report(args):
    cfg = io.load_config(args.config)
    model = io.load_rom(args.model, config=cfg)
    ref = run_fom(cfg, args.theta)
    pred, rom_seconds = median_time(lambda: predict(model, args.theta), args.repeats)
    e_u, e_v = time_avg_relative_error(ref, pred)
    report = BenchmarkReport(
        errors={"u": e_u, "v": e_v},
        ranks=model.ranks,
        saved_memory=model.saved_memory(),
        fom_seconds=ref.seconds,
        rom_seconds=rom_seconds,
        theta=float(args.theta),
    )
    print(report.to_keyvalue() if args.keyvalue else report.to_text())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xdiff", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fom", help="run the full-order solver for one theta")
    f.add_argument("--config", required=True)
    f.add_argument("--theta", type=float, required=True)
    f.add_argument("--out-u", required=True)
    f.add_argument("--out-v", required=True)
    f.add_argument("--seed", type=int)
    f.set_defaults(func=cmd_fom)

    rom = sub.add_parser("rom", help="build or evaluate a reduced model")
    rsub = rom.add_subparsers(dest="rom_command", required=True)
    b = rsub.add_parser("build")
    b.add_argument("--config", required=True)
    b.add_argument("--thetas", required=True)
    b.add_argument("--snapshot-dir", required=True)
    b.add_argument("--tau1", type=float, required=True)
    b.add_argument("--tau2", type=float, required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int)
    b.add_argument("--criterion", choices=("sum", "energy"), default="sum")
    b.add_argument("--kernel", choices=("width", "scaled"), default="width")
    b.add_argument("--order", help="ST-HOSVD mode order, 1-based, e.g. 1,2,3")
    b.set_defaults(func=cmd_rom_build)
    pr = rsub.add_parser("predict")
    pr.add_argument("--model", required=True)
    pr.add_argument("--theta", type=float, required=True)
    pr.add_argument("--out-u", required=True)
    pr.add_argument("--out-v", required=True)
    pr.set_defaults(func=cmd_rom_predict)

    c = sub.add_parser("compare", help="time-averaged relative errors")
    for name in ("ref-u", "ref-v", "approx-u", "approx-v"):
        c.add_argument(f"--{name}", required=True)
    c.set_defaults(func=cmd_compare)

    bench = sub.add_parser("bench", help="timing benchmarks")
    bsub = bench.add_subparsers(dest="bench_command", required=True)
    h = bsub.add_parser("hosvd", help="T-HOSVD vs ST-HOSVD SVD timings")
    h.add_argument("--input", required=True)
    h.add_argument("--ranks", required=True, help="one rank, or one per mode")
    h.add_argument("--order", help="1-based processing order, e.g. 1,2,3")
    h.add_argument("--repeats", type=int, default=3)
    h.set_defaults(func=cmd_bench_hosvd)

    r = sub.add_parser("report", help="errors, compression and speed-up at one theta")
    r.add_argument("--model", required=True)
    r.add_argument("--theta", type=float, required=True)
    r.add_argument("--config", required=True)
    r.add_argument("--repeats", type=int, default=3, help="predict repetitions (median)")
    r.add_argument("--keyvalue", action="store_true", help="machine-readable output")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except NumericalError as exc:
        _log(f"numerical error: {exc}")
        return EXIT_NUMERIC
    except (StorageError, OSError) as exc:
        _log(f"i/o error: {exc}")
        return EXIT_IO
    except ValueError as exc:
        _log(f"invalid argument: {exc}")
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
