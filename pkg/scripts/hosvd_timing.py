"""Per-stage SVD times of T-HOSVD and ST-HOSVD on a Schnakenberg snapshot tensor."""

import argparse
import dataclasses

from xdiff import io
from xdiff.fom import run_fom
from xdiff.metrics import timing_comparison


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default="schnakenberg2d")
    p.add_argument("--theta", type=float, default=0.6)
    p.add_argument("--t-final", type=float, default=1.0, help="1.0 gives 1001 slices at dt=0.001")
    p.add_argument("--rank", type=int, default=20)
    p.add_argument("--order", default="1,2,3")
    args = p.parse_args()

    cfg = dataclasses.replace(io.load_config(args.config), t_final=args.t_final)
    snap = run_fom(cfg, args.theta).u
    print("tensor dims", snap.shape)
    order = [int(k) - 1 for k in args.order.split(",")]
    result = timing_comparison(snap, [args.rank] * snap.ndim, order)
    print(result.to_text())


if __name__ == "__main__":
    main()
