"""Compiled vs pure-Python time-integration kernels.

Times the damper (RK4, one degree of freedom) and the six-storey Bouc-Wen
shear frame (both integration schemes) on the same excitation batch with
each backend, and checks that the responses agree.

    python3 bench/bench_kernels.py [--batch 200] [--repeat 3]
"""

import argparse
import time

import numpy as np

from codriven import _core
from codriven.benchmarks import BoucWenPair, DamperPair


def _best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _first(out):
    # simulate() returns several response histories; compare the first
    return np.asarray(out[0] if isinstance(out, tuple) else out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=200, help="excitations per call")
    ap.add_argument("--repeat", type=int, default=3, help="timing repeats (best is kept)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = _core.available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; only the python backend is available")
    rng = np.random.default_rng(args.seed)
    damper, frame = DamperPair(), BoucWenPair()
    X_d = rng.standard_normal((args.batch, damper.dim))
    X_b = rng.standard_normal((args.batch, frame.dim))
    ag = frame.features(X_b)
    cases = {
        "damper rk4": lambda: damper.eval_original_batch(X_d),
        "bouc-wen implicit": lambda: frame.simulate(ag, implicit=True),
        "bouc-wen explicit": lambda: frame.simulate(ag, implicit=False),
    }

    prev = _core.backend()
    rows = []
    try:
        for name, fn in cases.items():
            res = {}
            for b in backends:
                _core.use_backend(b)
                fn()  # warm-up
                res[b] = _best_of(fn, args.repeat)
            t_py = res["python"][0]
            t_c = res.get("compiled", (np.nan, None))[0]
            diff = np.nan
            if "compiled" in res:
                a, c = (_first(res[b][1]) for b in ("python", "compiled"))
                diff = float(np.max(np.abs(a - c)) / max(np.max(np.abs(a)), 1e-300))
            rows.append((name, t_py, t_c, t_py / t_c, diff))
    finally:
        _core.use_backend(prev)

    print(f"batch {args.batch}, best of {args.repeat}")
    print(f"{'kernel':<20}{'python [s]':>12}{'compiled [s]':>14}{'speed-up':>10}{'rel. diff':>12}")
    for name, t_py, t_c, sp, diff in rows:
        print(f"{name:<20}{t_py:>12.4f}{t_c:>14.4f}{sp:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
