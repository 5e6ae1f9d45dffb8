"""Time the compiled mixture log-density kernel against the numpy fallback.

    python bench/bench_kernels.py --json bench/results.json

Each case fits a density on ``n`` random points and scores ``m`` candidates,
which is what one TPE suggestion does twice (good and bad densities).
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import timeit

import numpy as np

from htaa._kernels import _kde_py
from htaa.kde import fit_encoded
from htaa.space import Categorical, LogUniformFloat, SearchSpace, UniformFloat, UniformInt

try:
    from htaa._kernels import _kde_ext
except ImportError:
    _kde_ext = None

SPACES = {
    "continuous": SearchSpace([(f"x{i}", UniformFloat(0.0, 1.0)) for i in range(4)]),
    "mixed": SearchSpace(
        [
            ("lr", LogUniformFloat(1e-5, 1e-1)),
            ("dropout", UniformFloat(0.0, 0.8)),
            ("layers", UniformInt(1, 8)),
            ("act", Categorical(("relu", "tanh", "elu"))),
        ]
    ),
}


def time_call(fn, args, repeat: int) -> float:
    number = max(1, int(0.05 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-7)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def run(sizes, m: int, repeat: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    for label, space in SPACES.items():
        for n in sizes:
            est = fit_encoded(space.sample_encoded(rng, n), space)
            U = space.sample_encoded(rng, m)
            args = (U, est.points, est.bandwidths, est.log_norm, space.kinds, space.levels)
            row = {"space": label, "n_points": n, "n_candidates": m,
                   "python_us": 1e6 * time_call(_kde_py.mixture_logpdf, args, repeat)}
            if _kde_ext is not None:
                row["compiled_us"] = 1e6 * time_call(_kde_ext.mixture_logpdf, args, repeat)
                row["speedup"] = row["python_us"] / row["compiled_us"]
                row["max_abs_diff"] = float(np.max(np.abs(_kde_ext.mixture_logpdf(*args) - _kde_py.mixture_logpdf(*args))))
            rows.append(row)
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[5, 20, 60, 300])
    ap.add_argument("--candidates", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)

    if _kde_ext is None:
        print("compiled extension not built; timing the numpy fallback only", file=sys.stderr)
    rows = run(args.sizes, args.candidates, args.repeat, args.seed)
    print(f"{'space':<11}{'n':>6}{'python us':>12}{'compiled us':>13}{'speedup':>9}")
    for r in rows:
        comp = f"{r['compiled_us']:13.1f}{r['speedup']:9.2f}" if "compiled_us" in r else f"{'-':>13}{'-':>9}"
        print(f"{r['space']:<11}{r['n_points']:>6}{r['python_us']:12.1f}{comp}")
    if args.json:
        doc = {"python": platform.python_version(), "numpy": np.__version__, "machine": platform.machine(),
               "results": rows}
        with open(args.json, "w") as f:
            json.dump(doc, f, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
