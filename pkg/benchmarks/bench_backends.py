"""Time the hot kernels on the numba and numpy backends.

Each backend runs in a fresh interpreter because the choice is made at
import time from ``MAGSPEC_NO_NUMBA``. Usage::

    python3 benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

_CHILD = r"""
import json, sys, time
import numpy as np
from magspec import kernels
from magspec.model3d import ModelParams, build_stencil

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)

def best(fn):
    fn()   # warm-up, includes JIT compilation
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); ts.append(time.perf_counter() - t0)
    return min(ts)

p = ModelParams(gamma=1.0, theta=0.3, h=0.01)
st = build_stencil(p)
u = rng.normal(size=p.shape) + 1j * rng.normal(size=p.shape)
out = np.empty_like(u)
res = {"backend": kernels.BACKEND}
res["peierls_apply_ms"] = 1e3 * best(lambda: st.apply(u, out))

n = 200000
d = 2.0 + rng.random(n); e = -rng.random(n - 1); off2 = e * e
res["sturm_count_ms"] = 1e3 * best(lambda: kernels.sturm_count(d, off2, 1.0))
rhs = rng.normal(size=n)
res["tridiag_solve_ms"] = 1e3 * best(lambda: kernels.tridiag_solve(d, e, rhs))
tw = np.ones(p.shape[2] - 1); tw[0] = np.sqrt(2.0)
res["tline_solve_ms"] = 1e3 * best(lambda: kernels.tline_solve(u, st.ct, tw, 1.0, out))
print(json.dumps(res))
"""


def run(no_numba: bool, repeat: int) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["MAGSPEC_NO_NUMBA"] = "1"
    else:
        env.pop("MAGSPEC_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", _CHILD, str(repeat)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    keys = [k for k in fast if k.endswith("_ms")]
    print(f"{'kernel':<20}{fast['backend']:>12}{slow['backend']:>12}{'speed-up':>10}")
    for k in keys:
        print(f"{k[:-3]:<20}{fast[k]:>12.3f}{slow[k]:>12.3f}{slow[k] / fast[k]:>10.1f}")


if __name__ == "__main__":
    main()
