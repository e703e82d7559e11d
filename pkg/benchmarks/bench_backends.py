"""Compare the numba and pure-numpy backends on the same shooting workload.

Each backend runs in its own interpreter, because the backend is fixed at
import time by NODALSHOOT_BACKEND.

    python3 benchmarks/bench_backends.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time
import numpy as np
from nodalshoot import BACKEND, IntegratorConfig, shoot
from nodalshoot.model import SystemParams

cfg = IntegratorConfig()
scalar = SystemParams([1.0], [1.0], [[0.0]])
pair = SystemParams.coupled([1.0, 1.5], [1.0, 1.0], 0.05)
cases = [(scalar, [7.584]), (scalar, [104.19]), (pair, [37.0, 105.0])]

# warm-up (includes numba compilation or cache load)
t0 = time.perf_counter()
shoot(scalar, cfg, [1.0], sensitivity=True, n_samples=0)
warm = time.perf_counter() - t0

best = float("inf")
for _ in range(REPEAT):
    t0 = time.perf_counter()
    out = [float(shoot(p, cfg, a, sensitivity=True).final.u[0]) for p, a in cases]
    best = min(best, time.perf_counter() - t0)
print(json.dumps({"backend": BACKEND, "warmup_s": warm, "best_s": best, "u1": out}))
"""


def run_backend(name, repeat):
    env = dict(os.environ, NODALSHOOT_BACKEND=name)
    code = WORKLOAD.replace("REPEAT", str(repeat))
    proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    results = [run_backend(b, args.repeat) for b in ("numba", "numpy")]
    for r in results:
        print(f"{r['backend']:>6}: warm-up {r['warmup_s']:.3f} s, best of {args.repeat} {r['best_s']:.4f} s")
    same = all(abs(a - b) <= 1e-12 * max(1.0, abs(a)) for a, b in zip(results[0]["u1"], results[1]["u1"]))
    print(f"speed-up {results[1]['best_s'] / results[0]['best_s']:.1f}x; boundary values agree: {same}")


if __name__ == "__main__":
    main()
