"""Time the compiled evaluator extension against the pure-numpy fallback.

Runs tape evaluation (values / first jet / second jet) on representative
expressions and a full quadruple-sampling pass, once per backend, in
subprocesses so each interpreter binds its backend exactly once. Usage:

    python3 benchmarks/bench_backends.py [--n 200000] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json
import sys
import time

import numpy as np

import reslab
from reslab.backend import tape_jet1, tape_jet2, tape_values

n = int(sys.argv[1])
repeat = int(sys.argv[2])

exprs = {
    "quadratic": "dot(v,v)",
    "relativistic": "sqrt(1 + dot(v,v))",
    "rossby": "v1 / (1 + dot(v,v))",
    "bump": "exp(1 - 1/(1 - ((2*norm(v) - 2.5)/1.5)^2))",
}

rng = np.random.default_rng(0)
X = rng.normal(size=(n, 2)) * 0.4  # keep the bump argument inside (-1, 1)

results = {"backend": reslab.BACKEND_NAME, "kernels": {}}


def best_of(fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


for name, src in exprs.items():
    tape = reslab.parse(src, 2).tape
    results["kernels"][f"values/{name}"] = best_of(lambda: tape_values(tape, X))
    results["kernels"][f"jet1/{name}"] = best_of(lambda: tape_jet1(tape, X))
    results["kernels"][f"jet2/{name}"] = best_of(lambda: tape_jet2(tape, X))

law = reslab.relativistic_law(2)
results["kernels"]["sample_quadruples/relativistic"] = best_of(
    lambda: reslab.sample_quadruples(law, n=max(n // 100, 100), seed=0)
)

json.dump(results, sys.stdout)
"""


def run_backend(backend, n, repeat):
    env = dict(os.environ, RESLAB_BACKEND=backend)
    proc = subprocess.run(
        [sys.executable, "-c", _WORKER, str(n), str(repeat)],
        capture_output=True,
        text=True,
        env=env,
    )
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"{backend} worker failed")
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200000, help="batch size")
    ap.add_argument("--repeat", type=int, default=5, help="take best of N")
    args = ap.parse_args()

    compiled = run_backend("compiled", args.n, args.repeat)
    python = run_backend("python", args.n, args.repeat)
    assert compiled["backend"] == "compiled" and python["backend"] == "python"

    width = max(len(k) for k in compiled["kernels"])
    print(f"batch n={args.n}, best of {args.repeat}")
    print(f"{'kernel':<{width}}  {'compiled':>10}  {'python':>10}  {'speedup':>8}")
    for key in compiled["kernels"]:
        tc = compiled["kernels"][key]
        tp = python["kernels"][key]
        print(f"{key:<{width}}  {tc * 1e3:>8.2f}ms  {tp * 1e3:>8.2f}ms  {tp / tc:>7.2f}x")


if __name__ == "__main__":
    main()
