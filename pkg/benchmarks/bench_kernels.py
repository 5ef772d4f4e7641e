"""Compare the compiled kernels against the pure-numpy fallback.

Runs itself twice as a subprocess, once per MCEULER_KERNELS setting,
times the hot loops on identical inputs, and checks that both backends
produced bit-identical results (the package's contract, not just a
nicety).  Usage:

    python3 benchmarks/bench_kernels.py
"""

import hashlib
import json
import os
import subprocess
import sys
import time


def _child(backend: str) -> None:
    import numpy as np

    import mceuler
    from mceuler import _kernels
    from mceuler.brownian import path_values_batch
    from mceuler.estimator import mce

    assert mceuler.backend_name() == backend, mceuler.backend_name()

    n_rep, n_steps = 4096, 512
    wvals = path_values_batch(seed=0, first_replicate=1, count=n_rep, depth=9,
                              horizon_T=1.0)
    incs = np.diff(wvals, axis=1)
    xi = np.full(n_rep, 1.0)

    def time_it(fn, repeats=5):
        fn()  # warmup / jit compile
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            out = fn()
            best = min(best, time.perf_counter() - t0)
        return best, out

    results = {"backend": backend}

    elapsed, values = time_it(
        lambda: _kernels.euler_values_batch(
            _kernels.KIND_GINZBURG_LANDAU, 0.0, 0.0, 1.0 / n_steps, xi, incs
        )
    )
    results["euler_values_ms"] = elapsed * 1e3
    results["euler_steps_per_s"] = n_rep * n_steps / elapsed
    results["euler_sha"] = hashlib.sha256(values.tobytes()).hexdigest()

    model = mceuler.gbm(a=0.05, b=0.1)  # mild enough that the event is live
    y = _kernels.euler_values_batch(_kernels.KIND_GBM, 0.05, 0.1,
                                    1.0 / n_steps, xi, incs)
    from mceuler.dominator import omega_membership_batch

    elapsed, flags = time_it(lambda: omega_membership_batch(model, xi, y, incs)[0])
    results["omega_flags_ms"] = elapsed * 1e3
    results["omega_sha"] = hashlib.sha256(flags.tobytes()).hexdigest()

    t0 = time.perf_counter()
    est = mce(mceuler.ginzburg_landau(), mceuler.square_payoff, 256, 256**2, seed=0)
    results["mce_n256_s"] = time.perf_counter() - t0
    results["mce_value"] = est.value

    print(json.dumps(results))


def main() -> int:
    if len(sys.argv) > 1 and sys.argv[1] == "--child":
        _child(os.environ["MCEULER_KERNELS"])
        return 0

    reports = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, MCEULER_KERNELS=backend)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--child"],
            env=env,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return proc.returncode
        reports[backend] = json.loads(proc.stdout.strip().splitlines()[-1])

    nb, np_ = reports["numba"], reports["numpy"]
    print("%-28s %12s %12s %8s" % ("workload", "numba", "numpy", "speedup"))
    for key, unit in (
        ("euler_values_ms", "ms"),
        ("omega_flags_ms", "ms"),
        ("mce_n256_s", "s"),
    ):
        ratio = np_[key] / nb[key]
        print(
            "%-28s %9.2f %s %9.2f %s %7.2fx"
            % (key, nb[key], unit, np_[key], unit, ratio)
        )
    print("euler steps/s: numba %.1fM, numpy %.1fM"
          % (nb["euler_steps_per_s"] / 1e6, np_["euler_steps_per_s"] / 1e6))

    same = (
        nb["euler_sha"] == np_["euler_sha"]
        and nb["omega_sha"] == np_["omega_sha"]
        and nb["mce_value"] == np_["mce_value"]
    )
    print("bit-identical across backends:", "yes" if same else "NO")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
