"""Time the ensemble kernels on the numba and pure-numpy backends.

The backend is fixed at import time, so each one runs in its own
subprocess with ``MRQSIM_DISABLE_NUMBA`` set accordingly.

    python benchmarks/bench_kernels.py --n 100000 --repeat 20
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

KERNELS = ("rotate", "free_evolve", "weighted_sum", "evolved_sum", "mste")


def _child(n, repeat):
    from mrqsim import _accel
    from mrqsim.blochsim import kernels, make_ensemble, modified_stimulated_echo

    ens = make_ensemble(n, t1=1.0, t2=0.1, spread=2 * np.pi * 200, seed=3)
    ens = ens.evolve(m=kernels.rotate(ens.m, kernels.rotation_matrix("x", 1.1)))
    r = kernels.rotation_matrix("y", 0.7)
    calls = {
        "rotate": lambda: kernels.rotate(ens.m, r),
        "free_evolve": lambda: kernels.free_evolve(ens.m, ens.delta_omega, 1e-3, 1.0, 0.1),
        "weighted_sum": lambda: kernels.weighted_sum(ens.m, ens.weight),
        "evolved_sum": lambda: kernels.evolved_sum(ens.m, ens.delta_omega, ens.weight,
                                                   1e-3, 1.0, 0.1),
        "mste": lambda: modified_stimulated_echo(ens, 2e-3, 3e-3, 2e-3, 3e-3, np.pi),
    }
    out = {"backend": _accel.backend_name(), "n": n, "seconds": {}, "checksum": {}}
    for name, fn in calls.items():
        res = fn()  # warm-up, includes JIT compilation
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn()
        out["seconds"][name] = (time.perf_counter() - t0) / repeat
        arr = res.final.net_magnetization() if name == "mste" else np.asarray(res)
        out["checksum"][name] = float(np.sum(arr))
    print(json.dumps(out))


def run_backend(disable_numba, n, repeat):
    env = dict(os.environ, MRQSIM_DISABLE_NUMBA="1" if disable_numba else "0")
    proc = subprocess.run([sys.executable, __file__, "--child", "--n", str(n),
                           "--repeat", str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=10)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.child:
        _child(args.n, args.repeat)
        return 0

    nb = run_backend(False, args.n, args.repeat)
    npy = run_backend(True, args.n, args.repeat)
    print(f"n = {args.n}, repeat = {args.repeat}")
    print(f"{'kernel':<14}{nb['backend']:>12}{npy['backend']:>12}{'speedup':>10}{'|diff|':>12}")
    for k in KERNELS:
        a, b = nb["seconds"][k], npy["seconds"][k]
        diff = abs(nb["checksum"][k] - npy["checksum"][k])
        print(f"{k:<14}{a * 1e3:>10.3f}ms{b * 1e3:>10.3f}ms{b / a:>9.2f}x{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
