#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the hot kernels head to head in-process, then two end-to-end tasks
(a near-collision transit and a Melnikov derivative evaluation) in
subprocesses so each runs under its own backend selection.
"""

import os
import subprocess
import sys
import time
import timeit

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from pcrtbp import _purepy  # noqa: E402

try:
    from pcrtbp import _core
except ImportError:
    _core = None


def time_call(fn, *args, repeat=5, number=200):
    best = min(timeit.repeat(lambda: fn(*args), repeat=repeat, number=number))
    return best / number


def kernel_table():
    rng = np.random.default_rng(1)
    y4 = rng.uniform(0.3, 2.0, 4)
    y3 = [0.2, 1.0, 0.5]
    s_nodes = np.geomspace(1e-3, 100.0, 2048)
    rows = []
    cases = [
        ("rhs_polar_cm", ("rhs_polar_cm", (0.0, y4, 1e-3)), 2000),
        ("rhs_regularized", ("rhs_regularized", (0.0, y4, 1e-3)), 2000),
        ("rhs_reduced", ("rhs_reduced", (0.0, y3, 1e-3, 0.0)), 2000),
        ("melnikov_f1[2048]", ("melnikov_f1", (s_nodes, 1.3)), 200),
        ("melnikov_di1[2048]", ("melnikov_di1", (s_nodes, 1.3)), 200),
        (
            "quad_cert(di1)",
            ("quad_cert", (0, 1.0, 0.0, 1e-3, 100.0, np.pi / 4, 1e-11, 24)),
            50,
        ),
    ]
    for label, (name, args), number in cases:
        pure = time_call(getattr(_purepy, name), *args, number=number)
        if _core is not None:
            comp = time_call(getattr(_core, name), *args, number=number)
            rows.append((label, pure, comp, pure / comp))
        else:
            rows.append((label, pure, float("nan"), float("nan")))
    return rows


END_TO_END = {
    "transit(nu=1e-4)": (
        "from pcrtbp import localmap; localmap.transit(1e-4, 0.3, 1e-3, 0.0, 0.1)"
    ),
    "melnikov_derivative": (
        "from pcrtbp import melnikov; melnikov.melnikov_plus_derivative(1.0)"
    ),
    "collision_trace": (
        "from pcrtbp import manifolds;"
        "manifolds.trace_collision_manifold("
        "manifolds.FiberSeed('+', 0.7), manifolds.SectionSpec(0.2, 0.0), 1e-3)"
    ),
}


def end_to_end(label, code, pure):
    env = dict(os.environ)
    if pure:
        env["PCRTBP_PURE"] = "1"
    else:
        env.pop("PCRTBP_PURE", None)
    script = (
        "import time\n"
        f"{code}\n"  # warm up imports and caches
        "t0 = time.time()\n"
        "for _ in range(3):\n"
        f"    {code}\n"
        "print((time.time() - t0) / 3)\n"
    )
    out = subprocess.run(
        [sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True
    )
    return float(out.stdout.strip().splitlines()[-1])


def main():
    from pcrtbp.backend import BACKEND

    print(f"default backend: {BACKEND}")
    if _core is None:
        print("compiled extension not built; pure-Python timings only\n")
    print(f"{'kernel':24s} {'pure [us]':>12s} {'compiled [us]':>14s} {'speedup':>9s}")
    for label, pure, comp, ratio in kernel_table():
        print(f"{label:24s} {pure*1e6:12.2f} {comp*1e6:14.2f} {ratio:9.1f}x")
    print()
    print(f"{'end-to-end':24s} {'pure [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>9s}")
    for label, code in END_TO_END.items():
        tp = end_to_end(label, code, pure=True)
        tc = end_to_end(label, code, pure=False) if _core is not None else float("nan")
        print(f"{label:24s} {tp*1e3:12.1f} {tc*1e3:14.1f} {tp/tc:9.1f}x")


if __name__ == "__main__":
    main()
