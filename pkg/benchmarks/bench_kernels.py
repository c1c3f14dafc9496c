"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--samples N]
"""
import argparse
import timeit

import numpy as np

from edgeswitch.kernels import available_backends
from edgeswitch.trajgen import TaskKind, TaskSpec, TremorModel, quantized_trajectory

FSR = (3, 5, 4, 6, 2, 7, 9, 8, 20, 720, 12, 0, 1, 760, 3)


def bench(label, fn, number):
    best = min(timeit.repeat(fn, number=number, repeat=3)) / number
    print(f"  {label:<28} {best * 1e6:12.2f} us/call")
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=200_000)
    args = ap.parse_args()

    spec = TaskSpec(TaskKind.SPIRAL)
    q = quantized_trajectory(spec, TremorModel())
    coords = np.tile(q, (max(1, args.samples // len(q)), 1))[:args.samples]

    timings = {}
    for name, k in sorted(available_backends().items()):
        print(f"{name}:")
        t = {}
        t["deadband_run"] = bench(f"deadband_run ({len(coords)} samples)",
                                  lambda: k.deadband_run(coords, 50), 1)
        t["deadband_step"] = bench("deadband_step", lambda: k.deadband_step(10, 20, 30, 0, 0, 0, 50), 20_000)
        t["edge_sensors"] = bench("edge_sensors", lambda: k.edge_sensors(FSR, 500), 20_000)
        timings[name] = t
    if "cython" in timings:
        print("speedup (python / cython):")
        for key in timings["python"]:
            print(f"  {key:<28} {timings['python'][key] / timings['cython'][key]:12.1f}x")


if __name__ == "__main__":
    main()
