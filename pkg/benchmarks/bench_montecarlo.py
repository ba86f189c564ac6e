"""Benchmark the Monte Carlo kernels: numba backend vs NumPy/Python fallback.

Runs the generation and chain samplers under the active backend, then
re-runs the identical workload in a subprocess with REPEATERSIM_NO_NUMBA=1
and checks the outputs are bit-identical before printing the timing table.

Usage: python benchmarks/bench_montecarlo.py [--trials N]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

WORKLOADS = (
    ("generation n=0", 0),
    ("chain n=2", 2),
    ("chain n=3", 3),
)


def run_workloads(trials: int):
    from repeatersim import montecarlo as mc
    from repeatersim.protocol import RepeaterParams

    params = RepeaterParams(excitation_prob=0.01, pulse_time=1e-6,
                            local_efficiency=1.0, swap_efficiency=2 / 3,
                            app_efficiency=0.5, dark_prob=0.0,
                            segment_length=1e-9)
    results = {}
    for label, level in WORKLOADS:
        cfg = mc.TrialConfig(seed=2024, n_trials=trials)
        sampler = mc.generation_times if level == 0 else (
            lambda p, c, lv=level: mc.chain_times(p, lv, c))
        sampler(params, cfg)          # warm-up (jit compilation)
        t0 = time.perf_counter()
        out = sampler(params, cfg)
        results[label] = {
            "seconds": time.perf_counter() - t0,
            "checksum": float(out.sum()),
            "mean": float(out.mean()),
        }
    return mc.BACKEND, results


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--trials", type=int, default=50_000)
    parser.add_argument("--emit-json", default=None, help=argparse.SUPPRESS)
    args = parser.parse_args()

    backend, results = run_workloads(args.trials)
    if args.emit_json:
        with open(args.emit_json, "w") as fh:
            json.dump({"backend": backend, "results": results}, fh)
        return

    if backend == "numpy":
        print("numba unavailable or disabled; nothing to compare against")
        _print_table({"numpy": results}, args.trials)
        return

    with tempfile.NamedTemporaryFile(suffix=".json", delete=False) as fh:
        out_path = fh.name
    env = dict(os.environ, REPEATERSIM_NO_NUMBA="1")
    subprocess.run([sys.executable, __file__, "--trials", str(args.trials),
                    "--emit-json", out_path], check=True, env=env)
    with open(out_path) as fh:
        fallback = json.load(fh)
    os.unlink(out_path)
    assert fallback["backend"] == "numpy"

    for label, _ in WORKLOADS:
        a = results[label]["checksum"]
        b = fallback["results"][label]["checksum"]
        assert a == b, f"backend mismatch on {label}: {a} vs {b}"
    print(f"outputs bit-identical across backends for {args.trials} trials\n")
    _print_table({"numba": results, "numpy": fallback["results"]}, args.trials)


def _print_table(columns, trials):
    backends = list(columns)
    header = f"{'workload':<16}" + "".join(f"{b + ' (s)':>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, _ in WORKLOADS:
        row = f"{label:<16}"
        times = [columns[b][label]["seconds"] for b in backends]
        row += "".join(f"{t:>14.4f}" for t in times)
        if len(times) == 2 and times[0] > 0:
            row += f"{times[1] / times[0]:>10.1f}x"
        print(row)


if __name__ == "__main__":
    main()
