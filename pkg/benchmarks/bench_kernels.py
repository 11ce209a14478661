"""Time the hot kernels under the numba backend and the numpy fallback.

Each backend runs in its own interpreter because the choice is made at import
time from ``D3OFDM_DISABLE_NUMBA``. Usage::

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
import d3ofdm
from d3ofdm import fec, numerics, ofdm
from d3ofdm.detectors import d3_bruteforce, d3_viterbi, glrt_mlsd
from d3ofdm.harness import config_from_dict, run_trial

repeat = int(sys.argv[1])
g = np.random.default_rng(1)
x = g.normal(size=(64, 512)) + 1j * g.normal(size=(64, 512))
seg = g.normal(size=(20_000, 7)) + 1j * g.normal(size=(20_000, 7))
lay7 = ofdm.SegmentLayout(7, "DS")
bpsk, qpsk = ofdm.constellation("BPSK"), ofdm.constellation("QPSK")
bits = g.integers(0, 2, (64, 256), dtype=np.uint8)
noisy = fec.conv_encode(bits) ^ (g.random((64, 2 * 256 + 12)) < 0.03).astype(np.uint8)
trial_cfg = config_from_dict({"scenario": "cmp-ds-k7-bpsk", "detectors": ["d3-va"]})

jobs = {
    "fft 64x512": lambda: numerics.fft(x),
    "viterbi DS7 QPSK 20k": lambda: d3_viterbi(seg, lay7, qpsk),
    "bruteforce DS7 BPSK 20k": lambda: d3_bruteforce(seg, lay7, bpsk),
    "glrt DS7 QPSK 20k": lambda: glrt_mlsd(seg, lay7, qpsk),
    "hard decoder 64x256": lambda: fec.viterbi_decode_hard(noisy),
    "frame trial DS7": lambda: run_trial(trial_cfg, 4, 0),
}
out = {"backend": d3ofdm.backend(), "times": {}}
for name, job in jobs.items():
    job()  # warm-up, includes compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        job()
        best = min(best, time.perf_counter() - t0)
    out["times"][name] = best
print(json.dumps(out))
"""


def run_backend(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("D3OFDM_DISABLE_NUMBA", None)
    if disable:
        env["D3OFDM_DISABLE_NUMBA"] = "1"
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    res = json.loads(proc.stdout.strip().splitlines()[-1])
    res["wall"] = time.perf_counter() - t0
    return res


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    fast = run_backend(False, args.repeat)
    slow = run_backend(True, args.repeat)
    print(f"{'kernel':28s} {fast['backend']:>10s} {slow['backend']:>10s} {'speed-up':>9s}")
    for name, t in fast["times"].items():
        u = slow["times"][name]
        print(f"{name:28s} {t * 1e3:8.2f}ms {u * 1e3:8.2f}ms {u / t:8.1f}x")
    print(f"{'process wall time':28s} {fast['wall']:9.1f}s {slow['wall']:9.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
