"""Time the particle kernels: compiled extension against the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--particles N] [--steps S] [--threads T]

Each backend runs in a fresh interpreter (the backend is fixed at import);
both runs advance the same sampled ensemble and the script checks that the
final phase-space coordinates agree bit for bit.
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = """
import hashlib, json, sys, time
from vshell.core import ShellParams, make_log_grid
from vshell.steady_state import solve_shell
from vshell.dynamics import default_dt, kernels, sample_shell, step
n, steps, threads = map(int, sys.argv[1:4])
kernels.set_threads(threads)
model = solve_shell(ShellParams(1.0, 1.0, 0.1, 1.0, -2.0), make_log_grid(0.02, 2.0, 2000))
ens = sample_shell(model, n, 0)
dt = default_dt(ens)
m = None
step(ens, "self-consistent", dt)  # warm-up, builds the first sort order
t = time.perf_counter()
for _ in range(steps):
    step(ens, "self-consistent", dt, start_mass=m)
    m = ens.last_mass
elapsed = time.perf_counter() - t
digest = hashlib.sha256(ens.r.tobytes() + ens.w.tobytes()).hexdigest()
print(json.dumps(dict(backend=kernels.BACKEND_NAME, per_step_ms=1e3 * elapsed / steps, digest=digest)))
"""


def run(backend, args):
    env = dict(os.environ, VSHELL_KERNELS=backend)
    out = subprocess.run([sys.executable, "-c", WORKER, str(args.particles), str(args.steps), str(args.threads)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--particles", type=int, default=100_000)
    parser.add_argument("--steps", type=int, default=50)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    results = [run(b, args) for b in ("python", "compiled")]
    for r in results:
        print(f"{r['backend']:>9}: {r['per_step_ms']:8.2f} ms/step")
    py, cc = results
    print(f"  speedup: {py['per_step_ms'] / cc['per_step_ms']:.1f}x")
    print(f"identical: {py['digest'] == cc['digest']}")
    return 0 if py["digest"] == cc["digest"] else 1


if __name__ == "__main__":
    sys.exit(main())
