"""Time the compiled Bellman backup against the numpy fallback.

    python3 benchmarks/bench_kernels.py --states 5 --actions 4 --depth 4
"""
import argparse
import time

import numpy as np

from morsdp import _kernels_py
from morsdp.augment import reachable_layers
from morsdp.core.utility import UNDISCOUNTED
from morsdp.instances import random_mdp

try:
    from morsdp import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--states", type=int, default=5)
    ap.add_argument("--actions", type=int, default=4)
    ap.add_argument("--objectives", type=int, default=2)
    ap.add_argument("--depth", type=int, default=4, help="layer whose backup is timed")
    ap.add_argument("--columns", type=int, default=3, help="value columns per backup")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, nargs="+", default=[1, 2, 4])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    m = random_mdp(rng, args.states, args.actions, args.objectives)
    layers = reachable_layers(0, m, UNDISCOUNTED, args.depth + 1)
    layer = layers[args.depth]
    v = rng.normal(size=(len(layers[args.depth + 1]), args.columns))
    arrays = (layer.state_ptr, layer.pair_action, layer.succ_ptr, layer.succ_idx, layer.succ_prob, v)
    print(f"layer {args.depth}: {len(layer)} states, {len(layer.pair_action)} pairs, "
          f"{len(layer.succ_idx)} successors, {args.columns} columns")

    base = best_of(lambda: _kernels_py.backup_min(*arrays), args.repeat)
    print(f"{'python':>12}  {base * 1e3:9.2f} ms")
    if compiled is None:
        print("compiled core not built")
        return
    ref = _kernels_py.backup_min(*arrays)
    for t in args.threads:
        got = compiled.backup_min(*arrays, t)
        same = np.array_equal(ref[0], got[0]) and np.array_equal(ref[1], got[1])
        sec = best_of(lambda: compiled.backup_min(*arrays, t), args.repeat)
        print(f"{f'compiled/{t}':>12}  {sec * 1e3:9.2f} ms  x{base / sec:6.1f}  identical={same}")


if __name__ == "__main__":
    main()
