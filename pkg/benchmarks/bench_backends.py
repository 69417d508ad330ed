"""Compare the compiled and pure-NumPy kernel backends.

Times each hot kernel at pipeline-realistic shapes, then one short
training stage end to end per backend.  Run from the repository root:

    python3 benchmarks/bench_backends.py
"""

import argparse
import time

import numpy as np

from recall_forge import kernels
from recall_forge.config import DEFAULT_CONFIG, train_config_from
from recall_forge.encoder import init_params
from recall_forge.training import train_base
from recall_forge.world import WorldSpec, generate_world

# Stage-1 shapes under the default configuration: batch 64 queries of
# width 2*A*V = 60 against a 64-wide hidden layer and 32-dim embeddings.
BATCH = 64
QUERY_IN = 60
HIDDEN = 64
EMB = 32


def _best_of(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def kernel_cases(rng):
    x = rng.normal(size=(BATCH, QUERY_IN))
    w1 = rng.normal(size=(HIDDEN, QUERY_IN))
    b1 = rng.normal(size=HIDDEN)
    w2 = rng.normal(size=(EMB, HIDDEN))
    b2 = rng.normal(size=EMB)
    weights, biases = [w1, w2], [b1, b2]
    acts = kernels.tower_forward(x, weights, biases)
    d_out = rng.normal(size=(BATCH, EMB))
    z = rng.normal(size=(BATCH, EMB))
    zhat, norms = kernels.normalize_rows(z)
    a = rng.normal(size=(BATCH, EMB))
    b = rng.normal(size=(EMB, BATCH))

    return {
        "tower_forward": lambda: kernels.tower_forward(x, weights, biases),
        "tower_backward": lambda: kernels.tower_backward(x, weights, acts,
                                                         d_out.copy()),
        "normalize_rows": lambda: kernels.normalize_rows(z),
        "normalize_rows_backward": lambda: kernels.normalize_rows_backward(
            zhat, norms, d_out),
        "matmul_nn": lambda: kernels.matmul_nn(a, b),
        "matmul_nt": lambda: kernels.matmul_nt(a, a),
        "matmul_tn": lambda: kernels.matmul_tn(a, a),
    }


def bench_kernels(repeats: int) -> None:
    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)
    print(f"{'kernel':<26} {'cython':>12} {'python':>12} {'ratio':>8}")
    for name, fn in cases.items():
        timings = {}
        for backend in ("cython", "python"):
            kernels.use(backend)
            fn()  # warm up
            timings[backend] = _best_of(fn, repeats)
        ratio = timings["python"] / timings["cython"]
        print(f"{name:<26} {timings['cython'] * 1e6:>10.1f}us "
              f"{timings['python'] * 1e6:>10.1f}us {ratio:>7.2f}x")


def bench_training(steps: int) -> None:
    spec = WorldSpec(num_attributes=4, values_per_attribute=4, num_items=260,
                     num_queries=90, edits_per_query=1,
                     confusables_per_query=2, feature_noise_sigma=0.05,
                     seed=11)
    world = generate_world(spec)
    init = init_params(2 * spec.feature_dim, spec.feature_dim, seed=12)
    cfg = train_config_from(DEFAULT_CONFIG, "stage1")
    cfg.batch_size, cfg.steps, cfg.seed = 24, steps, 13
    print(f"\ntrain_base, {steps} steps, batch {cfg.batch_size}:")
    for backend in ("cython", "python"):
        kernels.use(backend)
        start = time.perf_counter()
        train_base(init, world.queries, cfg, world=world)
        print(f"  {backend:<8} {time.perf_counter() - start:.3f}s")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=300,
                        help="timing repeats per kernel (best-of)")
    parser.add_argument("--train-steps", type=int, default=120,
                        help="steps for the end-to-end training comparison")
    args = parser.parse_args()

    if "cython" not in kernels.available_backends():
        raise SystemExit("compiled backend missing; build the extension "
                         "in place first")
    original = kernels.active_name()
    try:
        bench_kernels(args.repeats)
        bench_training(args.train_steps)
    finally:
        kernels.use(original)


if __name__ == "__main__":
    main()
