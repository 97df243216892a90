"""Compare the compiled training kernels against the NumPy reference.

Times the four kernel entry points on the default experiment geometry
(24-32-10 network, 120-sample client shards, batch 32) and, optionally, a
small end-to-end experiment under each backend via subprocesses.

Usage:
    python3 benchmarks/benchmark_backends.py            # kernel micro-benchmarks
    python3 benchmarks/benchmark_backends.py --full     # plus end-to-end runs
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from fedsim import _mlp_numpy

try:
    from fedsim import _mlp_c
except ImportError:
    _mlp_c = None

LAYER_SIZES = (24, 32, 10)
N_SAMPLES = 120
EPOCHS = 5
BATCH = 32


def problem(seed=0):
    rng = np.random.default_rng(seed)
    sizes = np.asarray(LAYER_SIZES, dtype=np.int64)
    n_params = int(
        sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))
    )
    params = rng.normal(scale=0.3, size=n_params)
    X = np.ascontiguousarray(rng.normal(size=(N_SAMPLES, LAYER_SIZES[0])))
    labels0 = rng.integers(0, LAYER_SIZES[-1], size=N_SAMPLES).astype(np.int64)
    perms = np.stack([rng.permutation(N_SAMPLES) for _ in range(EPOCHS)]).astype(
        np.int64
    )
    return params, sizes, X, labels0, perms


def best_of(fn, repeats):
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - start)
    return min(timings)


def kernel_benchmarks(repeats):
    params, sizes, X, labels0, perms = problem()
    act = _mlp_numpy.ACT_TANH
    cases = {
        "forward_probs": lambda impl: impl.forward_probs(params, sizes, act, X),
        "mean_loss": lambda impl: impl.mean_loss(params, sizes, act, X, labels0),
        "mean_grad": lambda impl: impl.mean_grad(params, sizes, act, X, labels0),
        "sgd_train (5 epochs)": lambda impl: impl.sgd_train(
            params, sizes, act, X, labels0, perms, BATCH, 0.01, 0.9
        ),
    }
    print(f"{'kernel':<22}{'numpy':>12}{'compiled':>12}{'speedup':>10}")
    for name, call in cases.items():
        numpy_s = best_of(lambda: call(_mlp_numpy), repeats)
        if _mlp_c is None:
            print(f"{name:<22}{numpy_s * 1e3:>10.3f}ms{'n/a':>12}{'n/a':>10}")
            continue
        compiled_s = best_of(lambda: call(_mlp_c), repeats)
        print(
            f"{name:<22}{numpy_s * 1e3:>10.3f}ms{compiled_s * 1e3:>10.3f}ms"
            f"{numpy_s / compiled_s:>9.1f}x"
        )
    print(
        "\nthe default routing uses the compiled sgd_train and the numpy "
        "batch kernels,\nwhichever is faster for each entry point"
    )


EXPERIMENT_SNIPPET = """\
import time
from fedsim.attacks import AttackConfig
from fedsim.data import DataConfig, PartitionSpec
from fedsim.fedreview import ReviewConfig
from fedsim.orchestrator import ExperimentConfig, run_experiment
import fedsim.backend

cfg = ExperimentConfig(
    num_clients=40, rounds=10, clients_per_round=8, reviewers_per_round=8,
    malicious_fraction=0.2, defense="fedreview",
    attack=AttackConfig(kind="scaling", lam=5.0), review=ReviewConfig(k=4.0),
    layer_sizes=(24, 32, 10), partition=PartitionSpec("iid", 40),
    data=DataConfig(samples_per_class=400), master_seed=1,
)
start = time.perf_counter()
records, _ = run_experiment(cfg)
elapsed = time.perf_counter() - start
print(f"{fedsim.backend.active_backend()}: {elapsed:.2f}s "
      f"({records[-1].test_accuracy:.2%} final accuracy)")
"""


def experiment_benchmark():
    print(
        "\nend-to-end experiment (40 clients, 10 rounds, reviewer defense):",
        flush=True,
    )
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("FEDSIM_PURE_PYTHON", None)
        if pure:
            env["FEDSIM_PURE_PYTHON"] = "1"
        subprocess.run([sys.executable, "-c", EXPERIMENT_SNIPPET], env=env, check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--repeats", type=int, default=20, help="repetitions per kernel (best-of)"
    )
    parser.add_argument(
        "--full", action="store_true", help="also time a small end-to-end experiment"
    )
    args = parser.parse_args()

    if _mlp_c is None:
        print("compiled extension not built; showing numpy timings only\n")
    kernel_benchmarks(args.repeats)
    if args.full:
        experiment_benchmark()


if __name__ == "__main__":
    main()
