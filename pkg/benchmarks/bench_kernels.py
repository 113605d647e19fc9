"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints per-kernel timings and the speed-up, plus an end-to-end k-NN timing.
"""

import argparse
import time

import numpy as np

from nlbi import kernels
from nlbi.distributions import CorpusSpec, generate_synthetic
from nlbi.index import NormalIndex
from nlbi.query import batch_query


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def workloads(rng):
    s = 5
    bounds = np.linspace(-1.0, 1.0, s + 1)
    n = 2000
    mu = rng.uniform(-0.5, 0.5, n)
    sigma = rng.uniform(0.05, 0.6, n)
    emin = -rng.uniform(0, 0.02, (n, s))
    emax = rng.uniform(0, 0.02, (n, s))
    ef = rng.uniform(-0.01, 0.01, n)
    locs = [np.sort(rng.uniform(-1, 1, 64)) for _ in range(200)]
    w = [rng.dirichlet(np.ones(64)) for _ in range(200)]

    def lb_scalar():
        for i in range(n):
            kernels.emd_lb(mu[i], sigma[i], emin[i], emax[i], ef[i], 0.1, 0.3, emin[0],
                           emax[0], ef[0], -1.0, 1.0, bounds)

    def lb_many():
        kernels.emd_lb_many(mu, sigma, emin, emax, ef, 0.1, 0.3, emin[0], emax[0], ef[0],
                            -1.0, 1.0, bounds)

    def br():
        for i in range(n):
            kernels.emd_br(-1.0 - mu[i], -0.5, 0.2, 1.0 + mu[i], -0.02, 0.02, -0.01, 0.01,
                           0.1 - mu[i], 0.7, -0.02, 0.02, 0.0, -1.0, 1.0, 1e-4)

    def cdf():
        for i in range(199):
            kernels.cdf_l1(locs[i], w[i], locs[i + 1], w[i + 1])

    def errors():
        for i in range(200):
            kernels.error_extrema(locs[i], w[i], 0.0, 0.5, -1.0, 1.0, bounds)

    return {"emd_lb x2000": lb_scalar, "emd_lb_many 2000": lb_many, "emd_br x2000": br,
            "cdf_l1 x199": cdf, "error_extrema x200": errors}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; only the Python backend is available")
    rng = np.random.default_rng(0)
    jobs = workloads(rng)
    results = {}
    for b in backends:
        kernels.set_backend(b)
        results[b] = {name: _time(fn, args.repeat) for name, fn in jobs.items()}

    data = generate_synthetic(CorpusSpec(3000, bins=32, clusters=10, layout="scatter"), 1)
    queries = generate_synthetic(CorpusSpec(10, bins=32, clusters=10, layout="scatter"), 2)
    for b in backends:
        kernels.set_backend(b)
        t = time.perf_counter()
        index = NormalIndex.build(data)
        results[b]["index build N=3000"] = time.perf_counter() - t
        results[b]["10 queries k=4"] = _time(lambda: batch_query(index, queries, 4), 1)

    print(f"{'kernel':<24}" + "".join(f"{b:>12}" for b in backends) + "     speed-up")
    for name in results[backends[0]]:
        row = [results[b][name] for b in backends]
        speed = f"{row[1] / row[0]:10.1f}x" if len(row) == 2 else ""
        print(f"{name:<24}" + "".join(f"{t * 1e3:10.2f}ms" for t in row) + speed)
    kernels.set_backend(backends[0])


if __name__ == "__main__":
    main()
