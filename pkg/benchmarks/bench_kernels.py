"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Workloads match what one pipeline run does: the band-pass over a subject's
144 x 11 epochs, the AR(2) generator for one synthetic subject, and one
SVM fit on a 1008-row training fold.
"""
import argparse
import time

import numpy as np

from restcal import _kernels
from restcal.dsp import BandpassSpec, design_butterworth_bandpass


def workloads(rng):
    sos = design_butterworth_bandpass(BandpassSpec()).sos
    epochs = rng.normal(size=(144 * 11, 1000))
    innov = rng.normal(size=(12, 400_000))
    x = rng.normal(size=(1008, 25))
    s = np.where(x[:, :3].sum(1) + rng.normal(size=1008) > 0, 1.0, -1.0)
    gram = x @ x.T
    return {
        "sosfilt (1584 x 1000)": ("sosfilt", (sos, epochs)),
        "ar2 (12 x 400k)": ("ar2", (1.45, -0.475, innov)),
        "svm_smo (1008 x 25)": ("svm_smo", (gram, s, 1.0, 1e-4, 1_000_000)),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("numba unavailable (or RESTCAL_DISABLE_NUMBA set); timing numpy only")
    print(f"{'kernel':<24}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for label, (name, call) in workloads(np.random.default_rng(args.seed)).items():
        t_np = best_of(_kernels.NUMPY_KERNELS[name], call, args.repeat)
        if _kernels.HAVE_NUMBA:
            jit = _kernels.NUMBA_KERNELS[name]
            jit(*call)  # compile outside the timed region
            t_nb = best_of(jit, call, args.repeat)
            print(f"{label:<24}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>8.1f}x")
        else:
            print(f"{label:<24}{'-':>10}{t_np:>10.4f}{'-':>9}")


if __name__ == "__main__":
    main()
