"""Benchmark the pure-python and compiled backends on the hot kernels.

Usage: python benchmarks/compare_backends.py [d] [n_channels] [reps]

Times channel_rhs and qbm_rhs on realistic shapes, checks the two
implementations agree to rounding, and reports the speedup. Run it before
trusting DECOSIEVE_BACKEND=native on a new machine.
"""

import sys
import time

import numpy as np

from decosieve.backend import available_backends, get_impl


def _inputs(d, nj, seed=7):
    rng = np.random.default_rng(seed)

    def cmat(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    s = cmat(nj, d, d)
    ms = cmat(nj, d, d)
    ns = cmat(nj, d, d)
    ph = np.exp(1j * rng.standard_normal(d))
    rho = cmat(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    xt = cmat(d, d)
    xt = 0.5 * (xt + xt.conj().T)
    pt = cmat(d, d)
    pt = 0.5 * (pt + pt.conj().T)
    return [np.ascontiguousarray(a) for a in (s, ms, ns, ph, rho, xt, pt)]


def _time(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    d = int(sys.argv[1]) if len(sys.argv) > 1 else 32
    nj = int(sys.argv[2]) if len(sys.argv) > 2 else 64
    reps = int(sys.argv[3]) if len(sys.argv) > 3 else 50

    names = available_backends()
    print(f"backends available: {names}")
    if len(names) < 2:
        print("compiled backend missing; nothing to compare")
        return

    s, ms, ns, ph, rho, xt, pt = _inputs(d, nj)
    results = {}
    for name in names:
        impl = get_impl(name)
        t_ch, out_ch = _time(lambda: impl.channel_rhs(s, ms, ns, ph, rho), reps)
        t_qb, out_qb = _time(
            lambda: impl.qbm_rhs(xt, pt, rho, 0.3, 0.01, 0.2, 0.05), reps)
        results[name] = (t_ch, t_qb, out_ch, out_qb)
        print(f"{name:>7}: channel_rhs {t_ch * 1e3:8.3f} ms   "
              f"qbm_rhs {t_qb * 1e3:8.3f} ms   (d={d}, channels={nj})")

    ch_dev = np.max(np.abs(results["python"][2] - results["native"][2]))
    qb_dev = np.max(np.abs(results["python"][3] - results["native"][3]))
    print(f"agreement: channel_rhs {ch_dev:.3e}   qbm_rhs {qb_dev:.3e}")
    if ch_dev > 1e-12 or qb_dev > 1e-12:
        raise SystemExit("backends disagree beyond rounding")
    print(f"speedup:   channel_rhs x{results['python'][0] / results['native'][0]:.2f}   "
          f"qbm_rhs x{results['python'][1] / results['native'][1]:.2f}")


if __name__ == "__main__":
    main()
