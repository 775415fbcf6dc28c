#!/usr/bin/env python3
"""
Performance comparison: exact Ryser permanents against Gurvits sampling,
and sequential against threaded parity-word evaluation
"""

import sys
import os
import time
from pathlib import Path

# Add src to Python path
src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))

# Change to project root to find .env file
os.chdir(Path(__file__).parent)

def time_call(fn, repeats=3):
    """Best wall time of ``repeats`` calls, and the last result"""
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return result, best

def run_permanent_comparison():
    """Exact against sampled permanents as the photon count grows"""
    print("⚡ Permanent: Ryser (exact) vs Gurvits (2397 samples, ε=0.05, δ=0.1)")
    print("="*60)

    import numpy as np
    from core.born_machine import ParityWord, parity_submatrix
    from core.interferometer import haar_unitary
    from core.permanent import EstimatorConfig, gurvits_estimate, ryser_permanent

    rng = np.random.default_rng(0)
    cfg = EstimatorConfig(epsilon=0.05, delta=0.1, seed=0)
    print(f"{'k':>3} {'ryser_s':>10} {'gurvits_s':>10} {'|error|':>10}")
    for k in (4, 8, 12, 16, 18):
        m = max(2 * k, k * k // 2)
        u = haar_unitary(m, rng).entries
        alpha = ParityWord(tuple(int(b) for b in rng.integers(0, 2, size=m)))
        w = parity_submatrix(u[:, :k], alpha)
        exact, ryser_time = time_call(lambda: ryser_permanent(w), repeats=1 if k >= 16 else 3)
        (estimate, _), gurvits_time = time_call(lambda: gurvits_estimate(w, cfg))
        print(f"{k:>3} {ryser_time:>10.4f} {gurvits_time:>10.4f} {abs(estimate - exact):>10.2e}")
    return True

def run_worker_comparison():
    """One loss-and-gradient evaluation with 1 and 4 worker threads"""
    print("\n⚡ Loss and gradient: sequential vs threaded parity words")
    print("="*60)

    import numpy as np
    from core.born_machine import BsbmSpec
    from core.interferometer import haar_random
    from core.permanent import EstimatorConfig
    from core.training import EmpiricalDistribution, KernelSpec, LossConfig, mmd2_loss_and_gradient

    m, k = 12, 3
    spec = BsbmSpec(m=m, k=k, mesh=haar_random(m, seed=1))
    rng = np.random.default_rng(2)
    rows = [tuple(int(b) for b in np.isin(np.arange(m), rng.choice(m, k, replace=False))) for _ in range(500)]
    data = EmpiricalDistribution.from_samples(rows)
    kernel = KernelSpec(m=m, sigma=1.0)

    results = {}
    for workers in (1, 4):
        cfg = LossConfig(batch_alphas=32, estimator=EstimatorConfig(n_samples=2000, seed=0), workers=workers)
        (loss, stderr, _), elapsed = time_call(lambda: mmd2_loss_and_gradient(data, spec, kernel, cfg))
        results[workers] = (loss, elapsed)
        print(f"   workers={workers}: {elapsed:.2f}s  loss {loss:.6f} ± {stderr:.6f}")

    print(f"   Speedup:    {results[1][1] / results[4][1]:.2f}x")
    print(f"   Results match: {'✅' if results[1][0] == results[4][0] else '❌'}")
    return results[1][0] == results[4][0]

def main():
    """Run the performance comparisons"""
    print("🔬 Boson Sampling Born Machine - Performance Analysis\n")

    try:
        success = run_permanent_comparison() and run_worker_comparison()
    except Exception as e:
        print(f"❌ Performance test failed: {str(e)}")
        import traceback
        traceback.print_exc()
        success = False

    print("\n" + "="*60)
    if success:
        print("🎉 Performance testing completed successfully!")
    else:
        print("❌ Performance testing failed.")

    return success

if __name__ == "__main__":
    sys.exit(0 if main() else 1)
