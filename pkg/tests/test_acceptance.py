"""Acceptance suite: one test per criterion, at the stated tolerances.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per
criterion.  Criterion 8 needs the real MNIST IDX files on disk (pass the
directory via WAVEFT_MNIST_DIR); it is skipped with an explicit message
when the data is absent, since the package deliberately does not download
datasets.
"""

import os
import time

import numpy as np
import pytest

from waveft import adapters as ad
from waveft import interpolation as ip
from waveft import mnist
from waveft import rankscan as rs
from waveft import wavelets as wv
from waveft.rng import derive_seed
from waveft.training import TrainConfig, mse, train_linear


def _report(num, name):
    print(f"\nACCEPTANCE {num} ({name}): PASS")


def test_01_wavelet_correctness():
    """All 8 families, 50 random shapes <= 128x128: reconstruction and
    adjoint mismatch <= 1e-8, in under 30 s."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)
    shapes = [tuple(int(v) for v in rng.integers(2, 129, size=2))
              for _ in range(50)]
    worst_rec = worst_adj = 0.0
    for m, n in shapes:
        level = int(rng.integers(1, wv.max_level(m, n) + 1))
        for family in wv.FAMILIES:
            spec = wv.make_wavelet(family, level)
            X = rng.standard_normal((m, n))
            grid = wv.dwt2(X, spec)
            rec = np.max(np.abs(wv.idwt2(grid, spec, (m, n)) - X))
            C = rng.standard_normal(grid.data.shape)
            G = rng.standard_normal((m, n))
            lhs = np.sum(wv.idwt2(wv.CoeffGrid(C, spec, (m, n)), spec, (m, n)) * G)
            rhs = np.sum(C * wv.dwt2_adjoint(G, spec, (m, n)).data)
            adj = abs(lhs - rhs) / (1.0 + abs(lhs))
            worst_rec = max(worst_rec, rec)
            worst_adj = max(worst_adj, adj)
    elapsed = time.perf_counter() - t0
    assert worst_rec <= 1e-8, f"reconstruction error {worst_rec:.3e}"
    assert worst_adj <= 1e-8, f"adjoint mismatch {worst_adj:.3e}"
    assert elapsed < 30.0, f"took {elapsed:.1f}s"
    _report(1, f"wavelet correctness: rec {worst_rec:.2e}, adj {worst_adj:.2e}, "
               f"{elapsed:.1f}s")


def test_02_gradient_correctness():
    """20 random instances (shapes <= 32x32, p <= 64) across the three
    adapter kinds: analytic gradients vs central differences, rel err <= 1e-5."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1002)
    kinds = ["waveft", "shira", "lora"] * 7
    worst = 0.0
    for inst, kind in enumerate(kinds[:20]):
        m, n = (int(v) for v in rng.integers(4, 33, size=2))
        b = int(rng.integers(1, 4))
        W0 = rng.standard_normal((m, n))
        x = rng.standard_normal((n, b))
        target = rng.standard_normal((m, b))
        if kind == "waveft":
            p = int(rng.integers(1, 65))
            a = ad.WaveletAdapter.create((m, n), p, seed=inst, level=1,
                                         lam=1.5, init="gaussian")
        elif kind == "shira":
            p = int(rng.integers(1, 65))
            a = ad.SparseAdapter.create((m, n), p, seed=inst, lam=0.8,
                                        init="gaussian")
        else:
            a = ad.LowRankAdapter.create((m, n), rank=2, seed=inst, alpha=2.0)
            a.B += 0.3 * rng.standard_normal(a.B.shape)

        _, dpred = mse(a.forward(W0, x), target)
        grads = a.grad(x, dpred)
        h = 1e-5
        for name, arr in a.trainables().items():
            flat = arr.ravel()
            g = grads[name].ravel()
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + h
                lp = mse(a.forward(W0, x), target)[0]
                flat[i] = old - h
                lm = mse(a.forward(W0, x), target)[0]
                flat[i] = old
                num = (lp - lm) / (2 * h)
                rel = abs(num - g[i]) / max(1e-6, abs(num), abs(g[i]))
                worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-5, f"gradient rel err {worst:.3e}"
    assert elapsed < 30.0, f"took {elapsed:.1f}s"
    _report(2, f"gradient correctness: worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_03_low_rank_bottleneck():
    """50 random factorized updates: rank <= r and inputs orthogonal to A's
    columns map to ~zero (<= 1e-10 * ||x||)."""
    rng = np.random.default_rng(1003)
    for _ in range(50):
        m, n = (int(v) for v in rng.integers(6, 41, size=2))
        r = int(rng.integers(1, min(m, n) // 2 + 1))
        B = rng.standard_normal((m, r))
        A = rng.standard_normal((n, r))
        dW = ad.LowRankAdapter((m, n), B, A).delta()
        assert rs.numerical_rank(dW) <= r
        x = rng.standard_normal(n)
        x -= A @ np.linalg.lstsq(A, x, rcond=None)[0]
        assert np.max(np.abs(dW @ x)) <= 1e-10 * np.linalg.norm(x)
    _report(3, "low-rank bottleneck: rank cap and kernel over 50 instances")


def test_04_block_sparse_interpolation():
    """50 planted instances (m, n <= 128, k <= 8): exact support containment,
    interpolation residual <= 1e-8, rank(update) == rank(active residuals)."""
    rng = np.random.default_rng(1004)
    for i in range(50):
        m, n = (int(v) for v in rng.integers(10, 129, size=2))
        k = int(rng.integers(1, 9))
        extra = int(rng.integers(2, 10))
        prob, _ = ip.planted_problem(m, n, k, per_row_extra=extra,
                                     seed=derive_seed(1004, i))
        pivots = ip.find_pivot_columns(prob)
        assert pivots is not None, f"instance {i}: pivot block not found"
        dW = ip.construct_delta(prob, pivots)
        outside = dW.copy()
        outside[prob.support.rows, prob.support.cols] = 0.0
        assert np.all(outside == 0.0)
        scale = max(1.0, float(np.max(np.abs(prob.Y))))
        resid = np.max(np.abs((prob.W0 + dW) @ prob.X - prob.Y))
        assert resid <= 1e-8 * scale, f"instance {i}: residual {resid:.3e}"
        Z = prob.residual_targets()
        assert rs.numerical_rank(dW) == rs.numerical_rank(Z[prob.active_rows()])
    _report(4, "block-sparse interpolation: all three conclusions, 50 instances")


def test_05_gradient_capacity_full_size():
    """784x784, k=5, p=15,680, Adam 0.01 with gamma=0.75 every 500 epochs for
    5,000 epochs: final MSE <= 1e-6 x initial; p=392 control fails."""
    cfg = TrainConfig(lr=0.01, gamma=0.75, step_epochs=500, epochs=5000,
                      batch_size=5, seed=0, loss="mse")
    report, success = ip.capacity_experiment(784, 5, 15_680, method="shira",
                                             train_config=cfg, seed=0)
    ratio = report.final_loss / report.initial_loss
    assert success, f"full run ratio {ratio:.3e}"

    control_cfg = TrainConfig(lr=0.01, gamma=0.75, step_epochs=500,
                              epochs=5000, batch_size=5, seed=0, loss="mse")
    control, control_success = ip.capacity_experiment(
        784, 5, 392, method="shira", train_config=control_cfg, seed=0
    )
    control_ratio = control.final_loss / control.initial_loss
    assert not control_success, f"control unexpectedly reached {control_ratio:.3e}"
    _report(5, f"capacity: ratio {ratio:.1e}, control ratio {control_ratio:.1e}")


def test_06_union_bound_and_occupancy():
    """Exact binomial recurrence gives 1.3e-2 +- 1e-3 (and <= 2e-2) for
    (15680, 784, 5); min-row-occupancy >= 5 in >= 98/100 seeds."""
    tail, union = ip.row_occupancy_bound(15_680, 784, 5)
    assert abs(union - 1.3e-2) <= 1e-3, f"union bound {union:.4e}"
    assert union <= 2e-2
    hits = 0
    for s in range(100):
        sup = ad.sample_support(784, 784, 15_680, derive_seed(0, 4, s))
        hits += int(sup.row_occupancy().min() >= 5)
    assert hits >= 98, f"min occupancy held in only {hits}/100 seeds"
    _report(6, f"union bound {union:.4e}, occupancy {hits}/100")


def test_07_rank_scan():
    """(1280, 2048): mean rank strictly increases over p = (m+n)*{1,2,3} and
    the median at 3(m+n) reaches 0.999 * 1280 over 20 trials; empirical
    full-rank frequency at n=512 matches exp(-2 exp(-c)) within +-0.15."""
    m, n = 1280, 2048
    cfg = rs.RankScanConfig(shape=(m, n),
                            p_grid=[m + n, 2 * (m + n), 3 * (m + n)],
                            trials=20, master_seed=0)
    result = rs.rank_scan(cfg)
    means = [row[1] for row in result.summary]
    assert means[0] < means[1] < means[2], f"means not increasing: {means}"
    median_at_3 = result.summary[2][5]
    assert median_at_3 >= 0.999 * 1280, f"median {median_at_3}"

    diffs = []
    for c in (0, 2):
        nn = 512
        p = int(round(nn * (np.log(nn) + c)))
        scan = rs.rank_scan(rs.RankScanConfig(shape=(nn, nn), p_grid=[p],
                                              trials=200, master_seed=c + 100))
        freq = scan.summary[0][4]
        _, pred = rs.full_rank_asymptote(nn, p)
        assert abs(freq - pred) <= 0.15, f"c={c}: {freq:.3f} vs {pred:.3f}"
        diffs.append(abs(freq - pred))
    _report(7, f"rank scan: means {[f'{v:.1f}' for v in means]}, "
               f"median {median_at_3:.0f}, asymptote diffs "
               f"{[f'{d:.3f}' for d in diffs]}")


def _mnist_dir():
    d = os.environ.get("WAVEFT_MNIST_DIR")
    if not d:
        return None
    paths = [os.path.join(d, f) for f in mnist.TRAIN_FILES + mnist.TEST_FILES]
    return d if all(os.path.exists(p) for p in paths) else None


@pytest.mark.skipif(
    _mnist_dir() is None,
    reason="real MNIST IDX files not present (set WAVEFT_MNIST_DIR); "
           "the package ingests but never downloads data",
)
def test_08_mnist_ordering():
    """Over 3 seeds at p=794: mean SHiRA accuracy beats LoRA r=1 and is within
    0.005 of (or above) WaveFT; dense-budget SHiRA (p=7840) reaches 0.90."""
    train, test = mnist.find_data(_mnist_dir())
    spec = mnist.SweepSpec(methods=("lora", "shira", "waveft"),
                           lora_ranks=(1,), sparse_budgets=(794,),
                           seeds=(0, 1, 2))
    table = mnist.run_sweep(train, test, spec)
    curve = {(m, p): acc for m, p, acc, _std, _n in mnist.accuracy_curve(table)}
    shira = curve[("shira", 794)]
    lora = curve[("lora", 794)]
    waveft = curve[("waveft", 794)]
    assert shira > lora, f"shira {shira:.4f} <= lora {lora:.4f}"
    assert shira >= waveft - 0.005, f"shira {shira:.4f} vs waveft {waveft:.4f}"

    full_spec = mnist.SweepSpec(methods=("shira",), sparse_budgets=(7840,),
                                seeds=(0,))
    full = mnist.run_sweep(train, test, full_spec)[0][3]
    assert full >= 0.90, f"dense-budget accuracy {full:.4f}"
    _report(8, f"mnist ordering: shira {shira:.4f} > lora {lora:.4f}, "
               f"waveft {waveft:.4f}, dense {full:.4f}")


def test_09_budget_arithmetic():
    """Reference census at r=1 totals 1,451,520; fixed allocation is 2,592
    per layer across 560 layers."""
    total = ad.lora_budget(ad.SDXL_ATTENTION_CENSUS, 1)
    assert total == 1_451_520
    alloc = ad.allocate_budget(ad.SDXL_ATTENTION_CENSUS, total, "fixed")
    assert len(alloc) == 560
    assert set(alloc) == {2592}
    _report(9, "budget arithmetic: 1,451,520 at r=1; 2,592 x 560 fixed")


def test_10_merge_no_overhead():
    """Merged-weight inference equals the training-time forward to 1e-10 on
    100 random instances; doubling lambda equals doubling the values exactly."""
    rng = np.random.default_rng(1010)
    worst = 0.0
    for i in range(100):
        m, n = (int(v) for v in rng.integers(3, 24, size=2))
        kind = ("waveft", "shira", "lora")[i % 3]
        if kind == "waveft":
            a = ad.WaveletAdapter.create((m, n), p=min(8, m * n), seed=i,
                                         level=1, lam=2.5, init="gaussian")
        elif kind == "shira":
            a = ad.SparseAdapter.create((m, n), p=min(8, m * n), seed=i,
                                        lam=0.6, init="gaussian")
        else:
            a = ad.LowRankAdapter.create((m, n), rank=2, seed=i)
            a.B += rng.standard_normal(a.B.shape)
        W0 = rng.standard_normal((m, n))
        Wf = ad.merge(W0, a)
        x = rng.standard_normal(n)
        worst = max(worst, float(np.max(np.abs(Wf @ x - a.forward(W0, x)))))
    assert worst <= 1e-10, f"merge/forward mismatch {worst:.3e}"

    sup = ad.sample_support(8, 8, 10, seed=5)
    v = np.random.default_rng(5).standard_normal(10)
    W0 = np.random.default_rng(6).standard_normal((8, 8))
    twice_lam = ad.merge(W0, ad.SparseAdapter((8, 8), sup, v, lam=2.0))
    twice_val = ad.merge(W0, ad.SparseAdapter((8, 8), sup, 2.0 * v, lam=1.0))
    assert np.array_equal(twice_lam, twice_val)
    spec = wv.make_wavelet("db1", 2)
    gsup = ad.sample_support(8, 8, 10, seed=5)
    wl = ad.merge(W0, ad.WaveletAdapter((8, 8), gsup, v, spec, lam=2.0))
    wv_ = ad.merge(W0, ad.WaveletAdapter((8, 8), gsup, 2.0 * v, spec, lam=1.0))
    assert np.array_equal(wl, wv_)
    _report(10, f"merge/no-overhead: worst mismatch {worst:.2e}, "
                "lambda-doubling exact")
