"""End-to-end acceptance checks.

Each test exercises one published claim at its stated tolerance and
prints a single PASS/FAIL line (visible with pytest -s or in the
captured output of a failing run). Timing bounds are asserted alongside
the numeric checks.
"""

import time

import numpy as np

from flowpipe import (
    AnalyticLinearModel,
    CompiledEngine,
    CostParams,
    BenchCase,
    LatentBatch,
    NoiseSchedule,
    SeededMockModel,
    adaptive_forward,
    batched_velocity_step,
    build_time_window_schedule,
    is_homogeneous,
    make_conditioning,
    run_benchmark,
    run_stream,
    run_vanilla,
    sequential_velocity_step,
    window_params,
)
from flowpipe.cli import main


def report(num: int, ok: bool, detail: str) -> None:
    print(f"CRITERION {num} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    assert ok, f"criterion {num}: {detail}"


def max_rel_err(got: np.ndarray, want: np.ndarray) -> float:
    denom = np.maximum(np.abs(want), 1e-300)
    return float(np.max(np.abs(got - want) / denom)) if got.size else 0.0


def test_criterion_1_batched_vs_sequential():
    sched = build_time_window_schedule()
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        b = int(rng.integers(1, 65))
        ts = rng.choice(sched.inference_grid, size=b)
        batch = LatentBatch(
            data=rng.standard_normal((b, 16)),
            timesteps=ts,
            ids=np.arange(b, dtype=np.int64),
        )
        model_out = rng.standard_normal((b, 16))
        stepped = batched_velocity_step(model_out, batch, sched)
        for i in range(b):
            row, t_next = sequential_velocity_step(
                model_out[i], batch.data[i], float(ts[i]), sched
            )
            worst = max(worst, max_rel_err(stepped.data[i], row))
            assert stepped.timesteps[i] == t_next
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5.0
    report(1, ok, f"200 batches, max rel err {worst:.2e} (tol 1e-9), {elapsed:.2f}s (<5s)")


def test_criterion_2_stream_vs_vanilla():
    start = time.perf_counter()
    worst = 0.0
    counts_ok = True
    for m in (1, 4, 32):
        for n in (1, 2, 4, 8):
            sched = build_time_window_schedule(inference_steps=n)
            model = SeededMockModel(dim=8, seed=2024)
            cond = make_conditioning(embedding=np.zeros(8))
            sr, ss = run_stream(m, n, model, cond, 77, sched)
            vr, vs = run_vanilla(m, n, model, cond, 77, sched)
            counts_ok &= ss.model_calls == m + n - 1
            counts_ok &= vs.model_calls == m * n
            by_id = {r.id: r.latent for r in vr}
            for r in sr:
                worst = max(worst, max_rel_err(r.latent, by_id[r.id]))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and counts_ok and elapsed < 10.0
    report(
        2,
        ok,
        f"12 (m,n) combos, max rel err {worst:.2e} (tol 1e-9), "
        f"call counts {'exact' if counts_ok else 'WRONG'}, {elapsed:.2f}s (<10s)",
    )


def test_criterion_3_dispatch_equivalence():
    sched = build_time_window_schedule(inference_steps=8)
    mock = SeededMockModel(dim=6, seed=3)
    aux_model = AnalyticLinearModel(dim=6, aux_scales=(0.5,))
    engines = {
        "mock": CompiledEngine(mock, per_call_overhead_us=0.0),
        "aux": CompiledEngine(aux_model, per_call_overhead_us=0.0),
    }
    cond = make_conditioning(embedding=np.zeros(8))
    rng = np.random.default_rng(1003)
    start = time.perf_counter()
    tuple_branch_hits = 0
    for k in range(500):
        name = "aux" if k % 5 == 0 else "mock"
        engine = engines[name]
        model = engine.inner
        b = int(rng.integers(1, 17))
        if rng.random() < 0.5:
            ts = np.full(b, float(rng.choice(sched.inference_grid)))
        else:
            ts = rng.choice(sched.inference_grid, size=b)
        batch = LatentBatch(
            data=rng.standard_normal((b, 6)),
            timesteps=ts,
            ids=np.arange(b, dtype=np.int64),
        )
        before = engine.invocations
        out = adaptive_forward(engine, batch, cond)
        made = engine.invocations - before
        homog = is_homogeneous(ts, engine.eps)
        assert made == (1 if homog else b)
        direct = model._compute(batch, cond)
        assert np.array_equal(out.epsilon, direct.epsilon)
        if name == "aux":
            assert out.aux is not None
            assert np.array_equal(out.aux[0], direct.aux[0])
            if not homog and b > 1:
                tuple_branch_hits += 1
    elapsed = time.perf_counter() - start
    ok = tuple_branch_hits > 0 and elapsed < 5.0
    report(
        3,
        ok,
        f"500 batches bit-identical, call counts exact, tuple branch hit "
        f"{tuple_branch_hits} times, {elapsed:.2f}s (<5s)",
    )


def test_criterion_4_throughput_model_fidelity():
    costs = CostParams(c_unet_us=10_000.0, c_sched_us=1_000.0, c_vae_us=5_000.0)
    start = time.perf_counter()
    report_rows = run_benchmark([BenchCase("50x4", 50, 4)], costs, repetitions=2)
    elapsed = time.perf_counter() - start
    row = report_rows.rows[0]
    dev_vanilla = abs(row.meas_vanilla_us - row.pred_vanilla_us) / row.pred_vanilla_us
    dev_ours = abs(row.meas_ours_us - row.pred_ours_us) / row.pred_ours_us
    ok = dev_vanilla < 0.05 and dev_ours < 0.05 and elapsed < 120.0
    report(
        4,
        ok,
        f"m=50 n=4: vanilla off by {dev_vanilla:.2%}, ours off by {dev_ours:.2%} "
        f"(tol 5%), {elapsed:.1f}s (<120s)",
    )


def test_criterion_5_speedup_property():
    costs = CostParams(c_unet_us=10_000.0, c_sched_us=100.0, c_vae_us=100.0)
    start = time.perf_counter()
    rep = run_benchmark([BenchCase("100x4", 100, 4)], costs, repetitions=1)
    elapsed = time.perf_counter() - start
    speedup = rep.rows[0].speedup
    ok = speedup >= 3.2
    report(
        5,
        ok,
        f"m=100 n=4 c_unet-dominant: measured speedup {speedup:.2f}x "
        f"(need >= 3.2), {elapsed:.1f}s",
    )


def test_criterion_6_complexity_instrumentation():
    m, n = 10, 4
    sched = build_time_window_schedule(inference_steps=n)
    model = SeededMockModel(dim=8, seed=6)
    cond = make_conditioning(embedding=np.zeros(8))
    _, stats = run_stream(m, n, model, cond, 5, sched)
    evals_ok = stats.step_stats.param_evals == m * n
    calls_ok = stats.step_stats.scheduler_calls == m + n - 1
    ok = evals_ok and calls_ok
    report(
        6,
        ok,
        f"param_evals {stats.step_stats.param_evals} == m*n {m * n}, "
        f"via {stats.step_stats.scheduler_calls} batch calls == m+n-1 {m + n - 1}",
    )


def test_criterion_7_limit_identities():
    sched = build_time_window_schedule()
    ends = sched.boundaries[1:]
    wp = window_params(ends, sched)
    limits_ok = bool(np.all(wp.lambda_t == 1.0) and np.all(wp.eta_t == 0.0))
    flat = build_time_window_schedule(
        noise_schedule=NoiseSchedule(
            betas=np.full(1000, 1e-3), alphas_cumprod=np.full(1000, 0.5), t_max=1000
        ),
        inference_steps=8,
    )
    rng = np.random.default_rng(1007)
    fixed_point_ok = True
    for t in flat.inference_grid:
        batch = LatentBatch(
            data=rng.standard_normal((4, 8)),
            timesteps=np.full(4, float(t)),
            ids=np.arange(4, dtype=np.int64),
        )
        stepped = batched_velocity_step(rng.standard_normal((4, 8)), batch, flat)
        fixed_point_ok &= bool(np.array_equal(stepped.data, batch.data))
    ok = limits_ok and fixed_point_ok
    report(
        7,
        ok,
        f"lambda_t(t_e)=1 and eta_t(t_e)=0 exactly: {limits_ok}; "
        f"gamma=1 fixed point over entire grid: {fixed_point_ok}",
    )


def test_criterion_8_generate_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["generate", "--num-images", "4", "--steps", "4", "--seed", "123"]
    code_a = main(args + ["--out", str(a)])
    code_b = main(args + ["--out", str(b)])
    identical = a.read_bytes() == b.read_bytes()
    ok = code_a == 0 and code_b == 0 and identical
    report(8, ok, f"two generate runs byte-identical: {identical}")
