"""Exit criteria for the package, one test per criterion.

Each test logs a PASS/FAIL line (shown in the "acceptance criteria" section
of the pytest summary) before asserting.
"""

import math
import time

import pytest
from scipy.integrate import quad

from tbosim import harness as hx
from tbosim import quantum as qm
from tbosim.cli import main
from tbosim.sphere import acceptance_bounds, acceptance_probability, geometric_entropy, normalization_r, surface_area

SEED = 20261019
RUNS = 100_000
INSTANCES = 100
MIN_PASSING = 95


def p_ok_by_quadrature(n):
    # R_n / S_n written as a ratio of one-dimensional integrals over the polar angle
    num = quad(lambda t: math.sin(t) ** (n - 1) * abs(math.cos(t)), 0, math.pi, points=[math.pi / 2])[0]
    den = quad(lambda t: math.sin(t) ** (n - 1), 0, math.pi)[0]
    return num / den


@pytest.fixture(scope="module")
def correlation_runs():
    """100 random (state, TBO pair) instances per d, 10^5 protocol runs each."""
    started = time.perf_counter()
    out = {}
    for d in (2, 4):
        rng = hx.derive_rng(SEED, 100, d)
        stats = []
        for k in range(INSTANCES):
            state = qm.random_pure_state(d, rng)
            a_obs, b_obs = qm.random_tbo(d, rng), qm.random_tbo(d, rng)
            stats.append(hx.estimate_pair(state, a_obs, b_obs, RUNS, hx.derive_seed(SEED, 101, d, k)))
        out[d] = stats
    return out, time.perf_counter() - started


def test_c01_correlation_reproduction(correlation_runs, record):
    runs, elapsed = correlation_runs
    ok = True
    for d, stats in runs.items():
        good = sum(abs(s.z_score) <= 3 for s in stats)
        ok &= record(f"C1 correlation d={d}", good >= MIN_PASSING, f"{good}/{INSTANCES} instances with |z|<=3")
    ok &= record("C1 runtime", elapsed < 300, f"{elapsed:.1f}s (< 300s)")
    assert ok


def test_c02_zero_marginals(correlation_runs, record):
    runs, _ = correlation_runs
    bound = 3 / math.sqrt(RUNS)
    ok = True
    for d, stats in runs.items():
        good = sum(abs(s.marginal_a_hat) <= bound and abs(s.marginal_b_hat) <= bound for s in stats)
        ok &= record(f"C2 marginals d={d}", good >= MIN_PASSING, f"{good}/{INSTANCES} with |E(A)|,|E(B)| <= {bound:.5f}")
    assert ok


@pytest.mark.parametrize("n", [1, 2, 3, 7, 17, 31])
def test_c03_normalization_lemma(n, record):
    mean, _ = hx.mc_abs_overlap(n, 1_000_000, hx.derive_rng(SEED, 300, n))
    estimate = mean * surface_area(n)
    expected = 2.0 / n * surface_area(n - 1)
    assert normalization_r(n) == pytest.approx(expected, rel=1e-14)
    rel = abs(estimate - expected) / expected
    assert record(f"C3 R_{n}", rel <= 0.01, f"MC={estimate:.6g} vs (2/n)S_(n-1)={expected:.6g}, rel.err={rel:.2e}")


def test_c04_acceptance_probability(record):
    ok = True
    for n, quoted in ((7, 0.2911), (31, 0.143)):
        p = acceptance_probability(n)
        oracle = p_ok_by_quadrature(n)
        mc, _ = hx.mc_abs_overlap(n, 1_000_000, hx.derive_rng(SEED, 400, n))
        checks = (
            abs(p - oracle) <= 1e-9 * oracle,
            abs(mc - p) <= 0.01 * p,
            abs(p - quoted) <= 0.01 * quoted,
        )
        ok &= record(
            f"C4 p_ok({n})",
            all(checks),
            f"gamma-ratio={p:.6f} quadrature={oracle:.6f} MC={mc:.6f} quoted~{quoted}",
        )
    violations = []
    for n in range(1, 513):
        lo, hi = acceptance_bounds(n)
        if not lo <= acceptance_probability(n) <= hi:
            violations.append(n)
    ok &= record("C4 bounds n=1..512", not violations, f"violations={violations}")
    assert ok


def test_c05_message_distribution_and_entropy(record):
    fit, entropy = hx.verify_geometric_law(7, RUNS, SEED)
    p = acceptance_probability(7)
    assert geometric_entropy(p) == pytest.approx(2.99, abs=0.005)
    ok = record("C5 geometric law n=7", fit.passed, f"chi2 p-value={fit.computed:.4f} ({fit.detail})")
    ok &= record("C5 entropy n=7", entropy.passed, f"plug-in={entropy.computed:.4f} H(p)={entropy.expected:.4f} (tol 0.1)")
    assert ok


def test_c06_communication_scaling(record):
    rows = hx.scan_dimension([2, 4, 6, 8], RUNS, SEED, "golomb")
    excess = [r["bits_minus_log2_d"] for r in rows]
    spread = max(excess) - min(excess)
    ok = record("C6 spread", spread <= 1.5, f"mean bits - log2 d = {[round(e, 3) for e in excess]}, spread={spread:.3f}")
    for r in rows:
        bound = 0.5 * math.log2(2 * r["d"] ** 2 - 1) + 4
        ok &= record(f"C6 d={r['d']}", r["mean_message_bits"] <= bound, f"{r['mean_message_bits']:.3f} bits <= {bound:.3f} ({r['codec']})")
    assert ok


def test_c07_tsirelson_embedding(record):
    ok = True
    for d in (2, 4, 6):
        check = hx.verify_embedding(d, 1000, SEED)
        ok &= record(f"C7 embedding d={d}", check.passed, f"max|dot-oracle|={check.computed:.2e} {check.detail}")
    assert ok


def test_c08_postselection(record):
    ok = True
    for d in (2, 4, 8):
        n = 2 * d * d - 1
        rng = hx.derive_rng(SEED, 800, d)
        state = qm.random_pure_state(d, rng)
        s = hx.estimate_pair(
            state, qm.random_tbo(d, rng), qm.random_tbo(d, rng), RUNS, hx.derive_seed(SEED, 801, d), mode="postselected"
        )
        p = acceptance_probability(n)
        lower, _ = acceptance_bounds(n)
        rate_z = hx.z_score(s.success_rate, p, s.success_stderr)
        passed = abs(rate_z) <= 3 and s.success_rate >= lower and abs(s.z_score) <= 3
        ok &= record(
            f"C8 postselected d={d}",
            passed,
            f"rate={s.success_rate:.4f} p_ok={p:.4f} (z={rate_z:.2f}) >= {lower:.4f}; "
            f"corr={s.correlation_hat:.4f} oracle={s.oracle_correlation:.4f} (z={s.z_score:.2f})",
        )
    assert ok


def test_c09_full_distribution(record):
    ok = True
    for d in (2, 4):
        rows = hx.full_distribution_check(d, RUNS, SEED, pairs=20)
        good = sum(r["pass"] for r in rows)
        worst = min(r["p_value"] for r in rows)
        ok &= record(f"C9 full distribution d={d}", good == len(rows), f"{good}/{len(rows)} pairs pass chi2 at 1% (min p={worst:.4f})")
    assert ok


def test_c10_determinism(tmp_path, record):
    sim = ["simulate", "--d", "2", "--state", "random", "--observables", "random:3", "--trials", "20000", "--seed", "99"]
    scan = ["scan", "--d-list", "2,4", "--trials", "20000", "--seed", "99"]
    ver = ["verify", "--suite", "lemma1", "--n", "3,7", "--samples", "100000", "--seed", "99"]
    outputs = []
    for run in ("a", "b"):
        main(sim + ["--out", str(tmp_path / f"sim_{run}")])
        main(scan + ["--out", str(tmp_path / f"scan_{run}.csv")])
        main(ver + ["--out", str(tmp_path / f"ver_{run}.json")])
        outputs.append(
            [
                (tmp_path / f"sim_{run}.json").read_bytes(),
                (tmp_path / f"sim_{run}.csv").read_bytes(),
                (tmp_path / f"scan_{run}.csv").read_bytes(),
                (tmp_path / f"ver_{run}.json").read_bytes(),
            ]
        )
    same = outputs[0] == outputs[1]
    assert record("C10 determinism", same, "simulate JSON/CSV, scan CSV and verify JSON byte-identical on re-run")
