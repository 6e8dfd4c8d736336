"""Monte-Carlo experiments comparing the protocol against the quantum oracle.

Every experiment is driven by one integer seed.  Per-instance randomness is
derived from it with ``SeedSequence`` spawn keys, so results do not depend on
execution order or on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats

from . import quantum as qm
from .errors import ConfigInvalid, NotMaximallyEntangled
from .protocol import MessageCode, SharedRandomness, run_postselected_rounds, run_rounds
from .sphere import (
    UnitVector,
    acceptance_bounds,
    acceptance_probability,
    geometric_entropy,
    geometric_pmf,
    normalization_r,
    surface_area,
    uniform_samples,
)

Z_WINDOW = 3.0
CHI2_ALPHA = 0.01
PAIR_PASS_FRACTION = 0.95

# claim labels written into every report row
ANCHOR_CORRELATION = "sampling-theorem:joint-correlation"
ANCHOR_MARGINALS = "sampling-theorem:zero-marginals"
ANCHOR_NORMALIZATION = "normalization-lemma"
ANCHOR_ACCEPTANCE = "communication-theorem:acceptance-probability"
ANCHOR_BOUNDS = "communication-theorem:acceptance-bounds"
ANCHOR_GEOMETRIC = "communication-theorem:message-distribution"
ANCHOR_COMMUNICATION = "communication-theorem:log-d-bits"
ANCHOR_EMBEDDING = "tsirelson-embedding"
ANCHOR_POSTSELECTION = "postselection:success-probability"
ANCHOR_DISTRIBUTION = "maximal-entanglement:full-distribution"

MODES = ("protocol", "postselected", "abstract-vectors")


def sphere_dim(d: int) -> int:
    return 2 * d * d - 1


def _seq(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


def derive_seed(seed: int, *key: int) -> int:
    """64-bit child seed for the given spawn path."""
    return int(_seq(seed, *key).generate_state(1, np.uint64)[0])


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_seq(seed, *key)))


def z_score(estimate: float, expected: float, stderr: float) -> float:
    diff = estimate - expected
    if stderr > 0:
        return diff / stderr
    return 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)


def mean_and_stderr(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def plugin_entropy(iterations: np.ndarray) -> float:
    """Plug-in (maximum-likelihood) entropy in bits of an integer sample."""
    counts = np.bincount(np.asarray(iterations, dtype=np.int64))
    counts = counts[counts > 0]
    probs = counts / counts.sum()
    return float(-(probs * np.log2(probs)).sum())


def geometric_fit(iterations: np.ndarray, p: float, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Chi-square fit of iteration counts to (1-p)^(i-1) p.

    Bins i = 1..K-1 individually and pools i >= K into a tail bin, where K is
    the first index whose expected count drops below ``min_expected``.
    Returns (statistic, p-value, number of bins).
    """
    iterations = np.asarray(iterations, dtype=np.int64)
    total = iterations.size
    k = 1
    while total * float(geometric_pmf(k, p)) >= min_expected:
        k += 1
    idx = np.arange(1, k)
    expected = total * geometric_pmf(idx, p)
    expected = np.append(expected, total * (1.0 - p) ** (k - 1))
    observed = np.bincount(np.minimum(iterations, k), minlength=k + 1)[1:]
    stat, pval = stats.chisquare(observed, expected)
    return float(stat), float(pval), int(observed.size)


def cell_chi2(counts: np.ndarray, probs: np.ndarray, zero_tol: float = 1e-12) -> tuple[float, float, int]:
    """Chi-square test of a 2x2 outcome table against known cell probabilities.

    Cells with (numerically) zero probability are dropped from the statistic;
    a nonzero count in such a cell fails the test outright.
    """
    counts = np.ravel(counts).astype(float)
    probs = np.ravel(probs).astype(float)
    live = probs > zero_tol
    if np.any(counts[~live] > 0):
        return math.inf, 0.0, int(live.sum())
    if live.sum() < 2:
        return 0.0, 1.0, int(live.sum())
    exp = counts.sum() * probs[live] / probs[live].sum()
    stat, pval = stats.chisquare(counts[live], exp)
    return float(stat), float(pval), int(live.sum())


def outcome_table(out_a: np.ndarray, out_b: np.ndarray) -> np.ndarray:
    """2x2 counts, rows A in (+1, -1), columns B in (+1, -1)."""
    ia = (np.asarray(out_a) < 0).astype(np.int64)
    ib = (np.asarray(out_b) < 0).astype(np.int64)
    return np.bincount(2 * ia + ib, minlength=4).reshape(2, 2)


def expected_table(correlation: float) -> np.ndarray:
    """Cell probabilities (1 + alpha*beta*c)/4 with zero marginals."""
    signs = np.array([[1, -1], [-1, 1]], dtype=float)
    return (1.0 + signs * correlation) / 4.0


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Resolved experiment settings.

    state: ``bell`` | ``singlet`` | ``random`` | ``schmidt:c1,c2,...`` | ``file:PATH``
    observables: ``random:K`` | ``file:PATH`` (JSON list of [A, B] matrix docs)
    codec: ``golomb`` (modulus tuned to the acceptance probability),
    ``golomb:M``, ``elias-gamma`` or ``unary``.
    """

    d: int = 2
    state: str = "bell"
    observables: str = "random:1"
    trials: int = 100_000
    seed: int = 0
    codec: str = "golomb"
    mode: str = "protocol"
    n: int | None = None
    jobs: int = 1

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigInvalid(f"trials must be >= 1, got {self.trials}")
        if self.mode not in MODES:
            raise ConfigInvalid(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.jobs < 1:
            raise ConfigInvalid(f"jobs must be >= 1, got {self.jobs}")
        if not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be a 64-bit unsigned integer")
        if self.mode == "abstract-vectors":
            if self.sphere_n < 1:
                raise ConfigInvalid("abstract-vectors mode needs n >= 1")
        elif self.d < 2 or self.d % 2:
            raise ConfigInvalid(f"d must be even and >= 2, got {self.d}")
        if not self.observables.startswith(("random:", "file:")):
            raise ConfigInvalid(f"unrecognized observable spec {self.observables!r}")
        if self.observables.startswith("random:") and self.pair_count < 1:
            raise ConfigInvalid("random observable count must be >= 1")
        try:
            self.message_code()
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc

    @property
    def sphere_n(self) -> int:
        return self.n if self.n is not None else sphere_dim(self.d)

    @property
    def pair_count(self) -> int:
        if self.observables.startswith("random:"):
            try:
                return int(self.observables.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigInvalid(f"bad observable count in {self.observables!r}") from exc
        return len(_load_pairs(self.observables[5:], self.d))

    def message_code(self) -> MessageCode:
        if self.codec == "golomb":
            return MessageCode.golomb_for(acceptance_probability(self.sphere_n))
        return MessageCode.parse(self.codec)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> ExperimentConfig:
        known = {f.name: f for f in fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigInvalid(f"unknown config key {key!r}")
            if key in ("d", "trials", "seed", "jobs", "n"):
                kwargs[key] = None if raw in (None, "", "none") else int(raw)
            else:
                kwargs[key] = str(raw)
        return cls(**kwargs)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _load_pairs(path: str, d: int) -> list[tuple[qm.TracelessBinaryObservable, qm.TracelessBinaryObservable]]:
    with open(path, encoding="utf-8") as fh:
        docs = json.load(fh)
    pairs = [(qm.TracelessBinaryObservable.from_dict(a), qm.TracelessBinaryObservable.from_dict(b)) for a, b in docs]
    for a, b in pairs:
        if a.dim != d or b.dim != d:
            raise ConfigInvalid(f"observable file {path} has dim {a.dim}/{b.dim}, config d={d}")
    return pairs


def build_state(spec: str, d: int, rng: np.random.Generator) -> qm.PureBipartiteState:
    if spec == "bell":
        return qm.maximally_entangled(d)
    if spec == "singlet":
        if d != 2:
            raise ConfigInvalid("the singlet state is defined for d=2 only")
        return qm.singlet()
    if spec == "random":
        return qm.random_pure_state(d, rng)
    if spec.startswith("schmidt:"):
        coeffs = [float(c) for c in spec[len("schmidt:") :].split(",")]
        if len(coeffs) != d:
            raise ConfigInvalid(f"need {d} Schmidt coefficients, got {len(coeffs)}")
        return qm.schmidt_state(coeffs)
    if spec.startswith("file:"):
        with open(spec[5:], encoding="utf-8") as fh:
            state = qm.PureBipartiteState.from_dict(json.load(fh))
        if state.dim != d:
            raise ConfigInvalid(f"state file has d={state.dim}, config d={d}")
        return state
    raise ConfigInvalid(f"unrecognized state spec {spec!r}")


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


@dataclass
class TrialStatistics:
    trials: int
    n: int
    correlation_hat: float
    correlation_stderr: float
    oracle_correlation: float
    z_score: float
    marginal_a_hat: float
    marginal_a_stderr: float
    marginal_b_hat: float
    marginal_b_stderr: float
    mean_iterations: float = math.nan
    mean_iterations_stderr: float = math.nan
    mean_message_bits: float = math.nan
    mean_message_bits_stderr: float = math.nan
    empirical_entropy: float = math.nan
    analytic_entropy: float = math.nan
    success_rate: float = math.nan
    success_stderr: float = math.nan
    accepted: int = 0
    oracle_marginal_a: float = math.nan
    oracle_marginal_b: float = math.nan
    marginals_simulated: bool = True
    codec: str = ""
    seed: int = 0

    @property
    def correlation_pass(self) -> bool:
        return abs(self.z_score) <= Z_WINDOW

    @property
    def marginals_pass(self) -> bool:
        bound = Z_WINDOW / math.sqrt(self.accepted or self.trials)
        return abs(self.marginal_a_hat) <= bound and abs(self.marginal_b_hat) <= bound

    def to_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["correlation_pass"] = self.correlation_pass
        doc["marginals_pass"] = self.marginals_pass
        return doc


def _sign_stats(out_a: np.ndarray, out_b: np.ndarray, oracle: float) -> dict[str, float]:
    prod = out_a.astype(np.int64) * out_b.astype(np.int64)
    corr, corr_se = mean_and_stderr(prod)
    ma, ma_se = mean_and_stderr(out_a)
    mb, mb_se = mean_and_stderr(out_b)
    return dict(
        correlation_hat=corr,
        correlation_stderr=corr_se,
        oracle_correlation=oracle,
        z_score=z_score(corr, oracle, corr_se),
        marginal_a_hat=ma,
        marginal_a_stderr=ma_se,
        marginal_b_hat=mb,
        marginal_b_stderr=mb_se,
    )


def estimate_vectors(
    a: UnitVector,
    b: UnitVector,
    trials: int,
    seed: int,
    codec: MessageCode | None = None,
    mode: str = "protocol",
    oracle: float | None = None,
) -> TrialStatistics:
    """Run the protocol on given sphere vectors and aggregate the outcomes.

    ``oracle`` defaults to ``a . b``.
    """
    n = a.n
    p = acceptance_probability(n)
    codec = codec or MessageCode.golomb_for(p)
    oracle = a.dot(b) if oracle is None else oracle
    shared = SharedRandomness(seed, n)
    if mode == "postselected":
        res = run_postselected_rounds(a, b, shared, trials)
        ok = res.accepted
        rate, rate_se = mean_and_stderr(ok)
        return TrialStatistics(
            trials=trials,
            n=n,
            **_sign_stats(res.output_a[ok], res.output_b[ok], oracle),
            success_rate=rate,
            success_stderr=rate_se,
            accepted=int(ok.sum()),
            codec="none",
            seed=seed,
        )
    res = run_rounds(a, b, shared, trials)
    it, it_se = mean_and_stderr(res.iterations)
    bits, bits_se = mean_and_stderr(codec.lengths(res.iterations))
    return TrialStatistics(
        trials=trials,
        n=n,
        **_sign_stats(res.output_a, res.output_b, oracle),
        mean_iterations=it,
        mean_iterations_stderr=it_se,
        mean_message_bits=bits,
        mean_message_bits_stderr=bits_se,
        empirical_entropy=plugin_entropy(res.iterations),
        analytic_entropy=geometric_entropy(p),
        accepted=trials,
        codec=codec.identifier,
        seed=seed,
    )


def estimate_pair(
    state: qm.PureBipartiteState,
    a_obs: qm.TracelessBinaryObservable,
    b_obs: qm.TracelessBinaryObservable,
    trials: int,
    seed: int,
    codec: MessageCode | None = None,
    mode: str = "protocol",
) -> TrialStatistics:
    """Embed a TBO pair, run the protocol and compare with the exact expectation."""
    a = qm.tsirelson_embed(state, a_obs, "alice")
    b = qm.tsirelson_embed(state, b_obs, "bob")
    result = estimate_vectors(a, b, trials, seed, codec, mode, oracle=qm.joint_expectation(state, a_obs, b_obs))
    result.oracle_marginal_a = qm.marginal_expectation(state, a_obs, "alice")
    result.oracle_marginal_b = qm.marginal_expectation(state, b_obs, "bob")
    result.marginals_simulated = state.is_maximally_entangled()
    return result


def _estimate_task(args: tuple) -> TrialStatistics:
    kind = args[0]
    if kind == "pair":
        return estimate_pair(*args[1:])
    return estimate_vectors(*args[1:])


def _map(tasks: list[tuple], jobs: int) -> list[TrialStatistics]:
    if jobs <= 1 or len(tasks) <= 1:
        return [_estimate_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_estimate_task, tasks))


@dataclass
class ExperimentReport:
    config: dict[str, Any]
    pairs: list[TrialStatistics]
    summary: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("pass", False))

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "summary": self.summary,
            "pairs": [dict(index=k, anchor=ANCHOR_CORRELATION, **p.to_dict()) for k, p in enumerate(self.pairs)],
        }


def _summarize(pairs: list[TrialStatistics], mode: str, n: int) -> dict[str, Any]:
    corr_ok = sum(p.correlation_pass for p in pairs)
    marg_ok = sum(p.marginals_pass for p in pairs)
    need = math.ceil(PAIR_PASS_FRACTION * len(pairs))
    summary: dict[str, Any] = {
        "anchor": ANCHOR_CORRELATION,
        "pairs": len(pairs),
        "correlation_within_3se": corr_ok,
        "marginals_anchor": ANCHOR_MARGINALS,
        "marginals_within_3_over_sqrt_trials": marg_ok,
        "required": need,
    }
    passed = corr_ok >= need
    if mode == "postselected":
        p = acceptance_probability(n)
        lower, _ = acceptance_bounds(n)
        rate_ok = sum(abs(z_score(s.success_rate, p, s.success_stderr)) <= Z_WINDOW for s in pairs)
        summary.update(
            postselection_anchor=ANCHOR_POSTSELECTION,
            acceptance_probability=p,
            success_lower_bound=lower,
            success_rate_mean=float(np.mean([s.success_rate for s in pairs])),
            success_rate_within_3se=rate_ok,
        )
        passed = passed and rate_ok >= need
    summary["pass"] = bool(passed)
    return summary


def estimate_joint_correlation(config: ExperimentConfig) -> ExperimentReport:
    """Run the configured experiment, one statistics record per observable pair."""
    config.validate()
    codec = config.message_code()
    count = config.pair_count
    seeds = [derive_seed(config.seed, 1, k) for k in range(count)]
    if config.mode == "abstract-vectors":
        rng = derive_rng(config.seed, 0)
        n = config.sphere_n
        vecs = [(UnitVector(v[0]), UnitVector(v[1])) for v in (uniform_samples(n, 2, rng) for _ in range(count))]
        tasks = [("vectors", a, b, config.trials, s, codec, "protocol") for (a, b), s in zip(vecs, seeds)]
        stats_list = _map(tasks, config.jobs)
        return ExperimentReport(config.to_dict(), stats_list, _summarize(stats_list, "protocol", n))
    rng = derive_rng(config.seed, 0)
    state = build_state(config.state, config.d, rng)
    if config.observables.startswith("file:"):
        pairs = _load_pairs(config.observables[5:], config.d)
    else:
        pairs = [(qm.random_tbo(config.d, rng), qm.random_tbo(config.d, rng)) for _ in range(count)]
    tasks = [("pair", state, a, b, config.trials, s, codec, config.mode) for (a, b), s in zip(pairs, seeds)]
    stats_list = _map(tasks, config.jobs)
    return ExperimentReport(config.to_dict(), stats_list, _summarize(stats_list, config.mode, config.sphere_n))


# ---------------------------------------------------------------------------
# claim verification
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    anchor: str
    computed: float
    expected: float
    passed: bool
    detail: str = ""

    def __post_init__(self) -> None:
        self.computed = float(self.computed)
        self.expected = float(self.expected)
        self.passed = bool(self.passed)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.name} [{self.anchor}]: computed={self.computed:.6g} expected={self.expected:.6g} {self.detail} {verdict}".replace(
            "  ", " "
        )


def mc_abs_overlap(n: int, samples: int, rng: np.random.Generator, chunk: int = 1 << 16) -> tuple[float, float]:
    """Monte-Carlo mean and stderr of |a . lambda| for uniform lambda on S_n."""
    a = uniform_samples(n, 1, rng)[0]
    total = 0.0
    total_sq = 0.0
    left = samples
    while left:
        k = min(chunk, left)
        x = np.abs(uniform_samples(n, k, rng) @ a)
        total += float(x.sum())
        total_sq += float((x * x).sum())
        left -= k
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    return mean, math.sqrt(var / samples)


def verify_normalization_lemma(n: int, samples: int = 1_000_000, seed: int = 0) -> CheckResult:
    """Compare S_n * mean|a . lambda| (Monte Carlo) with R_n at 1% relative error."""
    mean, se = mc_abs_overlap(n, samples, derive_rng(seed, 2, n))
    s_n = surface_area(n)
    estimate = s_n * mean
    expected = normalization_r(n)
    rel = abs(estimate - expected) / expected
    lower, upper = acceptance_bounds(n)
    bracket = lower * s_n <= estimate <= upper * s_n
    return CheckResult(
        f"R_{n}",
        ANCHOR_NORMALIZATION,
        estimate,
        expected,
        rel <= 0.01 and bracket,
        f"rel.err={rel:.2e} samples={samples} in_bound_bracket={bracket}",
    )


def verify_acceptance_mc(n: int, samples: int = 1_000_000, seed: int = 0) -> CheckResult:
    mean, _ = mc_abs_overlap(n, samples, derive_rng(seed, 3, n))
    p = acceptance_probability(n)
    rel = abs(mean - p) / p
    return CheckResult(f"p_ok({n})", ANCHOR_ACCEPTANCE, mean, p, rel <= 0.01, f"rel.err={rel:.2e}")


def verify_acceptance_bounds(n_max: int = 512) -> CheckResult:
    worst = math.inf
    failures = []
    for n in range(1, n_max + 1):
        p = acceptance_probability(n)
        lower, upper = acceptance_bounds(n)
        worst = min(worst, p - lower, upper - p)
        if not lower <= p <= upper:
            failures.append(n)
    return CheckResult(
        f"bounds n=1..{n_max}",
        ANCHOR_BOUNDS,
        worst,
        0.0,
        not failures,
        f"min_slack={worst:.3e} violations={failures[:5]}",
    )


def verify_entropy_bound(n_values: Iterable[int], constant: float = 2.5) -> CheckResult:
    worst = -math.inf
    for n in n_values:
        worst = max(worst, geometric_entropy(acceptance_probability(n)) - 0.5 * math.log2(n))
    return CheckResult("H(P_p)-log2(n)/2", ANCHOR_COMMUNICATION, worst, constant, worst <= constant)


def verify_embedding(d: int, triples: int, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    """Max |nu_A(A) . nu_B(B) - <psi|A(x)B|psi>| and max norm error over random triples."""
    rng = derive_rng(seed, 4, d)
    worst_dot = 0.0
    worst_norm = 0.0
    for _ in range(triples):
        state = qm.random_pure_state(d, rng)
        a_obs, b_obs = qm.random_tbo(d, rng), qm.random_tbo(d, rng)
        a = qm.tsirelson_embed(state, a_obs, "alice")
        b = qm.tsirelson_embed(state, b_obs, "bob")
        worst_dot = max(worst_dot, abs(a.dot(b) - qm.joint_expectation(state, a_obs, b_obs)))
        worst_norm = max(worst_norm, abs(np.linalg.norm(a.coords) - 1), abs(np.linalg.norm(b.coords) - 1))
    return CheckResult(
        f"embedding d={d}",
        ANCHOR_EMBEDDING,
        worst_dot,
        0.0,
        worst_dot <= tol and worst_norm <= tol,
        f"triples={triples} max_norm_err={worst_norm:.2e}",
    )


def verify_geometric_law(n: int, runs: int = 100_000, seed: int = 0) -> tuple[CheckResult, CheckResult]:
    """Chi-square fit of iteration counts and plug-in entropy vs H(p)."""
    rng = derive_rng(seed, 5, n)
    a, b = (UnitVector(v) for v in uniform_samples(n, 2, rng))
    res = run_rounds(a, b, SharedRandomness(derive_seed(seed, 5, n, 1), n), runs)
    p = acceptance_probability(n)
    stat, pval, bins = geometric_fit(res.iterations, p)
    h_hat = plugin_entropy(res.iterations)
    h = geometric_entropy(p)
    return (
        CheckResult(f"geometric fit n={n}", ANCHOR_GEOMETRIC, pval, CHI2_ALPHA, pval >= CHI2_ALPHA, f"chi2={stat:.3f} bins={bins}"),
        CheckResult(f"entropy n={n}", ANCHOR_GEOMETRIC, h_hat, h, abs(h_hat - h) <= 0.1, "tol=0.1 bit"),
    )


def full_distribution_check(
    d: int,
    trials: int = 100_000,
    seed: int = 0,
    pairs: int = 1,
    state: qm.PureBipartiteState | None = None,
    observables: Sequence[tuple[qm.TracelessBinaryObservable, qm.TracelessBinaryObservable]] | None = None,
) -> list[dict[str, Any]]:
    """Outcome table vs (1 + alpha*beta*c)/4 for a maximally entangled state."""
    state = state if state is not None else qm.maximally_entangled(d)
    if not state.is_maximally_entangled():
        raise NotMaximallyEntangled("full-distribution check needs a maximally entangled state")
    rng = derive_rng(seed, 6, d)
    if observables is None:
        observables = [(qm.random_tbo(d, rng), qm.random_tbo(d, rng)) for _ in range(pairs)]
    rows = []
    for k, (a_obs, b_obs) in enumerate(observables):
        a = qm.tsirelson_embed(state, a_obs, "alice")
        b = qm.tsirelson_embed(state, b_obs, "bob")
        res = run_rounds(a, b, SharedRandomness(derive_seed(seed, 6, d, k), a.n), trials)
        counts = outcome_table(res.output_a, res.output_b)
        oracle = qm.joint_expectation(state, a_obs, b_obs)
        probs = expected_table(oracle)
        stat, pval, cells = cell_chi2(counts, probs)
        rows.append(
            {
                "anchor": ANCHOR_DISTRIBUTION,
                "d": d,
                "pair": k,
                "oracle_correlation": oracle,
                "counts": counts.tolist(),
                "expected_probs": probs.tolist(),
                "chi2": stat,
                "p_value": pval,
                "cells": cells,
                "pass": pval >= CHI2_ALPHA,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# dimension scan
# ---------------------------------------------------------------------------

SCAN_COLUMNS = (
    "anchor",
    "d",
    "n",
    "trials",
    "codec",
    "p_ok",
    "expected_iterations",
    "mean_iterations",
    "mean_iterations_stderr",
    "mean_message_bits",
    "mean_message_bits_stderr",
    "log2_d",
    "bits_minus_log2_d",
    "bits_bound",
    "empirical_entropy",
    "analytic_entropy",
)


def scan_dimension(d_list: Sequence[int], trials_per_d: int, seed: int = 0, codec: str = "golomb") -> list[dict[str, Any]]:
    """Communication cost per dimension on the maximally entangled state."""
    rows = []
    for d in d_list:
        if d < 2 or d % 2:
            raise ConfigInvalid(f"scan dimensions must be even and >= 2, got {d}")
        cfg = ExperimentConfig(d=d, trials=trials_per_d, seed=seed, codec=codec)
        rng = derive_rng(seed, 7, d)
        state = qm.maximally_entangled(d)
        stat = estimate_pair(
            state, qm.random_tbo(d, rng), qm.random_tbo(d, rng), trials_per_d, derive_seed(seed, 7, d, 1), cfg.message_code()
        )
        n = sphere_dim(d)
        p = acceptance_probability(n)
        rows.append(
            {
                "anchor": ANCHOR_COMMUNICATION,
                "d": d,
                "n": n,
                "trials": trials_per_d,
                "codec": stat.codec,
                "p_ok": p,
                "expected_iterations": 1.0 / p,
                "mean_iterations": stat.mean_iterations,
                "mean_iterations_stderr": stat.mean_iterations_stderr,
                "mean_message_bits": stat.mean_message_bits,
                "mean_message_bits_stderr": stat.mean_message_bits_stderr,
                "log2_d": math.log2(d),
                "bits_minus_log2_d": stat.mean_message_bits - math.log2(d),
                "bits_bound": 0.5 * math.log2(n) + 4.0,
                "empirical_entropy": stat.empirical_entropy,
                "analytic_entropy": stat.analytic_entropy,
            }
        )
    return rows


def scan_summary(rows: list[dict[str, Any]], max_spread: float = 1.5) -> dict[str, Any]:
    excess = [r["bits_minus_log2_d"] for r in rows]
    spread = max(excess) - min(excess)
    under = all(r["mean_message_bits"] <= r["bits_bound"] for r in rows)
    return {"anchor": ANCHOR_COMMUNICATION, "spread": spread, "all_under_bound": under, "pass": spread <= max_spread and under}


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


PAIR_COLUMNS = ("index", "anchor") + tuple(f.name for f in fields(TrialStatistics)) + ("correlation_pass", "marginals_pass")


def report_to_csv(report: ExperimentReport) -> str:
    return rows_to_csv(report.to_dict()["pairs"], PAIR_COLUMNS)


def to_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"
