"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest -v -s tests/test_acceptance.py`` to see the per-criterion
lines; every criterion asserts its stated tolerance and wall-clock budget.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest
import yaml

from chainlab.chain_runner import recurrence_stats, run_chain
from chainlab.cli import main, run_decoding_study
from chainlab.kernels import (
    GREEDY,
    DecodingConfig,
    FiniteKernel,
    ScriptedKernel,
    compose_round_trip,
    random_logits_kernel,
)
from chainlab.markov_analysis import (
    Distribution,
    compose_matrices,
    entropy,
    evolve,
    kl_divergence,
    mixture_entropy_bounds,
    recurrent_classes,
    stationary,
)
from chainlab.metrics import bleu, meteor_lite, normalized_diversity_ratio, rouge1, tfidf_cosine, tokenize
from chainlab.stats import PairedSample, linear_fit, pearson_with_p, regularized_incomplete_beta
from chainlab.textunit import Sentence
from helpers import (
    labels,
    quadratic_tau_oracle,
    random_distribution,
    random_positive_stochastic,
    random_stochastic,
    reachability_oracle,
    sinkhorn_doubly_stochastic,
    square_matrix,
    trajectory_from_keys,
)
from test_stats import FIXTURE_N, TARGET_P, series_incomplete_beta, table_row_fixture

BEGIN = "We begin with a prologue."
START = "We start with a prologue."
SAMPLING = DecodingConfig(mode="sampling", temperature=0.7, top_p=0.9)


class _Budget:
    def __init__(self, number: int, limit_s: float, description: str):
        self.number = number
        self.limit = limit_s
        self.description = description

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        status = "PASS" if exc_type is None else "FAIL"
        print(f"[{status}] criterion {self.number:2d} ({elapsed:6.2f}s < {self.limit:g}s): "
              f"{self.description}")
        if exc_type is None:
            assert elapsed < self.limit, (
                f"criterion {self.number} exceeded its {self.limit}s budget ({elapsed:.2f}s)"
            )
        return False


def test_c01_recurrence_semantics_on_published_two_cycle():
    with _Budget(1, 1.0, "two-cycle trajectory: tau=2, cycle=2, distinct=2"):
        kernel = ScriptedKernel.cycle([BEGIN, START])
        traj = run_chain(kernel, Sentence.from_raw(BEGIN), 6, np.random.default_rng(0))
        assert traj.keys() == [BEGIN, START, BEGIN, START, BEGIN, START, BEGIN]
        report = recurrence_stats(traj)
        assert report.tau == 2
        assert report.cycle_length == 2
        assert report.distinct_count == 2


def test_c02_first_recurrence_conventions_and_oracle():
    with _Budget(2, 5.0, "tau conventions + streaming equals quadratic oracle"):
        identity = run_chain(ScriptedKernel.identity(), Sentence.from_raw(BEGIN), 5,
                             np.random.default_rng(0))
        r = recurrence_stats(identity)
        assert r.tau == 1 and r.distinct_count == 1

        all_distinct = trajectory_from_keys([f"k{i}." for i in range(51)])
        r = recurrence_stats(all_distinct)
        assert r.tau == 51 and r.distinct_count == 51

        rng = np.random.default_rng(1234)
        for _ in range(1000):
            n = int(rng.integers(2, 52))
            alphabet = int(rng.integers(2, 16))
            keys = [f"k{rng.integers(0, alphabet)}." for _ in range(n)]
            report = recurrence_stats(trajectory_from_keys(keys))
            tau, partner = quadratic_tau_oracle(keys)
            assert report.tau == tau and report.recurrence_partner == partner


def test_c03_kl_contraction():
    with _Budget(3, 10.0, "KL(XP || YP) <= KL(X || Y) on 1000 random triples"):
        rng = np.random.default_rng(42)
        violations = 0
        for _ in range(1000):
            m = int(rng.integers(2, 51))
            names = labels(m)
            x = Distribution(names, random_distribution(rng, m))
            y = Distribution(names, random_distribution(rng, m, strictly_positive=True))
            p = square_matrix(random_stochastic(rng, m), names=names)
            if kl_divergence(evolve(x, p, 1), evolve(y, p, 1)) > kl_divergence(x, y) + 1e-9:
                violations += 1
        assert violations == 0


def test_c04_stabilization_toward_stationary():
    with _Budget(4, 30.0, "KL to stationary non-increasing over n=0..100"):
        rng = np.random.default_rng(7)
        for _ in range(100):
            m = int(rng.integers(2, 13))
            names = labels(m)
            p = square_matrix(random_positive_stochastic(rng, m), names=names)
            pi = stationary(p, tol=1e-12)
            residual = float(np.max(np.abs(pi.weights @ p.probs - pi.weights)))
            assert residual < 1e-8
            x = Distribution(names, random_distribution(rng, m, strictly_positive=True))
            previous = kl_divergence(x, pi)
            for _ in range(100):
                x = evolve(x, p, 1)
                current = kl_divergence(x, pi)
                assert current <= previous + 1e-9
                previous = current


def test_c05_entropy_monotonicity_and_witness():
    with _Budget(5, 10.0, "doubly stochastic kernels never lower entropy + witness"):
        rng = np.random.default_rng(11)
        for _ in range(500):
            m = int(rng.integers(2, 11))
            names = labels(m)
            p = square_matrix(sinkhorn_doubly_stochastic(rng, m, iters=300), names=names)
            x = Distribution(names, random_distribution(rng, m))
            assert entropy(evolve(x, p, 1)) >= entropy(x) - 1e-9
        # witness: a funnel kernel strictly decreases entropy
        p = square_matrix([[1.0, 0.0], [1.0, 0.0]])
        x = Distribution(labels(2), np.array([0.5, 0.5]))
        assert entropy(evolve(x, p, 1)) < entropy(x) - 0.5


def test_c06_mixture_entropy_sandwich():
    with _Budget(6, 5.0, "entropy of b*X + (1-b)*XP inside [lower, lower + h(b)]"):
        rng = np.random.default_rng(23)
        for i in range(1000):
            m = int(rng.integers(2, 11))
            names = labels(m)
            p = square_matrix(random_stochastic(rng, m), names=names)
            x = Distribution(names, random_distribution(rng, m))
            b = (0.0, 1.0, 0.5)[i % 3] if i < 30 else float(rng.uniform(0.0, 1.0))
            lower, h_y, upper = mixture_entropy_bounds(x, p, b)
            assert lower - 1e-9 <= h_y <= upper + 1e-9


def test_c07_block_form_matches_reachability_oracle():
    with _Budget(7, 30.0, "recurrent/transient split: exhaustive + random sparse, m <= 6"):
        checked = 0

        def check(probs, names):
            nonlocal checked
            block = recurrent_classes(square_matrix(probs, names=names))
            got_classes = sorted(
                tuple(sorted(names.index(s) for s in c)) for c in block.recurrent_classes)
            got_transients = sorted(names.index(s) for s in block.transient_states)
            want_classes, want_transients = reachability_oracle(probs)
            assert got_classes == want_classes
            assert got_transients == want_transients
            checked += 1

        # all deterministic transition structures (next-state functions)
        for m in range(1, 7):
            names = labels(m)
            eye = np.eye(m)
            for assignment in itertools.product(range(m), repeat=m):
                check(eye[list(assignment)], names)

        # random sparse stochastic matrices
        rng = np.random.default_rng(31)
        for _ in range(2000):
            m = int(rng.integers(2, 7))
            check(random_stochastic(rng, m, sparsity=0.6), labels(m))
        assert checked > 50_000


def test_c08_round_trip_composition_monte_carlo():
    with _Budget(8, 20.0, "composed kernel frequencies match matrix product (3 sigma)"):
        rng = np.random.default_rng(21)
        a_states = [f"a{i}" for i in range(4)]
        b_states = [f"b{i}" for i in range(3)]
        fwd = FiniteKernel(a_states, rng.normal(0, 1, (4, 3)), out_states=b_states,
                           source_lang="en", target_lang="fr")
        bwd = FiniteKernel(b_states, rng.normal(0, 1, (3, 4)), out_states=a_states,
                           source_lang="fr", target_lang="en")
        cfg = DecodingConfig(mode="sampling", temperature=1.0, top_p=1.0)
        product = compose_matrices(fwd.transition_matrix(cfg), bwd.transition_matrix(cfg))
        composed = compose_round_trip(fwd, bwd)
        draws_per_row = 5000  # 4 rows -> 20,000 composed draws
        sample_rng = np.random.default_rng(99)
        index = {s: i for i, s in enumerate(a_states)}
        for i, start in enumerate(a_states):
            state = Sentence.from_raw(start)
            counts = np.zeros(len(a_states))
            for _ in range(draws_per_row):
                out = composed.step(state, sample_rng, decoding=cfg)
                counts[index[out.output.key]] += 1
            freq = counts / draws_per_row
            p = product.probs[i]
            sigma = np.sqrt(np.maximum(p * (1 - p), 0.0) / draws_per_row)
            assert np.all(np.abs(freq - p) <= 3 * sigma + 1e-12)


def test_c09_decoding_regime_contrast_and_temperature_sweep():
    with _Budget(9, 60.0, "greedy explores less than sampling; tau grows with temperature"):
        kernel = random_logits_kernel(m=200, seed=42)
        base = run_decoding_study(
            kernel,
            [("greedy", GREEDY), ("sampling", SAMPLING)],
            chains=200, horizon=50, master_seed=42,
        )
        greedy, sampling = base
        assert greedy.mean_distinct < sampling.mean_distinct

        sweep = run_decoding_study(
            kernel,
            [(f"t={t}", DecodingConfig(mode="sampling", temperature=t, top_p=0.9))
             for t in (0.1, 0.5, 1.0, 2.0)],
            chains=200, horizon=50, master_seed=42,
        )
        means = [s.mean_tau for s in sweep]
        assert all(means[i] <= means[i + 1] for i in range(len(means) - 1)), means


def test_c10_metric_golden_values():
    with _Budget(10, 1.0, "hand-derived metric values and exact identity scores"):
        cand, ref = tokenize(START), tokenize(BEGIN)
        # worked arithmetic committed in tests/test_metrics.py
        assert bleu(cand, ref) == pytest.approx((2 / 25) ** 0.25, abs=1e-9)
        assert rouge1(cand, ref) == pytest.approx((0.8, 0.8, 0.8), abs=1e-9)
        assert meteor_lite(cand, ref) == pytest.approx(0.75, abs=1e-9)
        w = math.log(3 / 2) + 1.0
        assert tfidf_cosine(cand, ref, [cand, ref]) == pytest.approx(
            3.0 / (3.0 + 6.0 * w * w), abs=1e-9)

        # adversarial pair 1: fully disjoint 22-token sentences
        a = tokenize(" ".join(f"alpha{i}" for i in range(22)))
        b = tokenize(" ".join(f"beta{i}" for i in range(22)))
        assert bleu(a, b) == pytest.approx((1 / (23 * 22 * 21 * 20)) ** 0.25, abs=1e-9)
        assert 0.0 < bleu(a, b) < 0.05
        assert rouge1(a, b) == (0.0, 0.0, 0.0)
        assert meteor_lite(a, b) == 0.0
        assert tfidf_cosine(a, b, [a, b]) == 0.0

        # adversarial pair 2: repeated-token clipping
        c, d = tokenize("the the the the"), tokenize("the cat")
        assert bleu(c, d) == pytest.approx((1 / 96) ** 0.25, abs=1e-9)
        assert rouge1(c, d).f1 == pytest.approx(1 / 3, abs=1e-9)
        assert meteor_lite(c, d) == pytest.approx(5 / 22, abs=1e-9)

        # identity pairs score exactly 1.0
        for text in (BEGIN, "one two three four", "a b"):
            t = tokenize(text)
            assert bleu(t, t) == 1.0
            assert rouge1(t, t) == (1.0, 1.0, 1.0)
            assert meteor_lite(t, t) == 1.0
            assert tfidf_cosine(t, t, [t, tokenize("unrelated words here")]) == 1.0


def test_c11_statistics_oracles_and_published_row():
    with _Budget(11, 10.0, "p-value oracle, r^2 identity, published-row fixture"):
        for n in (5, 10, 30, 150, 500):
            df = n - 2
            for r in (0.05, 0.171, 0.3, 0.5, 0.7, 0.9):
                t2 = r * r * df / (1 - r * r)
                x = df / (df + t2)
                assert abs(regularized_incomplete_beta(df / 2.0, 0.5, x)
                           - series_incomplete_beta(df / 2.0, 0.5, x)) < 1e-10

        rng = np.random.default_rng(17)
        done = 0
        while done < 1000:
            n = int(rng.integers(3, 40))
            x = rng.uniform(0, 10, n)
            y = rng.normal(0, 1, n) + rng.uniform(-1, 1) * x
            if np.var(x) == 0 or np.var(y) == 0:
                continue
            sample = PairedSample(x=x, y=y)
            r, _ = pearson_with_p(sample)
            _, _, r2 = linear_fit(sample)
            assert abs(r2 - r * r) <= 1e-9
            done += 1

        sample = table_row_fixture()
        assert sample.n == FIXTURE_N
        r, p = pearson_with_p(sample)
        assert round(r, 3) == 0.171
        assert abs(p - TARGET_P) / TARGET_P < 1e-3


def test_c12_pipeline_reproducibility(tmp_path):
    with _Budget(12, 30.0, "same config + master seed give byte-identical data files"):
        kernel = random_logits_kernel(m=16, seed=3)
        corpus_dir = tmp_path / "docs"
        corpus_dir.mkdir()
        for i in range(12):
            (corpus_dir / f"d{i:02d}.txt").write_text(kernel.states[i], encoding="utf-8")
        cfg_path = tmp_path / "config.yaml"
        cfg_path.write_text(yaml.safe_dump({
            "schema_version": 1,
            "corpus": {"path": str(corpus_dir), "n": 12, "sample_seed": 0,
                       "dataset_name": "synth"},
            "kernel": {"kind": "finite", "generator": {"m": 16, "seed": 3}},
            "decoding": {"mode": "sampling", "temperature": 0.7, "top_p": 0.9},
            "horizon": 50,
            "master_seed": 7,
        }), encoding="utf-8")
        assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "a")]) == 0
        assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "b")]) == 0
        ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
        mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert all(c["status"] == "ok" for c in ma["chains"])
        assert ma["files"] == mb["files"]
        for name in ("trajectories.jsonl", "recurrence.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_c13_paragraph_mode_diversity_ratio():
    with _Budget(13, 5.0, "normalized diversity ratio: 1.0 identity, 2.0 alternator"):
        para_a = "First alpha. Second alpha. Third alpha. Fourth alpha."
        para_b = "First beta. Second beta. Third beta. Fourth beta."
        identity = run_chain(ScriptedKernel.identity(), Sentence.from_raw(para_a), 10,
                             np.random.default_rng(0))
        assert normalized_diversity_ratio(identity) == 1.0
        alternator = run_chain(ScriptedKernel.cycle([para_a, para_b]),
                               Sentence.from_raw(para_a), 50, np.random.default_rng(0))
        assert normalized_diversity_ratio(alternator) == 2.0
