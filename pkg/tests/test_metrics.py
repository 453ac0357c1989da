import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainlab.errors import InvalidInputError
from chainlab.kernels import ScriptedKernel
from chainlab.metrics import (
    DRIFT_METRICS,
    bleu,
    drift_csv_rows,
    drift_series,
    meteor_lite,
    normalized_diversity_ratio,
    rouge1,
    tfidf_cosine,
    tokenize,
)
from chainlab.stemming import porter_stem
from chainlab.textunit import Sentence
from chainlab.chain_runner import run_chain
import numpy as np

BEGIN = "We begin with a prologue."
START = "We start with a prologue."

# two 22-token sentences with fully disjoint vocabularies
DISJOINT_A = " ".join(f"alpha{i}" for i in range(22))
DISJOINT_B = " ".join(f"beta{i}" for i in range(22))


class TestTokenizer:
    def test_lowercases_and_strips_punctuation(self):
        assert tokenize("We BEGIN, with (a) prologue!").tokens == (
            "we", "begin", "with", "a", "prologue",
        )

    def test_internal_apostrophe_preserved(self):
        assert tokenize("Don't stop.").tokens == ("don't", "stop")

    def test_pure_punctuation_tokens_dropped(self):
        assert tokenize("wait -- what ?!").tokens == ("wait", "what")

    def test_accepts_sentence_objects(self):
        assert tokenize(Sentence.from_raw("One two.")).tokens == ("one", "two")


class TestPorterStemmer:
    @pytest.mark.parametrize("word,stem", [
        ("caresses", "caress"),
        ("ponies", "poni"),
        ("cats", "cat"),
        ("feed", "feed"),
        ("agreed", "agre"),
        ("plastered", "plaster"),
        ("motoring", "motor"),
        ("sing", "sing"),
        ("conflated", "conflat"),
        ("troubled", "troubl"),
        ("sized", "size"),
        ("hopping", "hop"),
        ("falling", "fall"),
        ("hissing", "hiss"),
        ("filing", "file"),
        ("happy", "happi"),
        ("sky", "sky"),
        ("relational", "relat"),
        ("conditional", "condit"),
        ("running", "run"),
        ("runs", "run"),
    ])
    def test_known_vectors(self, word, stem):
        assert porter_stem(word) == stem


class TestBleu:
    def test_identity_exactly_one(self):
        toks = tokenize("one two three four five six seven eight nine ten")
        assert bleu(toks, toks) == 1.0

    def test_begin_start_golden(self):
        # p1 = 4/5 raw; smoothed p2 = (2+1)/(4+1), p3 = (1+1)/(3+1),
        # p4 = (0+1)/(2+1); BP = 1 -> ((4/5)(3/5)(1/2)(1/3))^(1/4) = (2/25)^(1/4)
        got = bleu(tokenize(START), tokenize(BEGIN))
        assert got == pytest.approx((2 / 25) ** 0.25, abs=1e-9)
        assert got == pytest.approx(0.5318295896944989, abs=1e-9)

    def test_zero_overlap_positive_but_tiny(self):
        # disjoint 22-token pair: p1 floored to 1/23, p2..p4 = 1/22, 1/21, 1/20
        got = bleu(tokenize(DISJOINT_A), tokenize(DISJOINT_B))
        expected = (1 / (23 * 22 * 21 * 20)) ** 0.25
        assert got == pytest.approx(expected, abs=1e-9)
        assert 0.0 < got < 0.05

    def test_clipping_golden(self):
        # cand "the the the the" vs ref "the cat": p1 = 1/4 (clipped),
        # p2 = 1/4, p3 = 1/3, p4 = 1/2 smoothed -> (1/96)^(1/4); BP = 1
        got = bleu(tokenize("the the the the"), tokenize("the cat"))
        assert got == pytest.approx((1 / 96) ** 0.25, abs=1e-9)

    def test_brevity_penalty_golden(self):
        # cand "the cat" vs ref "the cat sat on the mat": precisions all 1
        # (clipped/smoothed), BP = exp(1 - 6/2) = e^-2
        got = bleu(tokenize("the cat"), tokenize("the cat sat on the mat"))
        assert got == pytest.approx(math.exp(-2.0), abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            bleu(tokenize("..."), tokenize("the cat"))

    def test_permuting_golden_candidates_never_increases_score(self):
        import itertools
        from chainlab.metrics import TokenizedSentence

        for cand_text, ref_text in ((START, BEGIN), ("the cat", "the cat sat on the mat")):
            cand, ref = tokenize(cand_text), tokenize(ref_text)
            baseline = bleu(cand, ref)
            for perm in itertools.permutations(cand.tokens):
                assert bleu(TokenizedSentence(perm), ref) <= baseline + 1e-12


class TestRouge1:
    def test_identity(self):
        toks = tokenize("a small example here")
        assert rouge1(toks, toks) == (1.0, 1.0, 1.0)

    def test_hand_count(self):
        got = rouge1(tokenize("the cat"), tokenize("the cat sat"))
        assert got.precision == 1.0
        assert got.recall == pytest.approx(2 / 3, abs=1e-12)
        assert got.f1 == pytest.approx(0.8, abs=1e-12)

    def test_disjoint_zero(self):
        assert rouge1(tokenize(DISJOINT_A), tokenize(DISJOINT_B)) == (0.0, 0.0, 0.0)

    def test_begin_start_golden(self):
        got = rouge1(tokenize(START), tokenize(BEGIN))
        assert got == pytest.approx((0.8, 0.8, 0.8), abs=1e-9)

    def test_clipping_golden(self):
        # matches = min(4, 1) = 1: P = 1/4, R = 1/2, F1 = 1/3
        got = rouge1(tokenize("the the the the"), tokenize("the cat"))
        assert got.precision == pytest.approx(0.25, abs=1e-12)
        assert got.recall == pytest.approx(0.5, abs=1e-12)
        assert got.f1 == pytest.approx(1 / 3, abs=1e-12)

    def test_f1_is_harmonic_mean_of_own_outputs(self):
        import numpy as np
        rng = np.random.default_rng(0)
        vocab = ["a", "b", "c", "d", "e", "f"]
        for _ in range(200):
            cand = " ".join(rng.choice(vocab, size=rng.integers(1, 8)))
            ref = " ".join(rng.choice(vocab, size=rng.integers(1, 8)))
            p, r, f1 = rouge1(tokenize(cand), tokenize(ref))
            want = 2 * p * r / (p + r) if p + r > 0 else 0.0
            assert f1 == pytest.approx(want, abs=1e-12)


class TestMeteorLite:
    def test_identity_exactly_one(self):
        toks = tokenize("one two three four")
        assert meteor_lite(toks, toks) == 1.0

    def test_begin_start_golden(self):
        # 4 exact matches in 2 chunks ("we" | "with a prologue"):
        # P = R = 4/5, F_mean = 0.8, penalty = 0.5 * (2/4)^3 -> 0.8 * 0.9375
        got = meteor_lite(tokenize(START), tokenize(BEGIN))
        assert got == pytest.approx(0.75, abs=1e-9)

    def test_disjoint_zero(self):
        assert meteor_lite(tokenize(DISJOINT_A), tokenize(DISJOINT_B)) == 0.0

    def test_clipping_golden(self):
        # 1 match, 1 chunk: P = 1/4, R = 1/2, F_mean = 5/11, penalty = 1/2
        got = meteor_lite(tokenize("the the the the"), tokenize("the cat"))
        assert got == pytest.approx(5 / 22, abs=1e-9)

    def test_stem_stage_aligns_morphology(self):
        # exact: "the"; stems: cats~cat, running~runs -> 3 matches, 1 chunk
        got = meteor_lite(tokenize("the cats running"), tokenize("the cat runs"))
        assert got == pytest.approx(53 / 54, abs=1e-9)

    def test_alignment_minimizes_chunks(self):
        # "a b a" vs "b a": both 2-match alignments exist; the contiguous
        # one has 1 chunk -> F_mean = (2/3 * 1) / (0.9 * 2/3 + 0.1) = 20/21,
        # score = 20/21 * (1 - 0.5 * (1/2)^3) = 25/28
        got = meteor_lite(tokenize("a b a"), tokenize("b a"))
        assert got == pytest.approx(25 / 28, abs=1e-9)

    def test_near_identity_pays_chunk_penalty(self):
        # one token swapped at the end: matches = 3 of 4, formula applies
        got = meteor_lite(tokenize("one two three four"), tokenize("one two three five"))
        assert 0.0 < got < 1.0


class TestTfidfCosine:
    def test_identity_exactly_one(self):
        a = tokenize(BEGIN)
        assert tfidf_cosine(a, a, [a, tokenize(START)]) == 1.0

    def test_disjoint_zero(self):
        a, b = tokenize(DISJOINT_A), tokenize(DISJOINT_B)
        assert tfidf_cosine(a, b, [a, b]) == 0.0

    def test_begin_start_golden(self):
        # shared features: bigrams (with,a), (a,prologue) + trigram
        # (with,a,prologue), idf 1.0 each; six unique features per side at
        # idf ln(3/2)+1 -> cosine = 3 / (3 + 6*(ln(3/2)+1)^2)
        a, b = tokenize(START), tokenize(BEGIN)
        got = tfidf_cosine(a, b, [a, b])
        w = math.log(3 / 2) + 1.0
        assert got == pytest.approx(3.0 / (3.0 + 6.0 * w * w), abs=1e-9)
        assert got == pytest.approx(0.20199309249791833, abs=1e-9)

    def test_brute_force_oracle_shared_bigram(self):
        # spec-style case: two sentences sharing exactly one bigram inside a
        # three-sentence background; expected value from an independent
        # dict-based computation
        a = tokenize("the cat sat down")
        b = tokenize("a dog the cat")
        c = tokenize("something else entirely here")
        background = [a, b, c]

        def feats(toks):
            out = {}
            for n in (2, 3, 4):
                for i in range(len(toks.tokens) - n + 1):
                    g = toks.tokens[i:i + n]
                    out[g] = out.get(g, 0) + 1
            return out

        bg = [feats(d) for d in background]

        def idf(g):
            df = sum(1 for f in bg if g in f)
            return math.log((1 + len(bg)) / (1 + df)) + 1.0

        va = {g: tf * idf(g) for g, tf in feats(a).items()}
        vb = {g: tf * idf(g) for g, tf in feats(b).items()}
        dot = sum(w * vb.get(g, 0.0) for g, w in va.items())
        expected = dot / math.sqrt(
            sum(w * w for w in va.values()) * sum(w * w for w in vb.values()))
        assert tfidf_cosine(a, b, background) == pytest.approx(expected, abs=1e-12)

    def test_symmetric_and_background_order_invariant(self):
        a = tokenize("one two three four")
        b = tokenize("two three four five")
        c = tokenize("three four five six")
        assert tfidf_cosine(a, b, [a, b, c]) == pytest.approx(
            tfidf_cosine(b, a, [c, b, a]), abs=1e-12)

    def test_single_token_degenerates_to_zero(self):
        a = tokenize("word")
        assert tfidf_cosine(a, a, [a]) == 0.0

    def test_char_analyzer(self):
        a, b = Sentence.from_raw("abcd"), Sentence.from_raw("abce")
        got = tfidf_cosine(a, b, [a, b], analyzer="char")
        assert 0.0 < got < 1.0

    def test_empty_background_rejected(self):
        with pytest.raises(InvalidInputError):
            tfidf_cosine(tokenize("a b"), tokenize("a b"), [])


class TestMetricRanges:
    token = st.sampled_from(["we", "begin", "start", "with", "a", "prologue", "story", "cats"])
    sentence = st.lists(token, min_size=1, max_size=10)

    @settings(max_examples=150, deadline=None)
    @given(cand=sentence, ref=sentence)
    def test_all_metrics_in_unit_interval(self, cand, ref):
        from chainlab.metrics import TokenizedSentence

        c, r = TokenizedSentence(tuple(cand)), TokenizedSentence(tuple(ref))
        values = [bleu(c, r), meteor_lite(c, r), *rouge1(c, r),
                  tfidf_cosine(c, r, [c, r])]
        for v in values:
            assert 0.0 <= v <= 1.0 + 1e-12

    @settings(max_examples=80, deadline=None)
    @given(toks=sentence)
    def test_identity_is_maximum(self, toks):
        from chainlab.metrics import TokenizedSentence

        t = TokenizedSentence(tuple(toks))
        assert bleu(t, t) == 1.0
        assert rouge1(t, t) == (1.0, 1.0, 1.0)
        assert meteor_lite(t, t) == 1.0


def make_traj(kernel, seed_raw, horizon):
    return run_chain(kernel, Sentence.from_raw(seed_raw), horizon, np.random.default_rng(0))


class TestDriftSeries:
    def test_constant_trajectory_all_ones(self):
        traj = make_traj(ScriptedKernel.identity(), BEGIN, 5)
        for series in drift_series(traj):
            assert series.stepwise == [1.0] * 5
            assert series.cumulative == [1.0] * 5

    def test_two_cycle_alternation(self):
        traj = make_traj(ScriptedKernel.cycle([BEGIN, START]), BEGIN, 6)
        by_name = {s.metric: s for s in drift_series(traj)}
        f1 = by_name["rouge1_f1"]
        # stepwise always compares begin-vs-start: constant 4/5
        assert f1.stepwise == pytest.approx([0.8] * 6, abs=1e-12)
        # cumulative alternates between the cross value and exact repeat
        assert f1.cumulative == pytest.approx([0.8, 1.0, 0.8, 1.0, 0.8, 1.0], abs=1e-12)
        meteor = by_name["meteor_lite"]
        assert meteor.cumulative[1] == 1.0
        assert meteor.cumulative[0] == pytest.approx(0.75, abs=1e-9)

    def test_emits_every_metric_with_horizon_lengths(self):
        traj = make_traj(ScriptedKernel.cycle([BEGIN, START]), BEGIN, 4)
        series = drift_series(traj)
        assert {s.metric for s in series} == set(DRIFT_METRICS)
        assert all(len(s.stepwise) == 4 and len(s.cumulative) == 4 for s in series)

    def test_csv_rows_shape(self):
        traj = make_traj(ScriptedKernel.identity(), BEGIN, 2)
        rows = list(drift_csv_rows("chain-0000", drift_series(traj)))
        assert ("chain-0000", 1, "bleu", "stepwise", 1.0) in rows
        assert ("chain-0000", 2, "tfidf_cosine", "cumulative", 1.0) in rows
        assert len(rows) == len(DRIFT_METRICS) * 2 * 2


PARA_A = "First alpha. Second alpha. Third alpha. Fourth alpha."
PARA_B = "First beta. Second beta. Third beta. Fourth beta."


class TestNormalizedDiversityRatio:
    def test_identity_kernel_ratio_one(self):
        traj = make_traj(ScriptedKernel.identity(), PARA_A, 10)
        assert normalized_diversity_ratio(traj) == 1.0

    def test_two_paragraph_alternator_ratio_two(self):
        traj = make_traj(ScriptedKernel.cycle([PARA_A, PARA_B]), PARA_A, 50)
        assert normalized_diversity_ratio(traj) == 2.0

    def test_partial_sentence_novelty(self):
        # one of four sentences changes once: 5 distinct / 4 seed sentences
        changed = "First alpha. Second alpha. Third alpha. Fourth CHANGED."
        traj = make_traj(ScriptedKernel({PARA_A: changed, changed: changed}), PARA_A, 6)
        assert normalized_diversity_ratio(traj) == pytest.approx(5 / 4)
