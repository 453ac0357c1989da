"""Text-drift metrics: BLEU, ROUGE-1, METEOR-lite, TF-IDF n-gram cosine.

All four are implemented from scratch against their original formulas,
with no external NLP dependency, and run on one shared word tokenizer:
lowercase, split on Unicode whitespace, strip leading and trailing
punctuation from each token, drop empties.  Changing the tokenizer is a
breaking change for every recorded metric value.

Formula notes
-------------
* BLEU: geometric mean of modified n-gram precisions, n = 1..4, with
  add-one smoothing on numerator and denominator for n >= 2 (and for
  n = 1 only when the raw precision would be zero, so disjoint inputs
  score positive but tiny); brevity penalty exp(1 - |ref| / |cand|)
  applies when the candidate is shorter than the reference.
* ROUGE-1: clipped unigram overlap; precision, recall and their
  harmonic mean.
* METEOR-lite: unigram alignment by exact match then Porter-stem match,
  maximizing matches and then minimizing chunks; no synonym stage.
  F_mean = P*R / (alpha*P + (1-alpha)*R), penalty =
  gamma * (chunks / matches)**beta with alpha=0.9, beta=3, gamma=0.5.
  Identical token sequences score exactly 1.0.
* TF-IDF cosine: word n-grams of sizes 2-4 (character n-grams behind
  ``analyzer="char"``); tf is the raw count, idf = ln((1+N)/(1+df)) + 1
  over a background collection; 0.0 when either vector is empty.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

from .errors import InvalidInputError
from .stemming import porter_stem
from .textunit import Sentence, canonicalize, segment

TOKENIZER_VERSION = 1


@dataclass(frozen=True)
class TokenizedSentence:
    tokens: tuple[str, ...]

    def __len__(self):
        return len(self.tokens)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text) -> TokenizedSentence:
    """Shared tokenizer for every metric in this module."""
    if isinstance(text, TokenizedSentence):
        return text
    raw = text.raw if isinstance(text, Sentence) else str(text)
    tokens = []
    for piece in raw.lower().split():
        start, end = 0, len(piece)
        while start < end and _is_punct(piece[start]):
            start += 1
        while end > start and _is_punct(piece[end - 1]):
            end -= 1
        if end > start:
            tokens.append(piece[start:end])
    return TokenizedSentence(tuple(tokens))


def _require_tokens(value, name: str) -> TokenizedSentence:
    ts = tokenize(value)
    if not ts.tokens:
        raise InvalidInputError(f"{name} has no tokens")
    return ts


def _ngram_counts(tokens: tuple[str, ...], n: int) -> Counter:
    return Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1))


def bleu(candidate, reference, max_n: int = 4) -> float:
    cand = _require_tokens(candidate, "candidate")
    ref = _require_tokens(reference, "reference")
    log_sum = 0.0
    for n in range(1, max_n + 1):
        c_counts = _ngram_counts(cand.tokens, n)
        r_counts = _ngram_counts(ref.tokens, n)
        total = max(len(cand.tokens) - n + 1, 0)
        matched = sum(min(c, r_counts[g]) for g, c in c_counts.items())
        if n == 1 and matched > 0:
            p = matched / total
        else:
            p = (matched + 1) / (total + 1)
        log_sum += math.log(p)
    score = math.exp(log_sum / max_n)
    if len(cand.tokens) < len(ref.tokens):
        score *= math.exp(1.0 - len(ref.tokens) / len(cand.tokens))
    return score


class RougeScore(NamedTuple):
    precision: float
    recall: float
    f1: float


def rouge1(candidate, reference) -> RougeScore:
    cand = _require_tokens(candidate, "candidate")
    ref = _require_tokens(reference, "reference")
    c_counts = Counter(cand.tokens)
    r_counts = Counter(ref.tokens)
    matched = sum(min(c, r_counts[w]) for w, c in c_counts.items())
    precision = matched / len(cand.tokens)
    recall = matched / len(ref.tokens)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return RougeScore(precision, recall, f1)


# --- METEOR-lite alignment ----------------------------------------------------

_SEARCH_BUDGET = 200_000


def _chunk_count(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for ci, ri in sorted(pairs):
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def _greedy_pairs(options: list[list[tuple[int, int]]]) -> list[tuple[int, int]]:
    used: set[int] = set()
    pairs = []
    for kind in (0, 1):  # exact stage first, then stems
        for i, opts in enumerate(options):
            if any(p[0] == i for p in pairs):
                continue
            for k, j in opts:
                if k == kind and j not in used:
                    pairs.append((i, j))
                    used.add(j)
                    break
    return pairs


def _align(cand: tuple[str, ...], ref: tuple[str, ...]) -> list[tuple[int, int]]:
    """Best unigram alignment: max exact matches, then max stem matches,
    then minimum chunks.  Exhaustive with a node budget; the budget is
    generous for sentence-length inputs, and a greedy alignment is kept
    as the fallback answer if it ever runs out."""
    ref_stems = [porter_stem(w) for w in ref]
    cand_stems = [porter_stem(w) for w in cand]
    options: list[list[tuple[int, int]]] = []
    for i, w in enumerate(cand):
        opts = [(0, j) for j, r in enumerate(ref) if r == w]
        opts += [(1, j) for j, r in enumerate(ref)
                 if r != w and ref_stems[j] == cand_stems[i]]
        options.append(opts)

    greedy = _greedy_pairs(options)

    def score(pairs: list[tuple[int, int]], kinds: list[int]) -> tuple[int, int, int]:
        exact = sum(1 for k in kinds if k == 0)
        return (exact, len(pairs) - exact, -_chunk_count(pairs) if pairs else 0)

    # optimistic remaining matches from position i onward, per stage
    rem_any = [0] * (len(cand) + 1)
    rem_exact = [0] * (len(cand) + 1)
    for i in range(len(cand) - 1, -1, -1):
        rem_any[i] = rem_any[i + 1] + (1 if options[i] else 0)
        rem_exact[i] = rem_exact[i + 1] + (1 if any(k == 0 for k, _ in options[i]) else 0)

    best_pairs = greedy
    best_key = score(greedy, [0 if cand[i] == ref[j] else 1 for i, j in greedy])
    budget = [_SEARCH_BUDGET]
    used = [False] * len(ref)
    chosen: list[tuple[int, int]] = []
    kinds: list[int] = []

    def dfs(i: int):
        nonlocal best_pairs, best_key
        if budget[0] <= 0:
            return
        budget[0] -= 1
        exact_so_far = sum(1 for k in kinds if k == 0)
        if exact_so_far + rem_exact[i] < best_key[0]:
            return
        if len(chosen) + rem_any[i] < best_key[0] + best_key[1]:
            return
        if i == len(cand):
            key = score(chosen, kinds)
            if key > best_key:
                best_key = key
                best_pairs = list(chosen)
            return
        for k, j in options[i]:
            if not used[j]:
                used[j] = True
                chosen.append((i, j))
                kinds.append(k)
                dfs(i + 1)
                kinds.pop()
                chosen.pop()
                used[j] = False
        dfs(i + 1)  # leave candidate token i unmatched

    dfs(0)
    return best_pairs


def meteor_lite(candidate, reference, alpha: float = 0.9, beta: float = 3.0,
                gamma: float = 0.5) -> float:
    cand = _require_tokens(candidate, "candidate")
    ref = _require_tokens(reference, "reference")
    if cand.tokens == ref.tokens:
        return 1.0
    pairs = _align(cand.tokens, ref.tokens)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    precision = matches / len(cand.tokens)
    recall = matches / len(ref.tokens)
    f_mean = precision * recall / (alpha * precision + (1 - alpha) * recall)
    penalty = gamma * (_chunk_count(pairs) / matches) ** beta
    return f_mean * (1.0 - penalty)


# --- TF-IDF n-gram cosine -----------------------------------------------------


def _word_features(text, n_lo: int, n_hi: int) -> Counter:
    tokens = tokenize(text).tokens
    feats: Counter = Counter()
    for n in range(n_lo, n_hi + 1):
        feats.update(tokens[i:i + n] for i in range(len(tokens) - n + 1))
    return feats


def _char_features(text, n_lo: int, n_hi: int) -> Counter:
    raw = text.raw if isinstance(text, Sentence) else str(text)
    s = canonicalize(raw).lower()
    feats: Counter = Counter()
    for n in range(n_lo, n_hi + 1):
        feats.update(s[i:i + n] for i in range(len(s) - n + 1))
    return feats


def tfidf_cosine(a, b, background, n_lo: int = 2, n_hi: int = 4,
                 analyzer: str = "word") -> float:
    """Cosine similarity of tf-idf n-gram vectors over a background.

    The background fixes the idf table; by convention it is the
    trajectory's own sentences.  Symmetric in (a, b) and invariant to
    background order.
    """
    if analyzer not in ("word", "char"):
        raise InvalidInputError(f"unknown analyzer: {analyzer!r}")
    background = list(background)
    if not background:
        raise InvalidInputError("tf-idf needs a non-empty background collection")
    featurize = _word_features if analyzer == "word" else _char_features
    bg_feats = [featurize(doc, n_lo, n_hi) for doc in background]
    n_docs = len(bg_feats)

    def idf(gram) -> float:
        df = sum(1 for f in bg_feats if gram in f)
        return math.log((1 + n_docs) / (1 + df)) + 1.0

    va = {g: tf * idf(g) for g, tf in featurize(a, n_lo, n_hi).items()}
    vb = {g: tf * idf(g) for g, tf in featurize(b, n_lo, n_hi).items()}
    if not va or not vb:
        return 0.0
    if va == vb:
        return 1.0
    dot = sum(w * vb[g] for g, w in va.items() if g in vb)
    norm = math.sqrt(sum(w * w for w in va.values()) * sum(w * w for w in vb.values()))
    return dot / norm


# --- trajectory-level series --------------------------------------------------

DRIFT_METRICS = (
    "bleu", "rouge1_precision", "rouge1_recall", "rouge1_f1",
    "meteor_lite", "tfidf_cosine",
)


@dataclass
class DriftSeries:
    metric: str
    stepwise: list[float]
    cumulative: list[float]


def drift_series(traj) -> list[DriftSeries]:
    """Stepwise (vs previous state) and cumulative (vs seed) drift values.

    The tf-idf background is the trajectory's own states.
    """
    states = traj.states()
    if len(states) < 2:
        raise InvalidInputError("drift needs a trajectory with at least one step")
    toks = [tokenize(s) for s in states]
    series = {name: DriftSeries(name, [], []) for name in DRIFT_METRICS}
    for t in range(1, len(states)):
        for ref_tok, bucket in ((toks[t - 1], "stepwise"), (toks[0], "cumulative")):
            cand_tok = toks[t]
            getattr(series["bleu"], bucket).append(bleu(cand_tok, ref_tok))
            r = rouge1(cand_tok, ref_tok)
            getattr(series["rouge1_precision"], bucket).append(r.precision)
            getattr(series["rouge1_recall"], bucket).append(r.recall)
            getattr(series["rouge1_f1"], bucket).append(r.f1)
            getattr(series["meteor_lite"], bucket).append(meteor_lite(cand_tok, ref_tok))
            getattr(series["tfidf_cosine"], bucket).append(
                tfidf_cosine(cand_tok, ref_tok, toks))
    return [series[name] for name in DRIFT_METRICS]


def drift_csv_rows(run_id: str, series_list: list[DriftSeries]):
    """Rows in the metric CSV shape: run_id, t, metric, mode, value."""
    for s in series_list:
        for t, value in enumerate(s.stepwise, start=1):
            yield (run_id, t, s.metric, "stepwise", value)
        for t, value in enumerate(s.cumulative, start=1):
            yield (run_id, t, s.metric, "cumulative", value)


def normalized_diversity_ratio(traj) -> float:
    """Distinct sentence realizations over the whole trajectory divided by
    the sentence count of the seed paragraph (states hold paragraph text)."""
    states = traj.states()
    seed_sentences = segment(states[0].raw)
    distinct: set[str] = set()
    for state in states:
        for sent in segment(state.raw):
            distinct.add(sent.key)
    return len(distinct) / len(seed_sentences)
