"""Sentence segmentation, canonicalization, and corpus ingestion.

Two strings count as "the same sentence" exactly when their canonical
keys are equal.  A canonical key is the raw string with leading/trailing
whitespace trimmed, internal whitespace runs collapsed to single spaces,
and Unicode normalized to composed form (NFC).  Nothing else is touched:
comparison stays case- and punctuation-sensitive.

The sentence splitter is deliberately rule-based so that results are
reproducible.  The full rule: a sentence ends at a run of ``.``, ``!``
or ``?`` (optionally followed by closing quotes), provided the next
non-whitespace character is uppercase or the text ends there.  A ``.``
that terminates one of the abbreviations in ``ABBREVIATIONS`` never ends
a sentence.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorpusIOError, DataError, InsufficientDataError, InvalidInputError

# Abbreviations whose trailing period never splits a sentence.
ABBREVIATIONS = frozenset({"Mr.", "Mrs.", "Dr.", "e.g.", "i.e.", "etc."})

_WS_RUN = re.compile(r"\s+")
_CLOSERS = "\"'”’»›"
_BOUNDARY = re.compile(rf"([.!?]+[{_CLOSERS}]*)(\s+)")
_LAST_TOKEN = re.compile(r"\S+$")
_OPENERS = "\"'([{“‘«‹"
_PARA_BREAK = re.compile(r"\n[ \t]*\n+")


def canonicalize(raw: str) -> str:
    """Return the canonical comparison key for ``raw``.

    Trims, collapses internal whitespace runs to single spaces, and
    applies Unicode NFC.  Idempotent: ``canonicalize(canonicalize(s))
    == canonicalize(s)``.

    Raises :class:`InvalidInputError` if nothing remains after trimming.
    """
    key = unicodedata.normalize("NFC", raw)
    key = _WS_RUN.sub(" ", key).strip()
    if not key:
        raise InvalidInputError("cannot canonicalize a string that is empty after trimming")
    return key


@dataclass(frozen=True)
class Sentence:
    """A surface string plus the canonical key used for state equality."""

    raw: str
    key: str

    @classmethod
    def from_raw(cls, raw: str) -> "Sentence":
        return cls(raw=raw, key=canonicalize(raw))

    @property
    def word_count(self) -> int:
        """Whitespace-token count of the canonical key."""
        return len(self.key.split())


@dataclass(frozen=True)
class Paragraph:
    """An ordered run of sentences from one source document."""

    sentences: tuple[Sentence, ...]
    source_id: str

    def __post_init__(self):
        if not self.sentences:
            raise InvalidInputError("a paragraph needs at least one sentence")

    @property
    def text(self) -> str:
        return " ".join(s.raw for s in self.sentences)

    def as_state(self) -> Sentence:
        """The paragraph as a single chain state."""
        return Sentence.from_raw(self.text)


@dataclass(frozen=True)
class Corpus:
    """Sampled seed units plus the metadata needed to resample them."""

    seeds: tuple
    dataset_name: str
    sample_seed: int
    unit: str = "sentence"

    def seed_states(self) -> list[Sentence]:
        """Seeds as chain states (paragraphs are flattened to one string)."""
        return [s.as_state() if isinstance(s, Paragraph) else s for s in self.seeds]

    def to_dict(self) -> dict:
        seeds = []
        for s in self.seeds:
            if isinstance(s, Paragraph):
                seeds.append({
                    "source_id": s.source_id,
                    "sentences": [{"raw": x.raw, "key": x.key} for x in s.sentences],
                })
            else:
                seeds.append({"raw": s.raw, "key": s.key})
        return {
            "dataset_name": self.dataset_name,
            "sample_seed": self.sample_seed,
            "unit": self.unit,
            "seeds": seeds,
        }


def _is_abbreviation(text: str, terminator_end: int) -> bool:
    m = _LAST_TOKEN.search(text, 0, terminator_end)
    if m is None:
        return False
    token = m.group().lstrip(_OPENERS)
    return token in ABBREVIATIONS


def segment(text: str) -> list[Sentence]:
    """Split ``text`` into sentences.

    Deterministic, rule-based (see module docstring).  Text without any
    terminator comes back as a single sentence.
    """
    if not text.strip():
        raise InvalidInputError("cannot segment blank text")
    pieces: list[str] = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        nxt = m.end()
        if nxt >= len(text):
            break
        if not text[nxt].isupper():
            continue
        if m.group(1)[0] == "." and _is_abbreviation(text, m.start(1) + 1):
            continue
        pieces.append(text[start:m.end(1)])
        start = nxt
    tail = text[start:]
    if tail.strip():
        pieces.append(tail)
    return [Sentence.from_raw(p) for p in pieces]


def split_paragraphs(text: str) -> list[str]:
    """Split on blank lines; returns non-blank paragraph strings."""
    return [p for p in _PARA_BREAK.split(text) if p.strip()]


def _read_directory(path: Path) -> list[tuple[str, str]]:
    docs = []
    for f in sorted(path.glob("*.txt")):
        try:
            docs.append((f.stem, f.read_text(encoding="utf-8")))
        except (OSError, UnicodeError) as exc:
            raise CorpusIOError(f"cannot read corpus document {f}: {exc}") from exc
    return docs


def _read_jsonl(path: Path) -> list[tuple[str, str]]:
    docs = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeError) as exc:
        raise CorpusIOError(f"cannot read corpus file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON record: {exc}") from exc
        if not isinstance(record, dict) or "text" not in record:
            raise DataError(f"{path}:{lineno}: corpus record must be an object with a 'text' field")
        docs.append((str(record.get("id", lineno)), str(record["text"])))
    return docs


def load_corpus(
    path: str | Path,
    n: int,
    sample_seed: int,
    unit: str = "sentence",
    dataset_name: str | None = None,
) -> Corpus:
    """Sample ``n`` documents without replacement and extract seed units.

    ``path`` is either a directory of UTF-8 ``.txt`` files (filename is
    the document id) or a ``.jsonl`` file of ``{"id", "text"}`` records.
    For ``unit="sentence"`` the seed is the first sentence of each
    sampled document; for ``unit="paragraph"`` it is the first
    paragraph.  Identical (contents, n, sample_seed) always produce an
    identical corpus.
    """
    if unit not in ("sentence", "paragraph"):
        raise InvalidInputError(f"unknown corpus unit: {unit!r}")
    if n < 1:
        raise InvalidInputError("sample size must be at least 1")
    p = Path(path)
    if p.is_dir():
        docs = _read_directory(p)
    elif p.is_file():
        docs = _read_jsonl(p)
    else:
        raise CorpusIOError(f"corpus path does not exist: {p}")
    if len(docs) < n:
        raise InsufficientDataError(f"corpus {p} holds {len(docs)} documents, need {n}")

    rng = np.random.default_rng(sample_seed)
    order = rng.permutation(len(docs))[:n]
    seeds = []
    for i in order:
        doc_id, text = docs[int(i)]
        if not text.strip():
            raise DataError(f"document {doc_id!r} in {p} is blank")
        if unit == "sentence":
            seeds.append(segment(text)[0])
        else:
            first = split_paragraphs(text)[0]
            seeds.append(Paragraph(tuple(segment(first)), source_id=doc_id))
    return Corpus(
        seeds=tuple(seeds),
        dataset_name=dataset_name if dataset_name is not None else p.stem,
        sample_seed=sample_seed,
        unit=unit,
    )
