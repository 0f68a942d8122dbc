"""Text cleaning, hashtag segmentation, tokenization, vocabulary, encoding.

The cleaning pipeline is built for code-mixed social-media posts in Indic
scripts plus Latin: mention stripping, emoji-to-description expansion,
repeated-punctuation collapsing, unigram-LM hashtag segmentation, then
tokenization into word runs and standalone punctuation marks.

Python's ``\\w`` does not cover Indic combining vowel signs (category Mc),
which would shred Bengali/Sinhala words, so word characters are defined
here explicitly as Unicode letters, marks, digits and the underscore.
"""

from __future__ import annotations

import hashlib
import json
import math
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ArgumentError, FormatError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

def _description_ok(desc: str) -> bool:
    return bool(desc) and desc.isascii() and all(
        part and all(ch.islower() or ch.isdigit() for ch in part)
        for part in desc.split("_")
    )


# Codepoint ranges treated as emoji when deciding what to drop if a
# character is absent from the emoji table.  Covers the pictograph planes
# plus joiners/selectors/keycap so unknown ZWJ sequences vanish cleanly.
_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),
    (0x2600, 0x27BF),
    (0x2B00, 0x2BFF),
    (0xFE00, 0xFE0F),
    (0x200D, 0x200D),
    (0x20E3, 0x20E3),
)

# Variation selectors and the keycap mark are categorized as marks (Mn/Me)
# but must not glue onto word runs; they belong to emoji sequences.
_MARK_EXCEPTIONS = frozenset(chr(cp) for cp in (*range(0xFE00, 0xFE10), 0x20E3))


@lru_cache(maxsize=4096)
def _is_word_char(c: str) -> bool:
    if c in _MARK_EXCEPTIONS:
        return False
    return c == "_" or unicodedata.category(c)[0] in "LMN"


@lru_cache(maxsize=4096)
def _is_punct(c: str) -> bool:
    return unicodedata.category(c).startswith("P")


def _is_emoji_char(c: str) -> bool:
    cp = ord(c)
    return any(lo <= cp <= hi for lo, hi in _EMOJI_RANGES)


@lru_cache(maxsize=4096)
def _lower_latin_char(c: str) -> str:
    if c.isascii():
        return c.lower()
    if c.isalpha() and "LATIN" in unicodedata.name(c, ""):
        return c.lower()
    return c


def lower_latin(s: str) -> str:
    """Lowercase Latin letters only; Indic scripts have no case to fold."""
    return "".join(_lower_latin_char(c) for c in s)


def _squeeze_ws(s: str) -> str:
    return " ".join(s.split())


@dataclass(frozen=True)
class CleanConfig:
    """Switches for the cleaning steps; defaults match the full pipeline."""

    strip_usernames: bool = True
    collapse_punct: bool = True
    expand_emoji: bool = True
    segment_hashtags: bool = True
    lowercase_latin: bool = True


@dataclass(frozen=True)
class EmojiTable:
    """emoji codepoint sequence -> snake_case description."""

    entries: dict[str, str]
    max_key_len: int = field(init=False, default=0)

    def __post_init__(self):
        for key, desc in self.entries.items():
            # Keys must start at a non-word character (the matcher only
            # fires there) and may not contain ASCII word characters or
            # whitespace, or a key could re-match inside emitted tokens.
            bad_key = (
                not key
                or _is_word_char(key[0])
                or any(c.isspace() or (c.isascii() and (c.isalnum() or c == "_"))
                       for c in key)
            )
            if bad_key:
                raise FormatError(f"invalid emoji table key {key!r}")
            if not _description_ok(desc):
                raise FormatError(f"emoji description {desc!r} must be "
                                  "lowercase ASCII words joined by underscores")
        object.__setattr__(self, "max_key_len",
                           max((len(k) for k in self.entries), default=0))

    @classmethod
    def load(cls, path: str | Path) -> "EmojiTable":
        entries: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise FormatError(f"{path}:{lineno}: expected "
                                      "<emoji><TAB><description>")
                entries[parts[0]] = parts[1]
        return cls(entries=entries)


def bundled_emoji_table() -> EmojiTable:
    """The emoji table shipped with the package."""
    return EmojiTable.load(Path(__file__).parent / "data" / "emoji.tsv")


@dataclass(frozen=True)
class UnigramTable:
    """Word frequencies backing the hashtag segmenter."""

    counts: dict[str, int]
    total: int = field(init=False, default=0)
    max_word_len: int = field(init=False, default=0)

    def __post_init__(self):
        for word, count in self.counts.items():
            if word != word.lower():
                raise FormatError(f"unigram word {word!r} must be lowercase")
            if count <= 0:
                raise FormatError(f"unigram count for {word!r} must be positive")
        object.__setattr__(self, "total", sum(self.counts.values()))
        object.__setattr__(self, "max_word_len",
                           max((len(w) for w in self.counts), default=0))

    @classmethod
    def empty(cls) -> "UnigramTable":
        return cls(counts={})

    @classmethod
    def load(cls, path: str | Path) -> "UnigramTable":
        counts: dict[str, int] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise FormatError(f"{path}:{lineno}: expected <word><TAB><count>")
                try:
                    count = int(parts[1])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: count {parts[1]!r} "
                                      "is not an integer") from None
                if count <= 0:
                    raise FormatError(f"{path}:{lineno}: count must be positive")
                word = parts[0].lower()
                counts[word] = counts.get(word, 0) + count
        return cls(counts=counts)

    def log_score(self, word: str) -> float:
        """Log unigram probability; unknown words are penalized per length
        so that one long unknown chunk beats shredding it into pieces.

        The effective total is floored at 100: below that the unknown-word
        score 10/(total*10^len) stops being a penalty (a single unknown
        character would score >= 1) and near-empty tables would shred
        hashtags into characters.
        """
        total = max(self.total, 100)
        count = self.counts.get(word)
        if count is not None:
            return math.log(count) - math.log(total)
        return math.log(10.0) - math.log(total) - len(word) * math.log(10.0)


def strip_usernames(text: str) -> str:
    """Drop every @mention (@ followed by one or more word characters) and
    normalize whitespace to single spaces."""
    out: list[str] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "@" and i + 1 < n and _is_word_char(text[i + 1]):
            i += 1
            while i < n and _is_word_char(text[i]):
                i += 1
            continue
        out.append(c)
        i += 1
    return _squeeze_ws("".join(out))


def collapse_punct(text: str) -> str:
    """Collapse each run of two or more identical punctuation characters to
    a single one; mixed runs like "?!" are left alone."""
    out: list[str] = []
    prev = ""
    for c in text:
        if c == prev and _is_punct(c):
            continue
        out.append(c)
        prev = c
    return "".join(out)


def expand_emoji(text: str, table: EmojiTable) -> str:
    """Replace table-listed emoji sequences (longest match first) with their
    description, drop emoji that are not listed, and normalize whitespace."""
    out: list[str] = []
    i, n = 0, len(text)
    limit = table.max_key_len
    while i < n:
        c = text[i]
        if not _is_word_char(c) and not c.isspace():
            matched = False
            for length in range(min(limit, n - i), 0, -1):
                desc = table.entries.get(text[i:i + length])
                if desc is not None:
                    out.append(f" {desc} ")
                    i += length
                    matched = True
                    break
            if matched:
                continue
            if _is_emoji_char(c):
                i += 1
                continue
        out.append(c)
        i += 1
    return _squeeze_ws("".join(out))


def segment_hashtag(tag: str, table: UnigramTable) -> list[str]:
    """Split a hashtag body into words by maximum-likelihood dynamic
    programming over the unigram table.

    The body is Latin-lowercased first; bodies with no alphabetic character
    (pure numbers, "#2023") are returned whole.  Returned tokens always
    reconcatenate to the normalized body.
    """
    if not tag.startswith("#"):
        raise ArgumentError(f"hashtag must start with '#', got {tag!r}")
    body = lower_latin(tag[1:])
    if not body:
        return []
    if not any(c.isalpha() for c in body):
        return [body]
    n = len(body)
    best = [-math.inf] * (n + 1)
    best[0] = 0.0
    back = [0] * (n + 1)
    for j in range(1, n + 1):
        for i in range(j):
            score = best[i] + table.log_score(body[i:j])
            if score > best[j]:
                best[j] = score
                back[j] = i
    tokens: list[str] = []
    j = n
    while j > 0:
        i = back[j]
        tokens.append(body[i:j])
        j = i
    tokens.reverse()
    return tokens


def _segment_hashtags_inline(text: str, table: UnigramTable) -> str:
    out: list[str] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "#" and i + 1 < n and _is_word_char(text[i + 1]):
            j = i + 1
            while j < n and _is_word_char(text[j]):
                j += 1
            segments = segment_hashtag("#" + text[i + 1:j], table)
            out.append(" " + " ".join(segments) + " ")
            i = j
            continue
        out.append(c)
        i += 1
    return _squeeze_ws("".join(out))


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization with each non-word character (punctuation,
    symbols) emitted as its own token; word runs stay intact."""
    tokens: list[str] = []
    run: list[str] = []
    for c in text:
        if _is_word_char(c):
            run.append(c)
            continue
        if run:
            tokens.append("".join(run))
            run = []
        if not c.isspace() and not unicodedata.category(c).startswith("C"):
            tokens.append(c)
    if run:
        tokens.append("".join(run))
    return tokens


def clean(text: str,
          cfg: CleanConfig,
          emoji: EmojiTable,
          unigrams: UnigramTable) -> list[str]:
    """Full cleaning pipeline: mentions -> emoji -> punctuation runs ->
    hashtags -> tokenize -> Latin lowercasing.  Deterministic, and
    idempotent over rejoin-with-spaces."""
    s = text
    if cfg.strip_usernames:
        s = strip_usernames(s)
    if cfg.expand_emoji:
        s = expand_emoji(s, emoji)
    if cfg.collapse_punct:
        s = collapse_punct(s)
    if cfg.segment_hashtags:
        s = _segment_hashtags_inline(s, unigrams)
    tokens = tokenize(s)
    if cfg.lowercase_latin:
        tokens = [lower_latin(t) for t in tokens]
    return tokens


@dataclass(frozen=True)
class TextPipeline:
    """Cleaning configuration plus the resource tables it needs."""

    cfg: CleanConfig
    emoji: EmojiTable
    unigrams: UnigramTable

    def clean(self, text: str) -> list[str]:
        return clean(text, self.cfg, self.emoji, self.unigrams)


@dataclass(frozen=True)
class Vocab:
    """Token ids with reserved PAD=0 and UNK=1."""

    id_to_token: tuple[str, ...]
    token_to_id: dict[str, int]
    min_freq: int
    max_size: int

    def __len__(self) -> int:
        return len(self.id_to_token)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def to_json(self) -> str:
        return json.dumps(
            {"tokens": list(self.id_to_token),
             "min_freq": self.min_freq,
             "max_size": self.max_size},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        obj = json.loads(text)
        tokens = tuple(obj["tokens"])
        if tokens[:2] != (PAD_TOKEN, UNK_TOKEN):
            raise FormatError("vocab json must start with the PAD/UNK tokens")
        return cls(
            id_to_token=tokens,
            token_to_id={t: i for i, t in enumerate(tokens)},
            min_freq=obj["min_freq"],
            max_size=obj["max_size"],
        )

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def build_vocab(corpus: list[list[str]], min_freq: int = 2,
                max_size: int = 20000) -> Vocab:
    """Rank tokens with frequency >= min_freq by (freq desc, token asc) and
    assign ids 2..V-1, capped at max_size including PAD/UNK."""
    if min_freq < 1:
        raise ArgumentError(f"min_freq must be >= 1, got {min_freq}")
    if max_size < 3:
        raise ArgumentError(f"max_size must be >= 3, got {max_size}")
    freq: dict[str, int] = {}
    for tokens in corpus:
        for tok in tokens:
            freq[tok] = freq.get(tok, 0) + 1
    ranked = sorted(
        (t for t, c in freq.items()
         if c >= min_freq and t not in (PAD_TOKEN, UNK_TOKEN)),
        key=lambda t: (-freq[t], t),
    )
    id_to_token = (PAD_TOKEN, UNK_TOKEN, *ranked[:max_size - 2])
    return Vocab(
        id_to_token=id_to_token,
        token_to_id={t: i for i, t in enumerate(id_to_token)},
        min_freq=min_freq,
        max_size=max_size,
    )


@dataclass(frozen=True)
class EncodedSample:
    """Fixed-length id/mask arrays for one sample."""

    ids: np.ndarray    # (L,) int32
    mask: np.ndarray   # (L,) uint8, ones on the true-token prefix
    true_len: int


def encode(tokens: list[str], vocab: Vocab, max_len: int) -> EncodedSample:
    """Map the first max_len tokens to ids (UNK for out-of-vocab), pad the
    rest with PAD; the mask marks real positions."""
    if max_len < 1:
        raise ArgumentError(f"max_len must be >= 1, got {max_len}")
    true_len = min(len(tokens), max_len)
    ids = np.full(max_len, PAD_ID, dtype=np.int32)
    mask = np.zeros(max_len, dtype=np.uint8)
    for t in range(true_len):
        ids[t] = vocab.lookup(tokens[t])
        mask[t] = 1
    return EncodedSample(ids=ids, mask=mask, true_len=true_len)


def encode_corpus(token_lists: list[list[str]], vocab: Vocab,
                  max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """Encode many token lists into stacked (n, L) ids and (n,) lengths.

    Samples that cleaned down to zero tokens are encoded as a single UNK so
    the model always sees at least one position (its forward pass rejects
    fully masked input).
    """
    n = len(token_lists)
    ids = np.full((n, max_len), PAD_ID, dtype=np.int32)
    lens = np.zeros(n, dtype=np.int64)
    for row, tokens in enumerate(token_lists):
        if not tokens:
            tokens = [UNK_TOKEN]
        enc = encode(tokens, vocab, max_len)
        ids[row] = enc.ids
        lens[row] = enc.true_len
    return ids, lens
