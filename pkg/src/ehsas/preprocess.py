"""Persian tweet cleaning as an ordered, configurable pipeline.

Character-level steps run on raw text, tokenize splits it, token-level
steps run on the token list. Every character-level step is idempotent,
so re-running a pipeline over its own output is a no-op.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError, DataError

__all__ = [
    "ZWNJ",
    "CharMap",
    "StemRules",
    "SpellPolicy",
    "PreprocessConfig",
    "DEFAULT_CHARMAP_PAIRS",
    "DEFAULT_SUFFIXES",
    "DEFAULT_STEPS",
    "default_charmap",
    "default_stem_rules",
    "default_stopwords",
    "load_stopwords",
    "load_charmap",
    "strip_punctuation",
    "strip_foreign",
    "strip_digits",
    "map_characters",
    "normalize",
    "tokenize",
    "remove_stopwords",
    "correct_spelling",
    "stem",
    "run_pipeline",
]

ZWNJ = "‌"

# Arabic-script confusables folded to their Persian forms, plus Arabic
# diacritics (U+064B..U+065F) and tatweel deleted outright.
DEFAULT_CHARMAP_PAIRS: tuple[tuple[str, str], ...] = (
    ("ي", "ی"),  # ي -> ی
    ("ك", "ک"),  # ك -> ک
    ("ة", "ه"),  # ة -> ه
    ("ۀ", "ه"),  # ۀ -> ه
    ("أ", "ا"),  # أ -> ا
    ("إ", "ا"),  # إ -> ا
    ("ؤ", "و"),  # ؤ -> و
    ("ئ", "ی"),  # ئ -> ی
    ("ٱ", "ا"),  # ٱ -> ا
    ("ـ", ""),  # tatweel
) + tuple((chr(cp), "") for cp in range(0x064B, 0x0660))

DEFAULT_SUFFIXES: tuple[str, ...] = (
    "هایی",
    "های",
    "ها",
    "ترین",
    "تری",
    "تر",
    "ات",
    "ان",
)

DEFAULT_STEPS: tuple[str, ...] = (
    "map_characters",
    "strip_punctuation",
    "strip_foreign",
    "strip_digits",
    "normalize",
    "tokenize",
    "remove_stopwords",
    "correct_spelling",
    "stem",
)

CHAR_STEPS = frozenset(
    {"strip_punctuation", "strip_foreign", "strip_digits", "map_characters", "normalize"}
)
TOKEN_STEPS = frozenset({"remove_stopwords", "correct_spelling", "stem"})

# ASCII symbols stripped on top of Unicode general category P*.
_EXTRA_PUNCT = frozenset("#@&*+=<>|~^")

_URL_RE = re.compile(r"(?<!\S)(?:http|www)\S*", re.IGNORECASE)
_MENTION_RE = re.compile(r"(?<![A-Za-z0-9_])@[A-Za-z0-9_]+")
_LATIN_RUN_RE = re.compile(r"[A-Za-z]+")
_DIGIT_RE = re.compile(r"[0-9٠-٩۰-۹]+")
_WS_RUN_RE = re.compile(r"\s+")
_ZWNJ_RUN_RE = re.compile(f"{ZWNJ}+")
_HEX_ESCAPE_RE = re.compile(r"\\u([0-9a-fA-F]{4})|\\U([0-9a-fA-F]{8})")


def _is_punct(ch: str) -> bool:
    return ch in _EXTRA_PUNCT or unicodedata.category(ch).startswith("P")


@dataclass(frozen=True)
class CharMap:
    """Ordered source -> replacement rewrites over codepoint sequences.

    Closure invariant: no replacement may contain any source sequence,
    which (with the bounded fixpoint in apply) makes the map idempotent.
    """

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for src, _ in self.pairs:
            if not src:
                raise ConfigError("character map source must be non-empty")
            if src in seen:
                raise ConfigError(f"character map source {src!r} appears twice")
            seen.add(src)
        for _, repl in self.pairs:
            for src in seen:
                if src in repl:
                    raise ConfigError(
                        f"character map is not closed: replacement {repl!r} "
                        f"contains source {src!r}"
                    )

    def apply(self, text: str) -> str:
        # Multi-codepoint sources can resurface across replacement
        # boundaries, so iterate to a fixpoint (single-codepoint sources
        # converge in one pass).
        for _ in range(100):
            out = text
            for src, repl in self.pairs:
                out = out.replace(src, repl)
            if out == text:
                return out
            text = out
        raise ConfigError("character map did not converge; check its rules")


@dataclass(frozen=True)
class StemRules:
    """Suffix-stripping rules: longest suffix wins, one strip per token."""

    suffixes: tuple[str, ...] = DEFAULT_SUFFIXES
    min_stem_length: int = 2
    exceptions: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.min_stem_length < 1:
            raise ConfigError("min_stem_length must be >= 1")
        if any(not s for s in self.suffixes):
            raise ConfigError("empty suffix in stem rules")
        ordered = tuple(sorted(set(self.suffixes), key=lambda s: (-len(s), s)))
        object.__setattr__(self, "suffixes", ordered)


class SpellPolicy:
    """Single-candidate spelling repair against a reference vocabulary.

    A token absent from the vocabulary is replaced only when exactly one
    vocabulary word sits at Damerau-Levenshtein (OSA) distance 1 and has
    frequency >= min_frequency. Candidate lookup goes through a deletion
    index so correction cost does not scale with vocabulary size.
    """

    def __init__(self, frequencies: dict[str, int], min_frequency: int = 2):
        if not frequencies:
            raise ConfigError("spell policy needs a non-empty vocabulary")
        if min_frequency < 1:
            raise ConfigError("spell min_frequency must be >= 1")
        self.frequencies = dict(frequencies)
        self.min_frequency = min_frequency
        self._index: dict[str, set[str]] = {}
        for word, freq in self.frequencies.items():
            if freq < min_frequency:
                continue
            for key in _deletion_keys(word):
                self._index.setdefault(key, set()).add(word)

    def correct(self, token: str) -> str:
        if token in self.frequencies or not token:
            return token
        candidates: set[str] = set()
        for key in _deletion_keys(token):
            candidates.update(self._index.get(key, ()))
        qualified = [c for c in candidates if _osa_distance_is_one(token, c)]
        if len(qualified) == 1:
            return qualified[0]
        return token


def _deletion_keys(word: str) -> set[str]:
    keys = {word}
    for i in range(len(word)):
        keys.add(word[:i] + word[i + 1 :])
    return keys


def _osa_distance_is_one(a: str, b: str) -> bool:
    """True iff optimal-string-alignment distance(a, b) == 1."""
    la, lb = len(a), len(b)
    if a == b:
        return False
    if abs(la - lb) > 1:
        return False
    if la == lb:
        diffs = [i for i in range(la) if a[i] != b[i]]
        if len(diffs) == 1:
            return True
        if len(diffs) == 2:
            i, j = diffs
            return j == i + 1 and a[i] == b[j] and a[j] == b[i]
        return False
    if la > lb:
        a, b, la, lb = b, a, lb, la
    # b is a plus one inserted character
    i = 0
    while i < la and a[i] == b[i]:
        i += 1
    return a[i:] == b[i + 1 :]


@dataclass(frozen=True)
class PreprocessConfig:
    """Step order plus the rule tables the steps consume."""

    steps: tuple[str, ...] = DEFAULT_STEPS
    charmap: CharMap = field(default_factory=lambda: default_charmap())
    stopwords: frozenset[str] = field(default_factory=lambda: default_stopwords())
    stem_rules: StemRules = field(default_factory=StemRules)
    spell_policy: SpellPolicy | None = None
    spell_min_frequency: int = 2

    def validate(self) -> None:
        unknown = [s for s in self.steps if s not in CHAR_STEPS | TOKEN_STEPS | {"tokenize"}]
        if unknown:
            raise ConfigError(f"unknown preprocessing steps: {unknown}")
        if self.steps.count("tokenize") != 1:
            raise ConfigError("pipeline must contain the tokenize step exactly once")
        cut = self.steps.index("tokenize")
        before, after = self.steps[:cut], self.steps[cut + 1 :]
        bad_before = [s for s in before if s in TOKEN_STEPS]
        if bad_before:
            raise ConfigError(f"token-level steps before tokenize: {bad_before}")
        bad_after = [s for s in after if s in CHAR_STEPS]
        if bad_after:
            raise ConfigError(f"character-level steps after tokenize: {bad_after}")
        for word in self.stopwords:
            cleaned = normalize(self.charmap.apply(word), self.stem_rules.suffixes)
            if cleaned != word:
                raise ConfigError(
                    f"stopword {word!r} is not in post-normalization form "
                    f"(normalizes to {cleaned!r})"
                )


def _punct_pass(text: str) -> str:
    text = _URL_RE.sub("", text)
    text = _MENTION_RE.sub("", text)
    out: list[str] = []
    in_run = False
    for ch in text:
        if _is_punct(ch):
            if not in_run:
                out.append(" ")
                in_run = True
        else:
            out.append(ch)
            in_run = False
    return "".join(out).strip()


def strip_punctuation(text: str) -> str:
    """Drop URLs, @-mentions, and punctuation; runs become one space.

    Surrounding whitespace is trimmed. Iterates to a fixpoint because
    removing punctuation can expose a new URL-shaped token.
    """
    prev = None
    while text != prev:
        prev = text
        text = _punct_pass(text)
    return text


def strip_foreign(text: str) -> str:
    """Delete maximal runs of Basic-Latin letters wholesale."""
    return _LATIN_RUN_RE.sub("", text)


def strip_digits(text: str) -> str:
    """Delete ASCII, Arabic-Indic, and Extended Arabic-Indic digits."""
    return _DIGIT_RE.sub("", text)


def map_characters(text: str, charmap: CharMap) -> str:
    return charmap.apply(text)


def normalize(text: str, suffixes: Sequence[str] = DEFAULT_SUFFIXES) -> str:
    """Collapse whitespace, trim, and half-space detached suffixes.

    A lone suffix token directly after a word joins to it with a ZWNJ
    ("کتاب ها" becomes "کتاب‌ها"); ZWNJ runs collapse to one.
    """
    text = _WS_RUN_RE.sub(" ", text).strip()
    if suffixes:
        alts = "|".join(re.escape(s) for s in sorted(suffixes, key=len, reverse=True))
        text = re.sub(rf"(?<=\w) ({alts})(?= |$)", ZWNJ + r"\1", text)
    return _ZWNJ_RUN_RE.sub(ZWNJ, text)


def tokenize(text: str) -> list[str]:
    """Split on single spaces; ZWNJ stays inside tokens."""
    return [t for t in text.split(" ") if t]


def remove_stopwords(tokens: Iterable[str], stopwords: frozenset[str]) -> list[str]:
    return [t for t in tokens if t not in stopwords]


def correct_spelling(tokens: Iterable[str], policy: SpellPolicy) -> list[str]:
    return [policy.correct(t) for t in tokens]


def stem(tokens: Iterable[str], rules: StemRules) -> list[str]:
    """Strip the longest matching suffix once per token.

    A ZWNJ attaching the suffix goes with it; tokens in the exception
    set, or whose stem would fall under min_stem_length, stay unchanged.
    """
    out: list[str] = []
    for tok in tokens:
        out.append(_stem_token(tok, rules))
    return out


def _stem_token(tok: str, rules: StemRules) -> str:
    if tok in rules.exceptions:
        return tok
    for suf in rules.suffixes:
        if tok.endswith(suf):
            root = tok[: len(tok) - len(suf)].rstrip(ZWNJ)
            if len(root) >= rules.min_stem_length:
                return root
            return tok
    return tok


def run_pipeline(text: str, config: PreprocessConfig) -> list[str]:
    """Apply the configured steps in order; returns the final token list."""
    config.validate()
    value: str | list[str] = text
    for step in config.steps:
        if step == "tokenize":
            value = tokenize(value)
        elif step == "map_characters":
            value = map_characters(value, config.charmap)
        elif step == "strip_punctuation":
            value = strip_punctuation(value)
        elif step == "strip_foreign":
            value = strip_foreign(value)
        elif step == "strip_digits":
            value = strip_digits(value)
        elif step == "normalize":
            value = normalize(value, config.stem_rules.suffixes)
        elif step == "remove_stopwords":
            value = remove_stopwords(value, config.stopwords)
        elif step == "correct_spelling":
            if config.spell_policy is None:
                raise ConfigError(
                    "correct_spelling step requires a spell policy "
                    "(build one from the training vocabulary first)"
                )
            value = correct_spelling(value, config.spell_policy)
        elif step == "stem":
            value = stem(value, config.stem_rules)
    return value  # type: ignore[return-value]


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One token per line, UTF-8; '#' lines are comments."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"stopword file not found: {path}")
    words = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return frozenset(words)


def _unescape(text: str) -> str:
    return _HEX_ESCAPE_RE.sub(
        lambda m: chr(int(m.group(1) or m.group(2), 16)), text
    )


def load_charmap(path: str | Path) -> CharMap:
    """TSV `source<TAB>replacement`; \\uXXXX / \\UXXXXXXXX escapes allowed."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"character map file not found: {path}")
    pairs: list[tuple[str, str]] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        if "\t" not in line:
            raise DataError(f"line {line_no} of {path} has no tab separator")
        src, repl = line.split("\t", 1)
        pairs.append((_unescape(src), _unescape(repl)))
    try:
        return CharMap(tuple(pairs))
    except ConfigError as exc:
        raise DataError(f"invalid character map in {path}: {exc}") from exc


@lru_cache(maxsize=1)
def default_charmap() -> CharMap:
    return CharMap(DEFAULT_CHARMAP_PAIRS)


def default_stem_rules() -> StemRules:
    return StemRules()


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    data = resources.files("ehsas").joinpath("data/stopwords_fa.txt")
    words = []
    for line in data.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return frozenset(words)
