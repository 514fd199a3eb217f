"""Deterministic synthetic Persian tweet corpus for end-to-end checks.

Each tweet is built from class-indicative keyword pools (disjoint across
the three sentiment classes) diluted with label-neutral market-domain
noise tokens, plus occasional URLs, punctuation, and digit runs so the
cleaning steps have something to do.  Every token that carries class
signal survives the default preprocessing pipeline.
"""

from __future__ import annotations

import numpy as np

from .corpus import LabeledCorpus, Sentiment, TweetRecord
from .errors import ConfigError

__all__ = [
    "POSITIVE_KEYWORDS",
    "NEGATIVE_KEYWORDS",
    "NEUTRAL_KEYWORDS",
    "NOISE_TOKENS",
    "SEARCH_TAGS",
    "generate_corpus",
]

POSITIVE_KEYWORDS: tuple[str, ...] = (
    "خوب",
    "عالی",
    "سود",
    "رشد",
    "امیدوار",
    "موفق",
    "ارزشمند",
    "قوی",
    "درخشان",
    "پیروز",
    "سبز",
    "شاد",
)

NEGATIVE_KEYWORDS: tuple[str, ...] = (
    "بد",
    "ضرر",
    "سقوط",
    "وحشت",
    "ضعیف",
    "شکست",
    "افتضاح",
    "نگران",
    "خطرناک",
    "باخت",
    "سرخ",
    "غمگین",
)

NEUTRAL_KEYWORDS: tuple[str, ...] = (
    "ثابت",
    "گزارش",
    "اعلام",
    "بررسی",
    "تحلیل",
    "جلسه",
    "نمودار",
    "داده",
    "آمار",
    "هفته",
    "بازه",
    "منتشر",
)

# Shared across classes; carries no label signal by construction.
NOISE_TOKENS: tuple[str, ...] = (
    "بازار",
    "قیمت",
    "خرید",
    "فروش",
    "معامله",
    "صرافی",
    "شبکه",
    "حجم",
    "سفارش",
    "کارمزد",
    "موجودی",
    "برداشت",
)

SEARCH_TAGS: tuple[str, ...] = ("بیت‌کوین", "اتریوم", "دوج‌کوین", "تتر")

_POOLS = {
    Sentiment.NEGATIVE: NEGATIVE_KEYWORDS,
    Sentiment.NEUTRAL: NEUTRAL_KEYWORDS,
    Sentiment.POSITIVE: POSITIVE_KEYWORDS,
}


def generate_corpus(
    n: int = 600, seed: int = 42, noise_fraction: float = 0.2
) -> LabeledCorpus:
    """Balanced three-class corpus of ``n`` tweets (class = index mod 3),
    with roughly ``noise_fraction`` of each tweet's tokens drawn from the
    label-neutral pool.  Fully determined by (n, seed, noise_fraction)."""
    if n < 3:
        raise ConfigError("synthetic corpus needs at least 3 tweets")
    if not 0.0 <= noise_fraction < 1.0:
        raise ConfigError("noise_fraction must be in [0, 1)")
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        label = Sentiment(i % 3)
        pool = _POOLS[label]
        length = int(rng.integers(8, 13))
        n_noise = max(1, round(noise_fraction * length))
        n_keywords = length - n_noise
        tokens = [str(t) for t in rng.choice(pool, size=n_keywords, replace=True)]
        tokens += [str(t) for t in rng.choice(NOISE_TOKENS, size=n_noise, replace=True)]
        rng.shuffle(tokens)
        if i % 13 == 5:
            tokens.insert(0, f"http://example.com/{i}")
        if i % 7 == 3:
            tokens.append("!!!")
        if i % 11 == 7:
            tokens.append("۱۴۰۲")
        records.append(
            TweetRecord(
                id=i,
                text=" ".join(tokens),
                label=label,
                tag=SEARCH_TAGS[i % len(SEARCH_TAGS)],
            )
        )
    return LabeledCorpus(tuple(records))
