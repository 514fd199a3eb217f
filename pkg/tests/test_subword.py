import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehsas.errors import ConfigError, DataError, NumericError
from ehsas.subword import (
    EmbedResult,
    SubwordModel,
    SubwordParams,
    embed_document,
    embed_token,
    fnv1a_64,
    mean_pair_loss,
    ngram_decompose,
    ns_pair_grads,
    ns_pair_loss,
    train_skipgram,
)
from ehsas.vectorize import EmbeddingTable

TOY = [
    ["بیتکوین", "بالا", "رفت"],
    ["بیتکوین", "پایین", "رفت"],
    ["اتریوم", "بالا", "رفت", "بیتکوین"],
]

SMALL_PARAMS = SubwordParams(
    dim=8, nmin=3, nmax=4, window=2, negative=3, epochs=3,
    learning_rate=0.05, seed=1, bucket_count=64,
)


class TestFnv1a:
    def test_published_vectors(self):
        # Reference values from the FNV-1a 64-bit test suite.
        assert fnv1a_64(b"") == 0xCBF29CE484222325
        assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a_64(b"foobar") == 0x85944171F73967E8

    def test_result_fits_64_bits(self):
        for payload in (b"\x00", "کتاب".encode("utf-8"), b"x" * 100):
            assert 0 <= fnv1a_64(payload) < 2**64


class TestNgramDecompose:
    def test_four_letter_word_n3(self):
        grams = ngram_decompose("کتاب", nmin=3, nmax=3)
        assert grams == ["<کت", "کتا", "تاب", "اب>", "<کتاب>"]

    def test_single_letter_word(self):
        # wrapped form '<و>' has length 3; its only 3-gram equals the
        # whole-word entry, which must not repeat
        assert ngram_decompose("و", nmin=3, nmax=3) == ["<و>"]

    def test_two_letter_word(self):
        assert ngram_decompose("ab", nmin=3, nmax=3) == ["<ab", "ab>", "<ab>"]

    def test_range_orders_by_length_then_position(self):
        grams = ngram_decompose("abc", nmin=3, nmax=4)
        assert grams == ["<ab", "abc", "bc>", "<abc", "abc>", "<abc>"]

    def test_empty_word_rejected(self):
        with pytest.raises(DataError):
            ngram_decompose("")

    @given(
        word=st.text(
            alphabet=st.characters(min_codepoint=0x627, max_codepoint=0x6CC),
            min_size=1,
            max_size=9,
        ),
        nmin=st.integers(min_value=3, max_value=4),
        span=st.integers(min_value=0, max_value=2),
    )
    @settings(max_examples=120, deadline=None)
    def test_cardinality_formula(self, word, nmin, span):
        nmax = nmin + span
        grams = ngram_decompose(word, nmin=nmin, nmax=nmax)
        wrapped = f"<{word}>"
        L = len(wrapped)
        expected = sum(max(L - n + 1, 0) for n in range(nmin, nmax + 1))
        plain = [g for g in grams if g != wrapped]
        # the wrapped word appears exactly once, as the final entry
        assert grams[-1] == wrapped
        assert grams.count(wrapped) == 1
        # all other entries follow the sliding-window count
        assert len(plain) in (expected, expected - 1)
        assert all(nmin <= len(g) <= nmax for g in plain)


class TestPairLossAndGrads:
    def test_known_value_zero_vectors(self):
        z = np.zeros(4)
        targets = np.zeros((3, 4))
        labels = np.array([1.0, 0.0, 0.0])
        assert ns_pair_loss(z, targets, labels) == pytest.approx(3 * math.log(2))

    def test_gradient_matches_finite_differences(self):
        # dimension <= 8, at least 20 random instances, 1e-4 relative
        rng = np.random.default_rng(7)
        eps = 1e-6
        worst = 0.0
        for _ in range(25):
            dim = int(rng.integers(2, 9))
            k = int(rng.integers(1, 6))
            z = rng.normal(scale=0.8, size=dim)
            targets = rng.normal(scale=0.8, size=(k, dim))
            labels = np.zeros(k)
            labels[0] = 1.0
            gz, gt = ns_pair_grads(z, targets, labels)
            for i in range(dim):
                probe = z.copy()
                probe[i] += eps
                up = ns_pair_loss(probe, targets, labels)
                probe[i] -= 2 * eps
                down = ns_pair_loss(probe, targets, labels)
                fd = (up - down) / (2 * eps)
                rel = abs(fd - gz[i]) / max(abs(fd), abs(gz[i]), 1e-12)
                worst = max(worst, rel)
            for r in range(k):
                for i in range(dim):
                    probe = targets.copy()
                    probe[r, i] += eps
                    up = ns_pair_loss(z, probe, labels)
                    probe[r, i] -= 2 * eps
                    down = ns_pair_loss(z, probe, labels)
                    fd = (up - down) / (2 * eps)
                    rel = abs(fd - gt[r, i]) / max(abs(fd), abs(gt[r, i]), 1e-12)
                    worst = max(worst, rel)
        assert worst < 1e-4

    def test_loss_nonnegative_and_finite(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            z = rng.normal(size=5)
            targets = rng.normal(size=(4, 5))
            labels = (rng.random(4) < 0.5).astype(float)
            val = ns_pair_loss(z, targets, labels)
            assert val >= 0.0 and math.isfinite(val)


class TestTraining:
    def test_single_word_untrained_loss_is_log2(self):
        # one-word vocabulary: every positive target equals the center's
        # own output row, which initializes to zero, and every negative
        # draw collides with the positive and is skipped. Each pair
        # contributes exactly log(2) before any update.
        from ehsas.vectorize import build_vocabulary

        params = SubwordParams(
            dim=4, nmin=3, nmax=3, window=2, negative=3, epochs=1,
            learning_rate=0.05, seed=9, bucket_count=16,
        )
        corpus = [["الف", "الف", "الف"]]
        model = SubwordModel(params, build_vocabulary(corpus))
        loss = mean_pair_loss(model, corpus)
        assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_training_reduces_mean_pair_loss(self):
        trained = train_skipgram(TOY, SMALL_PARAMS)
        untrained = SubwordModel(SMALL_PARAMS, trained.vocab)
        assert mean_pair_loss(trained, TOY) < mean_pair_loss(untrained, TOY)

    def test_loss_trace_per_epoch_and_finite(self):
        model = train_skipgram(TOY, SMALL_PARAMS)
        assert len(model.loss_trace) == SMALL_PARAMS.epochs
        assert all(math.isfinite(v) and v >= 0 for v in model.loss_trace)

    def test_same_seed_identical_vectors(self):
        a = train_skipgram(TOY, SMALL_PARAMS)
        b = train_skipgram(TOY, SMALL_PARAMS)
        for word in ("بیتکوین", "رفت"):
            assert np.array_equal(
                embed_token(a, word).vector, embed_token(b, word).vector
            )
        assert a.loss_trace == b.loss_trace

    def test_different_seed_different_vectors(self):
        a = train_skipgram(TOY, SMALL_PARAMS)
        params_b = SubwordParams(
            dim=8, nmin=3, nmax=4, window=2, negative=3, epochs=3,
            learning_rate=0.05, seed=2, bucket_count=64,
        )
        b = train_skipgram(TOY, params_b)
        assert not np.array_equal(
            embed_token(a, "بیتکوین").vector, embed_token(b, "بیتکوین").vector
        )

    def test_cooccurring_words_closer_than_isolated(self):
        # the first two words always co-occur and share anchor contexts;
        # the isolated word only appears in single-token sentences, so no
        # training pair ever moves its rows off random initialization.
        # Filler pairs pad the negative-sampling table so draws rarely
        # collide with true context words.
        anchors = ["بازار", "امروز", "قیمت", "تحلیل", "خبر", "روند"]
        fillers = [f"واژه{i}" for i in range(20)]
        corpus = [["بیتکوین", "صعودی", x] for _ in range(8) for x in anchors]
        corpus += [[fillers[i], fillers[i + 1]] for i in range(len(fillers) - 1)]
        corpus += [["گربه"]] * 12
        params = SubwordParams(
            dim=64, nmin=3, nmax=3, window=2, negative=5, epochs=20,
            learning_rate=0.15, seed=4, bucket_count=4096,
        )
        model = train_skipgram(corpus, params)

        def cos(u, v):
            return float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))

        va = embed_token(model, "بیتکوین").vector
        vb = embed_token(model, "صعودی").vector
        vc = embed_token(model, "گربه").vector
        assert cos(va, vb) > cos(va, vc)

    def test_min_count_drops_rare_words(self):
        params = SubwordParams(
            dim=4, nmin=3, nmax=3, window=2, negative=2, epochs=1,
            learning_rate=0.05, seed=1, bucket_count=16, min_count=2,
        )
        model = train_skipgram(TOY, params)
        assert model.vocab.index_of("بیتکوین") is not None
        assert model.vocab.index_of("اتریوم") is None  # frequency 1

    def test_empty_corpus_rejected(self):
        with pytest.raises(DataError):
            train_skipgram([], SMALL_PARAMS)

    def test_param_validation(self):
        with pytest.raises(ConfigError):
            SubwordParams(dim=0)
        with pytest.raises(ConfigError):
            SubwordParams(nmin=4, nmax=3)
        with pytest.raises(ConfigError):
            SubwordParams(window=0)
        with pytest.raises(ConfigError):
            SubwordParams(negative=-1)
        with pytest.raises(ConfigError):
            SubwordParams(learning_rate=0.0)
        with pytest.raises(ConfigError):
            SubwordParams(bucket_count=0)

    def test_exploding_updates_raise_numeric_error(self):
        params = SubwordParams(
            dim=4, nmin=3, nmax=3, window=2, negative=2, epochs=50,
            learning_rate=1e30, seed=1, bucket_count=16,
        )
        with pytest.raises(NumericError):
            train_skipgram(TOY, params)


class TestEmbedding:
    def test_oov_word_gets_nonzero_vector(self):
        model = train_skipgram(TOY, SMALL_PARAMS)
        result = embed_token(model, "دوجکوین")
        assert not result.missing
        assert np.linalg.norm(result.vector) > 0

    def test_embed_document_single_token_identity(self):
        model = train_skipgram(TOY, SMALL_PARAMS)
        single = embed_document(model, ["بیتکوین"])
        direct = embed_token(model, "بیتکوین")
        assert np.array_equal(single.vector, direct.vector)

    def test_embed_document_is_mean(self):
        model = train_skipgram(TOY, SMALL_PARAMS)
        va = embed_token(model, "بالا").vector
        vb = embed_token(model, "رفت").vector
        doc = embed_document(model, ["بالا", "رفت"]).vector
        assert np.allclose(doc, (va + vb) / 2)

    def test_embed_empty_document_flagged_zero(self):
        model = train_skipgram(TOY, SMALL_PARAMS)
        result = embed_document(model, [])
        assert result.missing
        assert np.array_equal(result.vector, np.zeros(SMALL_PARAMS.dim))

    def test_plain_table_hit_and_miss(self):
        table = EmbeddingTable(
            vectors={"الف": np.array([1.0, 0.0]), "ب": np.array([0.0, 1.0])}, dim=2
        )
        hit = embed_token(table, "الف")
        assert not hit.missing and np.array_equal(hit.vector, [1.0, 0.0])
        miss = embed_token(table, "ناشناس")
        assert miss.missing and np.array_equal(miss.vector, [0.0, 0.0])

    def test_plain_table_document_skips_misses(self):
        table = EmbeddingTable(
            vectors={"الف": np.array([1.0, 0.0]), "ب": np.array([0.0, 1.0])}, dim=2
        )
        doc = embed_document(table, ["الف", "ناشناس", "ب"])
        assert np.allclose(doc.vector, [0.5, 0.5])  # mean of the two hits

    def test_embed_result_type(self):
        model = train_skipgram(TOY, SMALL_PARAMS)
        assert isinstance(embed_token(model, "رفت"), EmbedResult)


class TestPayloadRoundTrip:
    def test_round_trip_reproduces_all_embeddings(self):
        model = train_skipgram(TOY, SMALL_PARAMS)
        back = SubwordModel.from_payload(model.to_payload())
        # in-vocabulary words
        for word in ("بیتکوین", "بالا", "رفت", "اتریوم", "پایین"):
            assert np.array_equal(
                embed_token(model, word).vector, embed_token(back, word).vector
            )
        # out-of-vocabulary words rely on lazily materialized rows, which
        # must regenerate identically from the stored seed
        for word in ("دوجکوین", "تتر", "ناشناخته"):
            assert np.array_equal(
                embed_token(model, word).vector, embed_token(back, word).vector
            )

    def test_payload_is_json_clean(self):
        import json

        payload = train_skipgram(TOY, SMALL_PARAMS).to_payload()
        text = json.dumps(payload, ensure_ascii=False)
        assert json.loads(text) == payload

    def test_round_trip_preserves_loss_trace(self):
        model = train_skipgram(TOY, SMALL_PARAMS)
        back = SubwordModel.from_payload(model.to_payload())
        assert back.loss_trace == model.loss_trace
