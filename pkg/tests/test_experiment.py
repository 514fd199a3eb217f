import csv
import json
from pathlib import Path

import pytest

from conftest import make_config, write_config
from ehsas.corpus import load_corpus
from ehsas.errors import ConfigError, DataError
from ehsas.experiment import (
    FREQ_CSV,
    LOCK_FILE,
    MODEL_FILE,
    SPLIT_MANIFEST,
    TEST_CSV,
    TRAIN_CSV,
    TRAIN_LOG,
    ExperimentConfig,
    cmd_evaluate,
    cmd_freq,
    cmd_predict,
    cmd_split,
    cmd_train,
    config_hash,
    predict_texts,
    resolve_config,
)


def run_split_train(corpus, outdir, **overrides):
    cfg = resolve_config(make_config(corpus, outdir, **overrides))
    split = cmd_split(cfg)
    train = cmd_train(cfg)
    return cfg, split, train


def read_bytes_map(outdir: Path, skip=(TRAIN_LOG, LOCK_FILE)) -> dict[str, bytes]:
    return {
        p.name: p.read_bytes()
        for p in sorted(Path(outdir).iterdir())
        if p.name not in skip
    }


class TestResolveConfig:
    def test_defaults_fill_in(self, synth_csv, tmp_path):
        cfg = resolve_config(make_config(synth_csv, tmp_path))
        assert cfg.train_ratio == 0.8
        assert cfg.model == "svm"
        assert cfg.vectorizer == "bow"

    def test_later_mappings_win(self, synth_csv, tmp_path):
        cfg = resolve_config(
            make_config(synth_csv, tmp_path, knn_k=9),
            {"knn_k": 3},
        )
        assert cfg.knn_k == 3

    def test_unknown_key_lists_valid_ones(self, synth_csv, tmp_path):
        with pytest.raises(ConfigError, match="corpus_path"):
            resolve_config(make_config(synth_csv, tmp_path), {"knnk": 3})

    def test_type_coercion_from_strings(self, synth_csv, tmp_path):
        cfg = resolve_config(
            make_config(synth_csv, tmp_path),
            {"knn_k": "7", "train_ratio": "0.6", "stratified": "true"},
        )
        assert cfg.knn_k == 7 and cfg.train_ratio == 0.6 and cfg.stratified is True

    def test_bad_type_rejected(self, synth_csv, tmp_path):
        with pytest.raises(ConfigError):
            resolve_config(make_config(synth_csv, tmp_path), {"knn_k": "many"})

    def test_unknown_model_lists_options(self, synth_csv, tmp_path):
        with pytest.raises(ConfigError, match="adaboost"):
            resolve_config(make_config(synth_csv, tmp_path, model="tree"))

    def test_steps_parse_from_comma_string(self, synth_csv, tmp_path):
        cfg = resolve_config(
            make_config(
                synth_csv, tmp_path, steps="map_characters,tokenize,stem"
            )
        )
        assert cfg.steps == ("map_characters", "tokenize", "stem")


class TestConfigHash:
    def test_output_dir_does_not_affect_hash(self, synth_csv, tmp_path):
        a = resolve_config(make_config(synth_csv, tmp_path / "a"))
        b = resolve_config(make_config(synth_csv, tmp_path / "b"))
        assert config_hash(a) == config_hash(b)

    def test_any_other_knob_changes_hash(self, synth_csv, tmp_path):
        base = resolve_config(make_config(synth_csv, tmp_path))
        tweaked = resolve_config(make_config(synth_csv, tmp_path, knn_k=9))
        assert config_hash(base) != config_hash(tweaked)

    def test_stopword_file_content_enters_hash(self, synth_csv, tmp_path):
        sw1 = tmp_path / "sw1.txt"
        sw2 = tmp_path / "sw2.txt"
        sw1.write_text("و\n", encoding="utf-8")
        sw2.write_text("و\nاز\n", encoding="utf-8")
        a = resolve_config(make_config(synth_csv, tmp_path, stopwords_path=str(sw1)))
        b = resolve_config(make_config(synth_csv, tmp_path, stopwords_path=str(sw2)))
        assert config_hash(a) != config_hash(b)


class TestSplit:
    def test_writes_partition_and_manifest(self, synth_csv, tmp_path):
        cfg = resolve_config(make_config(synth_csv, tmp_path / "out"))
        result = cmd_split(cfg)
        out = tmp_path / "out"
        assert (out / TRAIN_CSV).is_file() and (out / TEST_CSV).is_file()
        train = load_corpus(out / TRAIN_CSV, "text", "label", "tag")
        test = load_corpus(out / TEST_CSV, "text", "label", "tag")
        assert len(train) == 480 and len(test) == 120
        manifest = json.loads((out / SPLIT_MANIFEST).read_text(encoding="utf-8"))
        assert manifest["train_size"] == 480 and manifest["test_size"] == 120
        assert manifest["config_hash"] == config_hash(cfg)
        assert sum(manifest["class_counts"]["train"].values()) == 480
        assert result.manifest == manifest

    def test_split_rerun_identical_bytes(self, synth_csv, tmp_path):
        cfg_a = resolve_config(make_config(synth_csv, tmp_path / "a"))
        cfg_b = resolve_config(make_config(synth_csv, tmp_path / "b"))
        cmd_split(cfg_a)
        cmd_split(cfg_b)
        assert read_bytes_map(tmp_path / "a") == read_bytes_map(tmp_path / "b")

    def test_stratified_split_preserves_ratios(self, synth_csv, tmp_path):
        cfg = resolve_config(
            make_config(synth_csv, tmp_path / "out", stratified=True)
        )
        cmd_split(cfg)
        manifest = json.loads(
            (tmp_path / "out" / SPLIT_MANIFEST).read_text(encoding="utf-8")
        )
        # synthetic corpus is perfectly balanced: 200 per class
        assert manifest["class_counts"]["train"] == {
            "negative": 160,
            "neutral": 160,
            "positive": 160,
        }

    def test_lock_file_refusal(self, synth_csv, tmp_path):
        out = tmp_path / "out"
        out.mkdir()
        (out / LOCK_FILE).write_text("", encoding="utf-8")
        cfg = resolve_config(make_config(synth_csv, out))
        with pytest.raises(ConfigError, match="lock"):
            cmd_split(cfg)

    def test_lock_released_after_success(self, synth_csv, tmp_path):
        cfg = resolve_config(make_config(synth_csv, tmp_path / "out"))
        cmd_split(cfg)
        assert not (tmp_path / "out" / LOCK_FILE).exists()
        cmd_split(cfg)  # rerun over the same directory works

    def test_missing_corpus_is_data_error(self, tmp_path):
        cfg = resolve_config(
            make_config(tmp_path / "nope.csv", tmp_path / "out")
        )
        with pytest.raises(DataError):
            cmd_split(cfg)


class TestTrain:
    def test_artifacts_written(self, small_csv, tmp_path):
        out = tmp_path / "out"
        _cfg, _split, result = run_split_train(small_csv, out)
        assert (out / MODEL_FILE).is_file()
        assert (out / TRAIN_LOG).is_file()
        assert result.train_accuracy > 0.6
        doc = json.loads((out / MODEL_FILE).read_text(encoding="utf-8"))
        assert doc["kind"] == "ovr"
        assert doc["payload"]["feature_descriptor"]["config_hash"] == result.config_hash

    def test_log_records_stages_not_model_bytes(self, small_csv, tmp_path):
        out = tmp_path / "out"
        run_split_train(small_csv, out)
        log = (out / TRAIN_LOG).read_text(encoding="utf-8")
        assert "train" in log and "accuracy" in log

    def test_rerun_identical_bytes_across_dirs(self, small_csv, tmp_path):
        run_split_train(small_csv, tmp_path / "a")
        run_split_train(small_csv, tmp_path / "b")
        assert read_bytes_map(tmp_path / "a") == read_bytes_map(tmp_path / "b")

    def test_train_before_split_is_data_error(self, small_csv, tmp_path):
        cfg = resolve_config(make_config(small_csv, tmp_path / "out"))
        with pytest.raises(DataError):
            cmd_train(cfg)

    @pytest.mark.parametrize("model", ["svm", "adaboost", "knn"])
    def test_all_models_train_and_evaluate(self, small_csv, tmp_path, model):
        out = tmp_path / model
        kw = {"model": model}
        if model == "adaboost":
            kw["adaboost_rounds"] = 10
        cfg, _split, _train = run_split_train(small_csv, out, **kw)
        result = cmd_evaluate(cfg)
        assert result.report.accuracy > 0.5

    def test_subword_vectorizer_end_to_end(self, small_csv, tmp_path):
        out = tmp_path / "out"
        cfg, _split, train = run_split_train(
            small_csv,
            out,
            vectorizer="subword",
            embed_dim=16,
            embed_epochs=2,
            bucket_count=1024,
            model="knn",
            knn_k=3,
        )
        assert train.dim == 16
        result = cmd_evaluate(cfg)
        assert result.report.accuracy > 0.4


# Letters that appear in no stemming suffix and are no digits, so a
# marker built from them passes the whole pipeline unchanged.
_MARK_LETTERS = "بجدزسشصضطظعغفقکگلم"


def row_marker(i: int) -> str:
    base = len(_MARK_LETTERS)
    a, b, c = i // base**2, (i // base) % base, i % base
    return "نشانه" + _MARK_LETTERS[a] + _MARK_LETTERS[b] + _MARK_LETTERS[c]


class TestLeakage:
    def test_test_only_token_absent_from_vocabulary(self, synth_csv, tmp_path):
        # plant a unique marker in every row, split, then check a marker
        # that landed in the test split never reaches the fitted vocabulary
        rows = list(csv.DictReader(open(synth_csv, encoding="utf-8")))
        marked = tmp_path / "marked.csv"
        with open(marked, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["text", "label", "tag"])
            writer.writeheader()
            for i, row in enumerate(rows):
                writer.writerow(
                    {
                        "text": f"{row['text']} {row_marker(i)}",
                        "label": row["label"],
                        "tag": row["tag"],
                    }
                )
        out = tmp_path / "out"
        cfg, _split, _train = run_split_train(marked, out)
        test_rows = list(
            csv.DictReader(open(out / TEST_CSV, encoding="utf-8"))
        )
        test_markers = {
            tok
            for row in test_rows
            for tok in row["text"].split()
            if tok.startswith("نشانه")
        }
        assert len(test_markers) == len(test_rows)
        doc = json.loads((out / MODEL_FILE).read_text(encoding="utf-8"))
        vocab_tokens = doc["payload"]["feature_descriptor"]["vocabulary"]["tokens"]
        assert not test_markers & set(vocab_tokens)
        # sanity: markers from the train split do appear, unmangled
        train_markers = {t for t in vocab_tokens if t.startswith("نشانه")}
        assert len(train_markers) == 480


class TestEvaluate:
    def test_artifacts_and_report_content(self, small_csv, tmp_path):
        out = tmp_path / "out"
        cfg, _split, train = run_split_train(small_csv, out)
        result = cmd_evaluate(cfg)
        metrics_text = Path(result.metrics_path).read_text(encoding="utf-8")
        assert metrics_text.startswith("class,precision,recall,f1,support")
        report_text = Path(result.report_path).read_text(encoding="utf-8")
        assert f"config_hash: {train.config_hash}" in report_text
        assert "model: svm" in report_text
        row_text = Path(result.row_path).read_text(encoding="utf-8")
        assert row_text.startswith("model,")

    def test_explicit_model_path(self, small_csv, tmp_path):
        out = tmp_path / "out"
        cfg, _split, train = run_split_train(small_csv, out)
        result = cmd_evaluate(cfg, model_path=train.model_path)
        assert result.report.accuracy > 0.5

    def test_evaluate_rerun_byte_identical(self, small_csv, tmp_path):
        for d in ("a", "b"):
            out = tmp_path / d
            cfg, _split, _train = run_split_train(small_csv, out)
            cmd_evaluate(cfg)
        assert read_bytes_map(tmp_path / "a") == read_bytes_map(tmp_path / "b")


class TestExternalVectors:
    def write_vectors(self, path, corpus_csv, dim=3):
        rows = list(csv.DictReader(open(corpus_csv, encoding="utf-8")))
        label_to_corner = {"negative": "1,0,0", "neutral": "0,1,0", "positive": "0,0,1"}
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(label_to_corner[row["label"]] + "\n")

    def test_train_and_evaluate_on_external_features(self, small_csv, tmp_path):
        out = tmp_path / "out"
        cfg = resolve_config(make_config(small_csv, out, model="knn", knn_k=3))
        cmd_split(cfg)
        train_vec = tmp_path / "train_vec.csv"
        test_vec = tmp_path / "test_vec.csv"
        self.write_vectors(train_vec, out / TRAIN_CSV)
        self.write_vectors(test_vec, out / TEST_CSV)
        cfg = resolve_config(
            make_config(
                small_csv,
                out,
                model="knn",
                knn_k=3,
                vectorizer="external",
                external_train_vectors_path=str(train_vec),
                external_test_vectors_path=str(test_vec),
            )
        )
        train = cmd_train(cfg)
        assert train.dim == 3
        result = cmd_evaluate(cfg)
        # class-corner features are perfectly separable
        assert result.report.accuracy == 1.0

    def test_row_count_mismatch_rejected(self, small_csv, tmp_path):
        out = tmp_path / "out"
        cfg = resolve_config(make_config(small_csv, out))
        cmd_split(cfg)
        short = tmp_path / "short.csv"
        short.write_text("1,0\n0,1\n", encoding="utf-8")
        cfg = resolve_config(
            make_config(
                small_csv,
                out,
                vectorizer="external",
                external_train_vectors_path=str(short),
            )
        )
        with pytest.raises(DataError, match="row"):
            cmd_train(cfg)

    def test_ragged_rows_named_by_line(self, small_csv, tmp_path):
        out = tmp_path / "out"
        cfg = resolve_config(make_config(small_csv, out))
        cmd_split(cfg)
        bad = tmp_path / "bad.csv"
        bad.write_text("1,0\n0\n", encoding="utf-8")
        cfg = resolve_config(
            make_config(
                small_csv,
                out,
                vectorizer="external",
                external_train_vectors_path=str(bad),
            )
        )
        with pytest.raises(DataError, match="line 2"):
            cmd_train(cfg)


class TestPredict:
    @pytest.fixture()
    def trained(self, small_csv, tmp_path):
        out = tmp_path / "out"
        _cfg, _split, train = run_split_train(small_csv, out)
        return train.model_path

    def test_predictions_written_with_scores(self, trained, tmp_path):
        inp = tmp_path / "in.csv"
        inp.write_text(
            "id,text\nt1,بازار عالی سود خوب\nt2,ضرر بد سقوط\n", encoding="utf-8"
        )
        outp = tmp_path / "pred.csv"
        result = cmd_predict(trained, inp, outp)
        rows = list(csv.DictReader(open(outp, encoding="utf-8")))
        assert [r["id"] for r in rows] == ["t1", "t2"]
        assert set(rows[0]) == {
            "id",
            "label",
            "score_negative",
            "score_neutral",
            "score_positive",
        }
        for row in rows:
            assert row["label"] in {"negative", "neutral", "positive"}
            float(row["score_negative"])  # parses
        assert result.rows[0]["label"] == rows[0]["label"]

    def test_strict_mode_fails_before_writing(self, trained, tmp_path):
        inp = tmp_path / "in.csv"
        inp.write_text("id,text\nt1,متن خوب\nt2,\n", encoding="utf-8")
        outp = tmp_path / "pred.csv"
        with pytest.raises(DataError, match="row 2"):
            cmd_predict(trained, inp, outp)
        assert not outp.exists()

    def test_lenient_mode_skips_and_records(self, trained, tmp_path):
        inp = tmp_path / "in.csv"
        inp.write_text("id,text\nt1,متن خوب\nt2,\nt3,بد\n", encoding="utf-8")
        outp = tmp_path / "pred.csv"
        result = cmd_predict(trained, inp, outp, lenient=True)
        assert result.skipped == [2]
        rows = list(csv.DictReader(open(outp, encoding="utf-8")))
        assert [r["id"] for r in rows] == ["t1", "t3"]

    def test_row_number_used_when_no_id_column(self, trained, tmp_path):
        inp = tmp_path / "in.csv"
        inp.write_text("text\nیک متن\nمتن دوم\n", encoding="utf-8")
        outp = tmp_path / "pred.csv"
        cmd_predict(trained, inp, outp)
        rows = list(csv.DictReader(open(outp, encoding="utf-8")))
        assert [r["id"] for r in rows] == ["1", "2"]

    def test_missing_text_column_rejected(self, trained, tmp_path):
        inp = tmp_path / "in.csv"
        inp.write_text("body\nمتن\n", encoding="utf-8")
        with pytest.raises(DataError, match="text"):
            cmd_predict(trained, inp, tmp_path / "pred.csv")

    def test_predict_texts_inline(self, trained):
        rows = predict_texts(trained, ["بازار عالی", "سقوط بد"])
        assert len(rows) == 2
        assert all(r["label"] in {"negative", "neutral", "positive"} for r in rows)
        assert all("score_positive" in r for r in rows)


class TestFreq:
    def test_artifacts_and_recount_oracle(self, small_csv, tmp_path):
        out = tmp_path / "out"
        cfg = resolve_config(make_config(small_csv, out, top_n=10))
        result = cmd_freq(cfg)
        rows = list(csv.DictReader(open(result.freq_path, encoding="utf-8")))
        assert len(rows) == 10
        counts = [int(r["count"]) for r in rows]
        assert counts == sorted(counts, reverse=True)
        assert float(rows[0]["weight"]) == 1.0
        # class distribution covers the whole corpus
        dist = list(csv.DictReader(open(result.class_dist_path, encoding="utf-8")))
        assert sum(int(r["count"]) for r in dist) == 120
        tag_dist = list(csv.DictReader(open(result.tag_dist_path, encoding="utf-8")))
        assert sum(int(r["count"]) for r in tag_dist) == 120

    def test_freq_counts_match_manual_pipeline(self, small_csv, tmp_path):
        from collections import Counter

        from ehsas.experiment import build_preprocess
        from ehsas.preprocess import run_pipeline

        out = tmp_path / "out"
        cfg = resolve_config(make_config(small_csv, out, top_n=5))
        result = cmd_freq(cfg)
        corpus = load_corpus(small_csv, "text", "label", "tag")
        texts = [r.text for r in corpus]
        pre = build_preprocess(cfg, texts)
        counter = Counter()
        for t in texts:
            counter.update(run_pipeline(t, pre))
        for tf in result.top:
            assert counter[tf.token] == tf.count
        assert result.top[0].count == max(counter.values())
