import json
from pathlib import Path

import pytest

from ehsas.corpus import write_corpus_csv
from ehsas.synthetic import generate_corpus


@pytest.fixture(scope="session")
def synth_csv(tmp_path_factory) -> Path:
    """The 600-tweet synthetic corpus used by the end-to-end gates."""
    path = tmp_path_factory.mktemp("corpus") / "synthetic.csv"
    write_corpus_csv(generate_corpus(600, seed=42), path)
    return path


@pytest.fixture(scope="session")
def small_csv(tmp_path_factory) -> Path:
    """A 120-tweet corpus for cheaper pipeline tests."""
    path = tmp_path_factory.mktemp("corpus_small") / "small.csv"
    write_corpus_csv(generate_corpus(120, seed=7), path)
    return path


def make_config(corpus: Path, outdir: Path, **overrides) -> dict:
    cfg = {
        "corpus_path": str(corpus),
        "output_dir": str(outdir),
        "tag_column": "tag",
        "seed": 42,
    }
    cfg.update(overrides)
    return cfg


def write_config(path: Path, mapping: dict) -> Path:
    path.write_text(json.dumps(mapping), encoding="utf-8")
    return path
