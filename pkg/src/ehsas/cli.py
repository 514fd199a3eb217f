"""Command-line front end.

Commands run in process by default.  With ``--server URL`` they are
forwarded to a running service instance instead, and the HTTP status is
mapped back onto the usual exit codes (0 ok, 1 config, 2 data, 3
internal).  Every config-file key has a flag twin; flags win.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, DataError, EhsasError
from .experiment import (
    FLOAT_CONFIG_KEYS as _FLOAT_KEYS,
    INT_CONFIG_KEYS as _INT_KEYS,
    ExperimentConfig,
    cmd_evaluate,
    cmd_freq,
    cmd_predict,
    cmd_split,
    cmd_train,
    load_config_file,
    resolve_config,
)
_STR_KEYS = (
    "corpus_path",
    "text_column",
    "label_column",
    "tag_column",
    "output_dir",
    "steps",
    "stopwords_path",
    "charmap_path",
    "vectorizer",
    "pretrained_vectors_path",
    "external_train_vectors_path",
    "external_test_vectors_path",
    "model",
    "knn_metric",
)
_ALL_CONFIG_KEYS = _INT_KEYS + _FLOAT_KEYS + _STR_KEYS + ("stratified",)


class _Parser(argparse.ArgumentParser):
    # Usage problems are configuration problems: exit 1, not argparse's 2.
    def error(self, message: str):  # noqa: D102
        raise ConfigError(message)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file with the flat key set")
    for key in _INT_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int)
    for key in _FLOAT_KEYS:
        parser.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float)
    for key in _STR_KEYS:
        helptext = "comma-separated step list" if key == "steps" else None
        parser.add_argument(
            f"--{key.replace('_', '-')}", dest=key, type=str, help=helptext
        )
    parser.add_argument("--stratified", dest="stratified", choices=["true", "false"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ehsas", description="Persian tweet sentiment pipeline")
    parser.add_argument(
        "--server",
        help="forward the command to a running service at this base URL",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (
        ("split", "shuffle the corpus into train/test CSVs plus a manifest"),
        ("train", "fit the vectorizer and model on the train split"),
        ("evaluate", "score the test split with a saved model"),
        ("freq", "export term-frequency and distribution CSVs"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_config_flags(p)
        if name == "evaluate":
            p.add_argument("--model-path", dest="model_path")

    p = sub.add_parser("predict", help="batch-score a CSV with a saved model")
    p.add_argument("--model-path", dest="model_path", required=True)
    p.add_argument("--input", dest="input_path", required=True)
    p.add_argument("--output", dest="output_path", required=True)
    p.add_argument("--text-column", dest="text_column", default="text")
    p.add_argument("--lenient", action="store_true")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    file_map = load_config_file(args.config) if args.config else {}
    flag_map = {
        key: getattr(args, key)
        for key in _ALL_CONFIG_KEYS
        if getattr(args, key, None) is not None
    }
    return resolve_config(file_map, flag_map)


def _forward(server: str, endpoint: str, body: dict) -> int:
    import httpx

    response = httpx.post(
        server.rstrip("/") + endpoint, json=body, timeout=600.0
    )
    try:
        data = response.json()
    except ValueError:
        data = {"raw": response.text}
    print(json.dumps(data, indent=2, ensure_ascii=False))
    if response.status_code == 200:
        return 0
    if response.status_code == 422:
        return 1
    if response.status_code == 400:
        return 2
    return 3


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    if args.command == "predict":
        if args.server:
            return _forward(
                args.server,
                "/predict",
                {
                    "model_path": args.model_path,
                    "input_path": args.input_path,
                    "output_path": args.output_path,
                    "text_column": args.text_column,
                    "lenient": args.lenient,
                },
            )
        result = cmd_predict(
            args.model_path,
            args.input_path,
            args.output_path,
            text_column=args.text_column,
            lenient=args.lenient,
        )
        print(f"wrote {len(result.rows)} predictions to {result.output_path}")
        if result.skipped:
            print(f"skipped malformed rows: {result.skipped}")
        return 0

    config = _config_from_args(args)
    if args.server:
        body: dict = {"config": config.as_dict()}
        if args.command == "evaluate" and getattr(args, "model_path", None):
            body["model_path"] = args.model_path
        return _forward(args.server, f"/{args.command}", body)

    if args.command == "split":
        result = cmd_split(config)
        m = result.manifest
        print(
            f"wrote {m['train_size']}-row train split to {result.train_path} "
            f"and {m['test_size']}-row test split to {result.test_path}"
        )
        print(f"manifest: {result.manifest_path}")
        return 0
    if args.command == "train":
        result = cmd_train(config)
        print(f"model: {result.model_path} (feature dim {result.dim})")
        print(
            f"train accuracy {result.train_accuracy:.4f}, "
            f"macro F1 {result.train_macro_f1:.4f}"
        )
        print(f"log: {result.log_path}")
        return 0
    if args.command == "evaluate":
        result = cmd_evaluate(config, model_path=getattr(args, "model_path", None))
        rep = result.report
        print(
            f"accuracy {rep.accuracy:.4f}, macro recall {rep.macro_recall:.4f}, "
            f"macro F1 {rep.macro_f1:.4f}"
        )
        print(f"metrics: {result.metrics_path}")
        print(f"report: {result.report_path}")
        return 0
    if args.command == "freq":
        result = cmd_freq(config)
        print(f"term frequencies: {result.freq_path}")
        print(f"class distribution: {result.class_dist_path}")
        print(f"tag distribution: {result.tag_dist_path}")
        return 0
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except EhsasError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - map anything else to exit 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
