"""HTTP front end: thin orchestration endpoints over the experiment
commands.  Paths in requests and responses are server-local; the service
is meant to run next to the data it operates on."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import ConfigError, DataError, EhsasError
from ..experiment import (
    cmd_evaluate,
    cmd_freq,
    cmd_predict,
    cmd_split,
    cmd_train,
    predict_texts,
    resolve_config,
)
from .schemas import (
    EvaluateRequest,
    EvaluateResponse,
    FreqRequest,
    FreqResponse,
    HealthResponse,
    PredictRequest,
    PredictResponse,
    PredictionRow,
    SplitRequest,
    SplitResponse,
    TermRow,
    TrainRequest,
    TrainResponse,
)


def _error_payload(kind: str, exc: Exception) -> dict:
    return {"error": str(exc), "kind": kind}


def create_app() -> FastAPI:
    from .. import __version__

    app = FastAPI(title="ehsas", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(_req: Request, exc: ConfigError):
        return JSONResponse(status_code=422, content=_error_payload("config", exc))

    @app.exception_handler(DataError)
    async def _data_error(_req: Request, exc: DataError):
        return JSONResponse(status_code=400, content=_error_payload("data", exc))

    @app.exception_handler(EhsasError)
    async def _internal_error(_req: Request, exc: EhsasError):
        return JSONResponse(status_code=500, content=_error_payload("internal", exc))

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/split", response_model=SplitResponse)
    def split(req: SplitRequest) -> SplitResponse:
        result = cmd_split(resolve_config(req.config.to_mapping()))
        return SplitResponse(
            train_path=result.train_path,
            test_path=result.test_path,
            manifest_path=result.manifest_path,
            manifest=result.manifest,
        )

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        result = cmd_train(resolve_config(req.config.to_mapping()))
        return TrainResponse(
            model_path=result.model_path,
            log_path=result.log_path,
            dim=result.dim,
            train_accuracy=result.train_accuracy,
            train_macro_f1=result.train_macro_f1,
            config_hash=result.config_hash,
        )

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        result = cmd_evaluate(
            resolve_config(req.config.to_mapping()), model_path=req.model_path
        )
        return EvaluateResponse(
            metrics_path=result.metrics_path,
            report_path=result.report_path,
            row_path=result.row_path,
            metrics=result.report.as_dict(),
            confusion=[list(row) for row in result.cm.counts],
        )

    @app.post("/predict", response_model=PredictResponse)
    def predict(req: PredictRequest) -> PredictResponse:
        if req.texts is not None and req.input_path is not None:
            raise ConfigError("supply either texts or input_path, not both")
        if req.texts is not None:
            rows = predict_texts(req.model_path, req.texts)
            return PredictResponse(
                output_path=None,
                rows=[PredictionRow(**r) for r in rows],
                skipped=[],
            )
        if req.input_path is None or req.output_path is None:
            raise ConfigError(
                "file mode needs both input_path and output_path "
                "(or use inline texts)"
            )
        result = cmd_predict(
            req.model_path,
            req.input_path,
            req.output_path,
            text_column=req.text_column,
            lenient=req.lenient,
        )
        return PredictResponse(
            output_path=result.output_path,
            rows=[PredictionRow(**r) for r in result.rows],
            skipped=result.skipped,
        )

    @app.post("/freq", response_model=FreqResponse)
    def freq(req: FreqRequest) -> FreqResponse:
        result = cmd_freq(resolve_config(req.config.to_mapping()))
        return FreqResponse(
            freq_path=result.freq_path,
            class_dist_path=result.class_dist_path,
            tag_dist_path=result.tag_dist_path,
            top=[TermRow(token=t.token, count=t.count, weight=t.weight) for t in result.top],
        )

    return app
