from typing import List, Optional, Tuple

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, ValidationError

from src.cfrac import DriftForm
from src.config import Config
from src.errors import FluidTailError, InvalidParametersError
from src.logger import setup_logger
from src.model import ModelParams
from src.pipeline import (
    BoundarySource,
    Tolerances,
    analysis_envelope,
    run_analysis,
    run_solve,
    run_validation,
    validation_envelope,
)
from src.report import error_envelope
from src.simulator import SimConfig

# Configure once at application startup
logger = setup_logger(log_level=Config.LOG_LEVEL)


app = FastAPI(title="fluid-tail")

# Enable CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],  # Adjust this in production to specific origins
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Request models
class AnalyzeRequest(BaseModel):
    params: ModelParams
    boundary: BoundarySource = BoundarySource.AUTO
    truncation: int = Field(default=Config.DEFAULT_TRUNCATION, ge=1)
    form: DriftForm = DriftForm.EXACT


class SolveRequest(BaseModel):
    params: ModelParams
    truncation: int = Field(default=Config.DEFAULT_TRUNCATION, ge=1)
    grid: Optional[List[float]] = None
    phases: Optional[List[int]] = None


class ValidateRequest(BaseModel):
    params: ModelParams
    truncation: int = Field(default=Config.DEFAULT_TRUNCATION, ge=1)
    boundary: BoundarySource = BoundarySource.AUTO
    tolerances: Tolerances = Field(default_factory=Tolerances)
    form: DriftForm = DriftForm.EXACT
    # Monte Carlo is long-running and therefore opt-in here
    simulate: bool = False
    horizon: float = Config.DEFAULT_HORIZON
    warmup: float = Config.DEFAULT_WARMUP
    seed: int = Config.DEFAULT_SEED
    stride: float = Config.DEFAULT_STRIDE
    replications: int = Field(default=Config.SIM_REPLICATIONS, ge=1)
    window: Optional[Tuple[float, float]] = None


@app.exception_handler(FluidTailError)
async def fluid_tail_error_handler(request: Request, exc: FluidTailError):
    logger.error(f"{request.url.path} failed with {exc.code}: {exc.message}")
    return JSONResponse(status_code=422, content=error_envelope(exc.to_dict()))


@app.post("/api/ping")
async def ping():
    return {"status": "success", "message": "System is up"}


@app.post("/api/analyze")
def analyze(request: AnalyzeRequest):
    logger.info(f"Analyzing {request.params.label()}")
    result = run_analysis(request.params, request.boundary, request.truncation, request.form)
    return analysis_envelope(result)


@app.post("/api/solve")
def solve(request: SolveRequest):
    logger.info(f"Solving N={request.truncation} for {request.params.label()}")
    _, payload = run_solve(request.params, request.truncation, request.grid, request.phases)
    return payload


@app.post("/api/validate")
def validate(request: ValidateRequest):
    sim_config = None
    if request.simulate:
        try:
            sim_config = SimConfig(
                params=request.params,
                horizon=request.horizon,
                warmup=request.warmup,
                seed=request.seed,
                sample_stride=request.stride,
            )
        except ValidationError as exc:
            raise InvalidParametersError(
                "invalid simulation settings",
                {"errors": exc.errors(include_url=False, include_context=False, include_input=False)},
            )
    validation = run_validation(
        request.params,
        truncation=request.truncation,
        sim_config=sim_config,
        replications=request.replications,
        tolerances=request.tolerances,
        window=request.window,
        boundary_source=request.boundary,
        form=request.form,
    )
    return validation_envelope(validation)


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host=Config.API_HOST, port=Config.API_PORT)
