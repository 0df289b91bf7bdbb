"""
Main FastAPI Application
HTTP entry point for validating and running Young-Taylor expansion experiments
"""
import logging
import re
from pathlib import Path
from typing import Any, Dict

import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.concurrency import run_in_threadpool

from config import LOG_LEVEL, OUTPUT_DIR
from errors import ConfigError, DomainError, ExpansionError
from experiments import run_experiment
from schemas import validate_config

logger = logging.getLogger(__name__)

app = FastAPI(
    title="Young-Taylor Expansion Service",
    description="Taylor and Lie-series expansions of differential equations driven by Hölder paths",
    version="1.0.0"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

_run_name = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


@app.get("/")
async def root():
    return {
        "message": "Young-Taylor Expansion Service",
        "version": "1.0.0",
        "endpoints": {
            "/validate": "POST - Validate an experiment config",
            "/run": "POST - Run one experiment and return its manifest",
            "/health": "GET - Health check"
        }
    }


@app.get("/health")
async def health_check():
    return {"status": "healthy"}


def _check(payload: Dict[str, Any]):
    try:
        return validate_config(payload)
    except ConfigError as e:
        raise HTTPException(status_code=422, detail=str(e))


@app.post("/validate")
async def validate(payload: Dict[str, Any]):
    """Return the normalized config, or 422 naming the violated invariant"""
    config = _check(payload)
    return config.model_dump(mode="json")


@app.post("/run")
async def run(payload: Dict[str, Any], name: str = "run"):
    """
    Run one experiment into OUTPUT_DIR/<name>.

    Parameter-domain errors map to 422, other toolkit failures to 500; the error record is
    left in the run directory either way.
    """
    if not _run_name.match(name):
        raise HTTPException(status_code=422, detail="run name may only use letters, digits, '_' and '-'")
    config = _check(payload)
    out_dir = Path(OUTPUT_DIR) / name
    try:
        return await run_in_threadpool(run_experiment, config, out_dir)
    except DomainError as e:
        raise HTTPException(status_code=422, detail=f"{config.experiment} failed: {e}")
    except ExpansionError as e:
        logger.exception("Experiment %s failed", config.experiment)
        raise HTTPException(status_code=500, detail=f"{config.experiment} failed: {e}")


if __name__ == "__main__":
    logging.basicConfig(level=LOG_LEVEL)
    uvicorn.run(app, host="0.0.0.0", port=8000)
