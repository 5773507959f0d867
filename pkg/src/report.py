"""Provenance-tagged values, comparisons and the versioned output envelopes."""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1


class Source(str, Enum):
    ANALYTIC = "analytic"
    SPECTRAL = "spectral"
    SIMULATION = "simulation"


class Quantity(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: Optional[float]
    source: Source
    error: float = 0.0


class Comparison(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    reference: Quantity
    candidate: Quantity
    rel_error: Optional[float]
    tolerance: float
    passed: bool


def compare(name: str, reference: Quantity, candidate: Quantity, tolerance: float) -> Comparison:
    """Relative discrepancy of ``candidate`` against ``reference``."""
    if reference.value is None or candidate.value is None:
        return Comparison(
            name=name, reference=reference, candidate=candidate,
            rel_error=None, tolerance=tolerance, passed=False,
        )
    scale = abs(reference.value) or 1.0
    rel_error = abs(candidate.value - reference.value) / scale
    return Comparison(
        name=name, reference=reference, candidate=candidate,
        rel_error=rel_error, tolerance=tolerance, passed=rel_error <= tolerance,
    )


def check(name: str, value: float, passed: bool, source: Source = Source.ANALYTIC) -> Comparison:
    """A pass/fail property carried in the comparison table."""
    quantity = Quantity(value=value, source=source)
    return Comparison(
        name=name, reference=quantity, candidate=quantity, rel_error=0.0, tolerance=0.0, passed=passed
    )


class Envelope(BaseModel):
    schema_version: int = SCHEMA_VERSION
    kind: str
    params: Dict[str, Any]
    body: Dict[str, Any] = Field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"schema": self.schema_version, "kind": self.kind, "params": self.params, **self.body}


def envelope(kind: str, params: Optional[Dict[str, Any]] = None, **body: Any) -> Dict[str, Any]:
    return Envelope(kind=kind, params=params or {}, body=body).to_dict()


def error_envelope(error: Dict[str, Any]) -> Dict[str, Any]:
    return {"schema": SCHEMA_VERSION, "error": error}


def comparisons_frame(comparisons: List[Comparison]) -> pd.DataFrame:
    rows = [
        {
            "name": item.name,
            "reference": item.reference.value,
            "reference_source": item.reference.source.value,
            "candidate": item.candidate.value,
            "candidate_source": item.candidate.source.value,
            "rel_error": item.rel_error,
            "tolerance": item.tolerance,
            "passed": item.passed,
        }
        for item in comparisons
    ]
    return pd.DataFrame(rows)


def write_csv(frame: pd.DataFrame, path: Optional[Union[str, Path]] = None) -> str:
    """Write to ``path`` when given; always return the CSV text."""
    text = frame.to_csv(index=False)
    if path is not None:
        Path(path).write_text(text)
    return text
