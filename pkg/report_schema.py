"""pydantic models for every JSON file the CLI writes.

report.json, the clustering trace and the run manifest are validated against
these models before they are written, and tests validate files read back.
"""
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

# JSON has no infinity; an infinite gap ratio is written as this string.
INF_SENTINEL = 'inf'


class _Strict(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True)


class PhiIn(_Strict):
    lower: Optional[float] = None
    upper: Optional[float] = None
    exact: Optional[float] = None


class ClusterEntry(_Strict):
    id: int
    size: int
    phi_out: float
    phi_in: PhiIn
    diagnostic: Optional[str] = None


class AlphaIn(_Strict):
    lower: Optional[float] = None
    upper: Optional[float] = None


class Gap(_Strict):
    k: int
    lambda_k: float
    lambda_k1: float
    ratio: Union[float, Literal['inf']]
    cheeger_bound_ok: Optional[bool] = None


class ConcentrationBounds(_Strict):
    alpha_in: float
    lambda_k: float
    d_max: int
    statement_bound: float
    proof_bound: float
    holds_statement: bool
    holds_proof: bool


class PairSum(_Strict):
    cluster: int
    volume: int
    bound: float
    pair_sums: List[float]
    holds: bool


class Guarantee(_Strict):
    required_alpha_in: float
    required_alpha_in_fast: Optional[float] = None
    hypothesis_met: Optional[bool] = None
    fast_hypothesis_met: Optional[bool] = None
    error_scale: Optional[float] = None
    observed_distance: Optional[int] = None


class VerdictEntry(_Strict):
    alpha_in: float
    alpha_out: float
    verdict: Literal['strong', 'not-strong', 'unknown']


class EvaluationReport(_Strict):
    format_version: int
    n: int
    k: int
    per_cluster: List[ClusterEntry]
    alpha_out: float
    alpha_in: AlphaIn
    distance_to_reference: Optional[int] = None
    optimal_sigma: Optional[List[int]] = None
    lambda_: List[float] = Field(..., alias='lambda')
    gap: Gap
    concentration: List[float]
    concentration_bounds: Optional[ConcentrationBounds] = None
    pairsum: List[PairSum] = []
    guarantee: Guarantee
    verdict: Optional[VerdictEntry] = None
    diagnostics: List[str] = []


class TraceRecord(_Strict):
    iter: int
    center: Optional[int]
    ball_size: int
    remaining: int
    sampled_ids: Optional[List[int]] = None
    exhausted: bool = False


TraceFile = TypeAdapter(List[TraceRecord])


class RunManifest(_Strict):
    tool: str
    tool_version: str
    format_versions: Dict[str, int]
    subcommand: str
    argv: List[str]
    params: Dict[str, Any]
    seed: Optional[int] = None
    rng: Optional[str] = None
    inputs: Dict[str, str]
    outputs: Dict[str, str]
