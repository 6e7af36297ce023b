"""MoE deployment analysis: sparsity-aware utilization, cost and hardware planning."""

import json as _json

from . import _core
from ._core import (
    ConfigurationError,
    ModelDescriptor,
    ValidationError,
    cost_per_token,
    data_dir,
    expected_distinct_experts,
    load_model,
    run_cli,
)

__all__ = [
    "ConfigurationError",
    "ModelDescriptor",
    "ValidationError",
    "classify_records",
    "cost_per_token",
    "data_dir",
    "expected_distinct_experts",
    "load_model",
    "plan_requirement",
    "recommend",
    "run_cli",
]


def plan_requirement(model, **kwargs):
    """Bandwidth requirement for one activation mode, as a dict."""
    return _json.loads(_core.plan_requirement(model, **kwargs))


def classify_records(records):
    """Radar coordinates and PA/PC/CA labels for a list of record dicts."""
    return _json.loads(_core.classify_records(_json.dumps({"records": records})))


def recommend(rules_path, tier, batch, primary, secondary):
    return _json.loads(_core.recommend(str(rules_path), tier, batch, primary, secondary))
