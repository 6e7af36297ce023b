import json
import math
import os

import pytest

import moecap

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def path(*parts):
    return os.path.join(ROOT, *parts)


def test_model_params():
    m = moecap.load_model(path("models", "toy-moe.json"))
    assert m.name == "toy-moe"
    assert m.total_params() == 13_020_000
    assert m.active_params() == 9_020_000
    assert m.active_params(include_embeddings=False) < m.active_params()


def test_plan_requirement_inverse_efficiency():
    m = moecap.load_model(path("models", "toy-moe.json"))
    a = moecap.plan_requirement(m, precision="fp16", efficiency=1.0)
    b = moecap.plan_requirement(m, precision="fp16", efficiency=0.5)
    assert b["practical_bandwidth_gbps"] == pytest.approx(2 * a["practical_bandwidth_gbps"])
    with pytest.raises(ValueError):
        moecap.plan_requirement(m, efficiency=0.0)


def test_expected_distinct_closed_form():
    mean, var = moecap.expected_distinct_experts(64, 8, 8)
    assert mean == pytest.approx(64 * (1 - (7 / 8) ** 8))
    assert var == 0.0


def test_cost_per_token_worked_example():
    c = moecap.cost_per_token(10_000, 500, 8760, 0.1, 1000)
    assert float(f"{c:.2e}") == 3.31e-7


def test_classify_records():
    with open(path("inputs", "cap_qwen3_a5000.json")) as f:
        records = json.load(f)["records"]
    out = moecap.classify_records(records)
    assert [s["label"] for s in out["systems"]] == ["PA", "PC", "CA"]


def test_recommend():
    rules = path("rules", "decision_matrix.json")
    r = moecap.recommend(rules, "workstation", 4, "cost", "latency")
    assert r["matched"] and r["rule"]["recommended_system"] == "K-Transformers"
    r = moecap.recommend(rules, "edge", 1, "cost", "latency")
    assert not r["matched"]


def test_run_cli_error_contract():
    code, out, err = moecap.run_cli(["plan", "--model", "/nonexistent.json"])
    assert code == 2 and out == ""
    assert json.loads(err)["error"]["kind"] == "validation"
    code, out, _ = moecap.run_cli(["cost", "--input", path("inputs", "cost_example.json")])
    assert code == 0
    assert math.isclose(json.loads(out)["breakdown"]["cost_per_token_usd"], 3.31e-7, rel_tol=2e-3)
