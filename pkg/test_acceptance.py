import json

import pytest

from app.chains import acceptance_chain
from app.chains.acceptance_chain import AcceptanceWorkflow
from app.main import main
from app.models.config import Settings

# stages replaced by stand-ins; polylog and the quick Griffiths node run for real
STAND_INS = {
    "_curve_identities": [12],
    "_scaling_zeros": [1, 2],
    "_asymptotics": [6, 7],
    "_scaling_limit": [8],
    "_closest_zero": [5],
    "_zero_sets": [3, 4, 11],
    "_griffiths_band": [9],
}


def _stand_in(name, criteria, passed=True):
    def check(self, state):
        for criterion in criteria:
            self._record(state, criterion, name.strip("_"), passed)
    check.__name__ = name
    return check


def _raising(name):
    def check(self, state):
        raise RuntimeError("stage blew up")
    check.__name__ = name
    return check


@pytest.fixture
def light_stages(monkeypatch):
    for name, criteria in STAND_INS.items():
        monkeypatch.setattr(AcceptanceWorkflow, name, _stand_in(name, criteria))
    monkeypatch.setitem(acceptance_chain.PROFILES["quick"], "griffiths_n_max", 24)
    monkeypatch.setitem(acceptance_chain.PROFILES["quick"], "griffiths_ks", [3, 4, 5, 6])
    monkeypatch.setitem(acceptance_chain.PROFILES["quick"], "polylog_betas", [100])
    monkeypatch.setitem(acceptance_chain.PROFILES["full"], "polylog_betas", [100])
    return monkeypatch


@pytest.fixture
def settings(tmp_path):
    return Settings(output_dir=str(tmp_path / "out"), cache_dir=str(tmp_path / "cache"), base_bits=128)


def test_quick_profile_routes_to_griffiths_constants(light_stages, settings, tmp_path):
    state = AcceptanceWorkflow(settings, "quick").run()
    timings = state["metadata"]["timings"]
    assert "griffiths_constants" in timings
    assert "griffiths_band" not in timings
    assert "polylog" in timings

    summary = state["metadata"]["summary"]
    assert summary["all_passed"]
    assert summary["failed"] == []
    assert summary["skipped"] == [9]
    assert sorted({r["criterion"] for r in state["results"]}) == list(range(1, 13))

    report = json.loads((tmp_path / "out" / "verify_quick.json").read_text())
    assert report["profile"] == "quick"
    assert report["errors"] == []
    assert "timings" in report["meta"]
    band = [r for r in report["results"] if r["skipped"]]
    assert [(r["criterion"], r["name"]) for r in band] == [(9, "Griffiths coefficient band")]
    constants = [r for r in report["results"] if r["name"] == "Griffiths constants"]
    assert constants[0]["passed"] and not constants[0]["skipped"]


def test_full_profile_routes_to_griffiths_band(light_stages, settings):
    state = AcceptanceWorkflow(settings, "full").run()
    timings = state["metadata"]["timings"]
    assert "griffiths_band" in timings
    assert "griffiths_constants" not in timings
    summary = state["metadata"]["summary"]
    assert summary["all_passed"]
    assert summary["skipped"] == []
    assert state["artifacts"]["report"].endswith("verify_full.json")


def test_raising_stage_fails_the_run(light_stages, settings):
    light_stages.setattr(AcceptanceWorkflow, "_scaling_limit", _raising("_scaling_limit"))
    state = AcceptanceWorkflow(settings, "quick").run()
    assert state["errors"] == ["scaling_limit: RuntimeError: stage blew up"]
    assert not state["metadata"]["summary"]["all_passed"]
    assert 8 not in {r["criterion"] for r in state["results"]}


def test_unknown_profile_rejected(settings):
    with pytest.raises(ValueError):
        AcceptanceWorkflow(settings, "medium")


def test_verify_command_exit_codes(light_stages, tmp_path):
    light_stages.setenv("PINNING_CACHE_DIR", str(tmp_path / "cache"))
    out = tmp_path / "out"
    assert main(["--output-dir", str(out), "--base-bits", "128", "verify"]) == 0
    assert (out / "verify_quick.json").exists()

    light_stages.setattr(AcceptanceWorkflow, "_closest_zero", _stand_in("_closest_zero", [5], passed=False))
    assert main(["--output-dir", str(out), "--base-bits", "128", "verify"]) == 4
    report = json.loads((out / "verify_quick.json").read_text())
    assert report["summary"]["failed"] == [5]
