"""CLI dispatch: exit codes, gen-config, and the simulate/analyze/replay flow."""

import json

import pytest

from facilichat.cli import dispatch, load_config_file
from facilichat.simulator import SPEAKING_ROLES, UTTERANCE_TRAITS, default_names

SIM_SCRIPT_DOC = {
    "script": {
        "mus_speaker": "no proposal",
        "mus_trait_pick": "ANSWER: laconic",
        "mus_utterance": "ANSWER: another point about the plan",
        "topic_summaries": "ANSWER:\n1. venue talk\n2. budget talk",
        "subtopic_status": "ANSWER:\n1: being discussed\n2: not discussed",
        "discussed_subtopics": "ANSWER:\nvenue",
        "summary_merge": "ANSWER: keeps pushing the plan",
        "chime_classifier": "ANSWER: stuck=0 unsolve=0",
        "chime_in": "ANSWER: maybe compare costs first?",
        "encouragement": "ANSWER: what do you think?",
        "initiative_summary": "ANSWER: so far we discussed the venue.",
        "transition": "ANSWER: shall we move to the budget?",
        "conflict": "ANSWER: both sides have a point here.",
    }
}


def profile_doc(name):
    return {
        "name": name,
        "roles": list(SPEAKING_ROLES[:6]),
        "traits": list(UTTERANCE_TRAITS[:6]),
        "length": {"l_min": 3, "l_avg": 8, "l_max": 20},
    }


def write_config(tmp_path, **extra):
    doc = {
        "topic": "plan the fair",
        "participants": 4,
        "profile": "small",
        "agenda": ["venue", "budget"],
        "seed": 7,
        "profiles": [profile_doc(n) for n in default_names(4)],
    }
    doc.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def write_script(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps(SIM_SCRIPT_DOC))
    return str(path)


# --- argument handling ---


def test_no_command_is_usage_error(capsys):
    assert dispatch([]) == 2
    capsys.readouterr()


def test_unknown_command_is_usage_error(capsys):
    assert dispatch(["frobnicate"]) == 2
    capsys.readouterr()


def test_missing_required_flag_is_usage_error(capsys):
    assert dispatch(["replay"]) == 2
    capsys.readouterr()


# --- gen-config ---


def test_gen_config_stdout(capsys):
    code = dispatch(
        [
            "gen-config",
            "--topic",
            "plan the fair",
            "--participants",
            "4",
            "--agenda",
            "venue",
            "--agenda",
            "budget",
        ]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["topic"] == "plan the fair"
    assert doc["participants"] == 4
    assert doc["agenda"] == ["venue", "budget"]
    assert doc["derived"] == {"n_exe": 3, "n_sw": 8, "n_lw": 80}


def test_gen_config_medium_profile_derivation(tmp_path, capsys):
    out = tmp_path / "cfg.json"
    code = dispatch(
        [
            "gen-config",
            "--topic",
            "roadmap",
            "--participants",
            "8",
            "--profile",
            "medium",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    capsys.readouterr()
    doc = json.loads(out.read_text())
    assert doc["derived"] == {"n_exe": 6, "n_sw": 16, "n_lw": 160}
    # the generated file round-trips through the config loader
    config, _raw = load_config_file(str(out))
    assert (config.n_sw, config.n_exe, config.n_lw) == (16, 6, 160)


def test_gen_config_invalid_participants(capsys):
    code = dispatch(["gen-config", "--topic", "x", "--participants", "1"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


# --- analyze ---


def test_analyze_missing_logs(tmp_path, capsys):
    code = dispatch(["analyze", "--logs", str(tmp_path / "*.jsonl")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


# --- simulate, analyze, replay round trip ---


def test_simulate_analyze_replay_flow(tmp_path, capsys):
    config = write_config(tmp_path)
    script = write_script(tmp_path)
    log = tmp_path / "session.jsonl"

    code = dispatch(
        [
            "simulate",
            "--config",
            config,
            "--turns",
            "12",
            "--seed",
            "7",
            "--script",
            script,
            "--out",
            str(log),
        ]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "simulated" in out
    assert log.exists()

    report_path = tmp_path / "report.txt"
    code = dispatch(
        [
            "analyze",
            "--logs",
            str(tmp_path / "session.jsonl"),
            "--out",
            str(report_path),
        ]
    )
    capsys.readouterr()
    assert code == 0
    report = report_path.read_text()
    assert "words per conversation" in report

    code = dispatch(["replay", "--log", str(log)])
    out = capsys.readouterr().out
    assert code == 0
    assert "replay matches the log" in out


def test_simulate_is_deterministic(tmp_path, capsys):
    config = write_config(tmp_path)
    script = write_script(tmp_path)
    blobs = []
    for run in range(2):
        log = tmp_path / f"run{run}.jsonl"
        assert (
            dispatch(
                [
                    "simulate",
                    "--config",
                    config,
                    "--turns",
                    "9",
                    "--seed",
                    "21",
                    "--script",
                    script,
                    "--out",
                    str(log),
                ]
            )
            == 0
        )
        capsys.readouterr()
        blobs.append(log.read_bytes())
    assert blobs[0] == blobs[1]


def test_simulate_profiles_out(tmp_path, capsys):
    config = write_config(tmp_path)
    script = write_script(tmp_path)
    profiles_out = tmp_path / "profiles.json"
    code = dispatch(
        [
            "simulate",
            "--config",
            config,
            "--turns",
            "3",
            "--seed",
            "5",
            "--script",
            script,
            "--profiles-out",
            str(profiles_out),
        ]
    )
    capsys.readouterr()
    assert code == 0
    docs = json.loads(profiles_out.read_text())
    assert [d["name"] for d in docs] == default_names(4)


def test_replay_missing_file(tmp_path, capsys):
    code = dispatch(["replay", "--log", str(tmp_path / "nope.jsonl")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_config_file_unknown_profile(tmp_path, capsys):
    config = write_config(tmp_path, profile="gigantic")
    code = dispatch(
        ["simulate", "--config", config, "--turns", "3", "--seed", "1"]
    )
    assert code == 1
    assert "error:" in capsys.readouterr().err
