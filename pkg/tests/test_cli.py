"""End-to-end command line runs against synthetic CSV inputs."""

import json
import subprocess
import sys

import numpy as np
import pytest

from longfuse import MethodPlan, ScenarioSpec, generate_pair, write_table_csv
from longfuse.cli import main
from longfuse.report import HEADER, TABLE_DELIMITER

SCHEMA_YAML = """columns:
  - {name: Z, role: treatment, kind: binary}
  - {name: X1, role: covariate, kind: continuous}
  - {name: X2, role: covariate, kind: continuous}
  - {name: X3, role: intermediate, kind: continuous}
  - {name: X4, role: intermediate, kind: continuous}
  - {name: Y, role: outcome, kind: continuous}
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    spec = ScenarioSpec(
        scenario="primary",
        replications=1,
        methods=MethodPlan(pooled_m=2),
        n_outcomes=150,
        n_intervention_base=220,
    )
    outcomes, intervention = generate_pair(spec, 97)
    write_table_csv(str(root / "outcomes.csv"), outcomes)
    write_table_csv(str(root / "intervention.csv"), intervention)
    (root / "fuse.yaml").write_text(
        "mode: fuse\n"
        "seed: 404\n"
        "outcomes: outcomes.csv\n"
        "intervention: intervention.csv\n"
        + SCHEMA_YAML
        + "methods:\n"
        "  rules: {m: 8}\n"
        "  jackknife:\n"
        "    - {groups: 6, m: 2}\n"
        "  bootstrap:\n"
        "    - {resamples: 8, m: 2}\n"
    )
    return root


def _run(workdir, *argv):
    out = workdir / "report.txt"
    code = main([*argv, "--out", str(out)])
    return code, out.read_text() if out.exists() else ""


def test_fuse_produces_a_well_formed_report(workdir, monkeypatch):
    monkeypatch.chdir(workdir)
    code, text = _run(workdir, "fuse", "--config", "fuse.yaml")
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == HEADER
    split = lines.index(TABLE_DELIMITER)
    records = [json.loads(line) for line in lines[1:split]]
    kinds = [r["record"] for r in records]
    assert kinds[0] == "meta"
    assert "data" in kinds
    assert "pooled" in kinds
    assert sum(k == "estimate" for k in kinds) == 14  # 5 rules x 2 + 2 schemes x 2
    meta = records[0]
    assert meta["seed"] == 404
    assert meta["mode"] == "fuse"
    # the table region is non-empty and column-aligned
    assert len(lines) > split + 3
    # a sane point estimate for the synthetic design (truth 0.5)
    effect_rows = [
        r for r in records if r["record"] == "estimate" and r["parameter"] == "effect"
    ]
    assert all(abs(r["estimate"] - 0.5) < 0.6 for r in effect_rows)


def test_fuse_reports_are_byte_identical_across_runs(workdir, monkeypatch):
    monkeypatch.chdir(workdir)
    _, first = _run(workdir, "fuse", "--config", "fuse.yaml")
    _, second = _run(workdir, "fuse", "--config", "fuse.yaml")
    assert first == second


def test_seed_flag_overrides_the_config(workdir, monkeypatch):
    monkeypatch.chdir(workdir)
    _, base = _run(workdir, "fuse", "--config", "fuse.yaml")
    _, other = _run(workdir, "fuse", "--config", "fuse.yaml", "--seed", "405")
    _, again = _run(workdir, "fuse", "--config", "fuse.yaml", "--seed", "405")
    assert other != base
    assert other == again
    assert '"seed": 405' in other


def test_report_goes_to_stdout_without_out_flag(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    code = main(["fuse", "--config", "fuse.yaml"])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.startswith(HEADER)
    assert "finished in" in captured.err


def test_mode_mismatch_exits_2(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    assert main(["simulate", "--config", "fuse.yaml"]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_exits_2(workdir, monkeypatch):
    monkeypatch.chdir(workdir)
    assert main(["fuse", "--config", "absent.yaml"]) == 2


def test_missing_csv_exits_3(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    bad = workdir / "bad.yaml"
    bad.write_text(
        (workdir / "fuse.yaml").read_text().replace("outcomes.csv", "absent.csv")
    )
    assert main(["fuse", "--config", "bad.yaml"]) == 3
    assert "absent.csv" in capsys.readouterr().err


def test_estimation_failure_exits_4(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    table = {
        "Z": np.zeros(60),  # no treated arm anywhere
        "X1": np.linspace(-1, 1, 60),
        "X2": np.linspace(-1, 1, 60),
        "X3": np.linspace(-1, 1, 60),
        "X4": np.linspace(-1, 1, 60),
    }
    write_table_csv(str(workdir / "onearm.csv"), table)
    cfg = workdir / "onearm.yaml"
    cfg.write_text(
        (workdir / "fuse.yaml")
        .read_text()
        .replace("intervention: intervention.csv", "intervention: onearm.csv")
    )
    assert main(["fuse", "--config", "onearm.yaml"]) == 4
    assert "error:" in capsys.readouterr().err


def test_missing_seed_everywhere_exits_2(workdir, monkeypatch, capsys):
    monkeypatch.chdir(workdir)
    unseeded = workdir / "unseeded.yaml"
    unseeded.write_text(
        "\n".join(
            line
            for line in (workdir / "fuse.yaml").read_text().splitlines()
            if not line.startswith("seed:")
        )
    )
    assert main(["fuse", "--config", "unseeded.yaml"]) == 2
    assert "seed" in capsys.readouterr().err


def test_simulate_cli_is_thread_count_invariant(workdir, monkeypatch):
    monkeypatch.chdir(workdir)
    (workdir / "study.yaml").write_text(
        "mode: simulate\n"
        "seed: 52\n"
        "scenario: primary\n"
        "replications: 4\n"
        "n_outcomes: 120\n"
        "n_intervention_base: 170\n"
        "methods:\n"
        "  rules: {m: 3}\n"
    )
    _, one = _run(workdir, "simulate", "--config", "study.yaml", "--threads", "1")
    _, two = _run(workdir, "simulate", "--config", "study.yaml", "--threads", "2")
    assert one == two
    assert '"record": "metrics"' in one


def test_pathway_cli_runs_without_a_seed_when_closed_form_only(
    workdir, monkeypatch, capsys
):
    monkeypatch.chdir(workdir)
    (workdir / "path.yaml").write_text(
        "mode: pathway\n"
        "example: 6\n"
        "params: {alpha0: 0.0, beta0: 0.0, beta1: 0.7, beta2: 0.5, gamma0: 0.0,"
        " gamma1: 0.3, gamma2: 0.4, var_1: 1.0, var_2: 1.0, var_y: 1.0}\n"
    )
    code, text = _run(workdir, "pathway", "--config", "path.yaml")
    assert code == 0
    assert '"record": "closed_form"' in text
    assert '"record": "monte_carlo"' not in text


def test_console_entry_point_reports_its_version():
    proc = subprocess.run(
        [sys.executable, "-m", "longfuse", "--version"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert proc.stdout.strip().startswith("longfuse ")
