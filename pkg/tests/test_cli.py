import json
from fractions import Fraction

import pytest

import fairassign as fa
from fairassign.cli import main

F = Fraction


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture
def instance_file(tmp_path, two_agent):
    path = tmp_path / "instance.json"
    path.write_text(fa.serialize_instance(two_agent))
    return path


@pytest.fixture
def four_agent_file(tmp_path, four_agent):
    path = tmp_path / "four.json"
    path.write_text(fa.serialize_instance(four_agent))
    return path


# ---------------------------------------------------------------------------
# gen


def test_gen_deterministic(tmp_path):
    first = tmp_path / "one.json"
    second = tmp_path / "two.json"
    assert run_cli("gen", "--agents", "2", "--items", "4", "--seed", "7", "--out", str(first)) == 0
    assert run_cli("gen", "--agents", "2", "--items", "4", "--seed", "7", "--out", str(second)) == 0
    assert first.read_bytes() == second.read_bytes()
    parsed = fa.parse_instance(first.read_text())
    assert parsed.agent_count == 2 and parsed.item_count == 4


def test_gen_rejects_bad_sizes(tmp_path):
    assert run_cli("gen", "--agents", "0", "--items", "3", "--out", str(tmp_path / "x")) == 2


# ---------------------------------------------------------------------------
# run


def test_run_eating_fractional(tmp_path, instance_file):
    out = tmp_path / "out.json"
    code = run_cli(
        "run", "--instance", str(instance_file), "--mechanism", "gpbm",
        "--mode", "fractional", "--out", str(out),
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "random"
    assert doc["matrix"][0] == ["1/2", "1", "0", "1/2"]
    assert doc["rounds"][0][0] == ["1/2", "1/2", "0", "0"]
    assert doc["rounds"][1][1] == ["0", "0", "1/2", "1/2"]


def test_run_eager_sample_reproducible(tmp_path, instance_file):
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert run_cli(
            "run", "--instance", str(instance_file), "--mechanism", "gebm",
            "--mode", "sample", "--seed", "5", "--out", str(out),
        ) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    doc = json.loads(outs[0])
    assert doc["kind"] == "assignment"
    assert len(doc["rounds"]) == 2


def test_run_eager_lottery(tmp_path, instance_file):
    out = tmp_path / "lot.json"
    assert run_cli(
        "run", "--instance", str(instance_file), "--mechanism", "gebm",
        "--mode", "lottery", "--out", str(out),
    ) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "lottery"
    assert len(doc["atoms"]) == 4
    assert all(atom["prob"] == "1/4" for atom in doc["atoms"])


def test_run_dictatorship_with_order(tmp_path, identical):
    inst = tmp_path / "identical.json"
    inst.write_text(fa.serialize_instance(identical))
    out = tmp_path / "rsdq.json"
    assert run_cli(
        "run", "--instance", str(inst), "--mechanism", "rsdq",
        "--mode", "sample", "--order", "1,2", "--quota", "2", "--out", str(out),
    ) == 0
    doc = json.loads(out.read_text())
    assert doc["assignment"] == {"1": ["a", "b"], "2": ["c", "d"]}


def test_run_unknown_mechanism(tmp_path, instance_file):
    assert run_cli(
        "run", "--instance", str(instance_file), "--mechanism", "boston",
        "--out", str(tmp_path / "x"),
    ) == 2


def test_run_branch_cap(tmp_path, instance_file):
    assert run_cli(
        "run", "--instance", str(instance_file), "--mechanism", "gebm",
        "--mode", "lottery", "--max-branch", "2", "--out", str(tmp_path / "x"),
    ) == 2


# ---------------------------------------------------------------------------
# check


def test_check_strict_violation(tmp_path, four_agent_file):
    artifact = tmp_path / "P.json"
    assert run_cli(
        "run", "--instance", str(four_agent_file), "--mechanism", "gpbm",
        "--mode", "fractional", "--out", str(artifact),
    ) == 0
    report = tmp_path / "report.json"
    code = run_cli(
        "check", "--instance", str(four_agent_file), "--input", str(artifact),
        "--properties", "sdwef", "--strict", "--out", str(report),
    )
    assert code == 1
    payload = json.loads(report.read_text())
    assert payload[0]["verdict"] is False
    assert payload[0]["witness"] == {"envious": "3", "envied": "1"}


def test_check_assignment_properties(tmp_path, instance_file, two_agent):
    artifact = tmp_path / "A.json"
    payload = {
        "kind": "assignment",
        "assignment": {"1": ["a", "b"], "2": ["c", "d"]},
    }
    artifact.write_text(json.dumps(payload))
    code = run_cli(
        "check", "--instance", str(instance_file), "--input", str(artifact),
        "--properties", "fcm,pe,ef1,fhr", "--strict",
    )
    assert code == 0


def test_check_type_mismatch(tmp_path, instance_file):
    artifact = tmp_path / "lot.json"
    assert run_cli(
        "run", "--instance", str(instance_file), "--mechanism", "gebm",
        "--mode", "lottery", "--out", str(artifact),
    ) == 0
    assert run_cli(
        "check", "--instance", str(instance_file), "--input", str(artifact),
        "--properties", "sde",
    ) == 2


def test_check_expost_on_lottery(tmp_path, instance_file):
    artifact = tmp_path / "lot.json"
    run_cli(
        "run", "--instance", str(instance_file), "--mechanism", "gebm",
        "--mode", "lottery", "--out", str(artifact),
    )
    assert run_cli(
        "check", "--instance", str(instance_file), "--input", str(artifact),
        "--properties", "expost-pe,expost-fcm,expost-ef1", "--strict",
    ) == 0


def test_check_unknown_property(tmp_path, instance_file):
    artifact = tmp_path / "A.json"
    artifact.write_text(json.dumps({"kind": "assignment", "assignment": {"1": [], "2": []}}))
    assert run_cli(
        "check", "--instance", str(instance_file), "--input", str(artifact),
        "--properties", "sparkle",
    ) == 2


# ---------------------------------------------------------------------------
# decompose


def test_decompose(tmp_path, instance_file, two_agent):
    out = tmp_path / "dec.json"
    assert run_cli("decompose", "--instance", str(instance_file), "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "decomposed_lottery"
    assert len(doc["atoms"]) == 2
    total = F(0)
    for atom in doc["atoms"]:
        total += F(atom["prob"])
        assert len(atom["rounds"]) == 2
    assert total == F(1)
    # ex-post checkable through the lottery reader
    assert run_cli(
        "check", "--instance", str(instance_file), "--input", str(out),
        "--properties", "expost-ef1", "--strict",
    ) == 0


# ---------------------------------------------------------------------------
# audit


def test_audit_sp(tmp_path, conflict):
    inst = tmp_path / "conflict.json"
    inst.write_text(fa.serialize_instance(conflict))
    out = tmp_path / "witness.json"
    assert run_cli(
        "audit", "sp", "--mechanism", "gebm", "--instance", str(inst), "--out", str(out)
    ) == 0
    doc = json.loads(out.read_text())
    assert doc["witness"]["agent"] == "2"
    assert doc["witness"]["misreport"] == ["a", "b", "d", "c"]


def test_audit_sp_no_witness(tmp_path):
    single = fa.Instance.from_prefs({"1": ["x", "y"]})
    inst = tmp_path / "single.json"
    inst.write_text(fa.serialize_instance(single))
    out = tmp_path / "none.json"
    assert run_cli(
        "audit", "sp", "--mechanism", "gpbm", "--instance", str(inst), "--out", str(out)
    ) == 0
    assert json.loads(out.read_text()) == {"witness": None}


def test_audit_neutrality(tmp_path, instance_file, capsys):
    assert run_cli(
        "audit", "neutrality", "--mechanism", "gpbm", "--instance", str(instance_file),
    ) == 0
    assert "equal" in capsys.readouterr().out


def test_audit_neutrality_explicit_perm(tmp_path, instance_file):
    out = tmp_path / "neut.json"
    assert run_cli(
        "audit", "neutrality", "--mechanism", "gebm", "--instance", str(instance_file),
        "--perm", "c:d,d:c", "--out", str(out),
    ) == 0
    doc = json.loads(out.read_text())
    assert doc[0]["verdict"] is True


def test_audit_remark1_small(tmp_path, capsys):
    assert run_cli("audit", "remark1", "--max", "2") == 0
    assert "no witness" in capsys.readouterr().out


def test_audit_remark1_default(tmp_path):
    out = tmp_path / "r1.json"
    assert run_cli("audit", "remark1", "--max", "3", "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["witness"]["fails"] == "sdef"


# ---------------------------------------------------------------------------
# experiment


def test_experiment_small(tmp_path):
    config = {
        "mechanisms": ["gebm", "rsdq"],
        "sizes": [[2, 3]],
        "trials": 5,
        "seed": 11,
        "out": str(tmp_path / "report.csv"),
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    assert run_cli("experiment", "--config", str(cfg)) == 0
    lines = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert lines[0].startswith("mechanism,n,m,trials,seed,first_choice_frac")
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[0] == "gebm" and first[3] == "5"


def test_experiment_reproducible(tmp_path):
    rows = []
    for name in ("r1.csv", "r2.csv"):
        config = {
            "mechanisms": ["gpbm"],
            "sizes": [[2, 4]],
            "trials": 4,
            "seed": 3,
            "out": str(tmp_path / name),
        }
        cfg = tmp_path / f"{name}.config"
        cfg.write_text(json.dumps(config))
        assert run_cli("experiment", "--config", str(cfg)) == 0
        # drop the wall-clock column before comparing
        content = [
            line.rsplit(",", 1)[0]
            for line in (tmp_path / name).read_text().strip().splitlines()
        ]
        rows.append(content)
    assert rows[0] == rows[1]


def test_experiment_invalid_config(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"mechanisms": ["gebm"], "sizes": [[2, 3]], "trials": 0}))
    assert run_cli("experiment", "--config", str(cfg)) == 2


def test_experiment_guarantee_columns():
    from fairassign.cli import run_experiment

    rows = run_experiment(
        {
            "mechanisms": ["gebm", "gpbm", "rsdq"],
            "sizes": [[3, 6]],
            "trials": 60,
            "seed": 5,
        }
    )
    by_mechanism = {row["mechanism"]: row for row in rows}
    for guaranteed in ("gebm", "gpbm"):
        row = by_mechanism[guaranteed]
        assert (row["viol_fcm"], row["viol_pe"], row["viol_ef1"]) == (0, 0, 0)
    # block picking trips the envy bound on this seeded grid
    assert by_mechanism["rsdq"]["viol_ef1"] > 0


def test_experiment_single_trial(tmp_path):
    config = {
        "mechanisms": ["gebm"],
        "sizes": [[2, 2]],
        "trials": 1,
        "seed": 0,
        "out": str(tmp_path / "one.csv"),
    }
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    assert run_cli("experiment", "--config", str(cfg)) == 0
    lines = (tmp_path / "one.csv").read_text().strip().splitlines()
    assert len(lines) == 2
