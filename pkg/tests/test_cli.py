"""End-to-end command-line behavior: exit codes, file outputs, and
byte-for-byte reproducibility of reports."""

import json

import pytest

from netdrift import classify
from netdrift.cli import apply_parameter, canonical_model_dict, load_model, main
from netdrift.errors import BadParameterPath


BASE_MODEL = {
    "arrivals": [{"poisson": 0.8}, {"poisson": 0.4}],
    "services": [
        {"exponential": 4.0},
        {"exponential": 2.4},
        {"exponential": 4.2},
        {"exponential": 2.2},
    ],
    "discipline": "non_preemptive",
    "p": 0.3,
}

TRANSIENT_MODEL = {
    "arrivals": [{"poisson": 1.0}, {"poisson": 0.55}],
    "services": [
        {"exponential": 4.0},
        {"exponential": 2.0},
        {"exponential": 2.1},
        {"exponential": 0.55 / 0.6},
    ],
    "discipline": "non_preemptive",
    "p": 0.0,
}

LIMITED_MODEL = {
    "arrivals": [{"poisson": 1.0}, {"poisson": 1.0}],
    "services": [
        {"exponential": 5.0},
        {"exponential": 1.8},
        {"exponential": 5.0},
        {"exponential": 1.8},
    ],
    "discipline": {"limited": {"K": 2}},
    "p": 0.0,
}


def write_json(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_reports_model_facts(tmp_path, capsys):
    model = write_json(tmp_path, "model.json", BASE_MODEL)
    code, out, err = run(capsys, ["validate", model])
    assert code == 0, err
    report = json.loads(out)
    assert report["valid"] is True
    assert report["discipline"] == "non_preemptive"
    assert report["arrivalRates"] == [0.8, 0.4]
    assert report["serviceRates"] == [4.0, 2.4, 4.2, 2.2]
    assert report["backgroundStates"] == 9
    assert report["semiIrreducibility"] == "ConfirmedSemiIrreducible"


def test_validate_canonical_round_trip(tmp_path, capsys):
    model = write_json(tmp_path, "model.json", BASE_MODEL)
    canon = tmp_path / "canonical.json"
    code, out, err = run(
        capsys, ["validate", model, "--canonical-out", str(canon)])
    assert code == 0
    original = load_model(model)
    reparsed = load_model(str(canon))
    assert canonical_model_dict(reparsed) == canonical_model_dict(original)
    a = classify(original, mode="closed", assume_semi_irreducible=True)
    b = classify(reparsed, mode="closed", assume_semi_irreducible=True)
    assert a.r1r2 == b.r1r2


def test_invalid_model_field_is_exit_2(tmp_path, capsys):
    bad = dict(BASE_MODEL)
    bad["services"] = [
        {"exponential": 4.0},
        {"beta": [0.5, 0.6], "H": [[-2.0, 0.0], [0.0, -2.0]]},
        {"exponential": 4.2},
        {"exponential": 2.2},
    ]
    path = write_json(tmp_path, "bad_field.json", bad)
    code, out, err = run(capsys, ["validate", path])
    assert code == 2
    assert "services.2" in err


def test_parse_problems_are_exit_3(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    code, _, err = run(capsys, ["validate", str(broken)])
    assert code == 3 and "parse error" in err

    code, _, err = run(capsys, ["validate", str(tmp_path / "missing.json")])
    assert code == 3 and "cannot read" in err

    empty = write_json(tmp_path, "empty.json", {})
    code, _, err = run(capsys, ["validate", empty])
    assert code == 3

    code, _, err = run(capsys, ["no-such-command"])
    assert code == 3


def test_analyze_exit_codes(tmp_path, capsys):
    stable = write_json(tmp_path, "stable.json", BASE_MODEL)
    code, out, _ = run(capsys, ["analyze", stable, "--mode", "closed",
                                "--assume-semi-irreducible"])
    assert code == 0
    report = json.loads(out)
    assert report["classification"] == "PositiveRecurrent"
    assert report["r1r2"] == pytest.approx(0.7 * 0.8 / 1.8, abs=1e-12)

    transient = write_json(tmp_path, "transient.json", TRANSIENT_MODEL)
    code, out, _ = run(capsys, ["analyze", transient, "--mode", "closed",
                                "--assume-semi-irreducible"])
    assert code == 1
    assert json.loads(out)["classification"] == "Transient"

    silent = dict(BASE_MODEL)
    silent["arrivals"] = [{"poisson": 0.0}, {"poisson": 0.4}]
    quiet = write_json(tmp_path, "silent.json", silent)
    code, out, _ = run(capsys, ["analyze", quiet, "--mode", "closed",
                                "--assume-semi-irreducible"])
    assert code == 4
    report = json.loads(out)
    assert report["classification"] == "Inconclusive"
    assert any("degenerate" in r for r in report["reasons"])


def test_analyze_artifacts_are_reproducible(tmp_path, capsys):
    model = write_json(tmp_path, "model.json", BASE_MODEL)
    outs = []
    for tag in ("one", "two"):
        report_path = tmp_path / f"report_{tag}.json"
        spiral_path = tmp_path / f"spiral_{tag}.csv"
        code, _, _ = run(capsys, [
            "analyze", model, "--mode", "closed", "--assume-semi-irreducible",
            "--certificate", "--spiral", "--spiral-csv", str(spiral_path),
            "--out", str(report_path),
        ])
        assert code == 0
        assert (tmp_path / f"report_{tag}.json.meta.json").exists()
        outs.append((report_path.read_bytes(), spiral_path.read_bytes()))
    assert outs[0] == outs[1]

    report = json.loads(outs[0][0])
    assert report["certificate"]["epsilon"] > 0
    assert report["spiralPath"]["contraction"] == pytest.approx(
        report["r1r2"], abs=1e-10)
    lines = outs[0][1].decode().splitlines()
    assert lines[0] == "step,x1,x2,x3,x4"
    assert len(lines) == 6


def test_analyze_numeric_fallback_for_asymmetric_limited(tmp_path, capsys):
    # no closed form outside the symmetric case: "both" degrades to the
    # numeric table with an explanatory note and still classifies
    asym = dict(BASE_MODEL)
    asym["discipline"] = {"limited": {"K": 4}}
    path = write_json(tmp_path, "asym.json", asym)
    code, out, _ = run(capsys, [
        "analyze", path, "--mode", "both", "--assume-semi-irreducible",
        "--levels", "16", "--cap", "128",
    ])
    assert code == 0
    report = json.loads(out)
    assert report["classification"] == "PositiveRecurrent"
    assert any("closed form unavailable" in note for note in report["notes"])
    assert report["driftTable"]["closed"] is None
    assert report["driftTable"]["numeric"] is not None


def test_analyze_reports_failed_sign_premises(tmp_path, capsys):
    # queue 3 drains faster than it fills even when saturated, so the
    # ratio framework's sign premises fail and the verdict is withheld
    path = write_json(tmp_path, "asym_limited.json", dict(
        LIMITED_MODEL, arrivals=[{"poisson": 0.8}, {"poisson": 0.4}]))
    code, out, _ = run(capsys, [
        "analyze", path, "--mode", "numeric", "--assume-semi-irreducible",
        "--levels", "16", "--cap", "128",
    ])
    assert code == 4
    report = json.loads(out)
    assert report["classification"] == "Inconclusive"
    assert any("sign condition failed" in r for r in report["reasons"])


def expected_limited_ratio(K):
    rho1, rho2 = 1.0 / 5.0, 1.0 / 1.8
    return (rho1 + K * rho2 - 1.0) / (-rho1 + K * (1.0 - rho2))


def test_sweep_visit_budget(tmp_path, capsys):
    model = write_json(tmp_path, "limited.json", LIMITED_MODEL)
    sweep = write_json(tmp_path, "sweep.json",
                       {"parameter": "discipline.K",
                        "values": [1, 2, 3, 4, 5, 6, 7, 8]})
    out_csv = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, ["sweep", model, sweep, "--out", str(out_csv)])
    assert code == 0
    assert (tmp_path / "sweep.csv.meta.json").exists()

    lines = out_csv.read_text().splitlines()
    assert lines[0] == "value,r1,r2,r1r2,classification,note"
    assert len(lines) == 9
    rows = [line.split(",", 5) for line in lines[1:]]

    # K = 1 sits below the critical budget: no ratios, explicit note
    assert rows[0][1] == "" and rows[0][4] == "Inconclusive"
    assert "AssumptionViolated" in rows[0][5]

    for row, K in zip(rows[1:], range(2, 9)):
        r = expected_limited_ratio(K)
        assert float(row[1]) == pytest.approx(r, rel=1e-9)
        assert float(row[3]) == pytest.approx(r * r, rel=1e-9)
        assert row[4] == ("PositiveRecurrent" if K <= 5 else "Transient")

    # identical bytes on a second run
    rerun_csv = tmp_path / "sweep2.csv"
    code, _, _ = run(capsys, ["sweep", model, sweep, "--out", str(rerun_csv)])
    assert code == 0
    assert rerun_csv.read_bytes() == out_csv.read_bytes()


def test_sweep_parallel_matches_serial(tmp_path, capsys):
    model = write_json(tmp_path, "limited.json", LIMITED_MODEL)
    sweep = write_json(tmp_path, "sweep.json",
                       {"parameter": "discipline.K", "values": [2, 6]})
    serial = tmp_path / "serial.csv"
    parallel = tmp_path / "parallel.csv"
    assert run(capsys, ["sweep", model, sweep, "--out", str(serial)])[0] == 0
    assert run(capsys, ["sweep", model, sweep, "--jobs", "2",
                        "--out", str(parallel)])[0] == 0
    assert serial.read_bytes() == parallel.read_bytes()


def test_sweep_empty_values_writes_header_only(tmp_path, capsys):
    model = write_json(tmp_path, "model.json", BASE_MODEL)
    sweep = write_json(tmp_path, "sweep.json",
                       {"parameter": "p", "values": []})
    out_csv = tmp_path / "empty.csv"
    code, _, _ = run(capsys, ["sweep", model, sweep, "--out", str(out_csv)])
    assert code == 0
    assert out_csv.read_text() == "value,r1,r2,r1r2,classification,note\n"


def test_sweep_rejects_bad_parameter_path(tmp_path, capsys):
    model = write_json(tmp_path, "model.json", BASE_MODEL)
    sweep = write_json(tmp_path, "sweep.json",
                       {"parameter": "services.5.rate", "values": [1.0]})
    code, _, err = run(capsys, ["sweep", model, sweep])
    assert code == 2 and "services.5.rate" in err

    # discipline.K is only meaningful for the limited discipline
    sweep_k = write_json(tmp_path, "sweep_k.json",
                         {"parameter": "discipline.K", "values": [2]})
    code, _, err = run(capsys, ["sweep", model, sweep_k])
    assert code == 2


def test_apply_parameter_paths():
    patched = apply_parameter(BASE_MODEL, "arrivals.1.rate", 1.1)
    assert patched["arrivals"][0]["poisson"] == 1.1
    assert BASE_MODEL["arrivals"][0]["poisson"] == 0.8  # deep copy

    patched = apply_parameter(BASE_MODEL, "services.3.rate", 9.0)
    assert patched["services"][2]["exponential"] == 9.0

    patched = apply_parameter(BASE_MODEL, "p", 0.5)
    assert patched["p"] == 0.5

    with pytest.raises(BadParameterPath):
        apply_parameter(BASE_MODEL, "services.3.mean", 1.0)
    with pytest.raises(BadParameterPath):
        apply_parameter(BASE_MODEL, "arrivals.0.rate", 1.0)


def test_simulate_outputs_are_reproducible(tmp_path, capsys):
    model = write_json(tmp_path, "model.json", BASE_MODEL)
    snapshots = []
    for tag in ("a", "b"):
        out_dir = tmp_path / f"run_{tag}"
        code, _, _ = run(capsys, [
            "simulate", model, "--horizon", "300", "--seed", "7",
            "--replications", "2", "--out", str(out_dir),
        ])
        assert code == 0
        names = sorted(p.name for p in out_dir.iterdir())
        assert names == [
            "run.meta.json", "summary.json", "summary.json.meta.json",
            "trajectory_001.csv", "trajectory_002.csv",
        ]
        snapshots.append((
            (out_dir / "summary.json").read_bytes(),
            (out_dir / "trajectory_001.csv").read_bytes(),
            (out_dir / "trajectory_002.csv").read_bytes(),
        ))
    assert snapshots[0] == snapshots[1]
    summary = json.loads(snapshots[0][0])
    assert summary["replications"] == 2
    assert len(summary["perReplication"]) == 2
    header = snapshots[0][1].decode().splitlines()[0]
    assert header == "t,x1,x2,x3,x4"


def test_simulate_saturated_agrees_with_table(tmp_path, capsys):
    model = write_json(tmp_path, "model.json", BASE_MODEL)
    code, out, _ = run(capsys, [
        "simulate", model, "--saturate", "N", "--horizon", "10000",
        "--seed", "12345",
    ])
    assert code == 0
    summary = json.loads(out)
    assert summary["saturated"] == [1, 2, 3, 4]
    assert summary["analytical"]["outputRates"] == [0.0, 2.4, 0.0, 2.2]
    assert all(item["ok"] for item in summary["agreement"]), summary["agreement"]


def test_simulate_argument_errors(tmp_path, capsys):
    model = write_json(tmp_path, "model.json", BASE_MODEL)
    code, _, err = run(capsys, [
        "simulate", model, "--initial", "1,2,3", "--horizon", "10"])
    assert code == 3 and "four" in err

    code, _, err = run(capsys, [
        "simulate", model, "--initial", "1,2,3,4", "--saturate", "N"])
    assert code == 3

    code, _, err = run(capsys, ["simulate", model, "--horizon", "0"])
    assert code == 4 and "InsufficientData" in err


def test_certificate_command(tmp_path, capsys):
    model = write_json(tmp_path, "model.json", BASE_MODEL)
    code, out, _ = run(capsys, ["certificate", model, "--mode", "closed"])
    assert code == 0
    payload = json.loads(out)
    assert set(payload) == {
        "U", "epsilon", "delta", "leadingMinors", "minorFormulas",
        "innerProducts", "eigenvalues", "gridIndex", "subsets",
    }
    assert payload["subsets"] == ["N", "123", "134", "14", "23"]
    assert all(m > 0 for m in payload["leadingMinors"])

    transient = write_json(tmp_path, "transient.json", TRANSIENT_MODEL)
    code, _, err = run(capsys, ["certificate", transient, "--mode", "closed"])
    assert code == 4 and "AssumptionViolated" in err


def test_unexpected_errors_are_exit_5(tmp_path, capsys, monkeypatch):
    import netdrift.cli as cli_module

    model = write_json(tmp_path, "model.json", BASE_MODEL)

    def boom(*args, **kwargs):
        raise ValueError("internal defect")

    monkeypatch.setattr(cli_module, "classify", boom)
    code, _, err = run(capsys, ["analyze", model, "--mode", "closed"])
    assert code == 5
    assert "internal defect" in err


def test_version_flag(capsys):
    code, out, _ = run(capsys, ["--version"])
    assert code == 0
    assert out.strip()
