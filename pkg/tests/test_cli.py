import csv
import json

import pytest

from klshell import modelfile
from klshell.cli import main
from klshell.presets import PRESETS, preset


def small_arch():
    doc = preset("shallow_shell")
    doc["refinement"] = {"elements_u": 2, "elements_v": 2, "degree": 3, "continuity": 2}
    doc["solver"]["max_increments"] = 8
    return doc


def write(tmp_path, doc, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


@pytest.mark.parametrize("name", PRESETS)
def test_presets_are_valid_documents(name):
    modelfile.validate(preset(name))


def test_unknown_key_is_named(tmp_path, capsys):
    doc = small_arch()
    doc["solver"]["tolerence"] = 1e-6
    assert main(["run", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "tolerence" in err and "solver" in err


def test_bad_json_and_missing_input(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == 2
    assert main(["run", "--out", str(tmp_path)]) == 2


def test_declared_curviness_is_checked():
    doc = small_arch()
    doc["initial_curviness"] = 0.5
    with pytest.raises(modelfile.ModelFileError, match="curviness"):
        modelfile.build(doc)


def test_stop_monitor_must_exist():
    doc = small_arch()
    doc["solver"]["stop"] = {"monitor": "nope", "max": 1.0}
    with pytest.raises(modelfile.ModelFileError):
        modelfile.build(doc)


def _rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [r[:-1] for r in rows[1:]]


def test_run_outputs_are_deterministic(tmp_path):
    model = write(tmp_path, small_arch())
    for tag in ("a", "b"):
        assert main(["run", model, "--out", str(tmp_path / tag), "--threads", "1"]) == 0
    head_a, rows_a = _rows(tmp_path / "a" / "path.csv")
    head_b, rows_b = _rows(tmp_path / "b" / "path.csv")
    assert head_a == ["increment", "lpf", "w_A", "w_B", "iterations", "arc_length", "inertia", "seconds"]
    assert rows_a == rows_b
    # 17 significant digits round-trip
    assert all(float(format(float(r[1]), ".17g")) == float(r[1]) for r in rows_a)
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["totals"]["increments"] == len(rows_a) - 1
    assert report["environment"]["threads"] == 1
    assert (tmp_path / "a" / "point_A.csv").exists()


def test_field_output(tmp_path):
    doc = small_arch()
    doc["outputs"] = ["path", "report", "fields"]
    doc["solver"]["max_increments"] = 2
    assert main(["run", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 0
    first = json.loads((tmp_path / "o" / "fields.ndjson").read_text().splitlines()[0])
    assert {"xi", "eta", "Kh", "Kh_display", "eps11", "kappa11"} <= set(first)


def test_linear_preset_run(tmp_path, capsys):
    code = main(["run", "--preset", "pinched_cylinder_linear", "--elements", "6", "--out", str(tmp_path)])
    assert code == 0
    assert "w_A=" in capsys.readouterr().out


def test_preset_rejects_unknown_option(tmp_path):
    assert main(["run", "--preset", "pullout_cylinder", "--thickness", "2", "--out", str(tmp_path)]) == 2


def test_solver_failure_exit_code(tmp_path):
    doc = small_arch()
    doc["solver"].update({"max_iterations": 1, "force_tolerance": 1e-14})
    assert main(["run", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 3


def test_compare_writes_all_models(tmp_path):
    doc = small_arch()
    doc["solver"]["max_increments"] = 3
    assert main(["compare", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "compare.json").read_text())
    assert set(summary["models"]) == {"Da", "D0", "D1", "D2"}
    assert summary["time_ratio_vs_D0"]["D0"] == 1.0
    header = (tmp_path / "compare.csv").read_text().splitlines()[0].split(",")
    assert "w_A_rel_D2" in header


def test_compare_on_plate_finds_no_model_differences(tmp_path):
    geometry = {"degree_u": 1, "degree_v": 1, "knots_u": [0, 0, 1, 1], "knots_v": [0, 0, 1, 1],
                "control_points": [[0, 0, 0, 1], [0, 1, 0, 1], [1, 0, 0, 1], [1, 1, 0, 1]]}
    doc = {"geometry": geometry, "thickness": 0.05, "material": {"E": 1000.0, "nu": 0.3},
           "refinement": {"elements_u": 4, "elements_v": 4, "degree": 2, "continuity": 1},
           "constraints": [{"type": "clamp", "edge": "u0"}],
           "loads": [{"type": "point", "at": [1.0, 0.5], "force": [0, 0, -1e-3]}],
           "monitors": [{"name": "tip", "at": [1.0, 0.5], "direction": [0, 0, -1]}],
           "solver": {"method": "linear"}}
    assert main(["compare", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "compare.json").read_text())
    for m in ("D0", "D1", "D2"):
        assert summary["models"][m]["relative_difference"]["tip"] == pytest.approx(0.0, abs=1e-12)
    assert summary["models"]["Da"]["final"]["tip"] > 0
