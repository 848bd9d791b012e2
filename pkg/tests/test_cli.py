"""Command line surface: config parsing, study and single runs, mesh info."""

import numpy as np
import pytest

import fvewave as fw
from fvewave.cli import (ConfigError, StudyConfig, main, mesh_info,
                         parse_config, run_single, run_study)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_defaults_validate():
    config = parse_config()
    assert config.problem == "example1"
    assert config.levels == (4, 8, 16, 32)
    assert config.k_rule == "proportional"
    assert config.c == 0.25


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "study.cfg"
    path.write_text(
        "# study settings\n"
        "problem = example2\n"
        "levels = 2, 4, 8\n"
        "\n"
        "k_rule = proportional\n"
        "c = 0.2\n"
        "final_time = 0.5\n"
        "norms = max l2\n"
        "deterministic = yes\n"
        "figures = false\n"
    )
    config = parse_config(path)
    assert config.problem == "example2"
    assert config.levels == (2, 4, 8)
    assert config.c == 0.2
    assert config.norms == ("max", "l2")
    assert config.deterministic is True
    assert config.figures is False
    # command line overrides win over the file
    config = parse_config(path, {"problem": "example1", "final_time": None})
    assert config.problem == "example1"
    assert config.final_time == 0.5


@pytest.mark.parametrize("line,fragment", [
    ("levels = 4, eight", "line 1: levels expects"),
    ("k = huge", "line 1: k expects a number"),
    ("figures = maybe", "line 1: figures expects a boolean"),
    ("mesh = fine", "line 1: unknown key"),
    ("final_time 2.0", "line 1: expected 'key = value'"),
])
def test_config_errors_name_the_line(tmp_path, line, fragment):
    path = tmp_path / "bad.cfg"
    path.write_text(line + "\n")
    with pytest.raises(ConfigError, match=fragment):
        parse_config(path)


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="available: example1, example2"):
        StudyConfig(problem="example9").validated()
    with pytest.raises(ConfigError, match="strictly increasing"):
        StudyConfig(levels=(8, 4)).validated()
    with pytest.raises(ConfigError, match="positive k"):
        StudyConfig(k_rule="fixed").validated()
    with pytest.raises(ConfigError, match="k_rule"):
        StudyConfig(k_rule="random").validated()
    with pytest.raises(ConfigError, match="unknown norms"):
        StudyConfig(norms=("max", "sup")).validated()
    with pytest.raises(ConfigError, match="safety"):
        StudyConfig(safety=1.5).validated()


def test_step_must_divide_final_time():
    config = StudyConfig(levels=(4,), k_rule="fixed", k=0.3, final_time=1.0)
    with pytest.raises(ConfigError, match="does not divide"):
        run_study(config)


def test_run_study_writes_table_and_figure(tmp_path):
    config = StudyConfig(problem="example1", levels=(2, 4, 8),
                         final_time=0.25, output_dir=tmp_path)
    report, outputs = run_study(config)
    assert outputs.csv_path.name == "example1_convergence.csv"
    assert outputs.csv_path.exists()
    assert outputs.figure_path.name == "example1_convergence.png"
    assert outputs.figure_path.read_bytes()[:8] == PNG_MAGIC
    assert len(report.levels) == 3
    assert report.slope("max", last=3) > 1.5


def test_run_study_without_figures(tmp_path):
    config = StudyConfig(levels=(2, 4), final_time=0.25,
                         output_dir=tmp_path, figures=False)
    _, outputs = run_study(config)
    assert outputs.figure_path is None
    assert not list(tmp_path.glob("*.png"))


def test_run_study_deterministic_is_reproducible(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        run_study(StudyConfig(levels=(2, 4), final_time=0.25, output_dir=out,
                              deterministic=True, figures=False))
    csv_a = (out_a / "example1_convergence.csv").read_bytes()
    csv_b = (out_b / "example1_convergence.csv").read_bytes()
    assert csv_a == csv_b


def test_run_single_snapshots(tmp_path):
    summary = run_single("example1", 4, final_time=0.5,
                         snapshot_times=(0.0, 0.5), output_dir=tmp_path)
    assert summary["problem"] == "example1"
    assert summary["n"] == 4
    assert summary["num_steps"] == 8
    assert summary["cfl_ratio"] < 1.0
    assert summary["err_max"] < 0.5
    names = {p.split("/")[-1] for p in map(str, summary["outputs"])}
    assert "example1_n4_t0.txt" in names
    assert "example1_n4_t0.5.txt" in names
    assert "example1_n4_t0.5.png" in names
    grid_file = tmp_path / "example1_n4_t0.5.txt"
    rows = np.array([[float(tok) for tok in line.split()]
                     for line in grid_file.read_text().splitlines()])
    assert rows.shape == (25, 3)


def test_run_single_rejects_out_of_range_snapshot(tmp_path):
    with pytest.raises(ConfigError, match="snapshot time"):
        run_single("example1", 4, final_time=0.5, snapshot_times=(0.75,),
                   output_dir=tmp_path)


def test_run_single_auto_rule(tmp_path):
    summary = run_single("example2", 4, k_rule="auto", final_time=0.5,
                         output_dir=tmp_path, figures=False)
    assert summary["k"] <= 0.9 * summary["k_max"] * (1 + 1e-12)
    assert summary["num_steps"] * summary["k"] == pytest.approx(0.5)


def test_mesh_info_structured():
    info = mesh_info(n=4)
    assert info["nodes"] == 25
    assert info["triangles"] == 32
    assert info["interior_nodes"] == 9
    assert info["total_area"] == pytest.approx(1.0)
    assert info["control_volume_min"] == pytest.approx(1 / 16)


def test_mesh_info_from_file(tmp_path):
    mesh = fw.build_uniform_triangulation(3)
    path = tmp_path / "grid.mesh"
    fw.write_mesh_file(path, mesh)
    info = mesh_info(mesh_file=path)
    assert info["nodes"] == 16
    with pytest.raises(ConfigError, match="exactly one"):
        mesh_info()


def test_main_study_command(tmp_path, capsys):
    code = main(["study", "--problem", "example1", "--levels", "2,4",
                 "--final-time", "0.25", "--output-dir", str(tmp_path),
                 "--no-figures"])
    out = capsys.readouterr().out
    assert code == 0
    assert "err_max" in out
    assert "table:" in out
    assert "figure:" not in out
    assert (tmp_path / "example1_convergence.csv").exists()


def test_main_run_command(tmp_path, capsys):
    code = main(["run", "--problem", "example2", "--n", "4",
                 "--final-time", "0.5", "--snapshots", "0.5",
                 "--output-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "cfl_ratio:" in out
    assert (tmp_path / "example2_n4_t0.5.png").exists()


def test_main_mesh_info_command(capsys):
    assert main(["mesh-info", "--n", "3"]) == 0
    assert "interior_nodes: 4" in capsys.readouterr().out


def test_main_reports_config_errors(tmp_path, capsys):
    code = main(["study", "--levels", "8,4", "--output-dir", str(tmp_path)])
    captured = capsys.readouterr()
    assert code == 2
    assert "error:" in captured.err
    assert "strictly increasing" in captured.err
