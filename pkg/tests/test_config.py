"""Settings precedence and input-file parsing."""

import pytest

from cli.config import InputFileError, build_run_config, read_config_file, read_numbers, read_pvalues
from workflow.simulation import DEFAULT_TRIALS


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


# ── p-value files ────────────────────────────────────────────

def test_read_pvalues_with_header_and_ids(tmp_path):
    path = write(tmp_path, "p.csv", "id,p\ngene_a,0.001\ngene_b,0.5\n\ngene_c,1\n")
    p = read_pvalues(path)
    assert p.s == 3
    assert p.values.tolist() == [0.001, 0.5, 1.0]
    assert p.label(2) == "gene_c"


def test_read_pvalues_single_column_without_header(tmp_path):
    p = read_pvalues(write(tmp_path, "p.csv", "0.2\n0.01\n"))
    assert p.values.tolist() == [0.2, 0.01]
    assert p.label(0) == "1"


def test_read_pvalues_reports_line_numbers(tmp_path):
    path = write(tmp_path, "p.csv", "p\n0.1\nabc\n")
    with pytest.raises(InputFileError) as caught:
        read_pvalues(path)
    assert caught.value.line == 3
    assert f"{path}:3" in str(caught.value)


@pytest.mark.parametrize("text", ["1.5\n", "0.1\n-0.2\n", "a,b,c\n", "", "x,0.1\n0.2\n"])
def test_read_pvalues_rejects_bad_files(tmp_path, text):
    with pytest.raises(InputFileError):
        read_pvalues(write(tmp_path, "p.csv", text))


def test_missing_file(tmp_path):
    with pytest.raises(InputFileError):
        read_pvalues(str(tmp_path / "absent.csv"))


def test_read_numbers(tmp_path):
    path = write(tmp_path, "deltas.txt", "1, 2,3\n# comment\n4.5\n")
    assert read_numbers(path) == [1.0, 2.0, 3.0, 4.5]
    with pytest.raises(InputFileError) as caught:
        read_numbers(write(tmp_path, "bad.txt", "1\n2,x\n"), "betas")
    assert caught.value.line == 2
    with pytest.raises(InputFileError):
        read_numbers(write(tmp_path, "empty.txt", "# nothing\n"))


# ── settings ─────────────────────────────────────────────────

def test_defaults():
    cfg = build_run_config("simulate", {})
    assert cfg.trials == DEFAULT_TRIALS
    assert cfg.seed == 0
    assert cfg.workers == 1
    assert cfg.mode == "stepdown"


def test_flags_beat_file_beat_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("STEPDOWN_TRIALS", "30")
    monkeypatch.setenv("STEPDOWN_WORKERS", "3")
    assert build_run_config("simulate", {}).trials == 30

    config = write(tmp_path, "run.cfg", "trials = 50  # fewer\nseed = 3\nalt-law = power:4\n")
    cfg = build_run_config("simulate", {"config": config, "trials": 20, "seed": None})
    assert cfg.trials == 20
    assert cfg.seed == 3
    assert cfg.alt_law == "power:4"
    assert cfg.workers == 3


def test_method_aliases():
    assert build_run_config("constants", {"method": "fdr-sd"}).method == "fdr-stepdown"
    assert build_run_config("constants", {"method": "BH"}).method == "bh-stepup"
    assert build_run_config("constants", {"method": "holm"}).method == "holm"


def test_config_file_errors(tmp_path):
    with pytest.raises(InputFileError) as caught:
        read_config_file(write(tmp_path, "a.cfg", "seed = 1\ncolour = blue\n"))
    assert caught.value.line == 2
    with pytest.raises(InputFileError):
        read_config_file(write(tmp_path, "b.cfg", "just words\n"))
    with pytest.raises(InputFileError):
        read_config_file(write(tmp_path, "c.cfg", "command = table\n"))


def test_invalid_values_are_value_errors():
    with pytest.raises(ValueError):
        build_run_config("constants", {"gamma": "1.5"})
    with pytest.raises(ValueError):
        build_run_config("simulate", {"trials": 0})
    with pytest.raises(ValueError):
        build_run_config("simulate", {"colour": "blue"})
