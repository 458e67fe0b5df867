import json
import subprocess
import sys

import pytest

from hypuml.cli import build_parser, main


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def synth_file(tmp_path):
    path = tmp_path / "f.hypf"
    assert run("synth", "-o", path, "--classes", 10, "--per-class", 20, "--dim", 16, "--seed", 7) == 0
    return path


def test_synth_record_count_and_determinism(tmp_path, synth_file):
    from hypuml.data import read_features

    assert len(read_features(synth_file)) == 200
    again = tmp_path / "g.hypf"
    run("synth", "-o", again, "--classes", 10, "--per-class", 20, "--dim", 16, "--seed", 7)
    assert again.read_bytes() == synth_file.read_bytes()


def test_synth_default_record_count(tmp_path):
    from hypuml.data import read_features

    run("synth", "-o", tmp_path / "d.hypf", "--seed", 7)
    assert len(read_features(tmp_path / "d.hypf")) == 500


def test_negative_sigma_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("synth", "-o", tmp_path / "x", "--sigma", -1)
    assert exc.value.code == 2
    assert not (tmp_path / "x").exists()


def test_unknown_flag(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("synth", "-o", tmp_path / "x", "--bogus", 1)
    assert exc.value.code == 2


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        run("train", "--help")
    out = capsys.readouterr().out
    for flag in ("--curvature", "--scale", "--tau", "--margin", "--lr", "--epochs", "--dim-out"):
        assert flag in out
    assert "(default: 0.1)" in out and "(default: 0.02)" in out


def test_invalid_config_combination(tmp_path, synth_file):
    with pytest.raises(SystemExit) as exc:
        run("train", synth_file, "-o", tmp_path / "c", "--batch-size", 10, "--samples-per-class", 3)
    assert exc.value.code == 2


def test_missing_feature_file(tmp_path, capsys):
    assert run("train", tmp_path / "nope.hypf", "-o", tmp_path / "c") == 2
    assert "cannot read" in capsys.readouterr().err


def test_corrupt_checkpoint_exit_2(tmp_path, synth_file):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    assert run("eval", bad, synth_file) == 2


def test_pipeline(tmp_path, synth_file, capsys):
    ck, metrics = tmp_path / "h.ckpt", tmp_path / "m.jsonl"
    args = ("train", synth_file, "-o", ck, "--metrics", metrics, "--lr", "1e-3", "--epochs", 5,
            "--dim-out", 2, "--log-interval", 3)
    assert run(*args) == 0
    first = ck.read_bytes(), metrics.read_bytes()
    assert run(*args) == 0
    assert (ck.read_bytes(), metrics.read_bytes()) == first

    report = tmp_path / "r.json"
    assert run("eval", ck, synth_file, "--report", report, "--ks", "1,2,4,8") == 0
    assert "recall@8" in capsys.readouterr().out
    assert [r["k"] for r in json.loads(report.read_text())["recall"]] == [1, 2, 4, 8]

    emb = tmp_path / "e.hype"
    assert run("embed", ck, synth_file, "-o", emb) == 0
    svg = tmp_path / "p.svg"
    assert run("plot", emb, "-o", svg, "--radius", 150) == 0
    assert svg.read_text().startswith("<svg")


def test_plot_high_dim_exit_2(tmp_path, synth_file, capsys):
    ck = tmp_path / "h.ckpt"
    run("train", synth_file, "-o", ck, "--epochs", 0, "--dim-out", 8)
    emb = tmp_path / "e.hype"
    run("embed", ck, synth_file, "-o", emb)
    assert run("plot", emb, "-o", tmp_path / "p.svg") == 2
    assert "--dim-out 2" in capsys.readouterr().err


def test_split_flags(tmp_path, synth_file, capsys):
    split = tmp_path / "split.txt"
    split.write_text("train = 0-4\ntest = 5-9\n")
    ck = tmp_path / "h.ckpt"
    assert run("train", synth_file, "-o", ck, "--epochs", 1, "--split", split) == 0
    assert run("eval", ck, synth_file, "--split", split) == 0
    assert "queries    100" in capsys.readouterr().out
    assert run("eval", ck, synth_file, "--split", split, "--part", "nope") == 2


def test_gradcheck_command(capsys):
    assert run("gradcheck", "--configs", 1) == 0
    out = capsys.readouterr().out
    assert "head_chain[contrastive]" in out and "FAIL" not in out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "hypuml", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("synth", "train", "eval", "embed", "plot", "gradcheck"):
        assert cmd in out.stdout


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
