import hashlib
import json

import numpy as np
import pytest
from scipy.stats import binom

from bregconceal.cli import main, parse_args
from bregconceal.concealment import LossMask
from bregconceal.datasets import make_texture, make_translation_sequence
from bregconceal.fileio import read_mask, read_pgm, write_mask, write_pgm, write_yuv420


def _write_seq(directory, frames):
    directory.mkdir(parents=True, exist_ok=True)
    for k, f in enumerate(frames):
        write_pgm(f, directory / f"in_{k:03d}.pgm")
    return directory


def _digest(directory):
    h = hashlib.sha256()
    for p in sorted(directory.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(directory).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def _rows(path):
    lines = path.read_text().splitlines()
    return [dict(zip(lines[0].split(","), ln.split(","))) for ln in lines[1:]]


@pytest.fixture(scope="module")
def moving(tmp_path_factory):
    frames, _ = make_translation_sequence((48, 64), 4, (1.0, 1.0), seed=21)
    return _write_seq(tmp_path_factory.mktemp("moving"), frames)


@pytest.fixture(scope="module")
def static(tmp_path_factory):
    tex = make_texture((48, 64), seed=22)
    return _write_seq(tmp_path_factory.mktemp("static"), [tex] * 3)


def test_simulate_zero_rate(tmp_path, static):
    assert main(["simulate", "--input", str(static), "--output", str(tmp_path), "--loss-rate", "0"]) == 0
    masks = sorted(tmp_path.glob("mask_*.txt"))
    assert [p.name for p in masks] == ["mask_0001.txt", "mask_0002.txt"]
    assert all(read_mask(p).lost_count == 0 for p in masks)


def test_simulate_deterministic(tmp_path):
    args = ["simulate", "--raw", "176x144", "--frames", "5", "--loss-rate", "0.2", "--seed", "9"]
    main(args + ["--output", str(tmp_path / "a")])
    main(args + ["--output", str(tmp_path / "b")])
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b")


def test_simulate_qcif_binomial(tmp_path, capsys):
    assert main(["simulate", "--raw", "176x144", "--frames", "31", "--output", str(tmp_path)]) == 0
    masks = [read_mask(p) for p in sorted(tmp_path.glob("mask_*.txt"))]
    assert len(masks) == 30
    assert all((m.mb_rows, m.mb_cols) == (9, 11) for m in masks)
    lost = sum(m.lost_count for m in masks)
    lo, hi = binom.interval(0.99, 30 * 99, 0.05)
    assert lo <= lost <= hi
    assert f"lost_mbs={lost}" in capsys.readouterr().out


def test_conceal_copy_static_is_exact(tmp_path, static):
    assert main(["conceal", "--input", str(static), "--output", str(tmp_path), "--method", "copy"]) == 0
    rows = _rows(tmp_path / "report.csv")
    assert rows and all(r["psnr_db"] == "99.000000" for r in rows)


def test_conceal_bregman_reports_solver(tmp_path, moving):
    masks = tmp_path / "masks"
    masks.mkdir()
    for k in range(1, 4):
        write_mask(LossMask.for_frame((48, 64), 16, [k]), masks / f"mask_{k:04d}.txt")
    assert main([
        "conceal", "--input", str(moving), "--output", str(tmp_path / "o"),
        "--mask-in", str(masks), "--report", str(tmp_path / "r.csv"),
    ]) == 0
    rows = _rows(tmp_path / "r.csv")
    assert len(rows) == 3
    for r in rows:
        assert r["method"] == "bregman"
        assert int(r["outer_iters"]) >= 1
        assert np.isfinite(float(r["final_q"]))
        assert int(r["lost_mbs"]) == 1
    assert len(list((tmp_path / "o" / "bregman").glob("*.pgm"))) == 4


def test_avgn_equals_bregman_without_loss_or_motion(tmp_path, static):
    main(["conceal", "--input", str(static), "--output", str(tmp_path), "--method", "all", "--loss-rate", "0"])
    for k in range(3):
        a = read_pgm(tmp_path / "avgn" / f"frame_{k:04d}.pgm")
        b = read_pgm(tmp_path / "bregman" / f"frame_{k:04d}.pgm")
        np.testing.assert_array_equal(a, b)


def test_conceal_raw_input_and_config(tmp_path):
    frames, _ = make_translation_sequence((32, 48), 3, (1.0, 0.0), seed=3)
    write_yuv420(frames, tmp_path / "seq.yuv")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "avgn", "loss-rate": 0.5, "raw": "48x32", "seed": 4}))
    assert main(["conceal", "--config", str(cfg), "--input", str(tmp_path / "seq.yuv"),
                 "--output", str(tmp_path / "o"), "--method", "copy"]) == 0
    assert (tmp_path / "o" / "copy").is_dir()
    assert not (tmp_path / "o" / "avgn").exists()
    args = parse_args(["conceal", "--config", str(cfg)])
    assert (args.method, args.loss_rate, args.raw, args.seed, args.gamma) == ("avgn", 0.5, (48, 32), 4, 0.8)


def test_evaluate_identical(tmp_path, static):
    d = tmp_path / "c" / "copy"
    _write_seq(d, [read_pgm(p) for p in sorted(static.glob("*.pgm"))])
    assert main(["evaluate", "--input", str(static), "--concealed", str(tmp_path / "c"),
                 "--report", str(tmp_path / "e.csv")]) == 0
    rows = _rows(tmp_path / "e.csv")
    assert len(rows) == 3 and all(r["psnr_db"] == "99.000000" for r in rows)


def test_evaluate_zero_fill_below_copy(tmp_path, static):
    masks = tmp_path / "m"
    masks.mkdir()
    for k in (1, 2):
        write_mask(LossMask.for_frame((48, 64), 16, [5]), masks / f"mask_{k:04d}.txt")
    out = tmp_path / "o"
    main(["conceal", "--input", str(static), "--output", str(out), "--method", "all", "--mask-in", str(masks)])
    args = ["evaluate", "--input", str(static), "--concealed", str(out), "--mask-in", str(masks)]
    assert main(args + ["--report", str(tmp_path / "e1.csv"), "--parallel-eval"]) == 0
    assert main(args + ["--report", str(tmp_path / "e2.csv")]) == 0
    assert (tmp_path / "e1.csv").read_bytes() == (tmp_path / "e2.csv").read_bytes()
    rows = _rows(tmp_path / "e1.csv")
    by = {(r["frame"], r["method"]): float(r["psnr_db"]) for r in rows}
    assert by[("1", "zero-fill")] < by[("1", "copy")] == 99.0
    assert by[("1", "copy")] == 99.0 and by[("0", "zero-fill")] == 99.0
    assert {r["lost_mbs"] for r in rows if r["frame"] != "0"} == {"1"}


def test_errors_are_single_line_and_nonzero(tmp_path, static, capsys):
    assert main(["conceal", "--input", str(static), "--output", str(tmp_path), "--mask-in", str(tmp_path / "nope")]) == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "missing mask" in err
    m = tmp_path / "m"
    m.mkdir()
    for k in range(3):
        write_mask(LossMask.for_frame((48, 64), 16, [0]), m / f"mask_{k:04d}.txt")
    assert main(["conceal", "--input", str(static), "--output", str(tmp_path / "o"), "--mask-in", str(m)]) == 1
    assert "frame 0" in capsys.readouterr().err
    assert main(["evaluate", "--input", str(static), "--concealed", str(tmp_path / "empty")]) == 1


def test_inputs_not_mutated(tmp_path, moving):
    before = _digest(moving)
    main(["conceal", "--input", str(moving), "--output", str(tmp_path), "--method", "avgn"])
    assert _digest(moving) == before
