import json
import subprocess
import sys

import numpy as np
import pytest

from rppg_wmst import io
from rppg_wmst.cli import main
from rppg_wmst.containers import SpatioTemporalMap


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def clip_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("clip")
    assert main(["synth", "--out", str(d), "--hr", "72", "--seed", "3"]) == 0
    return d


def test_synth_writes_all_files(clip_dir):
    for name in ("video.rpgv", "landmarks.json", "bvp.csv", "masks.rpgv", "truth.json"):
        assert (clip_dir / name).is_file()
    assert json.loads((clip_dir / "truth.json").read_text())["hr_bpm"] == 72.0


def test_map_then_hr(capsys, clip_dir, tmp_path):
    m = tmp_path / "w.rpgm"
    code, _, _ = run(capsys, "map", "--video", clip_dir / "video.rpgv", "--landmarks", clip_dir / "landmarks.json",
                     "--kind", "wmst", "--out", m)
    assert code == 0
    code, out, _ = run(capsys, "hr", m)
    assert code == 0
    value, _, res, _ = out.split()
    assert abs(float(value) - 72.0) <= float(res)
    code, out, _ = run(capsys, "snr", m, "--truth", clip_dir / "truth.json")
    assert code == 0 and float(out.split()[0]) > 0


@pytest.mark.parametrize("method", ["chrom", "pos", "ica"])
def test_trad_then_hr(capsys, clip_dir, tmp_path, method):
    t = tmp_path / f"{method}.csv"
    code, _, _ = run(capsys, "trad", "--video", clip_dir / "video.rpgv", "--landmarks", clip_dir / "landmarks.json",
                     "--method", method, "--out", t)
    assert code == 0
    _, out, _ = run(capsys, "hr", t)
    assert abs(float(out.split()[0]) - 72.0) <= 0.88


def test_hhh_and_loss(capsys, clip_dir, tmp_path):
    base = ["--video", clip_dir / "video.rpgv", "--landmarks", clip_dir / "landmarks.json"]
    w, h = tmp_path / "w.rpgm", tmp_path / "h.rpgm"
    assert run(capsys, "map", *base, "--out", w)[0] == 0
    assert run(capsys, "hhh", *base, "--out", h)[0] == 0
    code, out, _ = run(capsys, "loss", "--anchor", w, "--positive", w, "--negative", h)
    assert code == 0 and out.startswith("loss ")
    code, out2, _ = run(capsys, "loss", "--anchor", w, "--positive", w, "--foreign", h, "--hhh", h, "--seed", "2")
    assert code == 0
    assert run(capsys, "loss", "--anchor", w, "--positive", w, "--foreign", h, "--hhh", h, "--seed", "2")[1] == out2
    code, out, _ = run(capsys, "loss", "--mode", "pretrain", "--pred", w, "--target", w)
    assert code == 0 and float(out.split()[1]) == pytest.approx(0.0, abs=1e-9)


def test_compare_manifest_and_plots_are_deterministic(capsys, tmp_path):
    rows = ["clip_id,wmst,mst,ref_hr"]
    rng = np.random.default_rng(0)
    t = np.arange(300) / 30.0
    for i in range(6):
        clean = np.sin(2 * np.pi * 1.2 * t)
        for kind, noise in (("w", 0.2), ("m", 1.0)):
            data = np.broadcast_to((clean + noise * rng.standard_normal(300))[None, :, None], (63, 300, 6)).copy()
            io.write_map(SpatioTemporalMap(data, 30.0), tmp_path / f"{kind}{i}.rpgm")
        rows.append(f"c{i},w{i}.rpgm,m{i}.rpgm,72")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    outs = []
    for k in range(2):
        csv_path, rep, svg = tmp_path / f"r{k}.csv", tmp_path / f"r{k}.txt", tmp_path / f"v{k}.svg"
        code, out, _ = run(capsys, "compare", "--manifest", manifest, "--csv", csv_path, "--report", rep)
        assert code == 0 and "paired t-test" in out and "Wilcoxon signed-rank" in out
        assert run(capsys, "plot", "--kind", "violin", "--input", csv_path, "--columns", "snr_wmst,snr_mst",
                   "--out", svg)[0] == 0
        outs.append((csv_path.read_bytes(), rep.read_bytes(), svg.read_bytes()))
    assert outs[0] == outs[1]


def test_line_plot(capsys, clip_dir, tmp_path):
    svg = tmp_path / "bvp.svg"
    assert run(capsys, "plot", "--kind", "line", "--input", clip_dir / "bvp.csv", "--out", svg)[0] == 0
    assert "<svg" in svg.read_text() and "<polyline" in svg.read_text()


def test_exit_codes(capsys, tmp_path, clip_dir):
    # usage
    with pytest.raises(SystemExit) as exc:
        main(["trad", "--method", "green", "--video", "x", "--landmarks", "y", "--out", "z"])
    assert exc.value.code == 2
    code, _, err = run(capsys, "synth", "--out", tmp_path / "bad", "--hr", "250")
    assert code == 2 and err
    code, _, err = run(capsys, "loss", "--mode", "pretrain", "--pred", "a.csv")
    assert code == 2 and err
    # format
    bad = tmp_path / "bad.rpgm"
    bad.write_bytes(b"not a map")
    code, _, err = run(capsys, "hr", bad)
    assert code == 3 and err
    code, _, err = run(capsys, "hr", tmp_path / "missing.csv")
    assert code == 3 and err
    # numeric: zero in-band power
    flat = tmp_path / "flat.rpgm"
    io.write_map(SpatioTemporalMap(np.full((63, 300, 6), 0.5), 30.0), flat)
    code, out, err = run(capsys, "hr", flat)
    assert code == 4 and err and not out
    empty = tmp_path / "empty.csv"
    empty.write_text("clip_id,snr_wmst\n")
    code, _, err = run(capsys, "plot", "--kind", "violin", "--input", empty, "--out", tmp_path / "e.svg")
    assert code == 4 and err


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "rppg_wmst.cli", "hr", str(tmp_path / "nope.csv")],
                       capture_output=True, text=True)
    assert r.returncode == 3 and r.stderr


@pytest.mark.slow
def test_compare_synthetic_corpus(capsys, tmp_path):
    runs = []
    for k in range(2):
        code, out, _ = run(capsys, "compare", "--synthetic", 6, "--seed", 1, "--csv", tmp_path / f"s{k}.csv")
        assert code == 0
        runs.append((out, (tmp_path / f"s{k}.csv").read_bytes()))
    assert runs[0] == runs[1]
    assert "paired t-test" in runs[0][0] and "Wilcoxon signed-rank" in runs[0][0]
