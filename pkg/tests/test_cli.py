import json
import os

import numpy as np
import pytest

from rttbench.cli import main
from rttbench.dataset import read_dataset
from rttbench.labeling import Threshold

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def cfg_file(tmp_path, **overrides):
    doc = {"seed": 42, "data_dir": str(tmp_path / "data"),
           "report_dir": str(tmp_path / "reports"),
           "frames": {"baseline": 400, "trained": 60,
                      "unstressed": 120, "untrained_rows": 80}}
    doc.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_bad_config_exits_2(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"frames": {"trained": -1}}))
    assert main(["--config", str(path), "baseline"]) == 2


def test_evaluate_before_train_exits_3(tmp_path, capsys):
    assert main(["--config", cfg_file(tmp_path), "evaluate"]) == 3
    err = capsys.readouterr().err
    assert "train" in err


def test_generate_before_baseline_exits_3(tmp_path, capsys):
    assert main(["--config", cfg_file(tmp_path), "generate"]) == 3
    assert "baseline" in capsys.readouterr().err


def test_baseline_below_minimum_frames(tmp_path, capsys):
    cfg = cfg_file(tmp_path, frames={"baseline": 100, "trained": 60,
                                     "unstressed": 120, "untrained_rows": 80})
    assert main(["--config", cfg, "baseline"]) == 2
    assert "300" in capsys.readouterr().err


def test_baseline_writes_threshold_and_table(tmp_path, capsys):
    cfg = cfg_file(tmp_path)
    assert main(["--config", cfg, "baseline"]) == 0
    out = capsys.readouterr().out
    assert "1st run" in out and "Overall" in out
    assert "Average over full duration" in out
    th = Threshold.from_json((tmp_path / "data" / "threshold.json").read_text())
    assert th.cutoff == pytest.approx(th.baseline_mean + 3 * th.baseline_frame_std)
    assert th.baseline_frame_count == 400


def test_generate_emits_19_datasets(tmp_path, capsys):
    cfg = cfg_file(tmp_path)
    assert main(["--config", cfg, "baseline"]) == 0
    assert main(["--config", cfg, "generate"]) == 0
    files = sorted(p for p in os.listdir(tmp_path / "data")
                   if p.startswith("dataset_"))
    assert len(files) == 19
    ds = read_dataset(tmp_path / "data" / "dataset_udp-high.csv")
    assert ds.n_rows == 60


def test_calibrate_passes_with_default_catalog(tmp_path, capsys):
    cfg = cfg_file(tmp_path)
    assert main(["--config", cfg, "baseline"]) == 0
    assert main(["--config", cfg, "calibrate"]) == 0
    assert (tmp_path / "data" / "profiles.json").exists()
    out = capsys.readouterr().out
    assert out.count("purity") >= 18


@pytest.mark.slow
def test_small_pipeline_end_to_end(tmp_path, capsys):
    cfg = cfg_file(tmp_path)
    for command in (["baseline"], ["generate"],
                    ["train", "--models", "dt,gnb"], ["evaluate"],
                    ["report"]):
        assert main(["--config", cfg] + command) == 0, command
    reports = tmp_path / "reports"
    for name in ("report.json", "trained_accuracy.csv", "f1_untrained.csv",
                 "f1_categories.png"):
        assert (reports / name).exists()
    doc = json.loads((reports / "report.json").read_text())
    assert set(doc["categories"]) == {"dt", "gnb"}


def test_ingest_from_golden_captures(tmp_path, capsys):
    cfg = cfg_file(tmp_path)
    assert main(["--config", cfg, "baseline"]) == 0
    # client RTT log aligned with the tool timestamps (interval 2s => 4
    # vmstat records spanning 8s => one full 6s frame)
    rtt = tmp_path / "rtt.csv"
    rows = ["timestamp,rtt_ms"]
    rng = np.random.default_rng(0)
    for i in range(60):
        rows.append(f"{i * 0.1:.3f},{4.5 + rng.uniform(-0.5, 0.5):.4f}")
    rtt.write_text("\n".join(rows) + "\n")
    out_path = tmp_path / "ingested.csv"
    code = main(["--config", cfg, "ingest",
                 "--vmstat", os.path.join(GOLDEN, "vmstat_plain.txt"),
                 "--iostat", os.path.join(GOLDEN, "iostat_two_intervals.txt"),
                 "--netstat", os.path.join(GOLDEN, "netstat_two_snapshots.txt"),
                 "--rtt", str(rtt), "--kind", "none", "--level", "none",
                 "--out", str(out_path)])
    assert code == 0
    ds = read_dataset(out_path)
    assert ds.n_rows >= 1
    assert set(ds.kinds) == {"none"}
    assert np.all(ds.labels == 0)          # ~4.5ms is well below the cutoff


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = cfg_file(tmp_path)
    assert main(["--config", cfg, "--seed", "7", "baseline"]) == 0
    first = (tmp_path / "data" / "threshold.json").read_text()
    assert main(["--config", cfg, "--seed", "7", "baseline"]) == 0
    assert (tmp_path / "data" / "threshold.json").read_text() == first
    assert main(["--config", cfg, "--seed", "8", "baseline"]) == 0
    assert (tmp_path / "data" / "threshold.json").read_text() != first
