"""Tests for tensor dumps, config parsing, CSV output, and the CLI."""

import numpy as np
import pytest

from energyfuse.cli import main
from energyfuse.config import CONFIG_KEYS, RunConfig, load_config, parse_config_text
from energyfuse.metrics import MetricsRow
from energyfuse.numeric import ContractError
from energyfuse.rng import RngState
from energyfuse.sweep import (
    metrics_csv_rows,
    metrics_header,
    sweep,
    write_metrics_csv,
)
from energyfuse.tensor_io import dump_tensor, format_value, load_tensor

TINY = [
    "--t1", "2", "--t2", "1", "--h", "5", "--w", "5", "--k", "3",
    "--channels", "4", "--n_scenes", "2",
]


# ---------------------------------------------------------------- tensors


def test_tensor_round_trip_is_exact(tmp_path):
    rng = RngState(0, (1,))
    a = rng.normal(7, 11, 3.0)
    a[0, 0] = 1e-300
    a[1, 1] = -1e300
    a[2, 2] = 2.0 / 3.0
    path = str(tmp_path / "a.txt")
    dump_tensor(a, path)
    b = load_tensor(path)
    assert b.dtype == np.float64
    assert np.array_equal(a, b)


def test_tensor_dump_accepts_vectors(tmp_path):
    path = str(tmp_path / "v.txt")
    dump_tensor(np.array([1.0, 2.0, 3.0]), path)
    v = load_tensor(path)
    assert v.shape == (3, 1)


@pytest.mark.parametrize(
    "content, line",
    [
        ("", 1),
        ("3\n1.0\n2.0\n3.0\n", 1),
        ("a b\n1.0\n", 1),
        ("0 2\n", 1),
        ("2 1\n1.0\nbogus\n", 3),
        ("1 2\n1.0\n2.0\n3.0\n", 4),
        ("2 2\n1.0\n2.0\n3.0\n", 4),
    ],
)
def test_tensor_load_errors_name_the_line(tmp_path, content, line):
    path = tmp_path / "bad.txt"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(ContractError, match=rf"line {line}\)"):
        load_tensor(str(path))


def test_format_value_uses_17_significant_digits():
    assert format_value(1.0 / 3.0) == "0.33333333333333331"
    assert format_value(1.0) == "1"
    assert format_value(float("nan")) == "nan"


# ----------------------------------------------------------------- config


def test_config_text_overrides_defaults():
    cfg = parse_config_text("t1 = 3\n\n# comment\nlr = 0.25\nscheme = gated\n")
    assert (cfg.t1, cfg.lr, cfg.scheme) == (3, 0.25, "gated")
    assert cfg.t2 == RunConfig().t2


def test_config_unknown_key_names_the_line():
    with pytest.raises(ContractError, match="line 2.*learning_rate"):
        parse_config_text("t1 = 3\nlearning_rate = 0.1\n")


def test_config_missing_equals_names_the_line():
    with pytest.raises(ContractError, match="line 3"):
        parse_config_text("t1 = 3\n# fine\njust words\n")


def test_config_bad_value_rejected():
    with pytest.raises(ContractError, match="bad value for t1"):
        parse_config_text("t1 = soon\n")


def test_config_file_layering(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("lr = 0.125\nk = 5\n", encoding="utf-8")
    base = RunConfig(t1=9)
    cfg = load_config(str(path), base)
    assert (cfg.lr, cfg.k, cfg.t1) == (0.125, 5, 9)


# -------------------------------------------------------------------- CSV


def test_metrics_header_layout():
    assert metrics_header(3) == (
        ["run_id"]
        + list(CONFIG_KEYS)
        + ["iou_class_0", "iou_class_1", "iou_class_2"]
        + ["miou", "depth_mae", "mean_energy_plain", "mean_energy_fused"]
    )
    assert CONFIG_KEYS == (
        "t1", "t2", "lr", "lr_phase2_mult", "alpha", "beta", "gamma",
        "steps", "scheme", "pseudo_threshold", "seed", "h", "w", "k",
        "channels", "n_scenes", "feature_shift", "feature_scale",
        "noise_sd", "depth_noise_sd", "out_dir",
    )


def test_metrics_rows_print_floats_at_full_precision():
    from energyfuse.config import config_echo

    row = MetricsRow(
        iou=[1.0 / 3.0, 0.5],
        miou=5.0 / 12.0,
        depth_mae=0.1,
        mean_energy_plain=-1.25,
        mean_energy_fused=-1.5,
        run_id="r0",
    )
    row.config = config_echo(RunConfig(k=2, lr=0.1))
    header, line = metrics_csv_rows([row], 2)
    cells = line.split(",")
    named = dict(zip(header.split(","), cells))
    assert named["run_id"] == "r0"
    assert named["lr"] == "0.10000000000000001"
    assert named["t1"] == "150"
    assert named["scheme"] == "add"
    assert named["iou_class_0"] == "0.33333333333333331"
    assert named["miou"] == "0.41666666666666669"
    assert named["mean_energy_plain"] == "-1.25"


def test_sweep_rows_ordered_and_complete():
    base = RunConfig(t1=2, t2=1, h=5, w=5, k=3, channels=4, n_scenes=2)
    rows = sweep(base, "gamma", [1.0, 0.5], [1, 0])
    assert [r.run_id for r in rows] == [
        "gamma=0.5_seed=0",
        "gamma=0.5_seed=1",
        "gamma=1_seed=0",
        "gamma=1_seed=1",
    ]
    for row in rows:
        assert np.isfinite(row.miou)
        assert row.config["out_dir"] == base.out_dir


def test_sweep_rerun_writes_identical_bytes(tmp_path):
    base = RunConfig(t1=2, t2=1, h=5, w=5, k=3, channels=4, n_scenes=2)
    blobs = []
    for name in ("a.csv", "b.csv"):
        rows = sweep(base, "steps", [0.0, 1.0], [0])
        path = tmp_path / name
        write_metrics_csv(rows, base.k, str(path))
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]
    assert blobs[0].decode().startswith("run_id,t1,")


def test_sweep_keeps_going_after_a_failed_run(tmp_path, capsys):
    # an absurd learning rate makes every run abort; each failure must
    # land as a nan row instead of killing the sweep
    base = RunConfig(t1=4, t2=0, lr=1e300, h=5, w=5, k=3, channels=4, n_scenes=2)
    with np.errstate(over="ignore", invalid="ignore"):
        rows = sweep(base, "gamma", [0.0, 1.0], [0])
    assert len(rows) == 2
    for row in rows:
        assert np.isnan(row.miou)
        assert all(np.isnan(v) for v in row.iou)
    err = capsys.readouterr().err
    assert "failed" in err
    path = tmp_path / "m.csv"
    write_metrics_csv(rows, base.k, str(path))
    body = path.read_text(encoding="utf-8").splitlines()
    assert len(body) == 3
    assert ",nan," in body[1]


def test_sweep_rejects_unknown_axis():
    with pytest.raises(ContractError, match="axis"):
        sweep(RunConfig(), "lr", [0.1], [0])


# -------------------------------------------------------------------- CLI


def test_cli_requires_a_subcommand():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_cli_train_writes_both_csv_files(tmp_path, capsys):
    out = str(tmp_path / "run")
    code = main(["train", *TINY, "--out_dir", out])
    assert code == 0
    metrics = (tmp_path / "run" / "metrics.csv").read_text(encoding="utf-8")
    trace = (tmp_path / "run" / "loss_trace.csv").read_text(encoding="utf-8")
    lines = metrics.splitlines()
    assert len(lines) == 2
    assert lines[0].split(",")[:2] == ["run_id", "t1"]
    trace_lines = trace.splitlines()
    assert trace_lines[0] == "step,phase,seg_total,dep_total,supervised,rfa,overall"
    assert len(trace_lines) == 1 + 2 + 1
    out_text = capsys.readouterr().out
    assert "miou:" in out_text


def test_cli_eval_prints_metrics(capsys):
    code = main(["eval", *TINY])
    assert code == 0
    out = capsys.readouterr().out
    assert "miou:" in out
    assert "iou_class_2:" in out
    assert "mean_energy_fused:" in out


def test_cli_flags_override_config_file(tmp_path):
    cfg_path = tmp_path / "base.cfg"
    cfg_path.write_text("lr = 0.01220703125\nt1 = 9\n", encoding="utf-8")
    out = str(tmp_path / "run")
    code = main([
        "train", "--config", str(cfg_path), *TINY, "--out_dir", out,
    ])
    assert code == 0
    header, row = (tmp_path / "run" / "metrics.csv").read_text().splitlines()
    named = dict(zip(header.split(","), row.split(",")))
    assert named["lr"] == "0.01220703125"  # from the file
    assert named["t1"] == "2"  # flag wins over the file's 9


def test_cli_sweep_end_to_end(tmp_path):
    out = str(tmp_path / "sw")
    args = [
        "sweep", *TINY, "--out_dir", out,
        "--axis", "beta", "--values", "0,1", "--seeds", "0,1",
    ]
    assert main(args) == 0
    body = (tmp_path / "sw" / "metrics.csv").read_bytes()
    assert len(body.decode().splitlines()) == 5
    assert main(args) == 0
    assert (tmp_path / "sw" / "metrics.csv").read_bytes() == body


def test_cli_bad_config_value_exits_2(capsys):
    code = main(["train", *TINY, "--lr", "-1"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_cli_unknown_config_key_exits_2(tmp_path, capsys):
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text("speed = 11\n", encoding="utf-8")
    code = main(["train", "--config", str(cfg_path)])
    assert code == 2
    assert "line 1" in capsys.readouterr().err


def test_cli_demo_hopfield_energies_decrease(capsys):
    assert main(["demo-hopfield", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    energies = [
        float(line.split("energy")[1].split()[0])
        for line in out.splitlines()
        if line.strip().startswith("iter")
    ]
    assert len(energies) == 10
    assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))
    assert "closest stored pattern:" in out.splitlines()[-1]


def test_cli_gen_data_dumps_loadable_scenes(tmp_path, capsys):
    out = tmp_path / "data"
    assert main(["gen-data", *TINY, "--out_dir", str(out)]) == 0
    stems = (out / "manifest.txt").read_text(encoding="utf-8").split()
    assert len(stems) == 4  # two source + two target scenes
    for stem in stems:
        feats = load_tensor(str(out / f"{stem}_features.txt"))
        depth = load_tensor(str(out / f"{stem}_depth.txt"))
        labels = load_tensor(str(out / f"{stem}_labels.txt"))
        assert feats.shape == (4, 25)
        assert depth.shape == (1, 25)
        assert labels.shape == (1, 25)
        assert labels.min() >= 0 and labels.max() < 3
        assert np.array_equal(labels, np.round(labels))
    assert "wrote 4 scenes" in capsys.readouterr().out
