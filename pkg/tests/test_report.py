import csv
import math

import numpy as np

from awsrn import analysis as A
from awsrn import model as M
from awsrn import report as R

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def small_report():
    cfg = M.ModelConfig(scale=2, n_lfb=1, n_awru=1, c_feat=4, c_wide=8,
                        awms_kernels=(3, 5))
    return A.complexity_report(cfg, 64, 64)


def test_complexity_csv_lists_layers_and_total(tmp_path):
    rep = small_report()
    path = tmp_path / "complexity.csv"
    R.write_complexity_csv(rep, path)
    rows = read_csv(path)
    assert rows[0] == ["layer", "params", "multi_adds"]
    assert [r[0] for r in rows[1:6]] == [
        "head", "lfb0.ru0.conv1", "lfb0.ru0.conv2", "lfb0.fuse", "rec.k3",
    ]
    assert rows[-1] == ["total", str(rep.total_params), str(rep.multi_adds)]
    assert sum(int(r[1]) for r in rows[1:-1]) == rep.total_params


def test_complexity_figure_renders(tmp_path):
    path = tmp_path / "complexity.png"
    R.plot_complexity(small_report(), path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_weights_csv_has_one_row_per_weight_group(tmp_path):
    cfg = M.ModelConfig(scale=2, n_lfb=2, n_awru=2, c_feat=4, c_wide=8,
                        awms_kernels=(3, 5))
    rep = A.inspect_weights(M.build(cfg, seed=0))
    path = tmp_path / "weights.csv"
    R.write_weights_csv(rep, path)
    rows = read_csv(path)
    kinds = [r[0] for r in rows[1:]]
    assert kinds.count("unit") == 4
    assert kinds.count("block") == 2
    assert kinds.count("branch") == 2


def test_weights_figure_renders(tmp_path):
    cfg = M.ModelConfig(scale=2, n_lfb=2, n_awru=2, c_feat=4, c_wide=8,
                        awms_kernels=(3, 5))
    rep = A.inspect_weights(M.build(cfg, seed=0))
    path = tmp_path / "weights.png"
    R.plot_weights(rep, path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_weights_figure_renders_without_branches(tmp_path):
    cfg = M.ModelConfig(scale=2, n_lfb=1, n_awru=1, c_feat=4, c_wide=8,
                        use_awms=False)
    rep = A.inspect_weights(M.build(cfg, seed=0))
    path = tmp_path / "weights.png"
    R.plot_weights(rep, path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_loss_curve_with_moving_average(tmp_path):
    rng = np.random.default_rng(0)
    trace = list(0.5 * np.exp(-np.arange(300) / 80) + 0.01 * rng.uniform(size=300))
    path = tmp_path / "loss.png"
    R.plot_loss_curve(trace, path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_loss_curve_with_short_trace(tmp_path):
    path = tmp_path / "loss.png"
    R.plot_loss_curve([0.5, 0.4, 0.3], path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_eval_csv_keeps_notes(tmp_path):
    rows = [
        R.EvalRow("a", 30.0, 0.9, 28.0, 0.85),
        R.EvalRow("b", math.nan, math.nan, math.nan, math.nan,
                  note="shape-error: too small"),
    ]
    path = tmp_path / "eval.csv"
    R.write_eval_csv(rows, path)
    parsed = read_csv(path)
    assert parsed[1][0] == "a"
    assert parsed[2][5] == "shape-error: too small"


def test_eval_figure_renders(tmp_path):
    rows = [
        R.EvalRow("a", 30.0, 0.9, 28.0, 0.85),
        R.EvalRow("b", 31.0, 0.92, 29.0, 0.88),
    ]
    path = tmp_path / "eval.png"
    R.plot_eval(rows, path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_eval_figure_renders_with_no_plottable_rows(tmp_path):
    rows = [
        R.EvalRow("a", math.nan, math.nan, math.nan, math.nan, note="failed"),
        R.EvalRow("b", math.inf, 1.0, 40.0, 0.99),
    ]
    path = tmp_path / "eval.png"
    R.plot_eval(rows, path)
    assert path.read_bytes()[:8] == PNG_MAGIC
