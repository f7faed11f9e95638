import numpy as np
import pytest

from wdaep.benchmark import (
    BENCHMARK,
    SHIPPED,
    checkpoint_name,
    load_pretrained,
    pretrained_path,
    run_sweep,
    sweep_csv,
)
from wdaep.errors import ConfigError, DataError


def test_checkpoint_names():
    assert checkpoint_name() == "w16_b1_s20_haar"
    assert checkpoint_name(8, 2, 25 / 255, "db4") == "w8_b2_s25_db4"
    assert checkpoint_name(sigma_eta=12.5 / 255) == "w16_b1_s12.5_haar"


@pytest.mark.parametrize("width,blocks,level,wavelet", SHIPPED)
def test_shipped_checkpoints_match_their_names(width, blocks, level, wavelet):
    net = load_pretrained(checkpoint_name(width, blocks, level / 255, wavelet))
    assert net.arch.width == width and net.arch.blocks == blocks
    assert net.meta["wavelet"] == wavelet
    assert net.meta["sigma_eta"] == pytest.approx(level / 255)
    hist = net.meta["loss_history"]
    assert hist[-1] < hist[0]


def test_missing_checkpoint(tmp_path):
    with pytest.raises(DataError, match="w32_b1_s20_haar"):
        pretrained_path("w32_b1_s20_haar")
    with pytest.raises(DataError):
        pretrained_path("w16_b1_s20_haar", root=tmp_path)


def test_problem_is_fixed():
    a, b = BENCHMARK.problem(), BENCHMARK.problem()
    for x, y in zip(a, b):
        np.testing.assert_array_equal(np.asarray(getattr(x, "samples", x)), np.asarray(getattr(y, "samples", y)))
    assert abs(a[1].achieved_R - 4) <= 0.2


def test_sweep_rows_and_table(tmp_path):
    rows = run_sweep("lambda", ["0.01", "1"], bench=BENCHMARK.__class__(iterations=2), trace_dir=tmp_path,
                     labels=["small", "large"])
    assert [r.value for r in rows] == ["small", "large"]
    assert all(r.result.iterations_run == 2 for r in rows)
    table = sweep_csv("lambda", rows).splitlines()
    assert table[0] == "lambda,psnr,ssim,hfen" and table[1].startswith("small,")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["trace_lambda_large.csv", "trace_lambda_small.csv"]


def test_sweep_contracts():
    with pytest.raises(ConfigError):
        run_sweep("depth", [1])
    with pytest.raises(ConfigError):
        run_sweep("lambda", [])
    with pytest.raises(ConfigError):
        run_sweep("lambda", [0.1], labels=["a", "b"])
