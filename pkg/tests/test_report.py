import math

import pytest

from slnl.report import ReportFormatError, RunReport, Table, load_report, parse_report, same_report


def sample_report():
    r = RunReport("train", 42, wall_time=1.25, config={"model.m1": "2", "attention.variant": "rfa"})
    r.metrics.update(accuracy=0.1 + 0.2, loss=float("nan"), tiny=1e-300)
    r.checks.update({"dft.round_trip": True, "gradients.toy_model": False})
    t = r.table("epochs", ["epoch", "lr", "train_loss"])
    t.add(1, 0.003, 1 / 3)
    t.add(2, 0.003 * 0.98, 2 / 7)
    r.table("empty", ["a"])
    return r


def test_round_trip_is_lossless(tmp_path):
    r = sample_report()
    back = parse_report(r.to_text())
    assert same_report(r, back)
    assert back.metrics["accuracy"] == 0.1 + 0.2
    assert math.isnan(back.metrics["loss"])
    assert back.tables["epochs"].floats("train_loss") == [1 / 3, 2 / 7]
    assert not back.passed
    path = tmp_path / "r.report"
    r.save(path)
    assert same_report(load_report(path), r)


def test_same_report_notices_differences():
    a, b = sample_report(), sample_report()
    b.metrics["accuracy"] = 0.5
    assert not same_report(a, b)


def test_table_rejects_ragged_rows_and_tabs():
    t = Table(["a", "b"])
    with pytest.raises(ValueError):
        t.add(1)
    with pytest.raises(ValueError):
        t.add("x\ty", 2)


@pytest.mark.parametrize("text", [
    "stray\n[meta]\ncommand = x\nseed = 0\n",
    "[meta]\ncommand = x\n",
    "[meta]\ncommand = x\nseed = zero\n",
    "[bogus]\n",
    "[meta]\ncommand = x\nseed = 0\n[checks]\nc = maybe\n",
    "[meta]\ncommand = x\nseed = 0\n[table t]\na\tb\n1\n",
    "[meta]\ncommand x\n",
])
def test_malformed_reports_raise(text):
    with pytest.raises(ReportFormatError):
        parse_report(text)
