import pytest
import logging
logger = logging.getLogger("execflow")

import sys
sys.path.append('../../execflow/')
sys.path.append('../../')
sys.path.append('..')

import json
import os

import numpy as np
import pandas as pd

from execflow.indicators import IndicatorFrame
from execflow.reporting import FrameExporter, FrameWriter, emit_plotdata, plot_columns, render_report, scale_into
from testing_utils import *


def _frame(t, price, lambda_ih=None, ready=True):
    frame = IndicatorFrame(t, price, 10.0)
    frame.set_flow("pFV", {"lambda_IH": lambda_ih, "ready": ready})
    return frame


def test_frame_writer(tmp_path):
    path = tmp_path / "out" / "frames.dat"
    columns = ["t", "P", "size", "pFV.lambda_IH", "pFV.ready"]

    with FrameWriter(str(path), columns, header_lines=["execflow test", "config {}"]) as writer:
        writer.write(_frame(5 * NS, 100.25, 3.5))
        writer.write(_frame(6 * NS, 100.5, None, ready=False))
        writer.write(_frame(7 * NS, 100.75, float("nan"), ready=False))

    assert writer.rows == 3
    header, names, rows = read_output(path)
    assert header == ["execflow test", "config {}"]
    assert names == columns
    assert rows[0] == [str(5 * NS), "100.25", "10", "3.5", "1"]
    assert rows[1][3] == "NA", "Fields that were not computed are written as NA."
    assert rows[2][3] == "NA"
    assert rows[2][4] == "0"


def test_frame_writer_custom_na(tmp_path):
    path = tmp_path / "frames.dat"
    with FrameWriter(str(path), ["t", "pFV.lambda_IH"], na="-", float_format=".3f") as writer:
        writer.write(_frame(NS, 1.0, None))
        writer.write(_frame(2 * NS, 1.0, 2.0))

    _, _, rows = read_output(path)
    assert rows == [[str(NS), "-"], [str(2 * NS), "2.000"]]


def test_plot_columns():
    columns = plot_columns()
    assert len(columns) == 12
    assert columns[:2] == ["t", "P"]
    assert "pFV.lambda_IH" in columns and "pFA.PEQV_from_M" in columns


def test_scale_into():
    values = pd.Series([1.0, 2.0, 3.0])
    reference = pd.Series([100.0, 110.0])
    assert list(scale_into(values, reference)) == pytest.approx([100.0, 105.0, 110.0])

    flat = scale_into(pd.Series([4.0, 4.0]), reference)
    assert list(flat) == pytest.approx([100.0, 100.0])


def test_emit_plotdata(tmp_path):
    frames = pd.DataFrame({"t": [1, 2, 3], "P": [10.0, 12.0, 11.0],
                           "pFV.lambda_IH": [0.5, 1.0, np.nan], "pFA.lambda_IH": [2.0, 4.0, 3.0],
                           "pFV.pv_M": [10.0, 11.0, 11.5], "other": [0, 0, 0]})
    path = tmp_path / "plot.dat"

    data = emit_plotdata(frames, str(path), scale_lambda=True)
    assert list(data.columns) == plot_columns()
    assert data["pFA.lambda_IH"].tolist() == pytest.approx([10.0, 12.0, 11.0])
    assert data["pFV.lambda_IH"].iloc[0] == pytest.approx(10.0)
    assert data["pFV.lambda_IH"].iloc[1] == pytest.approx(12.0)
    assert pd.isna(data["pFV.lambda_IH"].iloc[2])
    assert data["pFA.I.wH_squared"].isna().all()

    text = path.read_text(encoding="utf-8").splitlines()
    assert text[0].split("\t") == plot_columns()
    assert "NA" in text[3].split("\t")


def test_emit_plotdata_unscaled(tmp_path):
    frames = pd.DataFrame({"t": [1, 2], "P": [10.0, 12.0], "pFV.lambda_IH": [0.5, 1.0]})
    data = emit_plotdata(frames, str(tmp_path / "plot.dat"), scale_lambda=False)
    assert data["pFV.lambda_IH"].tolist() == [0.5, 1.0]


def test_emit_plotdata_shifts_the_scalp_price(tmp_path):
    frames = pd.DataFrame({"t": [1, 2, 3, 4], "P": [10.0, 11.0, 20.0, 12.0],
                           "pFV.scalp": [0.0, 1.0, 0.0, 2.0], "pFA.scalp": [0.0, 0.0, 0.0, 0.0]})
    data = emit_plotdata(frames, str(tmp_path / "plot.dat"))
    assert data["pFV.scalp"].tolist() == pytest.approx([10.0, 11.0, 10.0, 12.0])
    assert data["pFA.scalp"].tolist() == pytest.approx([12.0] * 4)

    # per symbol, each curve ends at that symbol's last price
    frames["symbol"] = ["A", "B", "B", "A"]
    data = emit_plotdata(frames, str(tmp_path / "plot.dat"))
    assert data["pFV.scalp"].tolist() == pytest.approx([10.0, 21.0, 20.0, 12.0])


def test_exporter_formats(tmp_path):
    exporter = FrameExporter(str(tmp_path))

    path = exporter.export("run", {"n": 4}, "config", "json")
    assert path == os.path.join(str(tmp_path), "config", "run.json")
    with open(path, "r", encoding="utf-8") as f:
        assert json.load(f) == {"n": 4}

    path = exporter.export("run.report", "# report\n", None, "md")
    assert path == os.path.join(str(tmp_path), "run.report.md")
    with open(path, "r", encoding="utf-8") as f:
        assert f.read() == "# report\n"


def test_exporter_invalid_input(tmp_path):
    exporter = FrameExporter(str(tmp_path))

    path = exporter.export("a/b:c", "text")
    assert os.path.basename(path) == "a-b-c.txt"

    with pytest.raises(ValueError):
        exporter.export("x", "not a dict", target_format="json")
    with pytest.raises(ValueError):
        exporter.export("x", {"a": 1}, target_format="txt")
    with pytest.raises(ValueError):
        exporter.export("x", "text", target_format="tsv")
    with pytest.raises(ValueError):
        exporter.export("x", ["not", "a", "dict"], target_format="json")
    with pytest.raises(ValueError):
        exporter.export("x", "text", target_format="xlsx")


def test_render_report():
    counters = {"input": {"data_rows": 10, "emitted": 9},
                "engines": {"IBM": {"frames": 9, "not_ready": {"V": 7, "A": 8},
                                    "variant_failures": {"RightProduct": 2}}}}
    report = render_report({"n": 4, "measure": "Laguerre", "json_serializable_class_name": "RunConfig"}, counters, 9)

    assert report.startswith("# execflow run report")
    assert "| n | 4 |" in report
    assert "| measure | Laguerre |" in report
    assert "json_serializable_class_name" not in report
    assert "| data_rows | 10 |" in report
    assert "Rows written: 9" in report
    assert "### IBM" in report
    assert "not ready (V): 7" in report
    assert "variant not ready, RightProduct: 2" in report
    assert "No ticks were processed." not in report


def test_render_report_without_ticks():
    report = render_report({"n": 2}, {"input": {}, "engines": {}}, 0)
    assert "No ticks were processed." in report
