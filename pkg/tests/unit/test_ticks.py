import pytest
import logging
logger = logging.getLogger("execflow")

import sys
sys.path.append('../../execflow/')
sys.path.append('../../')
sys.path.append('..')

from execflow.ticks import ColumnSpec, Tick, TickClock, merge_streams, read_tick_frame, read_ticks, surrogate_stream
from testing_utils import *


def test_column_spec_parse():
    spec = ColumnSpec.parse("9:1:2:3")
    assert spec == ColumnSpec(9, 1, 2, 3, None)
    assert str(spec) == "9:1:2:3"

    spec = ColumnSpec.parse("5:0:1:2:4")
    assert spec.symbol == 4
    assert str(spec) == "5:0:1:2:4"


@pytest.mark.parametrize("text", ["9:1:2", "9:1:2:3:4:5", "a:b:c:d", "3:1:2:3", "4:-1:2:3"])
def test_column_spec_rejects_invalid(text):
    with pytest.raises(ValueError):
        ColumnSpec.parse(text)


def test_read_ticks(tmp_path):
    ticks = ticks_from_arrays([1.0, 2.0, 3.5], [10.0, 10.5, 10.25], [100, 200, 50])
    path = write_tick_file(tmp_path / "ticks.tsv", ticks)

    read = list(read_ticks(path, "9:1:2:3"))
    assert read == ticks, "Ticks should come back in file order and unchanged."


def test_read_gzip_ticks(tmp_path):
    ticks = ticks_from_arrays([1.0, 2.0], [10.0, 11.0], [1, 2])
    path = write_tick_file(tmp_path / "ticks.dat", ticks, compress=True)

    assert list(read_ticks(path, "9:1:2:3")) == ticks, "Gzip input is detected by its magic bytes."


def test_reader_counters(tmp_path):
    ticks = ticks_from_arrays([1.0, 2.0, 3.0], [10.0, 10.5, 10.25], [100, 200, 50])
    extra = ["x\t1\t2",                                            # wrong column count
             "\t".join(["x", "4000000000", "abc", "1"] + ["x"] * 5),  # malformed price
             "\t".join(["x", "5000000000", "-1", "1"] + ["x"] * 5),   # non-positive price
             "\t".join(["x", "2500000000", "11", "7"] + ["x"] * 5),   # time going back
             "",
             "# a comment"]
    path = write_tick_file(tmp_path / "ticks.tsv", ticks, extra_lines=extra)

    reader = read_ticks(path, "9:1:2:3")
    read = list(reader)

    assert len(read) == 4
    assert read[-1].t == 3 * NS, "A time going backwards is clamped to the previous time."
    assert reader.counters() == {"data_rows": 7, "emitted": 4, "skipped_columns": 1,
                                 "skipped_malformed": 2, "clamped": 1}
    assert reader.skipped == 3


def test_read_symbol_column(tmp_path):
    ticks = ticks_from_arrays([1.0, 2.0], [10.0, 20.0], [1, 2])
    ticks = [ticks[0]._replace(symbol="AAA"), ticks[1]._replace(symbol="BBB")]
    path = write_tick_file(tmp_path / "merged.tsv", ticks, total=5, columns=(0, 1, 2), symbol_column=4)

    read = list(read_ticks(path, "5:0:1:2:4"))
    assert [tick.symbol for tick in read] == ["AAA", "BBB"]


def test_read_tick_frame(tick_file, random_session):
    df = read_tick_frame(tick_file, "9:1:2:3")
    assert list(df.columns) == ["t", "price", "size"], "Without a symbol column the frame has no symbol."
    assert len(df) == len(random_session)
    assert df["price"].iloc[0] == pytest.approx(random_session[0].price)


def test_missing_file_raises():
    with pytest.raises(OSError):
        list(read_ticks("/nonexistent/ticks.tsv", "9:1:2:3"))


def test_merge_streams_orders_by_time():
    a = ticks_from_arrays([1.0, 3.0, 5.0], [1, 1, 1], [1, 1, 1])
    b = ticks_from_arrays([2.0, 3.0, 4.0], [2, 2, 2], [1, 1, 1])

    merged = list(merge_streams({"A": a, "B": b}))
    assert [tick.symbol for tick in merged] == ["A", "B", "A", "B", "B", "A"], "Ties keep the symbol order."
    assert [tick.t for tick in merged] == sorted(tick.t for tick in merged)


def test_surrogate_stream():
    flat = [increment.da for _, increment in surrogate_stream(ticks_from_arrays([1, 2, 3], [100.0, 100.0, 100.0], [1, 1, 1]))]
    assert flat == [0.0, 0.0, 0.0]

    moving = [increment.da for _, increment in surrogate_stream(ticks_from_arrays([1, 2, 3], [100.0, 101.0, 99.5], [1, 1, 1]))]
    assert moving == pytest.approx([0.0, 1.0, 1.5])

    # a merged stream takes the price changes within each symbol
    a = ticks_from_arrays([1.0, 3.0], [10.0, 12.0], [1, 1])
    b = ticks_from_arrays([2.0, 4.0], [50.0, 49.0], [1, 1])
    pairs = list(surrogate_stream(merge_streams({"A": a, "B": b})))
    assert [tick.symbol for tick, _ in pairs] == ["A", "B", "A", "B"]
    assert [increment.da for _, increment in pairs] == pytest.approx([0.0, 0.0, 2.0, 1.0])


def test_tick_clock():
    clock = TickClock()
    assert clock.seconds(5 * NS) == 0.0, "The first tick defines the origin."
    assert clock.seconds(7 * NS + NS // 2) == pytest.approx(2.5)

    assert TickClock(origin_ns=0).seconds(3 * NS) == pytest.approx(3.0)
