"""
Tick files: reading, validation, merging of per-symbol streams and the surrogate volume.

Input files are tab-separated text, optionally gzip-compressed, with one
transaction per row. A column spec such as "9:1:2:3" says that rows have 9
columns and that columns 1, 2 and 3 (base 0) hold the time in nanoseconds
since midnight, the execution price and the number of shares traded. A fifth
entry names a symbol column for merged multi-asset files.
"""
import gzip
import heapq
import logging
from typing import Iterator, NamedTuple, Optional

import pandas as pd

from execflow import utils

logger = logging.getLogger("execflow")

config = utils.read_config_file()

default = {}
default["columns"] = config["Ingest"].get("COLUMNS", "9:1:2:3")

NANOSECONDS = 1e9


class Tick(NamedTuple):
    t: int
    price: float
    size: float
    symbol: Optional[str] = None


class ColumnSpec(NamedTuple):
    total: int
    t: int
    p: int
    v: int
    symbol: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> "ColumnSpec":
        """
        Parses "total:t:p:v[:symbol]".
        """
        try:
            parts = [int(part) for part in str(text).split(":")]
        except ValueError:
            raise ValueError(f"Invalid column spec '{text}', expected total:t:p:v[:symbol] integers.")

        if len(parts) not in (4, 5):
            raise ValueError(f"Invalid column spec '{text}', expected 4 or 5 entries.")

        spec = cls(*parts)
        for index in parts[1:]:
            if not 0 <= index < spec.total:
                raise ValueError(f"Column index {index} is out of range for {spec.total} columns.")
        return spec

    def __str__(self) -> str:
        return ":".join(str(part) for part in self if part is not None)


def _is_gzip(path: str) -> bool:
    if str(path).endswith(".gz"):
        return True
    with open(path, "rb") as f:
        return f.read(2) == b"\x1f\x8b"


class TickReader:
    """
    Iterates over the ticks of one file, in file order, keeping exact counters of
    what was read, skipped and clamped.

    Rows with a wrong column count and rows with malformed numbers are skipped;
    a time going backwards is clamped to the previous time.
    """

    def __init__(self, path: str, col_spec=None):
        self.path = path
        self.col_spec = col_spec if isinstance(col_spec, ColumnSpec) else ColumnSpec.parse(col_spec or default["columns"])

        self.data_rows = 0
        self.emitted = 0
        self.skipped_columns = 0
        self.skipped_malformed = 0
        self.clamped = 0

    @property
    def skipped(self) -> int:
        return self.skipped_columns + self.skipped_malformed

    def counters(self) -> dict:
        return {"data_rows": self.data_rows,
                "emitted": self.emitted,
                "skipped_columns": self.skipped_columns,
                "skipped_malformed": self.skipped_malformed,
                "clamped": self.clamped}

    def _open(self):
        if _is_gzip(self.path):
            return gzip.open(self.path, "rt", encoding="utf-8")
        return open(self.path, "r", encoding="utf-8")

    def __iter__(self) -> Iterator[Tick]:
        spec = self.col_spec
        last_t = None

        with self._open() as f:
            for line_number, line in enumerate(f, start=1):
                line = line.rstrip("\r\n")
                if not line.strip() or line.startswith("#"):
                    continue

                self.data_rows += 1
                fields = line.split("\t")
                if len(fields) != spec.total:
                    self.skipped_columns += 1
                    logger.debug(f"{self.path}:{line_number}: expected {spec.total} columns, got {len(fields)}; row skipped.")
                    continue

                try:
                    t = int(fields[spec.t])
                    price = float(fields[spec.p])
                    size = float(fields[spec.v])
                except ValueError:
                    self.skipped_malformed += 1
                    logger.debug(f"{self.path}:{line_number}: malformed number; row skipped.")
                    continue

                if not price > 0 or not size >= 0 or price == float("inf") or size == float("inf"):
                    self.skipped_malformed += 1
                    logger.debug(f"{self.path}:{line_number}: price must be positive and size non-negative; row skipped.")
                    continue

                if last_t is not None and t < last_t:
                    self.clamped += 1
                    logger.debug(f"{self.path}:{line_number}: time {t} goes back from {last_t}; clamped.")
                    t = last_t
                last_t = t

                symbol = fields[spec.symbol].strip() if spec.symbol is not None else None
                self.emitted += 1
                yield Tick(t, price, size, symbol)

        if self.skipped or self.clamped:
            logger.info(f"{self.path}: {self.emitted} ticks, {self.skipped_columns} rows with wrong column count, "
                        f"{self.skipped_malformed} malformed rows, {self.clamped} clamped times.")


def read_ticks(path: str, col_spec=None) -> TickReader:
    """
    Returns an iterable reader over the ticks of the given file.

    Args:
        path (str): The tab-separated input file, possibly gzip-compressed.
        col_spec (str or ColumnSpec, optional): The column spec. Defaults to the configured one.
    """
    return TickReader(path, col_spec)


def read_tick_frame(path: str, col_spec=None) -> pd.DataFrame:
    """
    Reads a whole tick file into a DataFrame with columns t, price, size (and symbol, if any).
    """
    ticks = list(read_ticks(path, col_spec))
    df = pd.DataFrame(ticks, columns=list(Tick._fields))
    if df["symbol"].isna().all():
        df = df.drop(columns=["symbol"])
    return df


def merge_streams(streams: dict) -> Iterator[Tick]:
    """
    Merges per-symbol tick streams by time, tagging each tick with its symbol.
    Ties keep the order in which the symbols were given.
    """
    def tagged(order, symbol, stream):
        for sequence, tick in enumerate(stream):
            yield (tick.t, order, sequence), tick._replace(symbol=symbol)

    iterators = [tagged(order, symbol, stream) for order, (symbol, stream) in enumerate(streams.items())]
    for _, tick in heapq.merge(*iterators, key=lambda item: item[0]):
        yield tick


class SurrogateIncrement(NamedTuple):
    da: float


def surrogate_stream(ticks) -> Iterator[tuple]:
    """
    Pairs every tick with its surrogate-volume increment |p_l - p_{l-1}|, the absolute
    price change taken as if it were the volume traded. The first tick of each symbol
    gets 0.
    """
    last_prices = {}
    for tick in ticks:
        last = last_prices.get(tick.symbol)
        last_prices[tick.symbol] = tick.price
        yield tick, SurrogateIncrement(0.0 if last is None else abs(tick.price - last))


class TickClock:
    """
    Converts tick times to seconds relative to the first tick seen.
    """

    def __init__(self, origin_ns: int = None):
        self.origin_ns = origin_ns

    def seconds(self, t_ns: int) -> float:
        if self.origin_ns is None:
            self.origin_ns = t_ns
        return (t_ns - self.origin_ns) / NANOSECONDS
