"""
Command line interface: runs the engine over tick files and writes one output row per tick.

    execflow --musein_file=aapl.csv.gz --musein_cols=9:1:2:3 --n=12 --tau=256 \\
             --measure=LegendreShifted --museout_file=museout.dat
"""
import argparse
import json
import logging
import os
import sys

import pandas as pd
from rich.console import Console
from rich.table import Table

import execflow
from execflow import utils
from execflow.basis import Basis, BasisKind, MeasureParams
from execflow.density import CONSTRUCTIONS
from execflow.indicators import EngineSettings, FlowEngine
from execflow.panel import AssetPanel
from execflow.reporting import FrameExporter, FrameWriter, emit_plotdata, plot_columns, render_report
from execflow.ticks import ColumnSpec, merge_streams, read_ticks, surrogate_stream

logger = logging.getLogger("execflow")

config = utils.read_config_file()

default = {}
default["measure"] = config["Basis"].get("MEASURE", "LegendreShifted")
default["n"] = config["Basis"].getint("N", 12)
default["tau"] = config["Basis"].getfloat("TAU", 256.0)
default["columns"] = config["Ingest"].get("COLUMNS", "9:1:2:3")
default["report"] = config["Output"].getboolean("REPORT", True)
default["scale_lambda"] = config["Output"].getboolean("SCALE_LAMBDA", False)
default["output"] = "museout.dat"

EXIT_OK = 0
EXIT_INPUT_ERROR = 2


class RunConfig(utils.JsonSerializableRegistry):
    """
    The parameters of one run, validated before the first tick and echoed into the output header.
    """

    serializable_attributes = ["input_path", "col_spec", "n", "tau", "measure", "output_path", "variant", "beta",
                               "threshold", "floor", "experimental", "compare", "construction", "plotdata",
                               "scale_lambda", "report", "symbols", "max_workers"]

    def __init__(self, input_path: str = None, col_spec: str = None, n: int = None, tau: float = None,
                 measure: str = None, output_path: str = None, variant: str = None, beta: float = None,
                 threshold: float = None, floor: float = None, experimental: bool = None, compare: bool = None,
                 construction: str = None, plotdata: str = None, scale_lambda: bool = None, report: bool = None,
                 symbols: dict = None, max_workers: int = None):
        settings = EngineSettings.from_config(variant=variant, beta=beta, threshold=threshold, floor=floor,
                                              experimental=experimental, compare=compare, construction=construction)

        self.input_path = input_path
        self.col_spec = str(col_spec or default["columns"])
        self.n = int(n if n is not None else default["n"])
        self.tau = float(tau if tau is not None else default["tau"])
        self.measure = measure or default["measure"]
        self.output_path = output_path or default["output"]
        self.variant = settings.variant.value
        self.beta = settings.beta
        self.threshold = settings.threshold
        self.floor = settings.floor
        self.experimental = settings.experimental
        self.compare = settings.compare
        self.construction = settings.construction
        self.plotdata = plotdata
        self.scale_lambda = default["scale_lambda"] if scale_lambda is None else scale_lambda
        self.report = default["report"] if report is None else report
        self.symbols = dict(symbols or {})
        self.max_workers = max_workers

    def __repr__(self) -> str:
        return f"RunConfig({json.dumps(self.to_json(), sort_keys=True)})"

    def _post_deserialization_init(self) -> None:
        # null entries of a saved configuration take the current defaults
        self.__init__(**{attr: getattr(self, attr) for attr in self.serializable_attributes})

    def validate(self) -> "RunConfig":
        """
        Checks every parameter, raising ValueError on the first invalid one.
        """
        spec = ColumnSpec.parse(self.col_spec)
        kind = BasisKind.from_name(self.measure)
        MeasureParams(self.tau, self.n).validate(kind)

        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"The ignore threshold must be in [0, 1], got {self.threshold}.")
        if self.construction not in CONSTRUCTIONS:
            raise ValueError(f"Unknown density construction '{self.construction}'. Valid ones are: {CONSTRUCTIONS}")
        if self.input_path is None and not any(self.symbols.values()):
            raise ValueError("No input file given.")
        if self.symbols and not all(self.symbols.values()) and spec.symbol is None:
            raise ValueError("Selecting symbols of a merged file needs a symbol column in the column spec.")
        if self.max_workers is not None and self.max_workers < 1:
            raise ValueError(f"max_workers must be at least 1, got {self.max_workers}.")
        return self

    @property
    def multi_asset(self) -> bool:
        return bool(self.symbols) or ColumnSpec.parse(self.col_spec).symbol is not None

    def input_paths(self) -> list:
        paths = [path for path in self.symbols.values() if path]
        if self.input_path is not None and not paths:
            paths = [self.input_path]
        return paths

    def basis(self) -> Basis:
        return Basis(self.measure, tau=self.tau, n=self.n)

    def settings(self) -> EngineSettings:
        return EngineSettings.from_config(variant=self.variant, beta=self.beta, threshold=self.threshold,
                                          floor=self.floor, experimental=self.experimental, compare=self.compare,
                                          construction=self.construction)


def parse_symbols(text: str) -> dict:
    """
    Parses "SYM=path,SYM2=path2" (one file per symbol) or "SYM,SYM2" (symbols of a merged file).
    """
    symbols = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        symbol, _, path = item.partition("=")
        symbols[symbol.strip()] = path.strip() or None
    return symbols


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="execflow",
                                     description="Execution-flow spectral indicators from (time, price, size) ticks.")
    parser.add_argument("--musein_file", dest="input_path", help="Input tab-separated tick file, optionally gzipped.")
    parser.add_argument("--musein_cols", dest="col_spec", default=None,
                        help="total:t:p:v[:symbol] column spec, base 0 (default from config).")
    parser.add_argument("--n", type=int, default=None, help="Basis dimension.")
    parser.add_argument("--tau", type=float, default=None, help="Exponent time of the measure, in seconds.")
    parser.add_argument("--measure", default=None, help=f"Basis kind: {', '.join(k.value for k in BasisKind)}.")
    parser.add_argument("--museout_file", dest="output_path", default=None, help="Output file.")
    parser.add_argument("--idpdt_variant", dest="variant", default=None, help="Approximation of ‖I dp/dt‖.")
    parser.add_argument("--beta", type=float, default=None, help="I power of the PowerBeta variant.")
    parser.add_argument("--threshold", type=float, default=None,
                        help="Directional signals are ignored when ⟨ψ_0|ψ^IH⟩² reaches this value.")
    parser.add_argument("--lambda_floor", dest="floor", type=float, default=None,
                        help="Relative eigenvalue floor of the variants dividing by λ.")
    parser.add_argument("--density", dest="construction", default=None, choices=CONSTRUCTIONS,
                        help="Construction of the since-spike density matrices.")
    parser.add_argument("--experimental", action="store_true", default=None,
                        help="Emit the experimental projector and double-integration fields.")
    parser.add_argument("--compare_variants", dest="compare", action="store_true", default=None,
                        help="Emit Δ_I of every ‖I dp/dt‖ variant.")
    parser.add_argument("--plotdata", default=None, help="Also write the plot data file.")
    parser.add_argument("--scale_lambda", action="store_true", default=None,
                        help="Rescale λ^IH into the price range in the plot data.")
    parser.add_argument("--report", action=argparse.BooleanOptionalAction, default=None,
                        help="Write a markdown run report and the JSON run configuration next to the output.")
    parser.add_argument("--symbols", type=parse_symbols, default=None,
                        help="SYM=path,... for one file per symbol, or SYM,... to select symbols of a merged file.")
    parser.add_argument("--max_workers", type=int, default=None, help="Threads advancing the instruments of a panel.")
    parser.add_argument("--run_config", default=None,
                        help="Start from the JSON run configuration saved by an earlier run; flags given override it.")
    parser.add_argument("--show_config", action="store_true",
                        help="Print the package configuration and exit.")
    return parser


def config_from_args(argv: list = None) -> RunConfig:
    return _config_from_arguments(vars(build_parser().parse_args(argv)))


def _config_from_arguments(arguments: dict) -> RunConfig:
    arguments = dict(arguments)
    arguments.pop("show_config", None)
    saved = arguments.pop("run_config", None)
    if saved is None:
        return RunConfig(**arguments)

    values = RunConfig.from_json(saved).to_json()
    values.pop("json_serializable_class_name")
    values.update({key: value for key, value in arguments.items() if value is not None})
    logger.info(f"Starting from the run configuration in {saved}.")
    return RunConfig(**values)


#########################################################################
# Running
#########################################################################

def _check_readable(paths: list) -> None:
    for path in paths:
        with open(path, "rb") as f:
            f.read(1)


def _merged_streams(run_config: RunConfig, spec: ColumnSpec) -> tuple:
    """
    The symbols and the time-ordered tick stream of a multi-asset run.
    """
    files = {symbol: path for symbol, path in run_config.symbols.items() if path}
    if files:
        streams = {symbol: read_ticks(path, spec) for symbol, path in files.items()}
        return list(files), merge_streams(streams), list(streams.values())

    # a merged file: symbols in order of first appearance unless selected
    symbols = list(run_config.symbols)
    if not symbols:
        for tick in read_ticks(run_config.input_path, spec):
            if tick.symbol not in symbols:
                symbols.append(tick.symbol)

    reader = read_ticks(run_config.input_path, spec)
    selected = set(symbols)
    return symbols, (tick for tick in reader if tick.symbol in selected), [reader]


def run(run_config: RunConfig) -> int:
    """
    Runs the whole pipeline for a configuration.

    Returns:
        int: the exit status, 0 on success and 2 when the configuration or the input is unusable.
    """
    try:
        run_config.validate()
        _check_readable(run_config.input_paths())
    except (ValueError, OSError) as e:
        logger.error(f"Cannot run: {e}")
        print(f"execflow: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    basis = run_config.basis()
    settings = run_config.settings()
    spec = ColumnSpec.parse(run_config.col_spec)
    multi = run_config.multi_asset

    header = [f"execflow {execflow.__version__}",
              "config " + json.dumps(run_config.to_json(), sort_keys=True, ensure_ascii=False)]
    columns = settings.columns(with_symbol=multi)
    plot_rows = [] if run_config.plotdata else None
    plot_fields = plot_columns() + (["symbol"] if multi else [])

    try:
        with FrameWriter(run_config.output_path, columns, header) as writer:
            if multi:
                symbols, ticks, readers = _merged_streams(run_config, spec)
                with AssetPanel(symbols or ["-"], basis, settings, run_config.max_workers) as panel:
                    for tick, increment in surrogate_stream(ticks):
                        frame = panel.on_tick(tick, increment.da)
                        writer.write(frame)
                        if plot_rows is not None:
                            plot_rows.append([frame.get(column) for column in plot_fields])
                    engines = panel.counters() if symbols else {}
            else:
                reader = read_ticks(run_config.input_path, spec)
                readers = [reader]
                engine = FlowEngine(basis, settings)
                for tick, increment in surrogate_stream(reader):
                    frame = engine.on_tick(tick, da=increment.da)
                    writer.write(frame)
                    if plot_rows is not None:
                        plot_rows.append([frame.get(column) for column in plot_fields])
                engines = {os.path.basename(run_config.input_path): engine.counters()}
            rows = writer.rows
    except (OSError, UnicodeDecodeError) as e:
        logger.error(f"Failed reading the input: {e}")
        print(f"execflow: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    input_counters = {}
    for reader in readers:
        for key, value in reader.counters().items():
            input_counters[key] = input_counters.get(key, 0) + value
    digests = {path: utils.file_digest(path) for path in run_config.input_paths()}
    counters = {"input": input_counters, "engines": engines, "files": digests}
    logger.info(f"Wrote {rows} rows to {run_config.output_path}; input {input_counters}.")

    if plot_rows is not None:
        frames = pd.DataFrame(plot_rows, columns=plot_fields)
        frames[plot_columns()] = frames[plot_columns()].apply(pd.to_numeric, errors="coerce")
        emit_plotdata(frames, run_config.plotdata, run_config.scale_lambda)

    if run_config.report:
        output_folder = os.path.dirname(os.path.abspath(run_config.output_path))
        name = os.path.basename(run_config.output_path)
        exporter = FrameExporter(output_folder)
        exporter.export(name + ".report", render_report(run_config.to_json(), counters, rows), None, "md")
        exporter.export(name + ".config", run_config.to_json(), None, "json")

    print_summary(counters, rows)
    return EXIT_OK


def print_summary(counters: dict, rows: int) -> None:
    """
    Prints a short summary table of the run to stderr.
    """
    table = Table(title=f"execflow: {rows} rows")
    table.add_column("Instrument")
    table.add_column("Frames", justify="right")
    table.add_column("Not ready (pFV)", justify="right")
    table.add_column("Not ready (pFA)", justify="right")
    for symbol, engine_counters in counters["engines"].items():
        not_ready = engine_counters["not_ready"]
        table.add_row(str(symbol), str(engine_counters["frames"]), str(not_ready.get("V", 0)), str(not_ready.get("A", 0)))

    Console(stderr=True).print(table)


def main(argv: list = None) -> int:
    arguments = vars(build_parser().parse_args(argv))
    if arguments["show_config"]:
        utils.pretty_print_config(config)
        return EXIT_OK

    try:
        run_config = _config_from_arguments(arguments)
    except (ValueError, OSError) as e:
        logger.error(f"Cannot build the run configuration: {e}")
        print(f"execflow: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return run(run_config)


if __name__ == "__main__":
    sys.exit(main())
