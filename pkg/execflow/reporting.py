"""
Output of indicator frames: the tab-separated frame file, the plot data file and
the run report.
"""
import json
import logging
import os
from typing import Union

import pandas as pd

from execflow import utils
from execflow.indicators import FLOW_PREFIXES

logger = logging.getLogger("execflow")

config = utils.read_config_file()

default = {}
default["float_format"] = config["Output"].get("FLOAT_FORMAT", ".12g")
default["na"] = config["Output"].get("NA", "NA")
default["scale_lambda"] = config["Output"].getboolean("SCALE_LAMBDA", False)

PLOT_FIELDS = ["pv_M", "PEQV_from_M", "lambda_IH", "I.wH_squared", "scalp"]


class FrameWriter:
    """
    Writes frames to a tab-separated file, one row per frame, after a '#'-prefixed header.
    """

    def __init__(self, path: str, columns: list, header_lines: list = None, float_format: str = None, na: str = None):
        self.path = path
        self.columns = columns
        self.header_lines = header_lines or []
        self.float_format = float_format or default["float_format"]
        self.na = na or default["na"]
        self.rows = 0
        self._file = None

    def __enter__(self) -> "FrameWriter":
        folder = os.path.dirname(os.path.abspath(self.path))
        os.makedirs(folder, exist_ok=True)
        self._file = open(self.path, "w", encoding="utf-8", newline="\n")
        for line in self.header_lines:
            self._file.write(f"# {line}\n")
        self._file.write("#" + "\t".join(self.columns) + "\n")
        return self

    def write(self, frame) -> None:
        self._file.write("\t".join(frame.row(self.columns, self.float_format, self.na)) + "\n")
        self.rows += 1

    def __exit__(self, *exc) -> None:
        self._file.close()
        self._file = None


def plot_columns() -> list:
    columns = ["t", "P"]
    for prefix in FLOW_PREFIXES.values():
        columns += [f"{prefix}.{field}" for field in PLOT_FIELDS]
    return columns


def scale_into(values: pd.Series, reference: pd.Series) -> pd.Series:
    """
    Maps values linearly onto the range of the reference series.
    """
    low, high = values.min(), values.max()
    target_low, target_high = reference.min(), reference.max()
    if pd.isna(low) or high == low:
        return values * 0 + target_low
    return target_low + (values - low) / (high - low) * (target_high - target_low)


def emit_plotdata(frames: pd.DataFrame, path: str, scale_lambda: bool = None, float_format: str = None, na: str = None) -> pd.DataFrame:
    """
    Writes the plot data file: t, P and, per flow, P^{IH}, the lagging P^EQ, λ^{IH}, ⟨ψ_0|ψ^{IH}⟩²
    and the scalp price. The scalp price is shifted so that its last value is the last price,
    per symbol when the frames carry a symbol column.

    Args:
        frames (DataFrame): The frames, with at least the plot columns.
        path (str): The output file.
        scale_lambda (bool, optional): Whether to rescale the λ^{IH} columns into the price range.

    Returns:
        DataFrame: the data written.
    """
    scale_lambda = default["scale_lambda"] if scale_lambda is None else scale_lambda
    float_format = float_format or default["float_format"]

    data = frames.reindex(columns=plot_columns()).copy()
    if len(data) > 0:
        symbols = frames["symbol"] if "symbol" in frames.columns else pd.Series(0, index=frames.index)
        for prefix in FLOW_PREFIXES.values():
            column = f"{prefix}.scalp"
            offset = (data["P"] - data[column]).groupby(symbols).transform("last")
            data[column] = data[column] + offset

    if scale_lambda and len(data) > 0:
        for prefix in FLOW_PREFIXES.values():
            column = f"{prefix}.lambda_IH"
            data[column] = scale_into(data[column], data["P"])

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    data.to_csv(path, sep="\t", index=False, na_rep=na or default["na"], float_format=f"%{float_format}")
    return data


class FrameExporter:
    """
    Exports run artifacts (markdown reports, JSON configurations) under a base folder,
    one subfolder per content type.
    """

    def __init__(self, base_output_folder: str) -> None:
        self.base_output_folder = base_output_folder

    def export(self, artifact_name: str, artifact_data: Union[dict, str], content_type: str = None,
               target_format: str = "txt") -> str:
        """
        Exports the artifact and returns the path of the file written.

        Args:
            artifact_name (str): The name of the artifact.
            artifact_data (dict or str): Dicts are saved as JSON, strings as is.
            content_type (str, optional): The type of the content, used as a subfolder.
            target_format (str): One of json, txt and md.
        """
        invalid_chars = ['/', '\\', ':', '*', '?', '"', '<', '>', '|', '\n', '\t', '\r', ';']
        for char in invalid_chars:
            if char in artifact_name:
                artifact_name = artifact_name.replace(char, "-")
                logger.warning(f"Replaced invalid character {char} with hyphen in artifact name '{artifact_name}'.")

        artifact_file_path = self._compose_filepath(artifact_name, content_type, target_format)

        if target_format == "json":
            self._export_as_json(artifact_file_path, artifact_data)
        elif target_format in ("txt", "text", "md", "markdown"):
            self._export_as_txt(artifact_file_path, artifact_data)
        else:
            raise ValueError(f"Unsupported target format: {target_format}.")

        return artifact_file_path

    def _export_as_txt(self, artifact_file_path: str, artifact_data) -> None:
        if not isinstance(artifact_data, str):
            raise ValueError("The artifact data must be a string to export as text.")
        with open(artifact_file_path, 'w', encoding="utf-8") as f:
            f.write(artifact_data)

    def _export_as_json(self, artifact_file_path: str, artifact_data) -> None:
        if not isinstance(artifact_data, dict):
            raise ValueError("The artifact data must be a dictionary to export to JSON.")
        with open(artifact_file_path, 'w', encoding="utf-8") as f:
            json.dump(artifact_data, f, indent=4)

    def _compose_filepath(self, artifact_name: str, content_type: str = None, target_format: str = None) -> str:
        """
        Composes the file path of the artifact, creating the folders on the way.
        """
        subfolder = "" if content_type is None else content_type
        extension = target_format if target_format is not None else "txt"

        full_path = os.path.join(self.base_output_folder, subfolder, f"{artifact_name}.{extension}")
        os.makedirs(os.path.dirname(full_path), exist_ok=True)
        return full_path


def render_report(run_config: dict, counters: dict, rows: int) -> str:
    """
    Renders the markdown run report.
    """
    symbols = []
    for symbol, engine_counters in counters.get("engines", {}).items():
        symbols.append({"symbol": symbol,
                        "frames": engine_counters["frames"],
                        "not_ready": [{"flow": flow, "count": count} for flow, count in engine_counters["not_ready"].items()],
                        "variant_failures": [{"variant": name, "count": count}
                                             for name, count in sorted(engine_counters["variant_failures"].items())]})

    return utils.render_template("run_report.mustache", {
        "config": [{"key": key, "value": value} for key, value in run_config.items() if key != "json_serializable_class_name"],
        "input": [{"key": key, "value": value} for key, value in counters.get("input", {}).items()],
        "files": [{"path": path, "digest": digest} for path, digest in counters.get("files", {}).items()],
        "symbols": symbols,
        "rows": rows,
    })
