from __future__ import annotations

import dataclasses
import html
import json
import logging
import math
import os
from collections import deque
from typing import Any
from typing import Optional
from typing import Union

from ring_harvest.ringconfig import ScenarioConfig

Cell = Union[float, int, str, bool]

PLOT_WIDTH = 640
PLOT_HEIGHT = 400
MARGIN = 56
LINE_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclasses.dataclass(frozen=True)
class ResultTable:
    """
    One CSV table, optionally plotted.

    Line plots draw every `y` column against `x`. Heatmaps read `x`, `y[0]`
    and `value` as (column, row, color) triples.
    """

    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]
    x: Optional[str] = None
    y: tuple[str, ...] = ()
    value: Optional[str] = None
    log_x: bool = False

    def column(self, name: str) -> list[Cell]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


def format_cell(value: Cell) -> str:
    """Exact, platform-independent text for one CSV cell."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


class ResultWriter:
    """A class to write result tables to the configured targets."""

    logger = logging.getLogger(__name__)

    def __init__(self, config: ScenarioConfig, seeds: tuple[int, ...] = ()) -> None:
        """Initialize the writer."""
        self._config = config
        self._seeds = seeds
        self._tables: deque[ResultTable] = deque()
        self._summary: dict[str, Any] = {}

    @property
    def header(self) -> str:
        seeds = ",".join(str(seed) for seed in self._seeds) or "none"
        return f"# config_hash={self._config.config_hash()} seeds={seeds}"

    def add_table(self, table: ResultTable) -> None:
        self._tables.append(table)

    def add_summary(self, key: str, value: Any) -> None:
        """
        Add one entry to the JSON summary.

        Args:
            key: The summary key. Later values replace earlier ones.
            value: Any JSON-serializable value. Floats are kept exact.
        """
        self._summary[key] = value

    def emit(self) -> list[str]:
        """
        Write every queued table and the summary to the enabled targets.
        Empties the queue.

        Returns:
            The paths of the files written, in write order.
        """
        written: list[str] = []
        count = 0
        while self._tables:
            table = self._tables.popleft()

            self.to_stdout(table)
            written.extend(self.to_csv(table))
            written.extend(self.to_svg(table))

            count += 1

        written.extend(self.to_json())
        self.logger.info("Wrote %d tables to %d files.", count, len(written))
        return written

    def _path(self, suffix: str) -> str:
        directory = self._config.output_directory
        os.makedirs(directory, exist_ok=True)
        return os.path.join(directory, f"{self._config.name}_{suffix}")

    def to_csv(self, table: ResultTable) -> list[str]:
        """
        Write one table as CSV.

        Output:
            A file named <name>_<table>.csv whose first line carries the config
            hash and seeds.
        """
        if "csv" not in self._config.formats:
            return []
        filename = self._path(f"{table.name}.csv")

        lines = [self.header, ",".join(table.columns)]
        lines.extend(",".join(format_cell(cell) for cell in row) for row in table.rows)
        with open(filename, "w", newline="\n") as file_out:
            file_out.write("\n".join(lines) + "\n")

        self.logger.debug("Wrote %d rows to %s", len(table.rows), filename)
        return [filename]

    def to_stdout(self, table: ResultTable) -> None:
        if "stdout" not in self._config.formats:
            return

        print(f"{table.name}: {','.join(table.columns)}")
        for row in table.rows:
            print(",".join(format_cell(cell) for cell in row))

    def to_json(self) -> list[str]:
        """
        Write the summary and run manifest.

        Output:
            A file named <name>_summary.json with sorted keys.
        """
        if "json" not in self._config.formats or not self._summary:
            return []
        filename = self._path("summary.json")

        with open(filename, "w", newline="\n") as file_out:
            json.dump(_jsonable(self._summary), file_out, indent=2, sort_keys=True)
            file_out.write("\n")

        self.logger.debug("Wrote summary to %s", filename)
        return [filename]

    def to_svg(self, table: ResultTable) -> list[str]:
        """Plot one table as an SVG line plot or heatmap."""
        if "svg" not in self._config.formats or table.x is None or not table.rows:
            return []
        filename = self._path(f"{table.name}.svg")

        if table.value is not None:
            body = heatmap_svg(table)
        else:
            body = line_plot_svg(table)
        description = f"<desc>{html.escape(self.header[2:])}</desc>"
        with open(filename, "w", newline="\n") as file_out:
            file_out.write(body.replace("<!--desc-->", description))

        self.logger.debug("Plotted %s to %s", table.name, filename)
        return [filename]


def line_plot_svg(table: ResultTable) -> str:
    """Every y column of the table against x, with min/max axis labels."""
    assert table.x is not None
    xs = [_axis_value(v, table.log_x) for v in table.column(table.x)]
    series = [(name, [float(v) for v in table.column(name)]) for name in table.y]
    finite_y = [v for _, values in series for v in values if math.isfinite(v)]
    x_low, x_high = _span([x for x in xs if math.isfinite(x)])
    y_low, y_high = _span(finite_y)

    def point(x: float, y: float) -> str:
        px = MARGIN + (x - x_low) / (x_high - x_low) * (PLOT_WIDTH - 2 * MARGIN)
        py = PLOT_HEIGHT - MARGIN - (y - y_low) / (y_high - y_low) * (
            PLOT_HEIGHT - 2 * MARGIN
        )
        return f"{px:.2f},{py:.2f}"

    parts = _svg_open(table.name)
    parts.append(_axes(table.x, x_low, x_high, y_low, y_high, table.log_x))
    for number, (name, values) in enumerate(series):
        color = LINE_COLORS[number % len(LINE_COLORS)]
        points = " ".join(
            point(x, y)
            for x, y in zip(xs, values)
            if math.isfinite(x) and math.isfinite(y)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{points}"/>'
        )
        parts.append(
            f'<text x="{PLOT_WIDTH - MARGIN + 4}" y="{MARGIN + 14 * number}" '
            f'fill="{color}" font-size="11">{html.escape(name)}</text>'
        )
    parts.append("</svg>\n")
    return "\n".join(parts)


def heatmap_svg(table: ResultTable) -> str:
    """Colored cells over the distinct x and y values of the table."""
    assert table.x is not None and table.value is not None and table.y
    xs = sorted({float(v) for v in table.column(table.x)})
    ys = sorted({float(v) for v in table.column(table.y[0])})
    values = [float(v) for v in table.column(table.value)]
    low, high = _span([v for v in values if math.isfinite(v)])

    width = (PLOT_WIDTH - 2 * MARGIN) / len(xs)
    height = (PLOT_HEIGHT - 2 * MARGIN) / len(ys)
    parts = _svg_open(table.name)
    cells = zip(table.column(table.x), table.column(table.y[0]), values)
    for x, y, value in cells:
        column = xs.index(float(x))
        row = len(ys) - 1 - ys.index(float(y))
        parts.append(
            f'<rect x="{MARGIN + column * width:.2f}" y="{MARGIN + row * height:.2f}" '
            f'width="{width:.2f}" height="{height:.2f}" '
            f'fill="{_diverging(value, low, high)}"/>'
        )
    parts.append(_axes(table.x, xs[0], xs[-1], ys[0], ys[-1], False))
    parts.append(
        f'<text x="{PLOT_WIDTH - MARGIN + 4}" y="{MARGIN}" font-size="11">'
        f"{html.escape(table.value)} {low:.3g}..{high:.3g}</text>"
    )
    parts.append("</svg>\n")
    return "\n".join(parts)


def _svg_open(title: str) -> list[str]:
    return [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{PLOT_WIDTH}" height="{PLOT_HEIGHT}" '
        f'viewBox="0 0 {PLOT_WIDTH} {PLOT_HEIGHT}">',
        f"<title>{html.escape(title)}</title>",
        "<!--desc-->",
        f'<rect width="{PLOT_WIDTH}" height="{PLOT_HEIGHT}" fill="white"/>',
    ]


def _axes(
    label: str,
    x_low: float,
    x_high: float,
    y_low: float,
    y_high: float,
    log_x: bool,
) -> str:
    bottom = PLOT_HEIGHT - MARGIN
    right = PLOT_WIDTH - MARGIN
    if log_x:
        x_low, x_high = 10**x_low, 10**x_high
    return "\n".join(
        [
            f'<line x1="{MARGIN}" y1="{bottom}" x2="{right}" y2="{bottom}" '
            'stroke="black"/>',
            f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{bottom}" '
            'stroke="black"/>',
            f'<text x="{MARGIN}" y="{bottom + 16}" font-size="11">{x_low:.3g}</text>',
            f'<text x="{right}" y="{bottom + 16}" font-size="11" '
            f'text-anchor="end">{x_high:.3g}</text>',
            f'<text x="{PLOT_WIDTH / 2}" y="{bottom + 32}" font-size="12" '
            f'text-anchor="middle">{html.escape(label)}</text>',
            f'<text x="{MARGIN - 4}" y="{bottom}" font-size="11" '
            f'text-anchor="end">{y_low:.3g}</text>',
            f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" font-size="11" '
            f'text-anchor="end">{y_high:.3g}</text>',
        ]
    )


def _axis_value(value: Cell, log_x: bool) -> float:
    number = float(value)
    if not log_x:
        return number
    return math.log10(number) if number > 0 else math.nan


def _span(values: list[float]) -> tuple[float, float]:
    if not values:
        return 0.0, 1.0
    low, high = min(values), max(values)
    if high == low:
        return low - 0.5, high + 0.5
    return low, high


def _diverging(value: float, low: float, high: float) -> str:
    """Blue-white-red color for value within [low, high]."""
    if not math.isfinite(value):
        return "#cccccc"
    fraction = (value - low) / (high - low) if high > low else 0.5
    if fraction < 0.5:
        shade = int(round(255 * fraction * 2))
        return f"#{shade:02x}{shade:02x}ff"
    shade = int(round(255 * (1 - fraction) * 2))
    return f"#ff{shade:02x}{shade:02x}"


def _jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    number = float(value)
    if math.isfinite(number):
        return number
    return str(number)
