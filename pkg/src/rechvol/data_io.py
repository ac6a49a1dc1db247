"""Price/return/realized-measure ingestion and sample splitting.

CSV layout is two columns with a header row: ``date,price`` for prices and
``date,value`` for returns or realized measures. Empty or NaN cells raise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from rechvol.errors import DegenerateInput, InvalidInput

REALIZED_KINDS = ("RV", "BV", "MedRV", "RKV1", "RKV2", "RKV3")


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 1 or prices.size < 2:
            raise InvalidInput("a price series needs at least 2 observations")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise InvalidInput("prices must be finite and strictly positive")
        if len(self.dates) != prices.size:
            raise InvalidInput("dates and prices differ in length")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise InvalidInput("dates must be strictly increasing")
        object.__setattr__(self, "prices", prices)


@dataclass(frozen=True)
class ReturnSeries:
    values: np.ndarray
    t_in: int = 0
    t_out: int = -1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise InvalidInput("returns must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("returns contain non-finite values")
        object.__setattr__(self, "values", values)
        if self.t_out < 0:
            object.__setattr__(self, "t_out", values.size - self.t_in)
        if self.t_in + self.t_out != values.size:
            raise InvalidInput("t_in + t_out must equal the series length")

    def __len__(self):
        return self.values.size

    @property
    def train(self) -> np.ndarray:
        return self.values[: self.t_in]

    @property
    def test(self) -> np.ndarray:
        return self.values[self.t_in :]


@dataclass(frozen=True)
class RealizedSeries:
    values: np.ndarray
    kind: str = "RV"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidInput("realized measures must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


def demean_log_returns(prices: PriceSeries) -> ReturnSeries:
    """Percent log-returns minus their full-sample mean."""
    p = np.asarray(prices.prices if isinstance(prices, PriceSeries) else prices, dtype=float)
    if p.size < 2:
        raise InvalidInput("need at least 2 prices")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise InvalidInput("prices must be finite and strictly positive")
    r = np.log(p[1:] / p[:-1])
    return ReturnSeries(100.0 * (r - r.mean()), t_in=0)


def split(series: ReturnSeries, t_in: int) -> ReturnSeries:
    n = len(series)
    if not 0 < t_in < n:
        raise InvalidInput(f"t_in must lie in (0, {n}), got {t_in}")
    return replace(series, t_in=int(t_in), t_out=n - int(t_in))


def scale_realized_measure(rv: RealizedSeries, test_returns) -> RealizedSeries:
    """Rescale a realized measure so its total matches the sum of squared returns."""
    y = np.asarray(test_returns, dtype=float)
    if y.size != len(rv):
        raise InvalidInput("realized measure and test returns differ in length")
    total = rv.values.sum()
    if total <= 0:
        raise DegenerateInput("realized measure sums to zero")
    c_hat = np.sum(y**2) / total
    return RealizedSeries(c_hat * rv.values, kind=rv.kind)


def _parse_float(cell: str, path, lineno: int) -> float:
    cell = cell.strip()
    if not cell:
        raise InvalidInput(f"{path}:{lineno}: empty cell")
    try:
        value = float(cell)
    except ValueError as exc:
        raise InvalidInput(f"{path}:{lineno}: cannot parse {cell!r}") from exc
    if math.isnan(value) or math.isinf(value):
        raise InvalidInput(f"{path}:{lineno}: non-finite value {cell!r}")
    return value


def read_two_column_csv(path, value_column: str = "value") -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInput(f"{path}: empty file") from None
        if len(header) != 2 or header[0] != "date" or header[1] != value_column:
            raise InvalidInput(f"{path}: expected header 'date,{value_column}', got {','.join(header)}")
        dates, values = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InvalidInput(f"{path}:{lineno}: expected 2 columns")
            dates.append(row[0].strip())
            values.append(_parse_float(row[1], path, lineno))
    return dates, np.array(values, dtype=float)


def read_prices(path) -> PriceSeries:
    dates, prices = read_two_column_csv(path, "price")
    return PriceSeries(tuple(dates), prices)


def read_returns(path) -> ReturnSeries:
    """Returns supplied directly are taken as already demeaned."""
    _, values = read_two_column_csv(path, "value")
    return ReturnSeries(values)


def read_realized(path, kind: str = "RV") -> RealizedSeries:
    _, values = read_two_column_csv(path, "value")
    return RealizedSeries(values, kind=kind)


def write_two_column_csv(path, dates, values, value_column: str = "value") -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", value_column])
        for d, v in zip(dates, values):
            writer.writerow([d, repr(float(v))])
