import datetime as dt

import numpy as np

from qganf import dataprep
from qganf.qsim import StateVector


def random_state(rng, n: int) -> StateVector:
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return StateVector(n, v / np.linalg.norm(v))


def synthetic_series(n: int = 2520, seed: int = 0, start: float = 5000.0) -> dataprep.PriceSeries:
    """Geometric random walk on consecutive calendar days."""
    r = np.random.default_rng(seed)
    prices = start * np.exp(np.cumsum(r.normal(2e-4, 0.01, n)))
    dates = tuple(dt.date(2010, 1, 1) + dt.timedelta(days=i) for i in range(n))
    return dataprep.PriceSeries(dates, prices)


def write_series_csv(path, series: dataprep.PriceSeries) -> None:
    dataprep.write_csv(series, path)
