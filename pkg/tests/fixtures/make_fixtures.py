"""Regenerate the synthetic CSV fixtures used by the backtest and CLI tests.

Run from the repository root: ``python3 tests/fixtures/make_fixtures.py``.
"""

import datetime as dt
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
P, DAYS, SEED = 12, 220, 20240101


def business_days(start, count):
    out, d = [], start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def main():
    rng = np.random.default_rng(SEED)
    dates = business_days(dt.date(2021, 1, 4), DAYS)
    factors = rng.normal([0.04, 0.01, 0.0], [1.0, 0.5, 0.5], size=(DAYS, 3))
    loadings = rng.normal([1.0, 0.2, 0.0], [0.3, 0.4, 0.4], size=(P, 3))
    alpha = np.linspace(-0.02, 0.03, P)
    noise = rng.standard_normal((DAYS, P)) * np.linspace(0.6, 1.4, P)
    returns = alpha + factors @ loadings.T + noise
    with open(HERE / "returns.csv", "w") as fh:
        fh.write("date," + ",".join(f"asset{i + 1}" for i in range(P)) + "\n")
        for d, row in zip(dates, returns):
            fh.write(d.isoformat() + "," + ",".join(f"{v:.6f}" for v in row) + "\n")
    with open(HERE / "factors.csv", "w") as fh:
        fh.write("date,mkt,smb,hml\n")
        for d, row in zip(dates, factors):
            fh.write(d.isoformat() + "," + ",".join(f"{v:.6f}" for v in row) + "\n")


if __name__ == "__main__":
    main()
