#!/usr/bin/env python3
"""Write a synthetic daily price CSV in the Investing.com/Kaggle export layout.

Geometric random walk with a slow trend and a weekly cycle. A few days are
dropped so the gap filler has something to do. Rows are newest first, as in
the real export.
"""
import argparse
import csv
import datetime as dt
import math
import random


def volume_text(v):
    if v >= 1e9:
        return f"{v / 1e9:.2f}B"
    if v >= 1e6:
        return f"{v / 1e6:.2f}M"
    return f"{v / 1e3:.2f}K"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--days", type=int, default=900)
    ap.add_argument("--start", default="2019-01-01")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--gaps", type=int, default=6)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    start = dt.date.fromisoformat(args.start)
    rows = []
    price = 140.0
    prev_close = price
    for i in range(args.days):
        day = start + dt.timedelta(days=i)
        drift = 0.0012 + 0.004 * math.sin(2 * math.pi * i / 7)
        open_ = prev_close * math.exp(rng.gauss(0, 0.004))
        close = open_ * math.exp(drift + rng.gauss(0, 0.03))
        high = max(open_, close) * (1 + abs(rng.gauss(0, 0.012)))
        low = min(open_, close) * (1 - abs(rng.gauss(0, 0.012)))
        vol = math.exp(rng.gauss(math.log(8e6), 0.5))
        change = (close / prev_close - 1) * 100
        rows.append((day, close, open_, high, low, vol, change))
        prev_close = close

    interior = list(range(10, args.days - 10))
    for idx in sorted(rng.sample(interior, args.gaps), reverse=True):
        del rows[idx]

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f, quoting=csv.QUOTE_ALL)
        w.writerow(["Date", "Price", "Open", "High", "Low", "Vol.", "Change %"])
        for day, close, open_, high, low, vol, change in reversed(rows):
            w.writerow([
                day.strftime("%b %d, %Y"),
                f"{close:,.2f}",
                f"{open_:,.2f}",
                f"{high:,.2f}",
                f"{low:,.2f}",
                volume_text(vol),
                f"{change:.2f}%",
            ])


if __name__ == "__main__":
    main()
