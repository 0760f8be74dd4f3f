#!/usr/bin/env python3
"""Writes the bundled synthetic sample: data/sample/listings.csv and calendar.csv.

Listings are spread over a handful of San Francisco zip codes and appear in
up to four yearly snapshots each (200 rows in total). Prices follow room type,
size and location; a listing keeps its price between snapshots unless the host
reprices it, and "hard" listings reprice often and far. Availability depends
mostly on the zip code.
"""
import argparse
import csv
import datetime as dt
import pathlib

import numpy as np

ZIPS = {
    "94103": (37.7725, -122.4100, 1.10, 0.25),
    "94110": (37.7485, -122.4156, 1.00, 0.70),
    "94114": (37.7587, -122.4330, 1.25, 0.30),
    "94117": (37.7700, -122.4440, 1.15, 0.65),
    "94122": (37.7600, -122.4840, 0.85, 0.80),
    "94133": (37.8000, -122.4100, 1.30, 0.20),
}
ROOMS = {"Entire home/apt": 1.0, "Private room": 0.55, "Shared room": 0.35}
SNAPSHOTS = [dt.date(y, 6, 1) for y in (2014, 2015, 2016, 2017)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/sample")
    ap.add_argument("--rows", type=int, default=200)
    ap.add_argument("--seed", type=int, default=2017)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    listings = []
    rows = []
    next_id = 1001
    while len(rows) < args.rows:
        zipcode = rng.choice(list(ZIPS))
        lat0, lon0, loc_mult, avail_rate = ZIPS[zipcode]
        room = rng.choice(list(ROOMS), p=[0.6, 0.33, 0.07])
        bedrooms = int(rng.choice([0, 1, 1, 2, 2, 3, 4, 5]))
        bathrooms = float(rng.choice([1.0, 1.0, 1.5, 2.0, 2.5]))
        accommodates = max(1, bedrooms * 2 + int(rng.integers(0, 3)))
        cleaning = "" if rng.random() < 0.2 else f"${int(rng.integers(10, 150))}.00"
        deposit = "" if rng.random() < 0.4 else f"${int(rng.integers(0, 8)) * 100}.00"
        extra = f"${int(rng.integers(0, 5)) * 10}.00"
        lat = lat0 + rng.normal(0, 0.006)
        lon = lon0 + rng.normal(0, 0.006)
        base = (70 + 45 * bedrooms + 12 * accommodates) * ROOMS[room] * loc_mult
        hard = rng.random() < 0.25
        n_snap = int(rng.integers(2, 5))
        n_snap = min(n_snap, args.rows - len(rows))
        high = rng.random() < avail_rate
        listing_id = next_id
        next_id += 1
        listings.append((listing_id, base))
        price = max(20.0, round(base * (1 + rng.normal(0, 0.05))))
        for s in range(n_snap):
            if s > 0 and rng.random() < (0.8 if hard else 0.3):
                price = max(20.0, round(base * (1 + rng.normal(0, 0.35 if hard else 0.05))))
            a365 = int(rng.integers(200, 366)) if high else int(rng.integers(0, 80))
            a90 = min(90, int(round(a365 / 365 * 90 + rng.normal(0, 3))))
            a60 = min(60, int(round(a90 / 90 * 60)))
            a30 = min(30, int(round(a60 / 60 * 30)))
            rows.append({
                "id": listing_id,
                "price": f"${price:,.2f}",
                "bedrooms": bedrooms,
                "bathrooms": bathrooms,
                "accommodates": accommodates,
                "cleaning_fee": cleaning,
                "security_deposit": deposit,
                "extra_people": extra,
                "room_type": room,
                "zipcode": zipcode,
                "latitude": f"{lat:.6f}",
                "longitude": f"{lon:.6f}",
                "availability_30": max(0, a30),
                "availability_60": max(0, a60),
                "availability_90": max(0, a90),
                "availability_365": max(0, a365),
                "neighborhood": "",
                "snapshot_date": SNAPSHOTS[s].isoformat(),
                "city": "San Francisco",
            })

    with open(out / "listings.csv", "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)

    # 28 nights per listing for the first 12 listings; weekends cost more.
    with open(out / "calendar.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["listing_id", "date", "available", "price"])
        for listing_id, base in listings[:12]:
            for d in range(28):
                day = dt.date(2017, 6, 1) + dt.timedelta(days=d)
                weekend = day.weekday() in (4, 5)
                available = rng.random() < 0.7
                price = base * (1.15 if weekend else 1.0) * (1 + rng.normal(0, 0.03))
                w.writerow([listing_id, day.isoformat(), "t" if available else "f",
                            f"${round(price):,.2f}" if available else ""])


if __name__ == "__main__":
    main()
