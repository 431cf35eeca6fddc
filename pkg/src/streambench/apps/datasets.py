"""Deterministic stand-ins for the four IoT traces, small enough to bundle.

Each generator mimics its source's schema and rough behaviour: CITY
environment sensors with a daily cycle, FIT body sensors at 1 Hz, GRID
half-hourly smart meters, TAXI trips with two daily peaks. A few readings
are left empty and a few are out of range so that interpolation and
range filtering have work to do, and a couple of "rogue" devices are not
on the Bloom whitelist.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..engine.message import Message
from ..workload.ingest import write_csv
from ..workload.model import StreamWorkload

FIXTURE_DIR = Path(__file__).with_name("fixtures")
EPOCH_MS = 1_420_070_400_000  # 2015-01-01T00:00:00Z
MINUTE_MS = 60_000
HOUR_MS = 3_600_000

CITY_FIELDS = ("temperature", "humidity", "light", "dust", "airquality_raw")
FIT_FIELDS = (
    "acc_chest_x", "acc_chest_y", "acc_chest_z",
    "acc_arm_x", "acc_arm_y", "acc_arm_z",
    "acc_ankle_x", "acc_ankle_y", "acc_ankle_z",
    "ecg1", "ecg2",
)
GRID_FIELDS = ("energyConsumed",)
TAXI_FIELDS = (
    "trip_time_in_secs", "trip_distance", "fare_amount", "surcharge",
    "mta_tax", "tip_amount", "tolls_amount", "total_amount",
)
ROGUE_SUFFIX = "-rogue"


def _damage(rng: np.random.Generator, row: dict[str, float], fields, gap_p: float, outlier_p: float, spike: float) -> None:
    for f in fields:
        u = rng.random()
        if u < gap_p:
            row[f] = float("nan")
        elif u < gap_p + outlier_p:
            row[f] = row[f] + spike


def city(seed: int = 1, sensors: int = 12, hours: int = 6, every_min: int = 2) -> StreamWorkload:
    rng = np.random.default_rng(seed)
    ids = [f"city-{i:03d}" for i in range(sensors)] + [f"city-{i:03d}{ROGUE_SUFFIX}" for i in range(2)]
    msgs = []
    for k in range(hours * 60 // every_min):
        t = EPOCH_MS + k * every_min * MINUTE_MS
        phase = 2 * math.pi * ((t - EPOCH_MS) / (24 * HOUR_MS))
        for j, sid in enumerate(ids):
            temp = 22 + 6 * math.sin(phase + j * 0.1) + rng.normal(0, 0.8)
            hum = 55 - 10 * math.sin(phase) + rng.normal(0, 3)
            light = max(0.0, 400 + 350 * math.sin(phase - 0.5) + rng.normal(0, 30))
            dust = abs(rng.normal(120, 40))
            aq = 40 + 1.5 * temp + 0.4 * hum + 0.05 * light + rng.normal(0, 4)
            row = dict(zip(CITY_FIELDS, (temp, hum, light, dust, aq)))
            _damage(rng, row, CITY_FIELDS, 0.02, 0.02, 500.0)
            msgs.append(Message(0, sid, t + j * 500, {f: round(v, 3) for f, v in row.items()}))
    return StreamWorkload.from_messages(msgs, name="CITY")


def fit(seed: int = 2, subjects: int = 10, seconds: int = 180) -> StreamWorkload:
    rng = np.random.default_rng(seed)
    ids = [f"subject{i + 1}" for i in range(subjects)]
    msgs = []
    for s in range(seconds):
        t = EPOCH_MS + s * 1000
        for j, sid in enumerate(ids):
            act = math.sin(2 * math.pi * (s / 60.0) + j)
            acc = [act * (1 + 0.2 * a) + rng.normal(0, 0.3) for a in range(9)]
            ecg1 = 0.2 + 0.5 * acc[0] - 0.3 * acc[3] + 0.2 * acc[6] + rng.normal(0, 0.1)
            ecg2 = ecg1 * 0.8 + rng.normal(0, 0.1)
            row = dict(zip(FIT_FIELDS, (*acc, ecg1, ecg2)))
            _damage(rng, row, FIT_FIELDS, 0.01, 0.01, 80.0)
            msgs.append(Message(0, sid, t + j * 50, {f: round(v, 4) for f, v in row.items()}))
    return StreamWorkload.from_messages(msgs, name="FIT")


def grid(seed: int = 3, meters: int = 30, days: int = 2) -> StreamWorkload:
    rng = np.random.default_rng(seed)
    ids = [f"meter{1000 + i}" for i in range(meters)] + [f"meter{9000 + i}{ROGUE_SUFFIX}" for i in range(2)]
    msgs = []
    for k in range(days * 48):
        t = EPOCH_MS + k * 30 * MINUTE_MS
        hour = (k % 48) / 2.0
        load = 0.3 + 0.5 * math.exp(-((hour - 19) ** 2) / 8) + 0.2 * math.exp(-((hour - 8) ** 2) / 4)
        for j, sid in enumerate(ids):
            row = {"energyConsumed": max(0.0, load * (0.8 + 0.05 * (j % 8)) + rng.normal(0, 0.05))}
            _damage(rng, row, GRID_FIELDS, 0.02, 0.01, 50.0)
            msgs.append(Message(0, sid, t + j * 1000, {"energyConsumed": round(row["energyConsumed"], 4)}))
    return StreamWorkload.from_messages(msgs, name="GRID")


def taxi(seed: int = 4, taxis: int = 40, days: int = 3, trips_per_day: int = 500) -> StreamWorkload:
    rng = np.random.default_rng(seed)
    ids = [f"taxi{i:04d}" for i in range(taxis)] + [f"taxi{9990 + i}{ROGUE_SUFFIX}" for i in range(2)]
    msgs = []
    for d in range(days):
        # two daily peaks: a small morning one and a large evening one
        hours = np.concatenate([rng.normal(8.5, 1.0, trips_per_day // 10), rng.normal(19.0, 1.5, trips_per_day - trips_per_day // 10)])
        for h in np.sort(np.clip(hours, 0, 23.99)):
            t = EPOCH_MS + d * 24 * HOUR_MS + int(h * HOUR_MS)
            dist = float(rng.gamma(2.0, 1.5))
            secs = dist * 180 + rng.normal(120, 60)
            fare = 2.5 + 1.6 * dist + 0.005 * secs + rng.normal(0, 0.4)
            surcharge = 0.5 if h > 16 else 0.0
            tip = max(0.0, fare * 0.15 + rng.normal(0, 0.5))
            tolls = 5.33 if rng.random() < 0.05 else 0.0
            row = {
                "trip_time_in_secs": max(30.0, secs),
                "trip_distance": dist,
                "fare_amount": fare,
                "surcharge": surcharge,
                "mta_tax": 0.5,
                "tip_amount": tip,
                "tolls_amount": tolls,
            }
            row["total_amount"] = sum(row[f] for f in ("fare_amount", "surcharge", "mta_tax", "tip_amount", "tolls_amount"))
            _damage(rng, row, ("trip_distance", "fare_amount"), 0.0, 0.02, 1000.0)
            sid = ids[int(rng.integers(0, len(ids)))]
            msgs.append(Message(0, sid, t, {f: round(v, 2) for f, v in row.items()}))
    return StreamWorkload.from_messages(msgs, name="TAXI")


GENERATORS = {"city": city, "fit": fit, "grid": grid, "taxi": taxi}
FIELDS = {"city": CITY_FIELDS, "fit": FIT_FIELDS, "grid": GRID_FIELDS, "taxi": TAXI_FIELDS}


def fixture_path(name: str) -> Path:
    return FIXTURE_DIR / f"{name.lower()}.csv"


def write_fixtures(directory: str | Path = FIXTURE_DIR) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [write_csv(gen(), directory / f"{name}.csv", FIELDS[name]) for name, gen in GENERATORS.items()]


if __name__ == "__main__":  # regenerate the bundled files
    for p in write_fixtures():
        print(p)
