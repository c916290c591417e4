#!/usr/bin/env python3
"""Generate the synthetic trace CSVs shipped under traces/.

Each trace records an IDM-driven scene at 10 Hz for 70 s in the road-aligned
frame (columns t,id,x,y,vx,vy). Regenerating is deterministic.
"""

import csv
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from batchmpc.traffic import IdmParams, IdmVehicle, IdmWorld

LANE_CENTERS = np.array([0.0, 4.0, 8.0, 12.0])
DT = 0.1
DURATION = 70.0

SCENES = {
    # dense mixed traffic, all four lanes occupied
    "dense_a": [
        (0, 40.0, 11.0), (0, 110.0, 10.5), (0, 200.0, 11.5),
        (1, 30.0, 12.0), (1, 100.0, 12.5), (1, 185.0, 13.0),
        (2, 65.0, 13.0), (2, 150.0, 12.0),
        (3, 80.0, 13.5), (3, 190.0, 14.0),
    ],
    # two platoons with a slow convoy in the middle lanes
    "dense_b": [
        (1, 35.0, 10.0), (1, 55.0, 10.5), (1, 78.0, 11.0),
        (2, 45.0, 10.5), (2, 70.0, 11.0), (2, 95.0, 11.5),
        (0, 60.0, 12.0), (0, 150.0, 11.0),
        (3, 90.0, 13.5), (3, 200.0, 14.0), (3, 300.0, 13.0),
    ],
    # sparse fast outer lanes, crowded right side
    "dense_c": [
        (0, 30.0, 9.5), (0, 75.0, 10.0), (0, 130.0, 10.5), (0, 210.0, 11.0),
        (1, 60.0, 12.0), (1, 160.0, 12.5),
        (2, 110.0, 13.5), (2, 260.0, 13.0),
        (3, 140.0, 15.0),
    ],
}


def record(name: str, layout, out_dir: Path) -> Path:
    vehicles = [
        IdmVehicle(id=i, lane=lane, x=x, v=v, params=IdmParams(v0=v))
        for i, (lane, x, v) in enumerate(layout)
    ]
    world = IdmWorld(vehicles, LANE_CENTERS)
    path = out_dir / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "id", "x", "y", "vx", "vy"])
        steps = int(round(DURATION / DT))
        for k in range(steps + 1):
            t = k * DT
            for s in world.states():
                writer.writerow([f"{t:.1f}", s.id, f"{s.x:.4f}", f"{s.y:.4f}", f"{s.vx:.4f}", f"{s.vy:.4f}"])
            world.step(DT)
    return path


def main():
    out_dir = Path(__file__).resolve().parents[1] / "traces"
    out_dir.mkdir(exist_ok=True)
    for name, layout in SCENES.items():
        path = record(name, layout, out_dir)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
