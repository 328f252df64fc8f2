#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes the bundled scenario files.

Loads are the IEEE-34 spot and distributed loads (kW, kvar per phase) on a
1 MVA base. Distributed loads are lumped at the far bus of their segment,
delta loads are assigned to the first phase of their pair, and the two
shunt capacitor banks are entered as negative reactive load.
"""
import json
import math
import os

HERE = os.path.dirname(os.path.abspath(__file__))
FEEDER = os.path.join(HERE, "..", "feeders", "ieee34.feeder")

SPOT = {
    "860": [(20, 16)] * 3,
    "840": [(9, 7)] * 3,
    "844": [(135, 105)] * 3,
    "848": [(20, 16)] * 3,
    "890": [(150, 75)] * 3,
    "830": [(10, 5), (10, 5), (25, 10)],
}
# (from, to): {phase: (kW, kvar)}
DISTRIBUTED = {
    ("802", "806"): {1: (30, 15), 2: (25, 14)},
    ("808", "810"): {1: (16, 8)},
    ("818", "820"): {0: (34, 17)},
    ("820", "822"): {0: (135, 70)},
    ("816", "824"): {1: (5, 2)},
    ("824", "826"): {1: (40, 20)},
    ("824", "828"): {2: (4, 2)},
    ("828", "830"): {0: (7, 3)},
    ("854", "856"): {1: (4, 2)},
    ("832", "858"): {0: (7, 3), 1: (2, 1), 2: (6, 3)},
    ("858", "864"): {0: (2, 1)},
    ("858", "834"): {0: (4, 2), 1: (15, 8), 2: (13, 7)},
    ("834", "860"): {0: (16, 8), 1: (20, 10), 2: (110, 55)},
    ("860", "836"): {0: (30, 15), 1: (10, 6), 2: (42, 22)},
    ("836", "840"): {0: (18, 9), 1: (22, 11)},
    ("862", "838"): {1: (28, 14)},
    ("842", "844"): {0: (9, 5)},
    ("844", "846"): {1: (25, 12), 2: (20, 11)},
    ("846", "848"): {1: (23, 11)},
}
CAPS = {"844": 100, "848": 150}


def base_loads(names):
    loads = {}

    def add(name, phase, kw, kvar):
        bus = names[name]
        s = loads.setdefault(bus, [[0.0, 0.0] for _ in range(3)])
        s[phase][0] += kw / 1000.0
        s[phase][1] += kvar / 1000.0

    for name, per_phase in SPOT.items():
        for p, (kw, kvar) in enumerate(per_phase):
            add(name, p, kw, kvar)
    for (_, to), per_phase in DISTRIBUTED.items():
        for p, (kw, kvar) in per_phase.items():
            add(to, p, kw, kvar)
    for name, kvar in CAPS.items():
        for p in range(3):
            add(name, p, 0.0, -kvar)
    return [{"bus": b, "s": s} for b, s in sorted(loads.items())]


def scenario(name, note, events, sensors=(7, 19, 31), duration_s=10.0, seed=34,
             extra_loads=(), **kw):
    names = {b["name"]: b["id"] for b in json.load(open(FEEDER))["buses"]}
    loads = base_loads(names) + list(extra_loads)
    doc = {
        "name": name,
        "note": note,
        "feeder": "../feeders/ieee34.feeder",
        "duration_s": duration_s,
        "seed": seed,
        "noise_sigma": kw.get("noise_sigma", 1e-4),
        "source_v": kw.get("source_v", 1.05),
        "load_scale": kw.get("load_scale", 1.0),
        "beta_profile": kw.get("beta_profile", [{"start_k": 0, "drift_hz": 0.0}]),
        "sensors": list(sensors),
        "loads": loads,
        "events": events,
    }
    with open(os.path.join(HERE, name + ".json"), "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def main():
    slgf = [
        {"kind": "slg_fault", "line": "25-26", "phases": "a", "start_k": 240, "end_k": 600, "magnitude": 10.0},
        {"kind": "fuse_open", "line": "25-26", "phases": "a", "start_k": 600, "end_k": 1200},
    ]
    timing = "Fault and fuse timings are illustrative."
    scenario("quiet", "No events, no noise.", [], noise_sigma=0.0)
    scenario("slgf", "Phase-a fault on line 25-26; the fuse opens 3 s later. " + timing, slgf)
    for tag, buses in (("minor", [7]), ("dominant", [19]), ("two", [19, 31])):
        attacks = [{"kind": "replay_attack", "bus": b, "start_k": 200, "end_k": 1199}
                   for b in buses]
        events = sorted(slgf + attacks, key=lambda e: e["start_k"])
        scenario("slgf_replay_" + tag,
                 "SLGF scenario with the uplink of sensors %s replayed from k=200." % buses,
                 events)
    scenario("loadloss24", "Loss of the load at bus 24 at k=360.",
             [{"kind": "load_loss", "bus": 24, "start_k": 360, "end_k": 1200}],
             extra_loads=[{"bus": 24, "s": [[0.15, 0.05], [0.0, 0.0], [0.0, 0.0]]}])


if __name__ == "__main__":
    main()
