#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates ieee34.feeder and ieee123.feeder from the published IEEE
distribution test feeder line and configuration tables.

Impedances are ohm/mile, shunt susceptances uS/mile, lengths in feet.
Series and shunt admittances are written in siemens, referred to the voltage
base of the line's from-bus.
"""
import json
import math
import pathlib

import numpy as np

FT_PER_MILE = 5280.0
PH = "abc"


def sym(upper):
    m = np.zeros((3, 3), dtype=complex)
    for (i, j), v in upper.items():
        m[i, j] = v
        m[j, i] = v
    return m


def line_entry(frm, to, phases, z_mile, b_mile, length_ft, rating, kind="line"):
    miles = length_ft / FT_PER_MILE
    idx = [PH.index(p) for p in phases]
    z = z_mile[np.ix_(idx, idx)] * miles
    y = np.zeros((3, 3), dtype=complex)
    y[np.ix_(idx, idx)] = np.linalg.inv(z)
    sh = np.zeros((3, 3), dtype=complex)
    sh[np.ix_(idx, idx)] = 1j * b_mile[np.ix_(idx, idx)] * 1e-6 * miles
    return {
        "id": f"{frm}-{to}",
        "from": frm,
        "to": to,
        "phases": phases,
        "kind": kind,
        "series": [[[v.real, v.imag] for v in row] for row in y],
        "shunt": [[[v.real, v.imag] for v in row] for row in sh],
        "rating_amps": rating,
    }


def transformer_entry(frm, to, kva, r_pct, x_pct, kv_from, base_mva, rating):
    z_pu = complex(r_pct, x_pct) / 100.0 * (base_mva * 1000.0 / kva)
    z_ohm = z_pu * kv_from**2 / base_mva
    y = np.eye(3, dtype=complex) / z_ohm
    return {
        "id": f"{frm}-{to}",
        "from": frm,
        "to": to,
        "phases": "abc",
        "kind": "transformer",
        "series": [[[v.real, v.imag] for v in row] for row in y],
        "shunt": [[[0.0, 0.0]] * 3 for _ in range(3)],
        "rating_amps": rating,
    }


def ieee34():
    z300 = sym({(0, 0): 1.3368 + 1.3343j, (0, 1): 0.2101 + 0.5779j, (0, 2): 0.2130 + 0.5015j,
                (1, 1): 1.3238 + 1.3569j, (1, 2): 0.2066 + 0.4591j, (2, 2): 1.3294 + 1.3471j})
    b300 = sym({(0, 0): 5.3350, (0, 1): -1.5313, (0, 2): -0.9943,
                (1, 1): 5.0979, (1, 2): -0.6212, (2, 2): 4.8880})
    z301 = sym({(0, 0): 1.9300 + 1.4115j, (0, 1): 0.2327 + 0.6442j, (0, 2): 0.2359 + 0.5691j,
                (1, 1): 1.9157 + 1.4281j, (1, 2): 0.2288 + 0.5238j, (2, 2): 1.9219 + 1.4209j})
    b301 = sym({(0, 0): 5.1207, (0, 1): -1.4364, (0, 2): -0.9402,
                (1, 1): 4.9055, (1, 2): -0.5951, (2, 2): 4.7154})
    z302 = np.eye(3) * (2.7995 + 1.4855j)
    b302 = np.eye(3) * 4.2251
    z304 = np.eye(3) * (1.9217 + 1.4212j)
    b304 = np.eye(3) * 4.3637
    cfg = {300: (z300, b300, "abc", 230.0), 301: (z301, b301, "abc", 180.0),
           302: (z302, b302, "a", 140.0), 303: (z302, b302, "b", 140.0),
           304: (z304, b304, "b", 180.0)}
    # Depth-first numbering along the feeder starting at the substation.
    order = [800, 802, 806, 808, 810, 812, 814, 850, 816, 818, 820, 822, 824, 826,
             828, 830, 854, 856, 852, 832, 888, 890, 858, 864, 834, 842, 844, 846,
             848, 860, 836, 840, 862, 838]
    num = {name: i + 1 for i, name in enumerate(order)}
    segs = [(800, 802, 2580, 300), (802, 806, 1730, 300), (806, 808, 32230, 300),
            (808, 810, 5804, 303), (808, 812, 37500, 300), (812, 814, 29730, 300),
            (814, 850, 10, 301, "regulator"), (816, 818, 1710, 302), (816, 824, 10210, 301),
            (818, 820, 48150, 302), (820, 822, 13740, 302), (824, 826, 3030, 303),
            (824, 828, 840, 301), (828, 830, 20440, 301), (830, 854, 520, 301),
            (832, 858, 4900, 301), (834, 860, 2020, 301), (834, 842, 280, 301),
            (836, 840, 860, 301), (836, 862, 280, 301), (842, 844, 1350, 301),
            (844, 846, 3640, 301), (846, 848, 530, 301), (850, 816, 310, 301),
            (852, 832, 10, 301, "regulator"), (854, 856, 23330, 303), (854, 852, 36830, 301),
            (858, 864, 1620, 302), (858, 834, 5830, 301), (860, 836, 2680, 301),
            (862, 838, 4860, 304), (888, 890, 10560, 300)]
    base_mva = 1.0
    buses = []
    for name in order:
        kv = 4.16 if name in (888, 890) else 24.9
        buses.append({"id": num[name], "name": str(name), "kv_base": kv,
                      "type": "slack" if name == 800 else "pq"})
    lines = []
    for s in segs:
        frm, to, ft, c = s[:4]
        kind = s[4] if len(s) > 4 else "line"
        z, b, phases, amps = cfg[c]
        lines.append(line_entry(num[frm], num[to], phases, z, b, ft, amps, kind))
    lines.append(transformer_entry(num[832], num[888], 500.0, 1.9, 4.08, 24.9, base_mva,
                                   500.0 / (math.sqrt(3) * 24.9)))
    lines.sort(key=lambda l: (l["from"], l["to"]))
    return {"name": "ieee34", "base_mva": base_mva, "slack": num[800],
            "buses": buses, "lines": lines}


def ieee123():
    z1 = sym({(0, 0): 0.4576 + 1.0780j, (0, 1): 0.1560 + 0.5017j, (0, 2): 0.1535 + 0.3849j,
              (1, 1): 0.4666 + 1.0482j, (1, 2): 0.1580 + 0.4236j, (2, 2): 0.4615 + 1.0651j})
    b1 = sym({(0, 0): 5.6765, (0, 1): -1.8319, (0, 2): -0.6982,
              (1, 1): 5.9809, (1, 2): -1.1645, (2, 2): 5.3971})
    # Configurations 2..6 are the same overhead geometry with rotated phasing;
    # the string lists which phase occupies conductor positions 1, 2, 3.
    positions = {1: "abc", 2: "cab", 3: "bca", 4: "cba", 5: "bac", 6: "acb"}
    cfg = {}
    for c, pos in positions.items():
        p = [pos.index(ph) for ph in PH]
        cfg[c] = (z1[np.ix_(p, p)], b1[np.ix_(p, p)], "abc", 530.0)
    z7 = sym({(0, 0): 0.4576 + 1.0780j, (0, 2): 0.1535 + 0.3849j, (2, 2): 0.4615 + 1.0651j})
    b7 = sym({(0, 0): 5.1154, (0, 2): -1.0549, (2, 2): 5.1704})
    z8 = sym({(0, 0): 0.4576 + 1.0780j, (0, 1): 0.1535 + 0.3849j, (1, 1): 0.4615 + 1.0651j})
    b8 = sym({(0, 0): 5.1154, (0, 1): -1.0549, (1, 1): 5.1704})
    cfg[7] = (z7, b7, "ac", 530.0)
    cfg[8] = (z8, b8, "ab", 530.0)
    zs = np.eye(3) * (1.3292 + 1.3475j)
    bs = np.eye(3) * 4.5193
    cfg[9] = (zs, bs, "a", 230.0)
    cfg[10] = (zs, bs, "b", 230.0)
    cfg[11] = (zs, bs, "c", 230.0)
    z12 = sym({(0, 0): 1.5209 + 0.7521j, (0, 1): 0.5198 + 0.2775j, (0, 2): 0.4924 + 0.0136j,
               (1, 1): 1.5329 + 0.7162j, (1, 2): 0.5198 + 0.2775j, (2, 2): 1.5209 + 0.7521j})
    b12 = np.eye(3) * 67.2242
    cfg[12] = (z12, b12, "abc", 310.0)
    segs = """1 2 175 10;1 3 250 11;1 7 300 1;3 4 200 11;3 5 325 11;5 6 250 11;7 8 200 1;
    8 12 225 10;8 9 225 9;8 13 300 1;9 14 425 9;13 34 150 11;13 18 825 2;14 11 250 9;
    14 10 250 9;15 16 375 11;15 17 350 11;18 19 250 9;18 21 300 2;19 20 325 9;21 22 525 10;
    21 23 250 2;23 24 550 11;23 25 275 2;25 26 350 7;25 28 200 2;26 27 275 7;26 31 225 11;
    27 33 500 9;28 29 300 2;29 30 350 2;30 250 200 2;31 32 300 11;34 15 100 11;35 36 650 8;
    35 40 250 1;36 37 300 9;36 38 250 10;38 39 325 10;40 41 325 11;40 42 250 1;42 43 500 10;
    42 44 200 1;44 45 200 9;44 47 250 1;45 46 300 9;47 48 150 4;47 49 250 4;49 50 250 4;
    50 51 250 4;52 53 200 1;53 54 125 1;54 55 275 1;54 57 350 3;55 56 275 1;57 58 250 10;
    57 60 750 3;58 59 250 10;60 61 550 5;60 62 250 12;62 63 175 12;63 64 350 12;64 65 425 12;
    65 66 325 12;67 68 200 9;67 72 275 3;67 97 250 3;68 69 275 9;69 70 325 9;70 71 275 9;
    72 73 275 11;72 76 200 3;73 74 350 11;74 75 400 11;76 77 400 6;76 86 700 3;77 78 100 6;
    78 79 225 6;78 80 475 6;80 81 475 6;81 82 250 6;81 84 675 11;82 83 250 6;84 85 475 11;
    86 87 450 6;87 88 175 9;87 89 275 6;89 90 225 10;89 91 225 6;91 92 300 11;91 93 225 6;
    93 94 275 9;93 95 300 6;95 96 200 10;97 98 275 3;98 99 550 3;99 100 300 3;100 450 800 3;
    101 102 225 11;101 105 275 3;102 103 325 11;103 104 700 11;105 106 225 10;105 108 325 3;
    106 107 575 10;108 109 450 9;108 300 1000 3;109 110 300 9;110 111 575 9;110 112 125 9;
    112 113 525 9;113 114 325 9;135 35 375 4;149 1 400 1;152 52 400 1;160 67 350 6;
    197 101 250 3"""
    lines = []
    names = set()
    for tok in segs.replace("\n", " ").split(";"):
        frm, to, ft, c = (int(x) for x in tok.split())
        z, b, phases, amps = cfg[c]
        lines.append(line_entry(frm, to, phases, z, b, ft, amps))
        names.update((frm, to))
    # Regulator 1 and the closed sectionalizing switches are short three-phase
    # segments; the normally-open ties to the alternate-source buses are kept
    # as dangling switch segments so those buses stay on the model.
    for frm, to, kind in [(150, 149, "regulator"), (13, 152, "switch"), (18, 135, "switch"),
                          (60, 160, "switch"), (97, 197, "switch"), (300, 151, "switch"),
                          (250, 251, "switch"), (300, 350, "switch"), (450, 451, "switch")]:
        z, b, phases, amps = cfg[1]
        lines.append(line_entry(frm, to, phases, z, b, 10.0, amps, kind))
        names.update((frm, to))
    base_mva = 1.0
    lines.append(transformer_entry(61, 610, 150.0, 1.27, 2.72, 4.16, base_mva,
                                   150.0 / (math.sqrt(3) * 4.16)))
    names.add(610)
    buses = [{"id": n, "name": str(n), "kv_base": 0.48 if n == 610 else 4.16,
              "type": "slack" if n == 150 else "pq"} for n in sorted(names)]
    lines.sort(key=lambda l: (l["from"], l["to"]))
    return {"name": "ieee123", "base_mva": base_mva, "slack": 150,
            "buses": buses, "lines": lines}


if __name__ == "__main__":
    here = pathlib.Path(__file__).resolve().parent
    for fn, data in (("ieee34.feeder", ieee34()), ("ieee123.feeder", ieee123())):
        (here / fn).write_text(json.dumps(data, indent=1) + "\n")
        print(fn, len(data["buses"]), "buses", len(data["lines"]), "lines")
