#!/usr/bin/env python3
"""Regenerate the standard case files and reference power-flow fixtures.

Requires PYPOWER (pip install pypower). The C++ build never depends on this
script; its outputs are checked in under data/cases and tests/fixtures.

Reference semantics mirror the library: Newton-Raphson, 1e-8 p.u. mismatch,
non-slack PV buses switched to PQ with Q held at the violated limit until no
PV bus violates its reactive range.
"""
import json
import os
import sys

import numpy as np
from pypower.api import case14, case118, ppoption, runpf
from pypower.makeYbus import makeYbus
from pypower.ext2int import ext2int

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))


def write_matpower(path, name, ppc):
    def block(label, rows, fmt):
        out = ["mpc.%s = [" % label]
        for r in rows:
            out.append("\t" + "\t".join(fmt(v) for v in r) + ";")
        out.append("];")
        return "\n".join(out)

    def num(v):
        return ("%d" % v) if float(v).is_integer() else repr(float(v))

    text = [
        "function mpc = %s" % name,
        "%% %s  Power flow data for the %s test case." % (name.upper(), name),
        "",
        "%% MATPOWER Case Format : Version 2",
        "mpc.version = '2';",
        "",
        "%%-----  Power Flow Data  -----%%",
        "%% system MVA base",
        "mpc.baseMVA = %s;" % num(ppc["baseMVA"]),
        "",
        "%% bus data",
        "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
        block("bus", ppc["bus"][:, :13], num),
        "",
        "%% generator data",
        "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin",
        block("gen", ppc["gen"][:, :10], num),
        "",
        "%% branch data",
        "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
        block("branch", ppc["branch"][:, :13], num),
        "",
        "%%-----  OPF Data  -----%%",
        "%% generator cost data",
        "%\t1\tstartup\tshutdown\tn\tx1\ty1\t...\txn\tyn",
        "%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0",
        block("gencost", ppc["gencost"], num),
        "",
    ]
    with open(path, "w") as f:
        f.write("\n".join(text))


def solve_with_q_limits(ppc):
    ppc = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in ppc.items()}
    opt = ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-8, PF_MAX_IT=30, ENFORCE_Q_LIMS=0)
    rounds = 0
    while True:
        res, ok = runpf(ppc, opt)
        assert ok, "reference solve diverged"
        rounds += 1
        bus_type = {int(b[0]): int(b[1]) for b in ppc["bus"]}
        violated = []
        for k, g in enumerate(res["gen"]):
            bus = int(g[0])
            if bus_type[bus] != 2:
                continue
            if g[2] > g[3] + 1e-9:
                violated.append((k, bus, g[3]))
            elif g[2] < g[4] - 1e-9:
                violated.append((k, bus, g[4]))
        if not violated:
            return res, rounds
        for k, bus, lim in violated:
            ppc["gen"][k, 2] = lim
            row = np.where(ppc["bus"][:, 0] == bus)[0][0]
            ppc["bus"][row, 1] = 1
        ppc["bus"][:, 7] = res["bus"][:, 7]
        ppc["bus"][:, 8] = res["bus"][:, 8]


def reference(name, ppc):
    res, rounds = solve_with_q_limits(ppc)
    fix = {
        "case": name,
        "base_mva": float(ppc["baseMVA"]),
        "bus_ids": [int(b) for b in res["bus"][:, 0]],
        "vm": [float(v) for v in res["bus"][:, 7]],
        "va_rad": [float(np.deg2rad(v)) for v in res["bus"][:, 8]],
        "line_p_from_mw": [float(v) for v in res["branch"][:, 13]],
        "gen_p_mw": [float(v) for v in res["gen"][:, 1]],
        "gen_q_mvar": [float(v) for v in res["gen"][:, 2]],
        "q_limit_rounds": rounds,
    }
    with open(os.path.join(ROOT, "tests", "fixtures", "%s_pf.json" % name), "w") as f:
        json.dump(fix, f, indent=1)


def ybus(name, ppc):
    internal = ext2int(ppc)
    y, _, _ = makeYbus(internal["baseMVA"], internal["bus"], internal["branch"])
    y = y.toarray()
    with open(os.path.join(ROOT, "tests", "fixtures", "%s_ybus.json" % name), "w") as f:
        json.dump({"case": name, "g": y.real.tolist(), "b": y.imag.tolist()}, f)


def main():
    for name, ctor in (("ieee14", case14), ("ieee118", case118)):
        ppc = ctor()
        write_matpower(os.path.join(ROOT, "data", "cases", name + ".m"), name, ppc)
        reference(name, ppc)
    ybus("ieee14", case14())
    return 0


if __name__ == "__main__":
    sys.exit(main())
