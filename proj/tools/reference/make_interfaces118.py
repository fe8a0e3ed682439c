"""Reconstructs ten transmission interfaces on the IEEE 118-bus case.

Each interface is the boundary of a connected bus region whose boundary
lines all carry base-case power out of the region. Only the bands are
published; line sets are a best-effort reconstruction chosen so that the
base flow sits near the band centre and a useful share of randomly
perturbed operating points (the scenario-generation rule) leaves the band.

Requires PYPOWER. Usage, from the repository root:
    python3 tools/reference/make_interfaces118.py
"""

import json
import random
import re

import numpy as np
from pypower.api import case118, ppoption, runpf

BANDS = [(90, 640), (50, 360), (40, 290), (90, 640), (70, 480),
         (45, 300), (130, 880), (55, 390), (130, 880), (90, 615)]
TARGET_RATE = 0.08
SAMPLES = 300


def branches(path):
    text = open(path).read()
    body = re.search(r"mpc\.branch\s*=\s*\[(.*?)\];", text, re.S).group(1)
    out = []
    for row in body.strip().splitlines():
        cols = row.replace(";", "").split()
        if cols and int(float(cols[10])) == 1:
            out.append((int(cols[0]), int(cols[1])))
    return out


def perturbed_flows(rng):
    """Sending-end line flows of converged perturbed operating points."""
    base = case118()
    opt = ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-8)
    grid = [k / 10 for k in range(1, 21)]
    loads = [i for i in range(base["bus"].shape[0]) if base["bus"][i, 2] != 0 or base["bus"][i, 3] != 0]
    slack_bus = base["bus"][base["bus"][:, 1] == 3, 0][0]
    gens = [g for g in range(base["gen"].shape[0])
            if base["gen"][g, 0] != slack_bus and base["gen"][g, 8] > base["gen"][g, 9] and base["gen"][g, 1] > 0]
    out = []
    while len(out) < SAMPLES:
        ppc = case118()
        for i in rng.sample(loads, round(0.25 * len(loads))):
            m = rng.choice(grid)
            ppc["bus"][i, 2] *= m
            ppc["bus"][i, 3] *= m
        for g in rng.sample(gens, round(0.25 * len(gens))):
            ppc["gen"][g, 1] = min(max(ppc["gen"][g, 1] * rng.choice(grid), ppc["gen"][g, 9]), ppc["gen"][g, 8])
        res, ok = runpf(ppc, opt)
        if ok:
            out.append(res["branch"][:, 13].copy())
    return np.array(out)


def main():
    lines = branches("data/cases/ieee118.m")
    flows = json.load(open("tests/fixtures/ieee118_pf.json"))["line_p_from_mw"]
    buses = sorted({b for l in lines for b in l})
    adj = {b: set() for b in buses}
    for f, t in lines:
        adj[f].add(t)
        adj[t].add(f)

    rng = random.Random(118)
    candidates = {}
    for _ in range(100000):
        region = {rng.choice(buses)}
        size = rng.randint(2, 60)
        while len(region) < size:
            frontier = sorted({n for b in region for n in adj[b]} - region)
            if not frontier:
                break
            region.add(rng.choice(frontier))
        members, total, ok = [], 0.0, True
        for k, (f, t) in enumerate(lines):
            if (f in region) == (t in region):
                continue
            sign = 1 if f in region else -1
            if sign * flows[k] <= 1.0:
                ok = False
                break
            members.append((k + 1, sign))
            total += sign * flows[k]
        if ok and 2 <= len(members) <= 6:
            candidates[tuple(sorted(members))] = total

    samples = perturbed_flows(random.Random(7))

    def rate(c, lo, hi):
        p = sum(s * samples[:, l - 1] for l, s in c)
        return float(np.mean((p < lo) | (p > hi)))

    used, chosen, result = set(), set(), []
    for i, (lo, hi) in enumerate(BANDS):
        mid = 0.5 * (lo + hi)
        near = [c for c in candidates if c not in chosen and lo < candidates[c] < hi and abs(candidates[c] - mid) < 0.5 * mid]
        best = min(near, key=lambda c: abs(rate(c, lo, hi) - TARGET_RATE) + 0.2 * abs(candidates[c] - mid) / mid
                   + 0.02 * len(set(l for l, _ in c) & used))
        chosen.add(best)
        used |= {l for l, _ in best}
        result.append({
            "id": f"phi{i + 1}",
            "lines": [{"line_id": l, "sign": s} for l, s in best],
            "sigma_minus": lo,
            "sigma_plus": hi,
        })
        print(f"phi{i + 1}: base {candidates[best]:.1f} MW, band [{lo}, {hi}], "
              f"out-of-band rate {rate(best, lo, hi):.3f}, lines {[l for l, _ in best]}")
    with open("data/interfaces/ieee118.json", "w") as fh:
        json.dump(result, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
