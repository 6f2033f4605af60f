"""Offline reference solution for a bundled MATPOWER-style case.

Builds the polar AC-OPF from the bus admittance matrix and solves it with
SLSQP. Writes objective, voltages, dispatch and residual norms as JSON.

    python3 scripts/reference_case9.py crates/opf/data/case9.m > crates/bench/data/case9_reference.json
"""

import json
import re
import sys

import numpy as np
from scipy.optimize import minimize


def read_matrix(text, name):
    m = re.search(r"mpc\." + name + r"\s*=\s*\[(.*?)\];", text, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.split()])
    return np.array(rows)


def load(path):
    text = open(path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.]+)", text).group(1))
    return base, read_matrix(text, "bus"), read_matrix(text, "gen"), read_matrix(text, "branch"), read_matrix(text, "gencost")


def main(path):
    base, bus, gen, branch, cost = load(path)
    nb, ng = len(bus), len(gen)
    idx = {int(b): i for i, b in enumerate(bus[:, 0])}
    f = np.array([idx[int(v)] for v in branch[:, 0]])
    t = np.array([idx[int(v)] for v in branch[:, 1]])
    ys = 1.0 / (branch[:, 2] + 1j * branch[:, 3])
    bc = branch[:, 4]
    yff = ys + 0.5j * bc
    yft = -ys
    Y = np.zeros((nb, nb), complex)
    for k in range(len(branch)):
        Y[f[k], f[k]] += yff[k]
        Y[t[k], t[k]] += yff[k]
        Y[f[k], t[k]] += yft[k]
        Y[t[k], f[k]] += yft[k]
    Y += np.diag((bus[:, 4] + 1j * bus[:, 5]) / base)
    sd = (bus[:, 2] + 1j * bus[:, 3]) / base
    gbus = np.array([idx[int(v)] for v in gen[:, 0]])
    rate = np.where(branch[:, 5] > 0, branch[:, 5], 1e4) / base
    ref = int(np.where(bus[:, 1] == 3)[0][0])
    c2, c1, c0 = cost[:, 4], cost[:, 5], cost[:, 6]

    def unpack(z):
        va, vm = z[:nb], z[nb:2 * nb]
        pg, qg = z[2 * nb:2 * nb + ng], z[2 * nb + ng:]
        return va, vm, pg, qg

    def objective(z):
        pg = unpack(z)[2] * base
        return float(np.sum(c2 * pg ** 2 + c1 * pg + c0))

    def voltages(z):
        va, vm, _, _ = unpack(z)
        return vm * np.exp(1j * va)

    def balance(z):
        _, _, pg, qg = unpack(z)
        v = voltages(z)
        sg = np.zeros(nb, complex)
        np.add.at(sg, gbus, pg + 1j * qg)
        mis = v * np.conj(Y @ v) - (sg - sd)
        return np.concatenate([mis.real, mis.imag])

    def flows(z):
        v = voltages(z)
        i_f = yff * v[f] + yft * v[t]
        i_t = yft * v[f] + yff * v[t]
        return v[f] * np.conj(i_f), v[t] * np.conj(i_t)

    def thermal(z):
        sf, st = flows(z)
        return np.concatenate([rate ** 2 - np.abs(sf) ** 2, rate ** 2 - np.abs(st) ** 2])

    bounds = []
    for i in range(nb):
        bounds.append((0.0, 0.0) if i == ref else (-np.pi, np.pi))
    bounds += [(b[12], b[11]) for b in bus]
    bounds += [(g[9] / base, g[8] / base) for g in gen]
    bounds += [(g[4] / base, g[3] / base) for g in gen]
    z0 = np.concatenate([np.zeros(nb), np.ones(nb), 0.5 * (gen[:, 8] + gen[:, 9]) / base, np.zeros(ng)])
    res = minimize(
        objective,
        z0,
        method="SLSQP",
        bounds=bounds,
        constraints=[{"type": "eq", "fun": balance}, {"type": "ineq", "fun": thermal}],
        options={"ftol": 1e-12, "maxiter": 1000},
    )
    va, vm, pg, qg = unpack(res.x)
    out = {
        "case": path.split("/")[-1],
        "solver": "scipy SLSQP on the bus-admittance polar formulation",
        "success": bool(res.success),
        "objective": objective(res.x),
        "balance_residual": float(np.linalg.norm(balance(res.x))),
        "thermal_violation": float(max(0.0, -thermal(res.x).min())),
        "vm": vm.tolist(),
        "va": va.tolist(),
        "pg": pg.tolist(),
        "qg": qg.tolist(),
    }
    json.dump(out, sys.stdout, indent=2)
    print()


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/opf/data/case9.m")
