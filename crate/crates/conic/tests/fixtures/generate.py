"""Regenerates random_sdp.json: random feasible block SDPs and strongly
infeasible ones, in the solver's JSON dump format, with optima computed by
CVXOPT and cross-checked against Clarabel (via cvxpy).

Run from this directory:  python3 generate.py
"""
import json
import numpy as np
import cvxpy as cp

rng = np.random.default_rng(20240611)


def rand_sym(d, density=0.6):
    m = rng.normal(size=(d, d)) * (rng.random((d, d)) < density)
    return np.round((m + m.T) / 2, 6)


def rand_pd(d):
    g = rng.normal(size=(d, d))
    return g @ g.T / d + 0.1 * np.eye(d)


def triplets(block, m):
    out = []
    d = m.shape[0]
    for col in range(d):
        for row in range(col + 1):
            v = float(m[row, col])
            if v != 0.0:
                out.append({"block": block, "row": row, "col": col, "value": v})
    return out


def dump(dims, c_blocks, rows, b):
    return {
        "block_dims": dims,
        "block_labels": [f"b{j}" for j in range(len(dims))],
        "objective_offset": 0.0,
        "objective": [t for j, c in enumerate(c_blocks) for t in triplets(j, c)],
        "constraints": [
            {"label": f"r{i}", "b": float(b[i]),
             "entries": [t for j, a in enumerate(row) if a is not None for t in triplets(j, a)]}
            for i, row in enumerate(rows)
        ],
    }


def random_rows(dims, m):
    rows = []
    for _ in range(m):
        row = []
        for d in dims:
            row.append(rand_sym(d) if rng.random() < 0.7 else None)
        if all(a is None for a in row):
            j = int(rng.integers(len(dims)))
            row[j] = rand_sym(dims[j], 1.0)
        rows.append(row)
    return rows


def cvx_solve(dims, c_blocks, rows, b, solver):
    xs = [cp.Variable((d, d), symmetric=True) for d in dims]
    cons = [x >> 0 for x in xs]
    for i, row in enumerate(rows):
        cons.append(sum(cp.trace(a @ xs[j]) for j, a in enumerate(row) if a is not None) == b[i])
    obj = sum(cp.trace(c @ x) for c, x in zip(c_blocks, xs))
    prob = cp.Problem(cp.Minimize(obj), cons)
    if solver == cp.CVXOPT:
        attempts = [{"abstol": t, "reltol": t, "feastol": t} for t in (1e-10, 1e-9, 1e-8)]
    else:
        attempts = [{"tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10, "tol_feas": 1e-10}]
    for kw in attempts:
        try:
            prob.solve(solver=solver, **kw)
            return prob.status, prob.value
        except cp.error.SolverError:
            continue
    return "solver_error", None


def feasible_instance(k):
    nblocks = int(rng.integers(1, 5))
    dims = [int(rng.integers(1, 6)) for _ in range(nblocks)]
    nvars = sum(d * (d + 1) // 2 for d in dims)
    m = int(rng.integers(1, max(2, nvars // 2) + 1))
    rows = random_rows(dims, m)
    x0 = [rand_pd(d) for d in dims]
    b = np.array([sum(np.sum(a * x0[j]) for j, a in enumerate(r) if a is not None) for r in rows])
    y0 = rng.normal(size=m)
    s0 = [rand_pd(d) for d in dims]
    c_blocks = []
    for j, d in enumerate(dims):
        c = s0[j].copy()
        for i, r in enumerate(rows):
            if r[j] is not None:
                c += y0[i] * r[j]
        c_blocks.append(np.round(c, 6))
    b = np.round(b, 6)
    st1, v1 = cvx_solve(dims, c_blocks, rows, b, cp.CVXOPT)
    st2, v2 = cvx_solve(dims, c_blocks, rows, b, cp.CLARABEL)
    assert st1 == "optimal" and st2 == "optimal", (st1, st2)
    assert abs(v1 - v2) <= 1e-8 * (1 + abs(v1)), (v1, v2)
    return {"name": f"random_{k:02d}", "expected_status": "OPTIMAL",
            "optimum": v1, "clarabel_optimum": v2,
            "problem": dump(dims, c_blocks, rows, b)}


def infeasible_instance(k):
    nblocks = int(rng.integers(1, 4))
    dims = [int(rng.integers(1, 5)) for _ in range(nblocks)]
    m = int(rng.integers(2, 6))
    rows = random_rows(dims, m - 1)
    y = rng.normal(size=m)
    y[-1] = abs(y[-1]) + 0.5
    last = []
    for j, d in enumerate(dims):
        acc = -rand_pd(d)
        for i, r in enumerate(rows):
            if r[j] is not None:
                acc -= y[i] * r[j]
        last.append(np.round(acc / y[-1], 6))
    rows.append(last)
    b = np.round(rng.normal(size=m), 6)
    # enforce b'y > 0 by adjusting the last rhs
    b[-1] = np.round((1.0 - b[:-1] @ y[:-1]) / y[-1], 6)
    c_blocks = [rand_sym(d) for d in dims]
    st, _ = cvx_solve(dims, c_blocks, rows, b, cp.CLARABEL)
    assert st == "infeasible", st
    return {"name": f"infeasible_{k:02d}", "expected_status": "PRIMAL_INFEASIBLE",
            "optimum": None, "clarabel_optimum": None,
            "problem": dump(dims, c_blocks, rows, b)}


cases = [feasible_instance(k) for k in range(20)] + [infeasible_instance(k) for k in range(4)]
with open("random_sdp.json", "w") as f:
    json.dump(cases, f, indent=1)
print("wrote", len(cases), "cases")
