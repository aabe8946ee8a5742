"""Solve the two order-1 toy relaxations with an external SDP solver and
record their optima as a test fixture.

The exported problems are reparsed from their SDPA text and handed to
cvxpy, so the fixture certifies the file semantics end to end:
    min c.y  s.t.  sum_i y_i F_i - F_0 >= 0  per block.
"""

import json
import pathlib

import numpy as np

from ncck.poly import parse_poly
from ncck.sdp import build_relaxation, export_sdpa, parse_sdpa

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def solve_parsed(parsed):
    import cvxpy as cp

    y = cp.Variable(parsed.m)
    constraints = []
    for bno, size in enumerate(parsed.block_sizes, start=1):
        f0 = np.zeros((size, size))
        coeff = [np.zeros((size, size)) for _ in range(parsed.m)]
        for matno, blk, i, j, value in parsed.entries:
            if blk != bno:
                continue
            target = f0 if matno == 0 else coeff[matno - 1]
            target[i - 1, j - 1] += value
            if i != j:
                target[j - 1, i - 1] += value
        expr = -f0 + sum(y[v] * coeff[v] for v in range(parsed.m))
        constraints.append(expr >> 0)
    objective = cp.Minimize(parsed.objective @ y)
    problem = cp.Problem(objective, constraints)
    problem.solve(solver=cp.CLARABEL)
    return float(problem.value), problem.status


def main():
    toys = {
        "square": (parse_poly("X1^2"), []),
        "interval": (parse_poly("X1"), [parse_poly("1 - X1^2")]),
    }
    record = {}
    for name, (f, constraints) in toys.items():
        problem = build_relaxation(f, constraints, 1, n=1)
        text = export_sdpa(problem)
        optimum, status = solve_parsed(parse_sdpa(text))
        record[name] = {
            "objective": f.text(),
            "constraints": [g.text() for g in constraints],
            "order": 1,
            "solver": "cvxpy/CLARABEL",
            "status": status,
            "optimum": optimum,
            "sdpa": text,
        }
        print(f"{name}: status={status} optimum={optimum:.9f}")
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "toy_sdp_optima.json").write_text(json.dumps(record, indent=2) + "\n")
    print(f"wrote {OUT / 'toy_sdp_optima.json'}")


if __name__ == "__main__":
    main()
