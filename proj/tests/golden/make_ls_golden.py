"""Writes the n=40 least-squares golden: data, config and the
normal-equations solution computed independently with numpy."""
import json
import pathlib

import numpy as np

here = pathlib.Path(__file__).parent
rng = np.random.default_rng(20240417)
n, p, l = 40, 5, 2
beta = np.array([1.0, -0.5, 2.0, 0.8, -1.5])
x = rng.uniform(-1.0, 1.0, size=(n, l, p))
y = x @ beta + 0.3 * rng.standard_normal((n, l))

with open(here / "ls_data.csv", "w") as f:
    f.write("unit_id,k,y," + ",".join(f"x{j + 1}" for j in range(p)) + "\n")
    for i in range(n):
        for k in range(l):
            row = [repr(float(v)) for v in x[i, k]]
            f.write(f"{i + 1},{k + 1},{float(y[i, k])!r}," + ",".join(row) + "\n")

design = x.reshape(n * l, p)
gram = design.T @ design
rhs = design.T @ y.reshape(n * l)
coef = np.linalg.solve(gram, rhs)

config = {"link": "identity", "penalty": "scad", "m_set": [1], "lambda": 0.0,
          "solver": {"tol": 1e-12}}
(here / "ls_config.json").write_text(json.dumps(config, indent=2) + "\n")
(here / "ls_expected.json").write_text(
    json.dumps({"coefficients": [float(c) for c in coef]}, indent=2) + "\n")
