"""Smoke test for the Python extension.

Build it first:  pip install --no-build-isolation -e crates/py
"""

import math

import khintchine as k

rad = k.Distribution("rademacher")
gauss = k.Distribution("gaussian:2")
poisson = k.Distribution("centered-poisson:1")
sg = k.GeneratingFunction("subgaussian")

# generating functions
assert math.isclose(sg(1.7), 1.445)
assert math.isclose(sg.legendre(3.0)["value"], 4.5, rel_tol=1e-9)
assert sg.conv_class(2.0)["member"]
assert not k.GeneratingFunction("natural", rad).conv_class(2.0)["member"]

# norms
assert math.isclose(k.bphi_norm(rad, sg)["value"], 1.0, rel_tol=1e-9)
assert math.isclose(k.bphi_norm(gauss, sg)["value"], 2.0, rel_tol=1e-9)
est = k.weighted_sum_lp(rad, k.CoefficientVector.equal(2), 4.0)
assert est["method"] == "exact_enum"
assert math.isclose(est["value"], 2 ** 0.25, rel_tol=1e-12)
a = k.CoefficientVector([3.0, 4.0])
assert math.isclose(sum(x * x for x in a.entries), 1.0)

# Khintchine constants
sup = k.khinchine_sup(rad, "lp:4", n_max=8)
inf = k.khinchine_inf(rad, "lp:1", n_max=8)
assert 1.25 < sup["value"] <= 3 ** 0.25
assert inf["value"] < 1.0
assert sup["witness"]

# verification suites
assert k.verify("thm31", rad, sg, trials=50)["verdict"] == "pass"
assert k.verify("thm31", poisson, sg, trials=5)["verdict"] == "refused"
ros = k.verify("rosenthal", poisson, p=4.0, a=k.CoefficientVector.equal(16))
assert ros["verdict"] == "pass"
assert math.isclose(ros["details"]["lhs"], 3.0625 ** 0.25, rel_tol=1e-9)
try:
    k.GeneratingFunction("bad-spec")
except ValueError:
    pass
else:
    raise AssertionError("bad spec accepted")

# entropy
grid = k.MetricSpace.from_points([i / 10 for i in range(11)])
assert grid.covering_number(0.25)["count"] == 3
assert grid.dudley_integral()["value"] > 0.5
field = k.field_sup_stats([[1.0, 0.0], [0.0, 1.0]], [k.CoefficientVector([1.0])], samples=2000)
assert field["points"] == 2

print("smoke ok:", f"sup={sup['value']:.6f}", f"lhs={ros['details']['lhs']:.6f}")
