"""Excess-risk bound and perturbation schedule as the sample count grows.

Prints the universal constant, then a table showing the n^(-1/2) decay of
the bound and the n^(-1/4) decay of the recommended training noise.
"""

from co_pipeline import learning

print("universal constant C =", learning.constant_C())

print(f"\n{'n':>8s} {'sigma_n':>10s} {'risk bound':>12s}")
for n in (100, 400, 1600, 6400, 25600):
    params = learning.BoundParams(M=10.0, d=34, sigma=1.0, n=n, delta=0.05)
    schedule = learning.BoundParams(M=10.0, d=34, n=n)
    print(
        f"{n:8d} {learning.sigma_n(schedule):10.4f} "
        f"{learning.excess_risk_bound(params):12.4f}"
    )

# Quadrupling n halves the bound; multiplying n by 16 halves sigma_n.
b1 = learning.excess_risk_bound(learning.BoundParams(M=1.0, d=2, sigma=1.0, n=100))
b4 = learning.excess_risk_bound(learning.BoundParams(M=1.0, d=2, sigma=1.0, n=400))
print("\nbound(n) / bound(4n) =", b1 / b4)

s1 = learning.sigma_n(learning.BoundParams(M=1.0, d=2, n=100))
s16 = learning.sigma_n(learning.BoundParams(M=1.0, d=2, n=1600))
print("sigma_n(n) / sigma_n(16n) =", s1 / s16)
