"""
Linear stability of the flat layer.

1. Evaluate the closed-form growth rates lambda_k for k = 0..20.
2. Cross-check the first few against an independent finite-difference
   solve of the modal boundary value problems.
3. Find the smallest surface tension gamma for which every mode decays.
"""
from tumorstrip import REFERENCE_PARAMS, make_state
from tumorstrip.spectrum import gamma_threshold, lambda_k, spectrum, tail_ratio

params = REFERENCE_PARAMS
state = make_state(params)

report = spectrum(state, params.gamma, 20, oracle_k=4, oracle_ny=1024)
print(" k      lambda_k          oracle         rel err")
for k, lam in enumerate(report.lambdas):
    if k < report.oracle_lambdas.size:
        orc = report.oracle_lambdas[k]
        print(f"{k:2d}  {lam:14.8f}  {orc:14.8f}  {abs(orc - lam) / lam:10.2e}")
    else:
        print(f"{k:2d}  {lam:14.8f}")
print(f"all positive: {report.all_positive} (smallest {report.min_lambda:.6f} at k={report.argmin})")
print()

# surface tension dominates at high frequency: lambda_k / (k^3 tanh(rho* k)) -> gamma
for k in (10, 100, 1000):
    print(f"k={k:5d}  lambda_k / (k^3 tanh(rho* k)) - gamma = {tail_ratio(state, params.gamma, k) - params.gamma:.3e}")
print()

res = gamma_threshold(state)
print(f"stability threshold gamma_min = {res.gamma_min:.10f}")
print(f"bracket [{res.bracket_lo:.12f}, {res.bracket_hi:.12f}], {res.iterations} bisections")
for g in (0.9 * res.gamma_min, 1.1 * res.gamma_min):
    print(f"gamma = {g:.4f}: lambda_1 = {float(lambda_k(state, g, 1)):+.6f}")
