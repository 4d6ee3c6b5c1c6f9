"""
Flat stationary layer.

1. Solve for the equilibrium thickness rho* of the flat layer.
2. Tabulate the nutrient and pressure profiles across the layer.
3. Check the boundary conditions the equilibrium is built from.
"""
import numpy as np

from tumorstrip import REFERENCE_PARAMS, make_state, p_star, sigma_star
from tumorstrip.stationary import p_star_prime

params = REFERENCE_PARAMS
state = make_state(params)

print(f"parameters: {params}")
print(f"alpha = sigma_bar_2 / sigma_tilde = {params.alpha():.6g}")
print(f"equilibrium thickness rho* = {state.rho_star:.15f}")
print(f"root residual              = {state.f_alpha_residual():.2e}")
print(f"pressure constants c1, c2, c3 = {state.c1:.6f}, {state.c2:.6f}, {state.c3:.6f}")
print()

print("      y      sigma*(y)     p*(y)")
for y in np.linspace(0.0, state.rho_star, 9):
    print(f"{y:8.4f}  {sigma_star(state, y):10.6f}  {p_star(state, y):10.6f}")
print()

# nutrient matches both reservoirs, pressure vanishes on the free boundary
# and the free boundary does not move
print(f"sigma*(0)      = {sigma_star(state, 0.0):.15f}  (sigma_bar_1 = {params.sigma_bar_1})")
print(f"sigma*(rho*)   = {sigma_star(state, state.rho_star):.15f}  (sigma_bar_2 = {params.sigma_bar_2})")
print(f"p*(rho*)       = {p_star(state, state.rho_star):.2e}")
print(f"p*'(rho*)      = {p_star_prime(state, state.rho_star):.2e}  (boundary velocity)")
