"""How much Laplace noise protects one user's presence in a released sum.

Prints the tail constant for a few confidence levels, then the noise scale
needed as the number of users grows, for several prior variances.
"""

from pufferfish import PrivacyBudget, tau_star
from pufferfish.calibrate import sum_bound_curve

print("delta   exact      lambert-grid")
for delta in (0.01, 0.1, 0.3, 0.5):
    print(f"{delta:<7} {tau_star(delta, 'exact'):<10.6f} {tau_star(delta, 'lambert-grid'):.6f}")

budget = PrivacyBudget(1.0, 0.3)
print("\nnoise scale b for a sum over K users (mu = 1, eps = 1, delta = 0.3)")
for var in (1, 4, 9, 16, 25):
    curve = sum_bound_curve(1.0, var ** 0.5, budget, 50)
    shown = ", ".join(f"K={k}: {b:.3f}" for k, b in curve if k in (1, 2, 5, 10, 50))
    print(f"sigma^2 = {var:<3} {shown}")
