"""
Rate allocation in Jackson networks
===================================

Each node splits its traffic over classes; queue delays couple the nodes
through the routing matrices. The table shows how often robust proximal
runs settle on a stable robust equilibrium as routing coupling and
uncertainty grow. The second part executes every update with noisy rates.
"""
from robustacg import convergence_probability, jackson_delay_study

table = convergence_probability(range(10), [0.0, 0.5, 0.9], [0.0, 0.2, 0.7])
print("routing  eps   probability")
for deficit, eps, p in table:
    print(f"{deficit:6.1f} {eps:5.1f}   {p:.2f}")

print("\ndelay excess (%) over the nominal equilibrium under execution noise")
for seed in range(3):
    r = jackson_delay_study(seed, 0.2, max_iter=100)
    print(f"seed {seed}: gradient {r['D_gradient']:7.2f}  Jacobi {r['D_jacobi']:7.2f}  "
          f"robust {r['D_robust']:7.2f}  (robust converged: {r['robust_converged']})")
