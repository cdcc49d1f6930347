"""Calibrate noise between two mixture priors and check it with an exact audit.

The second part shows a light, distant component that defeats the weighted
transport bound: the audit reports a delta well above the target.
"""

from pufferfish import (
    DiscriminativePair,
    Gmm1D,
    LaplaceNoise,
    PriorBelief,
    PrivacyBudget,
    audit_analytic,
    calibrate_gmm,
    solve_transport,
)

pair = DiscriminativePair("sick", "healthy")
sick = Gmm1D.from_arrays([0.6, 0.4], [140.0, 165.0], [8.0, 12.0])
healthy = Gmm1D.from_arrays([0.7, 0.3], [120.0, 135.0], [6.0, 9.0])
budget = PrivacyBudget(1.0, 0.1)

plan = solve_transport(sick, healthy)
print("transport weights\n", plan.weights.round(3))
result = calibrate_gmm([PriorBelief("clinic", {"sick": sick, "healthy": healthy})], [pair], budget)
report = audit_analytic(sick, healthy, LaplaceNoise(result.b), budget.epsilon)
print(f"b = {result.b:.4f}, audited delta = {report.delta_achieved:.4f} (target {budget.delta})")

outlier = Gmm1D.from_arrays([0.1, 0.9], [100.0, 0.0], [1.0, 1.0])
base = Gmm1D.single(0.0, 1.0)
tight = PrivacyBudget(1.0, 0.01)
result = calibrate_gmm([PriorBelief("outlier", {"sick": outlier, "healthy": base})], [pair], tight)
report = audit_analytic(outlier, base, LaplaceNoise(result.b), tight.epsilon)
print(f"light far component: b = {result.b:.4f}, audited delta = {report.delta_achieved:.4f} "
      f"(target {tight.delta})")
