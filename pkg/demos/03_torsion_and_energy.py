"""Metric classes, minimal torsion potentials, and the four energies."""

from hermicone import (
    HermitianMetric,
    build_bundle,
    catalog,
    eval_F,
    eval_F_tilde,
    eval_G,
    eval_H,
    predicates,
    torsion_gamma,
    torsion_rho,
)
from hermicone.errors import NotBalanced, NotSKT

for name in ("torus2", "kodaira_thurston", "iwasawa"):
    model = catalog(name)
    b = build_bundle(model, HermitianMetric.identity(model.n))
    p = predicates(b)
    print(f"{name}: kahler={p.is_kahler}, pluriclosed={p.is_skt}, "
          f"balanced={p.is_balanced}")

# On the kodaira_thurston model every invariant metric is pluriclosed
# but none is Kahler, so the torsion 2-form rho is nonzero.
kt = build_bundle(catalog("kodaira_thurston"), HermitianMetric.identity(2))
rho = torsion_rho(kt)
print("\n||rho||^2 =", rho.norm_sq, " residual:", rho.residual_equation)
print("F  =", eval_F(kt).value)
print("Ft =", eval_F_tilde(kt, HermitianMetric.identity(2)).value)
print("H  =", eval_H(kt, kt).value)

# the dual story on iwasawa: balanced but never pluriclosed
iw = build_bundle(catalog("iwasawa"), HermitianMetric.identity(3))
gamma = torsion_gamma(iw)
print("\n||Gamma||^2 =", gamma.norm_sq)
print("G =", eval_G(iw).value)

# each energy is gated by its predicate and refuses the wrong cone
try:
    eval_F(iw)
except NotSKT as exc:
    print("\neval_F on iwasawa:", exc)
try:
    eval_G(kt)
except NotBalanced as exc:
    print("eval_G on kodaira_thurston:", exc)

# scaling: F is homogeneous of degree n, the normalized energy is ray-invariant
lam = 2.0
scaled = build_bundle(catalog("kodaira_thurston"), kt.metric.scaled(lam))
print("\nF(2 omega) / F(omega) =", eval_F(scaled).value / eval_F(kt).value,
      " (expect", lam ** kt.n, ")")
print("Ftilde(2 omega) =", eval_F_tilde(scaled, HermitianMetric.identity(2)).value,
      " (unchanged)")
