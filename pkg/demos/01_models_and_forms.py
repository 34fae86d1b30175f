"""Tour of the built-in models and the constant-coefficient form calculus."""

import numpy as np

from hermicone import Form, algebra_for, catalog, catalog_names, random_form, validate_model, wedge

# Every model is a complex dimension n plus structure terms for d(theta^i).
# The catalog ships four: two flat tori and two nilmanifold-style examples.
for name in catalog_names():
    model = catalog(name)
    report = validate_model(model)
    print(f"{name}: n={model.n}, terms={len(model.terms)}, "
          f"integrable={report.integrable}, unimodular={report.unimodular}")

# The iwasawa model has a single holomorphic structure term,
# d(theta^3) = -theta^1 ^ theta^2; its conjugate is implied.
iw = catalog("iwasawa")
print("\niwasawa structure terms:", iw.terms)

alg = algebra_for(iw)
theta3 = Form.monomial(3, (2,), ())  # indices are 0-based inside forms
print("d(theta^3) entries:", alg.d_form(theta3).to_entries())

# d squared vanishes on anything, here on a random mixed-degree form
rng = np.random.default_rng(0)
u = random_form(3, [(1, 1), (2, 0)], rng)
print("max |d(d u)| =", alg.d_form(alg.d_form(u)).max_abs())

# wedge is graded-commutative; the (p,q) split of d gives del and dbar
a = random_form(3, [(1, 0)], rng)
b = random_form(3, [(0, 1)], rng)
print("max |a^b + b^a| =", (wedge(a, b) + wedge(b, a)).max_abs())
split = alg.del_form(u) + alg.dbar_form(u)
print("max |d u - (del u + dbar u)| =", (alg.d_form(u) - split).max_abs())

# integration pairs the top (n,n) coefficient against the unit volume
print("integral of Theta =", alg.integrate(alg.theta_form()))
