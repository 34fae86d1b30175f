"""The four torsion energies: F, G, H and the normalized Ftilde.

F(omega) = ||rho_omega||^2 on SKT metrics, zero exactly on Kahler ones.
G(omega_{n-1}) = ||Gamma||^2 on balanced metrics, zero exactly on Kahler ones.
H(omega, gamma_{n-1}) = ||trace_omega(del omega)||^2 in the gamma L2 norm,
zero exactly on balanced omega, invariant under scaling of omega.
Ftilde_nu(omega) = F(omega) / (int omega ^ nu_{n-1})^n is scale invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositive
from .exterior import wedge, wedge_power
from .hodge import DEFAULT_TOL, torsion_gamma, torsion_rho


@dataclass
class FunctionalValue:
    kind: str
    value: float
    ingredients: dict


def eval_F(bundle, tol=DEFAULT_TOL):
    """SKT energy ||rho||^2 with its pure-type split."""
    rep = torsion_rho(bundle, tol)
    parts = {f"norm_sq_{p}{q}": bundle.l2_inner(rep.pure_parts[(p, q)],
                                                rep.pure_parts[(p, q)]).real
             for (p, q) in ((2, 0), (1, 1), (0, 2))}
    value = float(rep.norm_sq)
    ing = {
        "projected_source_norm": bundle.l2_norm(rep.projected_source),
        "harmonic_source_norm": bundle.l2_norm(rep.harmonic_source),
        "residual_equation": rep.residual_equation,
        "residual_kernel": rep.residual_kernel,
    }
    ing.update({k: float(v) for k, v in parts.items()})
    return FunctionalValue("F", value, ing)


def eval_G(bundle, tol=DEFAULT_TOL):
    """Balanced energy ||Gamma||^2."""
    rep = torsion_gamma(bundle, tol)
    return FunctionalValue("G", float(rep.norm_sq), {
        "projected_source_norm": bundle.l2_norm(rep.projected_source),
        "harmonic_source_norm": bundle.l2_norm(rep.harmonic_source),
        "residual_equation": rep.residual_equation,
        "residual_kernel": rep.residual_kernel,
    })


def eval_H(bundle_omega, bundle_gamma):
    """Trace energy of del(omega) measured against a second metric gamma.

    Computed as the gamma-L2 norm of trace_omega(del omega) and, as a
    cross-check, as i times the wedge integral of the two traces against
    gamma_{n-1}; both values are returned.
    """
    alg = bundle_omega.alg
    n = alg.n
    u = bundle_omega.trace_contract(alg.del_form(bundle_omega.omega))
    ubar = bundle_omega.trace_contract(alg.dbar_form(bundle_omega.omega))
    norm_form = bundle_gamma.l2_inner(u, u).real
    gamma_pow = bundle_gamma.omega_power(n - 1)
    wedge_val = 1j * alg.integrate(wedge(wedge(u, ubar), gamma_pow))
    return FunctionalValue("H", float(norm_form), {
        "wedge_form": float(wedge_val.real),
        "cross_check_residual": float(abs(norm_form - wedge_val)),
        "trace_norm": bundle_gamma.l2_norm(u),
    })


def normalization_integral(bundle, nu):
    """int omega ^ nu_{n-1} for a positive reference metric nu."""
    alg = bundle.alg
    nu_pow = wedge_power(nu.form(), alg.n - 1)
    return alg.integrate(wedge(bundle.omega, nu_pow)).real


def eval_F_tilde(bundle, nu, tol=DEFAULT_TOL):
    """Scale-invariant F / (int omega ^ nu_{n-1})^n."""
    f = eval_F(bundle, tol)
    integral = normalization_integral(bundle, nu)
    if integral <= 0:
        raise NotPositive(f"normalization integral {integral:.3e} is not positive")
    value = f.value / integral ** bundle.n
    ing = dict(f.ingredients)
    ing.update({"F": f.value, "normalization_integral": float(integral)})
    return FunctionalValue("Ftilde", float(value), ing)
