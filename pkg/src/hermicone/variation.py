"""First variations of the metric operator stack and of the torsion energies.

Every formula here differentiates along the affine metric path
omega_t = omega + t*gamma for a real (1,1) direction gamma (or, for the
codifferential energy, Omega_t = Omega + t*direction at the level of
(n-1,n-1) data, pulled back through the root map).  The building block is
the degree-preserving commutator C = [trace, gamma ^ .]; in terms of it

    d/dt star_t   = star C
    d/dt trace_t  = -(gamma ^ .)*
    d/dt delstar_t = delstar C + (-1)^(k+1) (star C star) delstar

and the Laplacian variations assemble from these by the product rule.
All matrix derivatives are exact (the model is finite dimensional); the
finite-difference harness in this module exists to cross-check them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionMismatch, DirectionNotAdmissible, KernelJump,
                     NotPositive, NotPositiveDefinite, StepTooLarge)
from .exterior import Form, conj_block_matrix, dim_pq, wedge, wedge_power
from .functionals import (eval_F, eval_F_tilde, eval_G, eval_H,
                          normalization_integral)
from .hodge import (DEFAULT_TOL, d_potential, dbar_potential, green_operator,
                    harmonic_projector, kernel_mask, root_n_minus_1,
                    torsion_gamma, torsion_rho)
from .metric import HermitianMetric, bundle_for_algebra, random_metric
from .model import algebra_for

FD_REL_STEP = 1e-3


# ----- finite differences ----------------------------------------------------------


def fd_derivative(func, step, richardson=True):
    """Central difference of func at 0, Richardson-extrapolated by default.

    func may return floats, complex numbers, numpy arrays or Forms.  A
    positivity failure at any probe point is reported as StepTooLarge.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    try:
        d1 = (func(step) - func(-step)) * (0.5 / step)
        if not richardson:
            return d1
        d2 = (func(0.5 * step) - func(-0.5 * step)) * (1.0 / step)
    except (NotPositiveDefinite, NotPositive) as exc:
        raise StepTooLarge(
            f"positivity lost inside the difference stencil (step {step:.3e})") from exc
    return (4.0 / 3.0) * d2 - (1.0 / 3.0) * d1


def default_step(metric):
    """Step proportional to the smallest metric eigenvalue, so omega +/- t gamma stays safe."""
    return FD_REL_STEP * metric.min_eigenvalue()


# ----- directions -------------------------------------------------------------------


@dataclass(frozen=True)
class Direction:
    """A variation direction: a real form plus, for (1,1), its Hermitian matrix."""

    kind: str  # "metric" for real (1,1), "volume" for real (n-1,n-1)
    form: Form
    matrix: np.ndarray | None = None


def form_of_hermitian(mat):
    """The real (1,1) form i sum mat_jk theta^j ^ thetabar^k."""
    mat = np.asarray(mat, dtype=complex)
    out = Form(mat.shape[0])
    out.set_block(1, 1, 1j * mat.reshape(-1))
    return out


def hermitian_of_form(form):
    return (form.block(1, 1) / 1j).reshape(form.n, form.n)


def make_direction(alg, obj, kind="metric", require=None, tol=DEFAULT_TOL):
    """Build and vet a variation direction.

    kind "metric": obj is a Hermitian matrix or a real (1,1) form.
    kind "volume": obj is a real (n-1,n-1) form.
    require "skt" demands del dbar(direction) = 0, require "balanced"
    demands d(direction) = 0; violations raise DirectionNotAdmissible.
    """
    n = alg.n
    if kind == "metric":
        if isinstance(obj, Form):
            form = obj
        else:
            form = form_of_hermitian(obj)
        if form.n != n or form.bidegrees() not in ([], [(1, 1)]):
            raise DirectionNotAdmissible("metric direction must be a (1,1) form")
        mat = hermitian_of_form(form)
        herm = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
        if herm > tol * (1.0 + float(np.max(np.abs(mat)))):
            raise DirectionNotAdmissible(
                f"metric direction is not real (Hermitian residual {herm:.3e})")
        mat = 0.5 * (mat + mat.conj().T)
        direction = Direction("metric", form_of_hermitian(mat), mat)
    elif kind == "volume":
        if not isinstance(obj, Form) or obj.n != n:
            raise DimensionMismatch("volume direction must be a form over the same coframe")
        if obj.bidegrees() not in ([], [(n - 1, n - 1)]):
            raise DirectionNotAdmissible("volume direction must be an (n-1,n-1) form")
        real_res = (obj - obj.conj()).max_abs()
        if real_res > tol * (1.0 + obj.max_abs()):
            raise DirectionNotAdmissible(
                f"volume direction is not real (residual {real_res:.3e})")
        direction = Direction("volume", 0.5 * (obj + obj.conj()))
    else:
        raise ValueError(f"unknown direction kind {kind!r}")

    if require == "skt":
        res = alg.del_form(alg.dbar_form(direction.form)).max_abs()
        if res > tol * (1.0 + direction.form.max_abs()):
            raise DirectionNotAdmissible(
                f"direction leaves the pluriclosed constraint (residual {res:.3e})")
    elif require == "balanced":
        res = alg.d_form(direction.form).max_abs()
        if res > tol * (1.0 + direction.form.max_abs()):
            raise DirectionNotAdmissible(
                f"direction leaves the coclosed constraint (residual {res:.3e})")
    elif require is not None:
        raise ValueError(f"unknown admissibility requirement {require!r}")
    return direction


# ----- operator variations -----------------------------------------------------------


def commutator_mult(bundle, gamma, p, q):
    """Matrix of [trace, gamma ^ .] on (p,q) for a (1,1) form gamma.

    For gamma = omega this is (n - p - q) times the identity.
    """
    n = bundle.n
    dim = dim_pq(n, p, q)
    out = np.zeros((dim, dim), dtype=complex)
    if p + 1 <= n and q + 1 <= n:
        out += bundle.trace_block(p + 1, q + 1) @ bundle.alg.wedge_matrix(gamma, p, q)
    if p >= 1 and q >= 1:
        out -= bundle.alg.wedge_matrix(gamma, p - 1, q - 1) @ bundle.trace_block(p, q)
    return out


def commutator_mult_total(bundle, gamma, k):
    """Block-diagonal commutator on the whole degree-k space."""
    dim = bundle.alg.dim_total(k)
    out = np.zeros((dim, dim), dtype=complex)
    for (p, q), off in bundle.alg.offsets(k).items():
        blk = commutator_mult(bundle, gamma, p, q)
        out[off:off + blk.shape[0], off:off + blk.shape[1]] = blk
    return out


def star_comm_star(bundle, gamma, p, q):
    """star C star as an endomorphism of (p,q); C acts at the star image (n-q,n-p)."""
    n = bundle.n
    mid = commutator_mult(bundle, gamma, n - q, n - p)
    return bundle.star_block(n - q, n - p) @ mid @ bundle.star_block(p, q)


def _star_comm_star_total(bundle, gamma, k):
    dim = bundle.alg.dim_total(k)
    out = np.zeros((dim, dim), dtype=complex)
    for (p, q), off in bundle.alg.offsets(k).items():
        blk = star_comm_star(bundle, gamma, p, q)
        out[off:off + blk.shape[0], off:off + blk.shape[1]] = blk
    return out


def var_star_matrix(bundle, gamma, p, q):
    """d/dt of the star matrix on (p,q): star composed with the commutator."""
    return bundle.star_block(p, q) @ commutator_mult(bundle, gamma, p, q)


def var_trace_matrix(bundle, gamma, p, q):
    """d/dt of the trace operator on (p,q): minus the adjoint of gamma ^ . ."""
    if p < 1 or q < 1:
        return np.zeros((dim_pq(bundle.n, p - 1, q - 1), dim_pq(bundle.n, p, q)),
                        dtype=complex)
    return -bundle.mult_adjoint_block(gamma, p, q)


def var_del_star_matrix(bundle, gamma, p, q):
    if p < 1:
        return np.zeros((0, dim_pq(bundle.n, p, q)), dtype=complex)
    sign = -1.0 if (p + q) % 2 == 0 else 1.0  # (-1)^(k+1)
    ds = bundle.del_star_block(p, q)
    return ds @ commutator_mult(bundle, gamma, p, q) \
        + sign * star_comm_star(bundle, gamma, p - 1, q) @ ds


def var_dbar_star_matrix(bundle, gamma, p, q):
    if q < 1:
        return np.zeros((0, dim_pq(bundle.n, p, q)), dtype=complex)
    sign = -1.0 if (p + q) % 2 == 0 else 1.0
    ds = bundle.dbar_star_block(p, q)
    return ds @ commutator_mult(bundle, gamma, p, q) \
        + sign * star_comm_star(bundle, gamma, p, q - 1) @ ds


def var_d_star_matrix(bundle, gamma, k):
    """d/dt of the total-degree codifferential matrix on degree k."""
    if k < 1:
        return np.zeros((0, bundle.alg.dim_total(0)), dtype=complex)
    sign = -1.0 if k % 2 == 0 else 1.0
    ds = bundle.d_star_total(k)
    return ds @ commutator_mult_total(bundle, gamma, k) \
        + sign * _star_comm_star_total(bundle, gamma, k - 1) @ ds


def laplacian_variation_matrix(bundle, gamma, which, key):
    """d/dt of the chosen Laplacian matrix along omega + t gamma.

    which "del"/"dbar" take a bidegree key, "d" a total degree; the result
    acts on the same space as the Laplacian itself.
    """
    if which == "d":
        k = key
        alg = bundle.alg
        dim = alg.dim_total(k)
        out = np.zeros((dim, dim), dtype=complex)
        if k >= 1:
            out += alg.d_total(k - 1) @ var_d_star_matrix(bundle, gamma, k)
        if k + 1 <= 2 * bundle.n:
            out += var_d_star_matrix(bundle, gamma, k + 1) @ alg.d_total(k)
        return out
    p, q = key
    n = bundle.n
    dim = dim_pq(n, p, q)
    out = np.zeros((dim, dim), dtype=complex)
    if which == "del":
        if p >= 1:
            out += bundle.alg.del_block(p - 1, q) @ var_del_star_matrix(bundle, gamma, p, q)
        if p + 1 <= n:
            out += var_del_star_matrix(bundle, gamma, p + 1, q) @ bundle.alg.del_block(p, q)
    elif which == "dbar":
        if q >= 1:
            out += bundle.alg.dbar_block(p, q - 1) @ var_dbar_star_matrix(bundle, gamma, p, q)
        if q + 1 <= n:
            out += var_dbar_star_matrix(bundle, gamma, p, q + 1) @ bundle.alg.dbar_block(p, q)
    else:
        raise ValueError(f"unknown Laplacian kind {which!r}")
    return out


# ----- kernel projector variation ---------------------------------------------------


@dataclass
class ProjectorVariation:
    """Derivative data of the harmonic projector of one Laplacian.

    derivative is the unconditional two-term expression
    -(P dLap S + S dLap P); image_part keeps only -P dLap S, which agrees
    with the derivative exactly on inputs with vanishing kernel component.
    When a test form was supplied, value_form applies image_part to it,
    oracle_form applies the two-term expression, and input_kernel_norm
    flags how much of the input the one-term restriction cannot see.
    """

    which: str
    key: object
    derivative: np.ndarray
    image_part: np.ndarray
    spectral_gap: float
    threshold: float
    kernel_dim: int
    kernel_projector: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    value_form: object = None
    oracle_form: object = None
    input_kernel_norm: float = 0.0

    def kernel_component_norm(self, vec):
        """Pointwise-Gram norm of the kernel component of vec."""
        kv = self.kernel_projector @ vec
        return float(np.sqrt(max((kv.conj() @ (self.gram @ kv)).real, 0.0)))


def var_harmonic_projector(bundle, gamma, which, key, v=None, tol=DEFAULT_TOL,
                           gap_factor=100.0):
    """Variation of the kernel projector of a Laplacian along omega + t gamma.

    Refuses (KernelJump) when the smallest nonzero eigenvalue sits within
    gap_factor of the kernel threshold: there the kernel dimension is not
    stable under perturbation and no derivative exists.  With a test form
    v the applied results are attached (value_form from the one-term
    restriction, oracle_form from the full two-term expression).
    """
    spec = bundle.spectral(which, key)
    mask = kernel_mask(spec.eigenvalues, tol)
    eigs = np.asarray(spec.eigenvalues, dtype=float)
    thr = tol * max(1.0, float(eigs.max(initial=0.0)))
    nonzero = eigs[~mask]
    gap = float(nonzero.min()) if nonzero.size else float("inf")
    if gap < gap_factor * thr:
        raise KernelJump(
            f"spectral gap {gap:.3e} is within {gap_factor:g}x of threshold {thr:.3e}")
    proj = harmonic_projector(bundle, which, key, tol)
    green = green_operator(bundle, which, key, tol)
    dlap = laplacian_variation_matrix(bundle, gamma, which, key)
    image_part = -proj @ dlap @ green
    derivative = image_part - green @ dlap @ proj
    out = ProjectorVariation(
        which=which,
        key=key,
        derivative=derivative,
        image_part=image_part,
        spectral_gap=gap,
        threshold=thr,
        kernel_dim=int(mask.sum()),
        kernel_projector=proj,
        gram=spec.gram,
    )
    if v is not None:
        alg = bundle.alg
        if which == "d":
            vec = alg.to_vector(v, key)
            wrap = lambda w: alg.from_vector(w, key)
        else:
            vec = v.block(*key)
            wrap = lambda w: alg.from_blockvec(key, w)
        out.value_form = wrap(image_part @ vec)
        out.oracle_form = wrap(derivative @ vec)
        out.input_kernel_norm = out.kernel_component_norm(vec)
    return out


# ----- induced metric direction of a volume-level path --------------------------------


def metric_direction_of_volume(bundle, direction_form):
    """First variation of the (n-1) root along Omega + t * direction.

    Returns the real (1,1) form (trace(star direction)/(n-1)) omega -
    star(direction), the derivative at t=0 of the positive root of the
    moving (n-1,n-1) form.
    """
    n = bundle.n
    if n < 2:
        raise DimensionMismatch("volume directions need n >= 2")
    starred = bundle.star(direction_form).pure_part(1, 1)
    scalar = bundle.trace_contract(starred).block(0, 0)
    coef = complex(scalar[0]) if scalar.size else 0.0
    return (coef / (n - 1)) * bundle.omega - starred


# ----- functional variations ----------------------------------------------------------


@dataclass
class FunctionalVariation:
    """First variation of one torsion energy along an admissible direction.

    value sums the pairing summands plus the nonnegative bound on the
    projector remainder; terms keeps every summand separately together
    with diagnostics (the signed remainder pairing, the norm of the moving
    projector applied to the frozen source).  fd is filled by the
    finite-difference harness on request; discrepancy then records
    fd - value, which stays at rounding level whenever the projector
    source norm vanishes.  imag_residual reports how far the assembled
    pairing strays from being real.
    """

    kind: str
    value: float
    terms: dict
    imag_residual: float
    fd: float | None = None

    @property
    def discrepancy(self):
        return None if self.fd is None else float(self.fd - self.value)


def var_F(bundle, direction, tol=DEFAULT_TOL, with_fd=False, step=None):
    """First variation of the pluriclosed torsion energy along a real (1,1) direction.

    The direction must keep del dbar omega = 0 to first order.  At
    direction = omega the value equals n times the energy.
    """
    alg = bundle.alg
    if not isinstance(direction, Direction):
        direction = make_direction(alg, direction, kind="metric", require="skt", tol=tol)
    elif direction.kind != "metric":
        raise DirectionNotAdmissible("the pluriclosed energy varies along (1,1) directions")
    gamma = direction.form

    report = torsion_rho(bundle, tol)
    rho_vec = alg.to_vector(report.torsion, 2)
    src_vec = alg.to_vector(alg.del_form(gamma), 3)
    eta = d_potential(bundle, src_vec, 3, tol)
    comm = commutator_mult_total(bundle, gamma, 2)
    gram = bundle.gram_total(2)
    det = bundle.det_h

    # six pairing summands, split by type (the commutator preserves type)
    terms = {}
    total = 0.0 + 0.0j
    second_full = eta.potential + comm @ rho_vec
    for pq in ((2, 0), (1, 1), (0, 2)):
        off = alg.offsets(2)[pq]
        sl = slice(off, off + dim_pq(alg.n, *pq))
        g = bundle.gram(*pq)
        first = (rho_vec[sl].conj() @ (g @ eta.potential[sl])) * det
        second = (second_full[sl].conj() @ (g @ rho_vec[sl])) * det
        terms[f"eta_rho_{pq[0]}{pq[1]}"] = float(first.real)
        terms[f"rho_eta_comm_{pq[0]}{pq[1]}"] = float(second.real)
        total += first + second

    # moving-projector remainder: enters the value through its norm bound
    dlap = laplacian_variation_matrix(bundle, gamma, "d", 3)
    proj3 = harmonic_projector(bundle, "d", 3, tol)
    green3 = green_operator(bundle, "d", 3, tol)
    omega_src = alg.to_vector(report.source, 3)
    a_vec = (proj3 @ (dlap @ (green3 @ omega_src))
             + green3 @ (dlap @ (proj3 @ omega_src)))
    lift = green_operator(bundle, "d", 2, tol) @ (bundle.d_star_total(3) @ a_vec)
    rho_norm = float(np.sqrt(max(report.norm_sq, 0.0)))
    lift_norm = _gram_norm(gram, lift) * np.sqrt(det)
    proj_term = 2.0 * rho_norm * lift_norm
    terms["projector_term"] = float(proj_term)
    terms["projector_pairing_signed"] = float(
        2.0 * (rho_vec.conj() @ (gram @ lift)).real * det)
    terms["projector_source_norm"] = float(
        _gram_norm(bundle.gram_total(3), a_vec) * np.sqrt(det))

    out = FunctionalVariation(
        kind="F",
        value=float(total.real + proj_term),
        terms=terms,
        imag_residual=float(abs(total.imag)),
    )
    if with_fd:
        out.fd = _fd_functional(bundle, direction.matrix, "F", tol=tol, step=step)
    return out


def var_G(bundle, direction, tol=DEFAULT_TOL, with_fd=False, step=None):
    """First variation of the coclosed torsion energy along a closed real (n-1,n-1) direction."""
    alg, n = bundle.alg, bundle.n
    if not isinstance(direction, Direction):
        direction = make_direction(alg, direction, kind="volume", require="balanced", tol=tol)
    elif direction.kind != "volume":
        raise DirectionNotAdmissible("the coclosed energy varies along (n-1,n-1) directions")

    report = torsion_gamma(bundle, tol)
    pq = (n - 1, n - 2)
    tors_vec = report.torsion.block(*pq)
    src_vec = direction.form.block(n - 1, n - 1)
    eta = dbar_potential(bundle, src_vec, (n - 1, n - 1), tol)

    rho_form = metric_direction_of_volume(bundle, direction.form)
    comm = commutator_mult(bundle, rho_form, *pq)
    gram = bundle.gram(*pq)
    det = bundle.det_h
    first = (tors_vec.conj() @ (gram @ eta.potential)) * det
    second = (eta.potential + comm @ tors_vec).conj() @ (gram @ tors_vec) * det
    total = first + second
    terms = {
        "eta_gamma": float(first.real),
        "gamma_eta_comm": float(second.real),
    }

    dlap = laplacian_variation_matrix(bundle, rho_form, "dbar", (n - 1, n - 1))
    projt = harmonic_projector(bundle, "dbar", (n - 1, n - 1), tol)
    greent = green_operator(bundle, "dbar", (n - 1, n - 1), tol)
    omega_src = report.source.block(n - 1, n - 1)
    a_vec = (projt @ (dlap @ (greent @ omega_src))
             + greent @ (dlap @ (projt @ omega_src)))
    lift = green_operator(bundle, "dbar", pq, tol) \
        @ (bundle.dbar_star_block(n - 1, n - 1) @ a_vec)
    tors_norm = float(np.sqrt(max(report.norm_sq, 0.0)))
    proj_term = 2.0 * tors_norm * _gram_norm(gram, lift) * np.sqrt(det)
    terms["projector_term"] = float(proj_term)
    terms["projector_pairing_signed"] = float(
        2.0 * (tors_vec.conj() @ (gram @ lift)).real * det)
    terms["projector_source_norm"] = float(
        _gram_norm(bundle.gram(n - 1, n - 1), a_vec) * np.sqrt(det))

    out = FunctionalVariation(
        kind="G",
        value=float(total.real + proj_term),
        terms=terms,
        imag_residual=float(abs(total.imag)),
    )
    if with_fd:
        out.fd = _fd_volume_functional(bundle, direction.form, tol=tol, step=step)
    return out


def var_H(bundle, gamma_bundle, direction, with_fd=False, step=None):
    """First variation of the trace energy in its metric slot, weight fixed."""
    alg, n = bundle.alg, bundle.n
    if not isinstance(direction, Direction):
        direction = make_direction(alg, direction, kind="metric")
    eta = direction.form

    u_bar = bundle.trace_contract(alg.dbar_form(bundle.omega))  # (0,1)
    weight = gamma_bundle.omega_power(n - 1)
    t1_form = bundle.trace_contract(alg.del_form(eta))
    t1 = 2.0 * (1j * alg.integrate(wedge(wedge(t1_form, u_bar), weight))).real
    t2_form = bundle.mult_adjoint(eta, alg.del_form(bundle.omega))
    t2 = 2.0 * (1j * alg.integrate(wedge(wedge(t2_form.pure_part(1, 0), u_bar),
                                         weight))).real
    out = FunctionalVariation(
        kind="H",
        value=float(t1 - t2),
        terms={"trace_of_derivative": float(t1), "adjoint_of_direction": float(t2)},
        imag_residual=0.0,
    )
    if with_fd:
        h0 = bundle.metric
        step = default_step(h0) if step is None else step

        def at(t):
            met = HermitianMetric(h0.h + t * direction.matrix).check()
            return eval_H(bundle_for_algebra(alg, met), gamma_bundle).value

        out.fd = float(fd_derivative(at, step))
    return out


def var_F_tilde(bundle, nu, direction, tol=DEFAULT_TOL, with_fd=False, step=None):
    """First variation of the normalized pluriclosed energy."""
    alg, n = bundle.alg, bundle.n
    if not isinstance(direction, Direction):
        direction = make_direction(alg, direction, kind="metric", require="skt", tol=tol)
    base = var_F(bundle, direction, tol)
    f_val = eval_F(bundle, tol).value
    denom = normalization_integral(bundle, nu)
    if denom <= 0:
        raise NotPositive(f"normalization integral {denom:.3e} is not positive")
    nu_pow = wedge_power(nu.form(), n - 1)
    dir_int = (alg.integrate(wedge(direction.form, nu_pow))).real
    value = (base.value - n * (dir_int / denom) * f_val) / denom ** n
    terms = dict(base.terms)
    terms.update({"unnormalized": base.value, "normalization": float(denom),
                  "direction_integral": float(dir_int)})
    out = FunctionalVariation(
        kind="F_tilde",
        value=float(value),
        terms=terms,
        imag_residual=base.imag_residual,
    )
    if with_fd:
        out.fd = _fd_functional(bundle, direction.matrix, "F_tilde", nu=nu,
                                tol=tol, step=step)
    return out


def _gram_norm(gram, vec):
    return float(np.sqrt(max((vec.conj() @ (gram @ vec)).real, 0.0)))


def _fd_functional(bundle, gamma_matrix, kind, nu=None, tol=DEFAULT_TOL, step=None):
    alg = bundle.alg
    h0 = bundle.metric
    step = default_step(h0) if step is None else step

    def at(t):
        met = HermitianMetric(h0.h + t * gamma_matrix).check()
        b = bundle_for_algebra(alg, met)
        if kind == "F":
            return eval_F(b, tol).value
        return eval_F_tilde(b, nu, tol).value

    return float(fd_derivative(at, step))


def _fd_volume_functional(bundle, direction_form, tol=DEFAULT_TOL, step=None):
    alg, n = bundle.alg, bundle.n
    base = bundle.omega_power(n - 1)
    step = default_step(bundle.metric) if step is None else step

    def at(t):
        met = root_n_minus_1(alg, base + t * direction_form).check()
        return eval_G(bundle_for_algebra(alg, met), tol).value

    return float(fd_derivative(at, step))


# ----- the check battery ---------------------------------------------------------------


@dataclass
class VariationCheck:
    """One audited derivative: closed form against its reference.

    analytic and fd record the largest magnitudes of the two sides (fd is
    a finite difference for most rows, an independent closed form for the
    self-consistency rows).  rel_err divides by max(1, analytic, fd) so
    rows whose entries are tiny are judged on absolute error.
    """

    name: str
    detail: str
    analytic: float
    fd: float
    abs_err: float

    @property
    def rel_err(self):
        return self.abs_err / max(1.0, self.analytic, self.fd)

    def to_row(self):
        return {
            "name": self.name,
            "detail": self.detail,
            "analytic": self.analytic,
            "fd": self.fd,
            "abs_err": self.abs_err,
            "rel_err": self.rel_err,
        }


def _matrix_fd(alg, h0, gamma_matrix, step, extract):
    def at(t):
        met = HermitianMetric(h0 + t * gamma_matrix).check()
        return extract(bundle_for_algebra(alg, met))

    return fd_derivative(at, step)


def _amax(x):
    arr = np.asarray(x)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def _check(rows, name, detail, got, want):
    rows.append(VariationCheck(name, detail, _amax(got), _amax(want),
                               _amax(np.asarray(got) - np.asarray(want))))


def variation_battery(model, seed=0, tuples=20, tol=DEFAULT_TOL, step_scale=1.0,
                      start_index=0):
    """Finite-difference audit of every operator variation formula.

    Each tuple draws a seeded metric, a seeded real direction and a
    bidegree, then compares the closed-form derivative matrices of star,
    trace, the three codifferentials, the three Laplacians and the kernel
    projector against Richardson-extrapolated central differences, plus
    the self-consistency rows (conjugation symmetry, omega scalings, the
    perturbation oracle).  Returns VariationCheck rows; callers assert on
    rel_err.  start_index only shifts the tuple labels in detail strings.
    """
    alg = algebra_for(model)
    n = alg.n
    rng = np.random.default_rng(seed)
    rows = []
    for idx in range(start_index, start_index + tuples):
        met = random_metric(n, rng)
        b = bundle_for_algebra(alg, met)
        gm = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        gm = 0.5 * (gm + gm.conj().T)
        gamma = form_of_hermitian(gm)
        h0 = met.h
        step = step_scale * default_step(met)
        p = int(rng.integers(0, n + 1))
        q = int(rng.integers(0, n + 1))
        k = p + q
        tag = f"tuple {idx} (p,q)=({p},{q})"

        fd = _matrix_fd(alg, h0, gm, step, lambda bb: bb.star_block(p, q))
        _check(rows, "star", tag, var_star_matrix(b, gamma, p, q), fd)

        fd = _matrix_fd(alg, h0, gm, step, lambda bb: bb.trace_block(p, q))
        _check(rows, "trace", tag, var_trace_matrix(b, gamma, p, q), fd)

        fd = _matrix_fd(alg, h0, gm, step, lambda bb: bb.del_star_block(p, q))
        _check(rows, "del_star", tag, var_del_star_matrix(b, gamma, p, q), fd)

        fd = _matrix_fd(alg, h0, gm, step, lambda bb: bb.dbar_star_block(p, q))
        _check(rows, "dbar_star", tag, var_dbar_star_matrix(b, gamma, p, q), fd)

        fd = _matrix_fd(alg, h0, gm, step, lambda bb: bb.d_star_total(k))
        _check(rows, "d_star", tag, var_d_star_matrix(b, gamma, k), fd)

        for which, key in (("del", (p, q)), ("dbar", (p, q)), ("d", k)):
            fd = _matrix_fd(alg, h0, gm, step,
                            lambda bb, w=which, kk=key: bb.laplacian(w, kk))
            _check(rows, f"laplacian_{which}", tag,
                   laplacian_variation_matrix(b, gamma, which, key), fd)

        # commutator self-adjointness and the gamma = omega normalization
        comm = commutator_mult(b, gamma, p, q)
        g = b.gram(p, q)
        _check(rows, "commutator_selfadjoint", tag, g @ comm, comm.conj().T @ g)
        comm_omega = commutator_mult(b, b.omega, p, q)
        _check(rows, "commutator_omega", tag, comm_omega,
               (n - p - q) * np.eye(dim_pq(n, p, q), dtype=complex))

        # conjugation symmetry: the dbar-adjoint variation is the conjugate
        # of the del-adjoint variation at the mirrored bidegree
        if q >= 1:
            conj_in = conj_block_matrix(n, p, q)
            conj_out = conj_block_matrix(n, q - 1, p)
            mirrored = conj_out @ var_del_star_matrix(b, gamma, q, p).conj() @ conj_in
            _check(rows, "conjugation_symmetry", tag,
                   var_dbar_star_matrix(b, gamma, p, q), mirrored)

        # direction omega: first-order scaling pins each variation exactly
        _check(rows, "omega_scaling_star", tag,
               var_star_matrix(b, b.omega, p, q),
               (n - k) * b.star_block(p, q))
        _check(rows, "omega_scaling_d_star", tag,
               var_d_star_matrix(b, b.omega, k), -b.d_star_total(k))
        _check(rows, "omega_scaling_laplacian", tag,
               laplacian_variation_matrix(b, gamma=b.omega, which="d", key=k),
               -b.laplacian("d", k))

        # projector derivative: full two-term formula against differences,
        # one-term restriction on a deflated vector, and the exact
        # vanishing of the derivative along omega itself
        try:
            pv = var_harmonic_projector(b, gamma, "d", k, tol=tol)
        except KernelJump:
            continue
        fd = _matrix_fd(alg, h0, gm, step,
                        lambda bb: harmonic_projector(bb, "d", k, tol))
        _check(rows, "projector", tag, pv.derivative, fd)
        dimk = alg.dim_total(k)
        if dimk:
            v = rng.standard_normal(dimk) + 1j * rng.standard_normal(dimk)
            v0 = v - pv.kernel_projector @ v
            _check(rows, "projector_deflated", tag, pv.image_part @ v0, fd @ v0)
            _check(rows, "projector_oracle", tag, pv.image_part @ v0,
                   pv.derivative @ v0)
        try:
            pv_omega = var_harmonic_projector(b, b.omega, "d", k, tol=tol)
            _check(rows, "omega_scaling_projector", tag, pv_omega.derivative,
                   np.zeros_like(pv_omega.derivative))
        except KernelJump:
            pass
    return rows
