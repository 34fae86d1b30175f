"""Constrained descent of the torsion energies over invariant metric cones.

The feasible sets are linear slices of a positivity cone: pluriclosed
metrics (del dbar omega = 0) parametrized by real (1,1) forms, and
coclosed volume data (d Omega = 0) parametrized by real (n-1,n-1) forms.
Both slices are computed once as SVD null spaces over an explicit real
basis, then orthonormalized against a reference inner product, and the
energies are minimized by projected gradient descent with a backtracking
line search that never leaves the positivity cone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionMismatch, EmptyCone, InfeasibleStart,
                     LineSearchFailure, NotPositive, NotPositiveDefinite,
                     ToleranceAmbiguity, ToleranceFailure)
from .exterior import ExteriorAlgebra, Form, _combos, wedge, wedge_power
from .functionals import eval_F, eval_F_tilde, eval_G, eval_H
from .hodge import DEFAULT_TOL, predicates, root_n_minus_1
from .metric import HermitianMetric, bundle_for_algebra
from .model import algebra_for
from .variation import form_of_hermitian, hermitian_of_form

NULLSPACE_RTOL = 1e-10
DEGENERACY_RTOL = 1e-6


def _algebra_of(obj):
    return obj if isinstance(obj, ExteriorAlgebra) else algebra_for(obj)


def real_block_basis(n, p):
    """Real basis of the conjugation-fixed subspace of Lambda^{p,p}.

    Diagonal monomials enter once (times i when conjugation flips their
    sign), off-diagonal ones as the two real combinations of e and conj(e).
    """
    s = -1.0 if (p * p) % 2 else 1.0  # conj(e_IJ) = s * e_JI
    combos = _combos(n, p)
    out = []
    for a, I in enumerate(combos):
        diag = Form.monomial(n, I, I, 1j if s < 0 else 1.0)
        out.append(diag)
        for J in combos[a + 1:]:
            e_ij = Form.monomial(n, I, J, 1.0)
            e_ji = Form.monomial(n, J, I, 1.0)
            out.append(e_ij + s * e_ji)
            out.append(1j * (e_ij - s * e_ji))
    return out


@dataclass
class ConstraintBasis:
    """Orthonormal real basis of an admissible linear slice.

    forms spans the null space of the constraint map inside the ambient
    real basis; columns of coefficients express them over that ambient
    basis.  Orthonormality is w.r.t. Re of the reference L2 product.
    """

    kind: str
    pq: tuple
    forms: list
    coefficients: np.ndarray
    ambient: list
    reference: object

    @property
    def dimension(self):
        return len(self.forms)

    def combine(self, x):
        out = Form.zero(self.ambient[0].n)
        for c, f in zip(x, self.forms):
            out = out + float(c) * f
        return out

    def coordinates(self, form):
        """Reference-orthogonal coordinates of a form (exact when it lies in the slice)."""
        return np.array([self.reference.l2_inner(form, f).real for f in self.forms])


def _constraint_map(alg, kind, form):
    if kind == "skt":
        return alg.del_form(alg.dbar_form(form))
    if kind == "balanced":
        return alg.d_form(form)
    raise ValueError(f"unknown constraint kind {kind!r}")


def constraint_basis(model, kind, reference=None, tol=NULLSPACE_RTOL, probe=True):
    """Null space of the cone constraint over the real ambient basis.

    kind "skt" works on real (1,1) forms with del dbar = 0; "balanced" on
    real (n-1,n-1) forms with d = 0.  With probe=True the reference volume
    data is projected onto the slice and must stay positive, otherwise
    EmptyCone is raised.
    """
    alg = _algebra_of(model)
    n = alg.n
    p = 1 if kind == "skt" else n - 1
    ambient = real_block_basis(n, p)
    columns = []
    for f in ambient:
        img = _constraint_map(alg, kind, f)
        vec = np.concatenate([img.block(*key) for key in sorted(img.bidegrees())]) \
            if img.bidegrees() else np.zeros(0, dtype=complex)
        columns.append(vec)
    width = max((c.size for c in columns), default=0)
    mat = np.zeros((2 * width, len(ambient)))
    for j, c in enumerate(columns):
        if c.size:
            mat[:c.size, j] = c.real
            mat[width:width + c.size, j] = c.imag
    if width and np.any(mat):
        _, sing, vt = np.linalg.svd(mat)
        keep = np.ones(len(ambient), dtype=bool)
        keep[:sing.size] = sing <= tol * sing.max(initial=0.0)
        null = vt.T[:, keep]
    else:
        null = np.eye(len(ambient))

    reference = reference if reference is not None else \
        bundle_for_algebra(alg, HermitianMetric.identity(n))
    raw_forms = []
    for col in null.T:
        f = Form.zero(n)
        for c, amb in zip(col, ambient):
            f = f + float(c) * amb
        raw_forms.append(f)
    # orthonormalize w.r.t. the real part of the reference L2 product
    gram = np.array([[reference.l2_inner(fb, fa).real for fb in raw_forms]
                     for fa in raw_forms])
    if raw_forms:
        w, v = np.linalg.eigh(0.5 * (gram + gram.T))
        if w.min(initial=1.0) <= 0:
            raise ToleranceFailure("constraint basis Gram matrix is not positive")
        transform = v / np.sqrt(w)
        coeffs = null @ transform
        forms = []
        for col in coeffs.T:
            f = Form.zero(n)
            for c, amb in zip(col, ambient):
                f = f + float(c) * amb
            forms.append(f)
    else:
        coeffs = null
        forms = []

    basis = ConstraintBasis(kind, (p, p), forms, coeffs, ambient, reference)
    if probe:
        target = reference.omega if kind == "skt" else reference.omega_power(n - 1)
        proj = basis.combine(basis.coordinates(target))
        if kind == "skt":
            mat_p = hermitian_of_form(proj)
            if np.linalg.eigvalsh(0.5 * (mat_p + mat_p.conj().T))[0] <= 0:
                raise EmptyCone("projected reference metric is not positive definite")
        else:
            try:
                root_n_minus_1(alg, proj)
            except NotPositive as exc:
                raise EmptyCone("projected reference volume datum is not positive") from exc
    return basis


# ----- descent ---------------------------------------------------------------------


KAHLER_FLOOR_RTOL = 1e-12
LINESEARCH_FLOOR = 1e-16


@dataclass
class IterationRecord:
    """One visited iterate: its slice coordinates and diagnostics."""

    index: int
    coefficients: np.ndarray
    value: float
    gradient_norm: float
    step_size: float
    min_eigenvalue: float
    normalization_integral: float
    constraint_residual: float
    backtracks: int

    def to_jsonable(self):
        return {
            "index": self.index,
            "coefficients": [float(c) for c in self.coefficients],
            "value": self.value,
            "gradient_norm": self.gradient_norm,
            "step_size": self.step_size,
            "min_eigenvalue": self.min_eigenvalue,
            "normalization_integral": self.normalization_integral,
            "constraint_residual": self.constraint_residual,
            "backtracks": self.backtracks,
        }


@dataclass
class DescentTrace:
    functional: str
    kind: str
    seed: int
    termination: str
    records: list
    initial_value: float
    final_value: float
    final_matrix: np.ndarray
    reached_kahler: bool
    kahler_consistent: bool
    degenerating: bool
    constraint_dimension: int
    normalized: bool
    tol: float
    final_coordinates: np.ndarray = field(default=None, repr=False)

    @property
    def monotone(self):
        vals = [r.value for r in self.records]
        return all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))

    @property
    def max_constraint_residual(self):
        return max((r.constraint_residual for r in self.records), default=0.0)

    def to_jsonable(self):
        return {
            "functional": self.functional,
            "kind": self.kind,
            "seed": self.seed,
            "termination": self.termination,
            "initial_value": self.initial_value,
            "final_value": self.final_value,
            "final_matrix_real": np.real(self.final_matrix).tolist(),
            "final_matrix_imag": np.imag(self.final_matrix).tolist(),
            "reached_kahler": self.reached_kahler,
            "kahler_consistent": self.kahler_consistent,
            "degenerating": self.degenerating,
            "constraint_dimension": self.constraint_dimension,
            "normalized": self.normalized,
            "monotone": self.monotone,
            "max_constraint_residual": self.max_constraint_residual,
            "iterations": [r.to_jsonable() for r in self.records],
        }

    def csv_rows(self):
        """One flat dict per iteration, coefficients split into c0, c1, ..."""
        rows = []
        for r in self.records:
            row = {"index": r.index, "value": r.value,
                   "gradient_norm": r.gradient_norm, "step_size": r.step_size,
                   "min_eigenvalue": r.min_eigenvalue,
                   "normalization_integral": r.normalization_integral,
                   "constraint_residual": r.constraint_residual,
                   "backtracks": r.backtracks}
            for a, c in enumerate(r.coefficients):
                row[f"c{a}"] = float(c)
            rows.append(row)
        return rows


class _Objective:
    """Coordinates -> energy value, None when the point is not admissible.

    With normalize on, evaluation happens at the rescaled representative
    with unit normalization integral, so the composed objective is
    constant along rays and monotone line searches survive the rescaling
    of accepted iterates.
    """

    def __init__(self, alg, basis, functional, nu, weight_bundle, tol, normalize):
        self.alg = alg
        self.basis = basis
        self.functional = functional
        self.nu = nu
        self.weight_bundle = weight_bundle
        self.tol = tol
        self.normalize = normalize
        self.kind = "volume" if functional == "G" else "metric"

    def metric_at(self, x):
        form = self.basis.combine(x)
        if self.kind == "metric":
            return HermitianMetric(hermitian_of_form(form)).check()
        return root_n_minus_1(self.alg, form).check()

    def min_eigenvalue(self, x):
        try:
            return self.metric_at(self.retract(x) if self.normalize else x) \
                .min_eigenvalue()
        except (NotPositive, NotPositiveDefinite, ValueError):
            return -np.inf

    def normalization(self, x):
        form = self.basis.combine(x)
        nu_form = self.nu.form()
        if self.kind == "metric":
            return self.alg.integrate(
                wedge(form, wedge_power(nu_form, self.alg.n - 1))).real
        return self.alg.integrate(wedge(nu_form, form)).real

    def retract(self, x):
        """Rescale onto the unit normalization slice; the integral is linear."""
        c = self.normalization(x)
        if not c > 0:
            raise ValueError("normalization integral is not positive")
        return x / c

    def constraint_residual(self, x):
        return _constraint_map(self.alg, self.basis.kind,
                               self.basis.combine(x)).max_abs()

    def __call__(self, x):
        try:
            if self.normalize:
                x = self.retract(x)
            metric = self.metric_at(x)
            bundle = bundle_for_algebra(self.alg, metric)
            if self.functional == "F":
                return eval_F(bundle, self.tol).value
            if self.functional == "F_tilde":
                return eval_F_tilde(bundle, self.nu, self.tol).value
            if self.functional == "G":
                return eval_G(bundle, self.tol).value
            if self.functional == "H":
                return eval_H(bundle, self.weight_bundle).value
            raise ValueError(f"unknown functional {self.functional!r}")
        except (NotPositive, NotPositiveDefinite, ToleranceAmbiguity,
                ToleranceFailure, ValueError):
            return None


def _fd_gradient(obj, x, h0):
    """Central-difference gradient in slice coordinates, None when a
    coordinate stays unevaluable down to the smallest probe step."""
    grad = np.zeros(x.size)
    for a in range(x.size):
        h = h0
        for _ in range(8):
            e = np.zeros_like(x)
            e[a] = h
            fp, fm = obj(x + e), obj(x - e)
            if fp is not None and fm is not None:
                grad[a] = (fp - fm) / (2 * h)
                break
            h *= 0.25
        else:
            return None
    return grad


def _line_search(obj, x, grad, gnorm, value, alpha0):
    """Halve the step until positivity and strict decrease both hold.

    Returns (candidate, value, alpha, backtracks) or raises
    LineSearchFailure once no step above the floor satisfies both guards;
    the exception carries whether positivity was the blocking guard.
    """
    alpha = alpha0
    bt = 0
    positivity_blocked = True
    while alpha >= LINESEARCH_FLOOR:
        cand = x - alpha * grad
        if obj.min_eigenvalue(cand) > 0:
            positivity_blocked = False
            cand_val = obj(cand)
            if cand_val is not None and cand_val < value:
                return cand, cand_val, alpha, bt
        alpha *= 0.5
        bt += 1
    exc = LineSearchFailure(
        f"no step in [{LINESEARCH_FLOOR:.0e}, {alpha0:.3e}] satisfies "
        "positivity and monotone decrease")
    exc.positivity_blocked = positivity_blocked
    raise exc


def descend(model, functional="F_tilde", start=None, nu=None, weight=None,
            steps=100, seed=0, tol=DEFAULT_TOL, gradient_tol=1e-8,
            normalize=None, grad_step=1e-4, max_step=None):
    """Projected gradient descent of one torsion energy inside its cone.

    start is a HermitianMetric (metric functionals) or an (n-1,n-1) Form
    ("G"); None starts from the identity data, "random" from a seeded
    positive point in the slice.  normalize rescales every iterate to a
    unit normalization integral against nu (the default for F_tilde; an
    option for the others, including the volume normalization for G).
    max_step caps the trial step length, trading speed for trace
    resolution near degenerate boundaries.  Termination is one of
    GradientSmall, PositivityBoundary, MaxIters, NumericalStall.
    """
    alg = _algebra_of(model)
    n = alg.n
    if functional not in ("F", "F_tilde", "G", "H"):
        raise ValueError(f"unknown functional {functional!r}")
    kind = "skt" if functional in ("F", "F_tilde", "H") else "balanced"
    basis = constraint_basis(alg, kind)
    if normalize is None:
        normalize = functional == "F_tilde"
    nu = nu if nu is not None else HermitianMetric.identity(n)
    weight_bundle = None
    if functional == "H":
        weight_metric = weight if weight is not None else HermitianMetric.identity(n)
        weight_bundle = bundle_for_algebra(alg, weight_metric)
    obj = _Objective(alg, basis, functional, nu, weight_bundle, tol, normalize)

    rng = np.random.default_rng(seed)
    if isinstance(start, str) and start == "random":
        x = _random_feasible(obj, basis, rng)
    else:
        start_form = _start_form(alg, basis.kind, start, n)
        x = basis.coordinates(start_form)
        residual = (basis.combine(x) - start_form).max_abs()
        if residual > tol * (1.0 + start_form.max_abs()):
            raise InfeasibleStart(
                f"starting point is outside the constraint slice (residual {residual:.3e})")
        if obj.min_eigenvalue(x) <= 0:
            raise InfeasibleStart("starting point is not positive")
    if normalize:
        try:
            x = obj.retract(x)
        except ValueError as exc:
            raise InfeasibleStart(str(exc)) from exc

    value = obj(x)
    if value is None:
        raise InfeasibleStart("energy is not evaluable at the starting point")
    initial_value = float(value)
    records = []
    termination = "MaxIters"
    step_size = 1.0
    for it in range(steps + 1):
        grad = _fd_gradient(obj, x, grad_step * max(1.0, float(np.max(np.abs(x))))
                            if x.size else grad_step)
        if grad is None:
            termination = "NumericalStall"
            break
        gnorm = float(np.linalg.norm(grad))
        records.append(IterationRecord(
            index=it,
            coefficients=np.array(x, dtype=float),
            value=float(value),
            gradient_norm=gnorm,
            step_size=0.0,
            min_eigenvalue=obj.min_eigenvalue(x),
            normalization_integral=obj.normalization(x),
            constraint_residual=obj.constraint_residual(x),
            backtracks=0,
        ))
        if gnorm <= gradient_tol:
            termination = "GradientSmall"
            break
        if it == steps:
            termination = "MaxIters"
            break
        alpha0 = min(step_size * 4.0, 1.0 / max(gnorm, 1e-12))
        if max_step is not None:
            alpha0 = min(alpha0, max_step)
        try:
            cand, cand_val, alpha, bt = _line_search(obj, x, grad, gnorm, value, alpha0)
        except LineSearchFailure as exc:
            termination = "PositivityBoundary" if exc.positivity_blocked \
                else "NumericalStall"
            break
        x = obj.retract(cand) if normalize else cand
        value = cand_val
        step_size = alpha
        records[-1].step_size = alpha
        records[-1].backtracks = bt

    final_metric = obj.metric_at(obj.retract(x) if normalize else x)
    final_bundle = bundle_for_algebra(alg, final_metric)
    preds = predicates(final_bundle, 1e-6)
    h = final_metric.h
    degen = bool(normalize and np.linalg.eigvalsh(h)[0]
                 < DEGENERACY_RTOL * np.trace(h).real / n)
    # a vanishing pluriclosed energy certifies a Kahler point; G and H have
    # no such converse, so the consistency gate only watches the F family
    floor = KAHLER_FLOOR_RTOL * (initial_value + 1.0)
    near_zero = functional in ("F", "F_tilde") and \
        any(r.value < floor for r in records)
    consistent = (not near_zero) or \
        (termination == "GradientSmall" and preds.is_kahler)
    return DescentTrace(
        functional=functional,
        kind=obj.kind,
        seed=seed,
        termination=termination,
        records=records,
        initial_value=initial_value,
        final_value=float(value),
        final_matrix=h,
        reached_kahler=preds.is_kahler,
        kahler_consistent=consistent,
        degenerating=degen,
        constraint_dimension=basis.dimension,
        normalized=normalize,
        tol=tol,
        final_coordinates=x,
    )


def _start_form(alg, kind, start, n):
    if start is None:
        base = HermitianMetric.identity(n)
        return base.form() if kind == "skt" else \
            wedge_power(base.form(), n - 1)
    if kind == "skt":
        if isinstance(start, HermitianMetric):
            return start.form()
        if isinstance(start, Form):
            return start
        return HermitianMetric(np.asarray(start)).form()
    if isinstance(start, Form):
        return start
    if isinstance(start, HermitianMetric):
        return wedge_power(start.form(), n - 1)
    raise DimensionMismatch("start must be a metric or a form")


def _random_feasible(obj, basis, rng, tries=50):
    anchor = basis.coordinates(
        obj.basis.reference.omega if basis.kind == "skt"
        else obj.basis.reference.omega_power(obj.alg.n - 1))
    for _ in range(tries):
        x = anchor + 0.3 * rng.standard_normal(basis.dimension)
        if obj.min_eigenvalue(x) > 0 and obj(x) is not None:
            return x
    raise InfeasibleStart("no positive random start found in the slice")
