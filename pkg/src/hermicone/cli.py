"""Batch command line: model verification, torsion and energy reports, descent runs.

Reports are deterministic JSON (sorted keys, no timestamps); CSV is a
projection offered for the variation battery and descent traces.  Exit
codes separate failure classes: 2 malformed input documents, 3 model
validation, 4 metric predicate failures, 5 tolerance trouble or failed
verification thresholds, 6 infeasible descents.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import (DegreeOutOfRange, DimensionMismatch, EmptyCone,
                     InfeasibleStart, LineSearchFailure, ModelInvalid,
                     ModelNotUnimodular, NotBalanced, NotPositive,
                     NotPositiveDefinite, NotSKT, SchemaError,
                     ToleranceAmbiguity, ToleranceFailure, UnknownCatalogName)
from .functionals import eval_F, eval_F_tilde, eval_G, eval_H
from .hodge import (DEFAULT_TOL, predicates, three_space_residuals,
                    torsion_gamma, torsion_rho)
from .metric import HermitianMetric, bundle_for_algebra, identity_suite, random_metric
from .model import (algebra_for, catalog, catalog_names, parse_model,
                    require_valid, serialize_model, validate_model)
from .optimizer import descend
from .variation import variation_battery

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_VALIDATION = 3
EXIT_PREDICATE = 4
EXIT_TOLERANCE = 5
EXIT_INFEASIBLE = 6

IDENTITY_THRESHOLD = 1e-10
BATTERY_THRESHOLD = 1e-5
ORACLE_THRESHOLD = 1e-6

_FUNCTIONALS = {"F": "F", "G": "G", "H": "H", "Ftilde": "F_tilde"}


class _CliFailure(Exception):
    """Carries an exit code and a message for the top-level handler."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _threads():
    raw = os.environ.get("HERMICONE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_model(args):
    if bool(args.model) == bool(args.catalog):
        raise _CliFailure(EXIT_SCHEMA,
                          "exactly one of --model FILE or --catalog NAME is required")
    if args.catalog:
        model = catalog(args.catalog)
        source = args.catalog
    else:
        try:
            with open(args.model, "r", encoding="utf-8") as fh:
                model = parse_model(fh.read())
        except OSError as exc:
            raise _CliFailure(EXIT_SCHEMA, f"cannot read model file: {exc}") from exc
        source = model.name
    require_valid(model)
    return model, source


def _load_metric(args, n):
    spec = getattr(args, "metric", None) or "identity"
    if spec == "identity":
        return HermitianMetric.identity(n)
    try:
        with open(spec, "r", encoding="utf-8") as fh:
            metric = HermitianMetric.from_json(fh.read())
    except OSError as exc:
        raise _CliFailure(EXIT_SCHEMA, f"cannot read metric file: {exc}") from exc
    if metric.n != n:
        raise DimensionMismatch(
            f"metric is {metric.n} x {metric.n} but the model has n = {n}")
    return metric.check()


def _load_nu(args, n):
    spec = getattr(args, "nu", None) or "identity"
    if spec == "identity":
        return HermitianMetric.identity(n)
    try:
        with open(spec, "r", encoding="utf-8") as fh:
            nu = HermitianMetric.from_json(fh.read())
    except OSError as exc:
        raise _CliFailure(EXIT_SCHEMA, f"cannot read nu file: {exc}") from exc
    if nu.n != n:
        raise DimensionMismatch(f"nu is {nu.n} x {nu.n} but the model has n = {n}")
    return nu.check()


def _model_hash(model):
    return hashlib.sha256(serialize_model(model).encode("utf-8")).hexdigest()


def _envelope(subcommand, model, source, seed, tolerances, payload):
    return {
        "subcommand": subcommand,
        "model": source,
        "model_hash": _model_hash(model),
        "seed": seed,
        "tolerances": tolerances,
        "report": payload,
    }


def _emit_json(args, obj):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_csv(args, fieldnames, rows):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _form_norms(bundle, form):
    out = {}
    for p, q in sorted(form.bidegrees()):
        part = form.pure_part(p, q)
        out[f"{p}{q}"] = float(bundle.l2_inner(part, part).real)
    return out


def _predicates_payload(bundle, tol):
    pred = predicates(bundle, tol)
    return {
        "is_kahler": pred.is_kahler,
        "is_skt": pred.is_skt,
        "is_balanced": pred.is_balanced,
        "d_omega_residual": pred.d_omega_residual,
        "ddbar_omega_residual": pred.ddbar_omega_residual,
        "d_omega_power_residual": pred.d_omega_power_residual,
    }


# ----- subcommands ---------------------------------------------------------------------


def _cmd_verify(args):
    model, source = _load_model(args)
    alg = algebra_for(model)
    n = alg.n
    threshold = args.tol if args.tol is not None else IDENTITY_THRESHOLD
    report = validate_model(model)
    rng = np.random.default_rng(args.seed)

    families = {}
    three_space = {}
    metrics = [HermitianMetric.identity(n)] + \
        [random_metric(n, rng) for _ in range(args.metrics)]
    for i, met in enumerate(metrics):
        bundle = bundle_for_algebra(alg, met)
        for key, val in identity_suite(bundle, seed=args.seed + i).items():
            families[key] = max(families.get(key, 0.0), val)
        for k in range(2 * n + 1):
            worst = max(three_space_residuals(bundle, k).values())
            key = str(k)
            three_space[key] = max(three_space.get(key, 0.0), worst)

    passed = (report.integrable and report.unimodular
              and report.d_squared_max_residual <= threshold
              and all(v <= threshold for v in families.values())
              and all(v <= threshold for v in three_space.values()))
    payload = {
        "validation": {
            "integrable": report.integrable,
            "unimodular": report.unimodular,
            "d_squared_max_residual": report.d_squared_max_residual,
            "integrability_residual": report.integrability_residual,
            "unimodularity_residual": report.unimodularity_residual,
            "messages": report.messages,
        },
        "metrics_checked": len(metrics),
        "identity_residuals": families,
        "three_space_residuals": three_space,
        "threshold": threshold,
        "pass": passed,
    }
    _emit_json(args, _envelope("verify", model, source, args.seed,
                               {"residual_threshold": threshold}, payload))
    return EXIT_OK if passed else EXIT_TOLERANCE


def _torsion_payload(bundle, report):
    payload = {
        "kind": report.kind,
        "norm_sq": report.norm_sq,
        "residual_equation": report.residual_equation,
        "residual_kernel": report.residual_kernel,
        "source_norm_sq": float(bundle.l2_inner(report.source, report.source).real),
        "harmonic_source_norm_sq": float(
            bundle.l2_inner(report.harmonic_source, report.harmonic_source).real),
        "torsion": report.torsion.to_entries(),
    }
    if report.kind == "rho":
        payload["pure_part_norm_sq"] = _form_norms(bundle, report.torsion)
    return payload


def _cmd_torsion(args):
    model, source = _load_model(args)
    alg = algebra_for(model)
    tol = args.tol if args.tol is not None else DEFAULT_TOL
    metric = _load_metric(args, alg.n)
    bundle = bundle_for_algebra(alg, metric)
    payload = {"metric": metric.to_json_obj(),
               "predicates": _predicates_payload(bundle, tol)}

    want = args.which
    reports = {}
    if want in ("rho", "both"):
        try:
            reports["rho"] = _torsion_payload(bundle, torsion_rho(bundle, tol))
        except NotSKT:
            if want == "rho":
                raise
    if want in ("gamma", "both"):
        try:
            reports["gamma"] = _torsion_payload(bundle, torsion_gamma(bundle, tol))
        except NotBalanced:
            if want == "gamma":
                raise
    if not reports:
        raise _CliFailure(EXIT_PREDICATE,
                          "metric is neither pluriclosed nor balanced at this tolerance")
    payload["torsion"] = reports
    _emit_json(args, _envelope("torsion", model, source, args.seed,
                               {"tol": tol}, payload))
    return EXIT_OK


def _cmd_eval(args):
    model, source = _load_model(args)
    alg = algebra_for(model)
    tol = args.tol if args.tol is not None else DEFAULT_TOL
    metric = _load_metric(args, alg.n)
    bundle = bundle_for_algebra(alg, metric)
    functional = _FUNCTIONALS[args.functional]
    nu = _load_nu(args, alg.n)
    if functional == "F":
        result = eval_F(bundle, tol)
    elif functional == "G":
        result = eval_G(bundle, tol)
    elif functional == "H":
        result = eval_H(bundle, bundle_for_algebra(alg, nu))
    else:
        result = eval_F_tilde(bundle, nu, tol)
    payload = {
        "functional": args.functional,
        "value": result.value,
        "ingredients": {k: float(v) for k, v in result.ingredients.items()},
        "metric": metric.to_json_obj(),
        "predicates": _predicates_payload(bundle, tol),
    }
    _emit_json(args, _envelope("eval", model, source, args.seed,
                               {"tol": tol}, payload))
    return EXIT_OK


def _battery_rows(model, seed, tuples, tol):
    """Per-tuple seeded batteries, optionally fanned out over threads.

    Seeding each tuple independently keeps the row set identical whatever
    HERMICONE_THREADS says; threads only change wall time.
    """
    jobs = [(seed + i, i) for i in range(tuples)]
    workers = _threads()

    def one(job):
        s, i = job
        return variation_battery(model, seed=s, tuples=1, tol=tol, start_index=i)

    if workers == 1:
        batches = [one(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(one, jobs))
    return [row for batch in batches for row in batch]


def _cmd_varcheck(args):
    model, source = _load_model(args)
    tol = args.tol if args.tol is not None else DEFAULT_TOL
    rows = _battery_rows(model, args.seed, args.tuples, tol)

    def threshold_for(name):
        return ORACLE_THRESHOLD if name in ("projector_oracle",
                                            "omega_scaling_projector") \
            else BATTERY_THRESHOLD

    failures = [r for r in rows if r.rel_err > threshold_for(r.name)]
    worst = {}
    for r in rows:
        worst[r.name] = max(worst.get(r.name, 0.0), r.rel_err)
    if args.format == "csv":
        _emit_csv(args, ["name", "detail", "analytic", "fd", "abs_err", "rel_err"],
                  [r.to_row() for r in rows])
    else:
        payload = {
            "tuples": args.tuples,
            "rows": [r.to_row() for r in rows],
            "worst_rel_err": worst,
            "failures": len(failures),
            "pass": not failures,
        }
        _emit_json(args, _envelope("varcheck", model, source, args.seed,
                                   {"tol": tol, "battery_threshold": BATTERY_THRESHOLD,
                                    "oracle_threshold": ORACLE_THRESHOLD}, payload))
    return EXIT_OK if not failures else EXIT_TOLERANCE


def _cmd_descend(args):
    model, source = _load_model(args)
    alg = algebra_for(model)
    tol = args.tol if args.tol is not None else DEFAULT_TOL
    functional = _FUNCTIONALS[args.functional]
    spec = args.metric or "identity"
    if spec == "identity":
        start = None
    elif spec == "random":
        start = "random"
    else:
        start = _load_metric(args, alg.n)
    normalize = {"auto": None, "on": True, "off": False}[args.normalize]
    nu = _load_nu(args, alg.n)
    trace = descend(model, functional=functional, start=start, nu=nu,
                    steps=args.steps, seed=args.seed, tol=tol,
                    gradient_tol=args.gradient_tol, normalize=normalize,
                    max_step=args.max_step)
    if args.format == "csv":
        rows = trace.csv_rows()
        fieldnames = list(rows[0].keys()) if rows else []
        _emit_csv(args, fieldnames, rows)
    else:
        _emit_json(args, _envelope("descend", model, source, args.seed,
                                   {"tol": tol, "gradient_tol": args.gradient_tol},
                                   trace.to_jsonable()))
    return EXIT_OK


def _cmd_catalog(args):
    payload = []
    for name in catalog_names():
        model = catalog(name)
        payload.append({
            "name": name,
            "n": model.n,
            "structure_terms": len(model.terms),
        })
    text = json.dumps({"catalog": payload}, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ----- argument parsing ------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hermicone",
        description="Torsion energies and metric descent on invariant-form models.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, metric=True):
        p.add_argument("--model", help="path to a model JSON document")
        p.add_argument("--catalog", help="name of a built-in model")
        if metric:
            p.add_argument("--metric", default="identity",
                           help='metric JSON file or "identity"')
        p.add_argument("--tol", type=float, default=None, help="tolerance override")
        p.add_argument("--seed", type=int, default=0, help="RNG seed")
        p.add_argument("--out", help="write the report to this path instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("verify", help="model validation plus operator identity residuals")
    add_common(p, metric=False)
    p.add_argument("--metrics", type=int, default=20,
                   help="number of seeded random metrics to audit")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("torsion", help="minimal torsion forms and their residuals")
    add_common(p)
    p.add_argument("--which", choices=("rho", "gamma", "both"), default="both")
    p.set_defaults(func=_cmd_torsion)

    p = sub.add_parser("eval", help="evaluate one torsion energy")
    add_common(p)
    p.add_argument("--functional", choices=sorted(_FUNCTIONALS), required=True)
    p.add_argument("--nu", default="identity",
                   help='reference metric file or "identity" (Ftilde normalization, H weight)')
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("varcheck", help="finite-difference audit of variation formulas")
    add_common(p, metric=False)
    p.add_argument("--tuples", type=int, default=20)
    p.set_defaults(func=_cmd_varcheck)

    p = sub.add_parser("descend", help="projected gradient descent of one energy")
    add_common(p)
    p.add_argument("--functional", choices=sorted(_FUNCTIONALS), default="Ftilde")
    p.add_argument("--nu", default="identity",
                   help='reference metric file or "identity" (normalization, H weight)')
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--gradient-tol", type=float, default=1e-8)
    p.add_argument("--max-step", type=float, default=None)
    p.add_argument("--normalize", choices=("auto", "on", "off"), default="auto")
    p.set_defaults(func=_cmd_descend)

    p = sub.add_parser("catalog", help="list built-in models")
    p.add_argument("--out", help="write the listing to this path instead of stdout")
    p.set_defaults(func=_cmd_catalog)

    return parser


_ERROR_CODES = (
    (SchemaError, EXIT_SCHEMA),
    ((ModelInvalid, ModelNotUnimodular, UnknownCatalogName, DimensionMismatch,
      DegreeOutOfRange), EXIT_VALIDATION),
    ((NotSKT, NotBalanced, NotPositive, NotPositiveDefinite), EXIT_PREDICATE),
    ((ToleranceFailure, ToleranceAmbiguity), EXIT_TOLERANCE),
    ((InfeasibleStart, EmptyCone, LineSearchFailure), EXIT_INFEASIBLE),
)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "format", "json") == "csv" \
                and args.subcommand not in ("varcheck", "descend"):
            raise _CliFailure(
                EXIT_SCHEMA, f"subcommand {args.subcommand!r} has no CSV projection")
        return args.func(args)
    except _CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        for classes, code in _ERROR_CODES:
            if isinstance(exc, classes):
                print(f"error: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    raise SystemExit(main())
