"""Command-line interface: every operation with JSON in and out.

Exit status: 0 when every check passes, 1 when a verification fails, 2 on usage
or input errors.  Reports are ``{"canonical": {...}, "timing": {...}}``; the
canonical block is byte-stable for a fixed argv.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import __version__
from . import io as jio
from .decomposition import (
    SolverConfig,
    certify_bounds,
    decompose_covderiv,
    decompose_curv,
    decompose_from_embedding,
    decompose_pair,
    span_check,
)
from .operators import (
    covderiv_operator,
    curvature_operator,
    eigenvalue_constancy,
    jacobi_operator,
    lemma21_instance,
    lemma21_lower_bounds,
    skew_operator,
    szabo_operator,
)
from .polynomial import Poly
from .realization import (
    DEFAULT_H,
    EXACT_TOL,
    FD_CHECK_H,
    FD_TOL,
    build_gf_metric,
    build_graph_metric,
    build_realizing_germ,
    covderiv_at_origin,
    curvature_at_origin,
    curvature_exact,
    curvature_fd_oracle,
    gf_point,
    random_graph_functions,
)
from .tensor_core import (
    COVDERIV,
    CURV,
    MAX_DIM,
    MIN_DIM,
    CovDerivTensor,
    CurvTensor,
    Space,
    SymForm2,
    SymForm3,
    build_A1,
    build_A_Psi,
    check_symmetries,
    class_dimension,
    project,
    random_element,
    random_sym2,
    random_sym3,
)

# single source for the thresholds used in reports
REALIZE_TOL = 1e-10
GRAPH_EXACT_TOL = 1e-10
GRAPH_FD_TOL = 1e-6
FD_CHECK = {"h": FD_CHECK_H, "richardson": True}
ADJOINT_TOL = 1e-12


class UsageError(Exception):
    pass


def _rel_dev(a, b) -> float:
    a = np.asarray(getattr(a, "components", a))
    b = np.asarray(getattr(b, "components", b))
    return float(np.max(np.abs(a - b), initial=0.0) / (1.0 + np.max(np.abs(b), initial=0.0)))


def _need_seed(args):
    if args.seed is None:
        raise UsageError(f"'{args.command}' is stochastic and requires --seed")
    return args.seed


def _signature(args, m):
    if args.signature is None:
        return Space.riemannian(m)
    try:
        p, q = (int(s) for s in args.signature.split(","))
    except ValueError:
        raise UsageError(f"--signature expects p,q, got {args.signature!r}") from None
    if p + q != m:
        raise UsageError(f"--signature {p},{q} does not match m={m}")
    return Space(p, q)


def _vectors(text: str, m: int) -> list[np.ndarray]:
    try:
        vs = [np.array([float(x) for x in part.split(",")]) for part in text.split(";")]
    except ValueError:
        raise UsageError(f"cannot parse vectors {text!r}; use 'a,b,c;d,e,f'") from None
    for v in vs:
        if v.shape != (m,):
            raise UsageError(f"vector {v.tolist()} has length {len(v)}, expected {m}")
    return vs


def _load(path, validate=True):
    return jio.tensor_from_dict(jio.read_json(path), validate=validate, where=str(path))


def _in_paths(args) -> list[str]:
    return [p for p in (args.inp or "").split(",") if p]


def _tensors_from_args(args, need_pair=False):
    """(A, A1) from --in files, or random elements from --m and --seed."""
    paths = _in_paths(args)
    if paths:
        objs = [_load(p) for p in paths]
        A = next((o for o in objs if isinstance(o, CurvTensor)), None)
        A1 = next((o for o in objs if isinstance(o, CovDerivTensor)), None)
        if A is None and A1 is None:
            raise UsageError("--in must name curv and/or covderiv tensor files")
    else:
        if args.m is None:
            raise UsageError("give --in files or --m with --seed")
        seed = _need_seed(args)
        A = random_element(args.m, CURV, seed)
        A1 = random_element(args.m, COVDERIV, seed + 1)
    if need_pair:
        m = (A or A1).m
        A = A if A is not None else CurvTensor(np.zeros((m,) * 4))
        A1 = A1 if A1 is not None else CovDerivTensor(np.zeros((m,) * 5))
    return A, A1


def _solver_config(args) -> SolverConfig:
    return SolverConfig(max_terms=args.max_terms, restarts=args.restarts,
                        tolerance=args.tol if args.tol is not None else 1e-8,
                        seed=_need_seed(args), mode=args.mode)


def _write_out(args, obj):
    if args.out:
        jio.write_json(args.out, obj)


# ---------------------------------------------------------------------------
# subcommands: each returns (result, checks)


def cmd_gen(args):
    if args.psi:
        psi = _load(args.psi)
        psi1 = _load(args.psi1) if args.psi1 else None
    else:
        if args.m is None:
            raise UsageError("gen needs --psi or --m with --seed")
        rng = np.random.default_rng(_need_seed(args))
        psi = random_sym2(args.m, rng)
        psi1 = random_sym3(args.m, rng) if args.with_psi1 else None
    if not isinstance(psi, SymForm2) or (psi1 is not None and not isinstance(psi1, SymForm3)):
        raise UsageError("--psi must be a sym2 file and --psi1 a sym3 file")
    t = build_A_Psi(psi) if psi1 is None else build_A1(psi, psi1)
    rep = check_symmetries(t)
    out = jio.tensor_to_dict(t)
    _write_out(args, out)
    return {"tensor": out, "symmetry": rep.to_dict()}, {"symmetries": rep.passed}


def cmd_check(args):
    paths = _in_paths(args)
    if len(paths) != 1:
        raise UsageError("check takes exactly one --in file")
    kind, arr = jio.dense_from_dict(jio.read_json(paths[0]), paths[0])
    if kind not in (CURV, COVDERIV):
        raise UsageError("check expects a curv or covderiv tensor")
    rep = check_symmetries(arr, args.tol if args.tol is not None else 1e-12)
    return rep.to_dict(), {"symmetries": rep.passed}


def cmd_project(args):
    paths = _in_paths(args)
    if len(paths) != 1:
        raise UsageError("project takes exactly one --in file")
    kind, arr = jio.dense_from_dict(jio.read_json(paths[0]), paths[0])
    if kind not in (CURV, COVDERIV):
        raise UsageError("project expects a curv or covderiv array")
    t = project(arr)
    again = project(t)
    out = jio.tensor_to_dict(t)
    _write_out(args, out)
    idem = float(np.max(np.abs(again.components - t.components), initial=0.0))
    return ({"tensor": out, "idempotency_error": idem},
            {"in_class": check_symmetries(t).passed, "idempotent": idem <= 1e-13 * max(1.0, t.norm_inf())})


def cmd_dims(args):
    ms = [args.m] if args.m is not None else list(range(MIN_DIM, MAX_DIM))
    rows, checks = {}, {}
    for m in ms:
        c, d = class_dimension(m, CURV), class_dimension(m, COVDERIV)
        rows[str(m)] = {"curv": c, "covderiv": d}
        checks[f"m={m}"] = (c == m * m * (m * m - 1) // 12 and d == m * m * (m * m - 1) * (m + 2) // 24)
    return rows, checks


def cmd_span(args):
    if args.m is None:
        raise UsageError("span-check needs --m")
    res = span_check(args.m, args.which, args.samples, _need_seed(args))
    return res.to_dict(), {"full_rank": res.full}


def cmd_op(args):
    A, A1 = _tensors_from_args(args)
    t = A1 if args.kind in ("szabo", "covop") else A
    if t is None:
        raise UsageError(f"op {args.kind} needs a {'covderiv' if args.kind in ('szabo', 'covop') else 'curv'} tensor")
    space = _signature(args, t.m)
    nvec = {"jacobi": 1, "szabo": 1, "skew": 2, "curvop": 2, "covop": 3}[args.kind]
    if args.vectors is None:
        raise UsageError(f"op {args.kind} needs --vectors with {nvec} vector(s)")
    vs = _vectors(args.vectors, t.m)
    if len(vs) != nvec:
        raise UsageError(f"op {args.kind} takes {nvec} vector(s), got {len(vs)}")
    fn = {"jacobi": jacobi_operator, "szabo": szabo_operator, "skew": skew_operator,
          "curvop": curvature_operator, "covop": covderiv_operator}[args.kind]
    try:
        rep = fn(space, t, *vs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    gM = space.gram @ rep.matrix
    sign = 1.0 if args.kind in ("jacobi", "szabo") else -1.0
    dev = float(np.max(np.abs(gM - sign * gM.T), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(gM), initial=0.0)))
    name = "self_adjoint" if sign > 0 else "skew_adjoint"
    return rep.to_dict(), {name: dev <= ADJOINT_TOL * scale}


def cmd_lemma21(args):
    inst = lemma21_instance(args.mbar, args.odd_pad)
    sp = inst.space
    r = curvature_operator(sp, inst.A, inst.xi1, inst.xi2)
    r1 = covderiv_operator(sp, inst.A1, inst.xi1, inst.xi2, inst.xi3)
    eqs = all(
        np.array_equal(r.matrix @ inst.e(i), -inst.f(i)) and np.array_equal(r.matrix @ inst.f(i), inst.e(i))
        and np.array_equal(r1.matrix @ inst.e(i), -2 * inst.f(i))
        and np.array_equal(r1.matrix @ inst.f(i), 2 * inst.e(i))
        for i in range(inst.mbar))
    seed = args.seed if args.seed is not None else 0
    lo, lo1 = lemma21_lower_bounds(inst, args.samples, seed)
    res = {"mbar": inst.mbar, "m": inst.m, "rank_R_A": r.numerical_rank, "rank_R_A1": r1.numerical_rank,
           "nu_lower": lo, "nu1_lower": lo1, "proof_equations_hold": eqs}
    checks = {"rank_R_A": r.numerical_rank == 2 * inst.mbar, "rank_R_A1": r1.numerical_rank == 2 * inst.mbar,
              "proof_equations": eqs, "nu_lower": lo == inst.mbar, "nu1_lower": lo1 == -(-2 * inst.mbar // 4)}
    return res, checks


def cmd_bounds(args):
    A, A1 = _tensors_from_args(args)
    if A is None:
        raise UsageError("bounds needs a curv tensor")
    if not _signature(args, A.m).is_riemannian:
        raise UsageError("bounds are defined for the positive definite inner product only")
    cfg = _solver_config(args)
    b = certify_bounds(A, A1, cfg, args.samples)
    ok = b.upper is not None and b.lower <= b.upper
    if A1 is not None:
        ok = ok and b.upper1 is not None and b.lower1 <= b.upper1
    return b.to_dict(), {"lower_le_upper": ok}


def cmd_decompose(args):
    A, A1 = _tensors_from_args(args)
    cfg = _solver_config(args)
    if A is not None and A1 is not None:
        d = decompose_pair(A, A1, cfg)
    elif A is not None:
        d = decompose_curv(A, cfg)
    else:
        d = decompose_covderiv(A1, cfg)
    out = d.to_dict()
    _write_out(args, out)
    return out, {"converged": d.success}


def cmd_realize(args):
    A, A1 = _tensors_from_args(args, need_pair=True)
    space = _signature(args, A.m)
    germ = build_realizing_germ(space, A, A1)
    out = jio.germ_to_dict(germ)
    _write_out(args, out)
    res = {"germ": out}
    checks = {}
    if args.verify:
        R0, R1 = curvature_at_origin(germ), covderiv_at_origin(germ)
        h = args.h if args.h is not None else DEFAULT_H
        Rf, R1f = curvature_fd_oracle(germ, None, h)
        exact = max(_rel_dev(R0, A), _rel_dev(R1, A1))
        fd = max(_rel_dev(Rf, A), _rel_dev(R1f, A1))
        res["roundtrip"] = {"exact_max_error": exact, "fd_max_error": fd, "h": h}
        checks = {"exact_roundtrip": exact <= REALIZE_TOL, "fd_roundtrip": fd <= FD_TOL}
    return res, checks


def cmd_curv_from_metric(args):
    paths = _in_paths(args)
    if len(paths) != 1:
        raise UsageError("curv-from-metric takes one germ --in file")
    germ = jio.germ_from_dict(jio.read_json(paths[0]), paths[0])
    h = args.h if args.h is not None else DEFAULT_H
    R0, R1 = curvature_at_origin(germ), covderiv_at_origin(germ)
    Re, R1e = curvature_exact(germ)
    Rf, R1f = curvature_fd_oracle(germ, None, h)
    devs = {"origin_vs_general": max(_rel_dev(Re, R0), _rel_dev(R1e, R1)),
            "fd_vs_exact": max(_rel_dev(Rf, R0), _rel_dev(R1f, R1))}
    res = {"R": jio.tensor_to_dict(R0), "nablaR": jio.tensor_to_dict(R1), "deviations": devs, "h": h}
    return res, {"symmetries": check_symmetries(R0).passed and check_symmetries(R1).passed,
                 "origin_vs_general": devs["origin_vs_general"] <= EXACT_TOL,
                 "fd_vs_exact": devs["fd_vs_exact"] <= FD_TOL}


def cmd_graph_decomp(args):
    paths = _in_paths(args)
    if paths:
        f_list, m = jio.flist_from_dict(jio.read_json(paths[0]), paths[0])
    else:
        if args.m is None:
            raise UsageError("graph-decomp needs --in or --m with --seed")
        m = args.m
        kappa = args.kappa if args.kappa is not None else m * (m + 1) // 2
        f_list = random_graph_functions(m, kappa, np.random.default_rng(_need_seed(args)))
    dec = decompose_from_embedding(f_list, m)
    metric = build_graph_metric(f_list, m)
    Rf, R1f = curvature_fd_oracle(metric, None, **FD_CHECK)
    fd = max(_rel_dev(Rf, dec.reconstruct_curv(m)), _rel_dev(R1f, dec.reconstruct_covderiv(m)))
    out = dec.to_dict()
    _write_out(args, out)
    return ({"decomposition": out, "fd_max_error": fd, "functions": jio.flist_to_dict(f_list, m)["functions"]},
            {"exact_curv": dec.residual_curv <= GRAPH_EXACT_TOL,
             "exact_covderiv": dec.residual_covderiv <= GRAPH_EXACT_TOL,
             "fd": fd <= GRAPH_FD_TOL})


def cmd_gf(args):
    p = args.p
    if args.f:
        f = jio.poly_from_dict(jio.read_json(args.f), p, args.f)
    else:
        rng = np.random.default_rng(_need_seed(args))
        f = random_graph_functions(p, 1, rng)[0] + Poly.from_monomials(p, [[[2 if i == j else 0 for j in range(p)], 0.5 * p]
                                                                   for i in range(p)])
    at = np.array([float(x) for x in args.point.split(",")]) if args.point else np.zeros(p)
    if at.shape != (p,):
        raise UsageError(f"--point needs {p} coordinates")
    metric, psi, psi1 = build_gf_metric(p, f, at)
    x = gf_point(p, at)
    A, A1 = build_A_Psi(psi), build_A1(psi, psi1)
    Re, R1e = curvature_exact(metric, x)
    Rf, R1f = curvature_fd_oracle(metric, x, **FD_CHECK)
    devs = {"exact_R": _rel_dev(Re, A), "exact_nablaR": _rel_dev(R1e, A1),
            "fd_R": _rel_dev(Rf, A), "fd_nablaR": _rel_dev(R1f, A1)}
    space = Space.from_gram(metric(x))
    seed = args.seed if args.seed is not None else 0
    sz = eigenvalue_constancy(space, "szabo", A1, "spacelike", args.samples, seed, 1e-6)
    xpd = bool(np.all(np.linalg.eigvalsh(psi.components[:p, :p]) > 0))
    res = {"polynomial": jio.poly_to_dict(f), "point": at.tolist(), "signature": list(space.signature),
           "deviations": devs, "x_block_positive_definite": xpd, "szabo_spacelike": sz.to_dict()}
    checks = {"exact_R": devs["exact_R"] <= EXACT_TOL, "exact_nablaR": devs["exact_nablaR"] <= EXACT_TOL,
              "fd_R": devs["fd_R"] <= FD_TOL, "fd_nablaR": devs["fd_nablaR"] <= FD_TOL}
    return res, checks


def cmd_eig(args):
    A, A1 = _tensors_from_args(args)
    t = A if args.family == "jacobi" else A1
    if t is None:
        raise UsageError(f"{args.family} constancy needs a {'curv' if args.family == 'jacobi' else 'covderiv'} tensor")
    space = _signature(args, t.m)
    try:
        res = eigenvalue_constancy(space, args.family, t, args.sampler, args.samples, _need_seed(args),
                                   args.tol if args.tol is not None else 1e-8)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    checks = {}
    if args.expect:
        checks["expectation"] = res.constant == (args.expect == "constant")
    return res.to_dict(), checks


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--out", default=None, help="write the primary artifact to this JSON file")
    common.add_argument("--no-timing", action="store_true", help="omit the wall-time block")

    tens = argparse.ArgumentParser(add_help=False)
    tens.add_argument("--in", dest="inp", default=None, help="comma-separated tensor files")
    tens.add_argument("--m", type=int, default=None, help="dimension for random inputs")
    tens.add_argument("--signature", default=None, help="p,q (negatives first)")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--max-terms", type=int, default=None)
    solver.add_argument("--restarts", type=int, default=20)
    solver.add_argument("--mode", choices=("unsigned", "signed"), default="unsigned")

    ap = argparse.ArgumentParser(prog="algcurv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"algcurv {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="build A_Psi or A_{1,Psi,Psi1}")
    p.add_argument("--psi")
    p.add_argument("--psi1")
    p.add_argument("--m", type=int)
    p.add_argument("--with-psi1", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check", parents=[common, tens], help="symmetry report")
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("project", parents=[common, tens], help="project onto the symmetry class")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("dims", parents=[common], help="dimensions of the two classes")
    p.add_argument("--m", type=int)
    p.set_defaults(func=cmd_dims)

    p = sub.add_parser("span-check", parents=[common], help="rank of random generators")
    p.add_argument("--m", type=int)
    p.add_argument("--which", choices=(CURV, COVDERIV), default=CURV)
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_span)

    p = sub.add_parser("op", parents=[common, tens], help="curvature operators")
    p.add_argument("kind", choices=("jacobi", "szabo", "skew", "curvop", "covop"))
    p.add_argument("--vectors", help="'a,b,c;d,e,f'")
    p.set_defaults(func=cmd_op)

    p = sub.add_parser("lemma21", parents=[common], help="the rank 2*mbar construction")
    p.add_argument("--mbar", type=int, required=True)
    p.add_argument("--odd-pad", action="store_true")
    p.add_argument("--samples", type=int, default=64)
    p.set_defaults(func=cmd_lemma21)

    p = sub.add_parser("bounds", parents=[common, tens, solver], help="bracket the generator counts")
    p.add_argument("--samples", type=int, default=64)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("decompose", parents=[common, tens, solver], help="generator decomposition")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("realize", parents=[common, tens], help="metric germ realizing (A, A1)")
    p.add_argument("--verify", action="store_true")
    p.add_argument("--h", type=float, default=None)
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("curv-from-metric", parents=[common, tens], help="jets of a germ at 0")
    p.add_argument("--h", type=float, default=None)
    p.set_defaults(func=cmd_curv_from_metric)

    p = sub.add_parser("graph-decomp", parents=[common, tens], help="decomposition from a graph")
    p.add_argument("--kappa", type=int, default=None)
    p.set_defaults(func=cmd_graph_decomp)

    p = sub.add_parser("gf-example", parents=[common], help="neutral-signature g_f family")
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--f", default=None, help="polynomial JSON in p variables")
    p.add_argument("--point", default=None, help="x coordinates of the evaluation point")
    p.add_argument("--samples", type=int, default=16)
    p.set_defaults(func=cmd_gf)

    p = sub.add_parser("eig-constancy", parents=[common, tens], help="Osserman/Szabo sampling check")
    p.add_argument("--family", choices=("jacobi", "szabo"), default="jacobi")
    p.add_argument("--sampler", choices=("spacelike", "timelike"), default="spacelike")
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--expect", choices=("constant", "varying"), default=None)
    p.set_defaults(func=cmd_eig)
    return ap


def _params(args) -> dict:
    skip = {"func", "format", "no_timing", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _render_text(obj, indent=0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not _is_flat(v):
                lines.append(f"{pad}{k}:")
                lines.append(_render_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {v}")
    elif isinstance(obj, list):
        for v in obj:
            lines.append(_render_text(v, indent) if isinstance(v, (dict, list)) else f"{pad}- {v}")
    else:
        lines.append(f"{pad}{obj}")
    return "\n".join(lines)


def _is_flat(v) -> bool:
    return isinstance(v, list) and all(not isinstance(x, (dict, list)) for x in v)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        result, checks = args.func(args)
    except (UsageError, jio.FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    passed = all(checks.values())
    report = {"canonical": {
        "manifest": {"command": args.command, "params": _params(args), "seed": args.seed,
                     "version": __version__},
        "checks": checks,
        "passed": passed,
        "result": result,
    }}
    if not args.no_timing:
        report["timing"] = {"wall_time_s": round(time.perf_counter() - t0, 6)}
    if args.format == "json":
        print(jio.dumps(report))
    else:
        print(_render_text(report))
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
