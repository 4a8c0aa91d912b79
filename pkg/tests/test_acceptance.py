"""Acceptance criteria, one test each, at the stated tolerances.

Each test prints a single ``PASS``/``FAIL`` line; the lines are repeated in the
pytest terminal summary.  Run directly (``python3 tests/test_acceptance.py``)
to get only the lines.
"""
import io
import time
from contextlib import redirect_stdout

import numpy as np

from algcurv import io as jio
from algcurv.cli import main as cli_main
from algcurv.decomposition import (
    SolverConfig,
    certify_bounds,
    decompose_curv,
    decompose_from_embedding,
    decompose_pair,
    max_terms_bound,
    relative_residual,
    span_check,
)
from algcurv.operators import (
    covderiv_operator,
    curvature_operator,
    lemma21_instance,
    nu_lower_bound,
)
from algcurv.polynomial import Poly
from algcurv.realization import (
    FD_CHECK_H,
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
from algcurv.tensor_core import (
    COVDERIV,
    CURV,
    Space,
    build_A1,
    build_A_Psi,
    check_symmetries,
    class_dimension,
    random_element,
    random_sym2,
    random_sym3,
)

RESULTS = []
FD_CHECK = {"h": FD_CHECK_H, "richardson": True}


def record(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
    RESULTS.append(line)
    print(line)
    return ok


def rel(a, b):
    a, b = np.asarray(getattr(a, "components", a)), np.asarray(getattr(b, "components", b))
    return float(np.max(np.abs(a - b)) / (1.0 + np.max(np.abs(b))))


def test_1_generator_validity():
    worst = 0.0
    for m in range(2, 7):
        rng = np.random.default_rng(100 + m)
        for _ in range(100):
            P, T = random_sym2(m, rng), random_sym3(m, rng)
            for t in (build_A_Psi(P), build_A1(P, T)):
                worst = max(worst, check_symmetries(t).max_violation / max(t.norm_inf(), 1e-300))
    assert record(1, "generators satisfy the class identities, m=2..6, 100 seeds", worst <= 1e-12,
                  f"max relative violation {worst:.2e}")


def test_2_span_full_rank():
    rows, ok = [], True
    for m in (2, 3, 4):
        for which in (CURV, COVDERIV):
            t0 = time.perf_counter()
            res = span_check(m, which, seed=m)
            dt = time.perf_counter() - t0
            good = res.rank == class_dimension(m, which) and dt < 30
            ok &= good
            rows.append(f"m={m} {which} {res.rank}/{res.dimension} {dt:.1f}s")
    assert record(2, "sampled generators span each class", ok, "; ".join(rows))


def test_3_round_trip():
    exact_worst = fd_worst = 0.0
    orders = []
    for m in (2, 3, 4):
        for sig in ((0, m), (1, m - 1)):
            for s in range(25):
                A, A1 = random_element(m, CURV, 1000 * m + s), random_element(m, COVDERIV, 2000 * m + s)
                germ = build_realizing_germ(Space.from_signature(m, sig), A, A1)
                exact_worst = max(exact_worst, rel(curvature_at_origin(germ), A),
                                  rel(covderiv_at_origin(germ), A1))
                R, nR = curvature_exact(germ)
                exact_worst = max(exact_worst, rel(R, A), rel(nR, A1))
                Rf, nRf = curvature_fd_oracle(germ, None, 1e-3)
                fd_worst = max(fd_worst, rel(Rf, A), rel(nRf, A1))
                # order measured where truncation dominates roundoff
                errs = []
                for h in (0.04, 0.02):
                    Rh, nRh = curvature_fd_oracle(germ, None, h)
                    errs.append(max(np.max(np.abs(Rh.components - A.components)),
                                    np.max(np.abs(nRh.components - A1.components))))
                orders.append(np.log2(errs[0] / errs[1]))
    ok = exact_worst <= 1e-12 and fd_worst <= 1e-6 and all(abs(o - 2) <= 0.5 for o in orders)
    assert record(3, "realizing germ round trip, 150 cases", ok,
                  f"exact {exact_worst:.1e}, fd {fd_worst:.1e} at h=1e-3, order {min(orders):.3f}..{max(orders):.3f}")


def test_4a_single_generator_rank_curv():
    worst = 0
    for m in range(2, 7):
        rng = np.random.default_rng(40 + m)
        sp = Space.riemannian(m)
        A = build_A_Psi(random_sym2(m, rng))
        for _ in range(64):
            worst = max(worst, curvature_operator(sp, A, *rng.standard_normal((2, m))).numerical_rank)
    assert record("4a", "rank R_A <= 2 for one generator A_Psi, m=2..6, 64 tuples", worst <= 2,
                  f"max rank {worst}")


def test_4a_single_generator_rank_covderiv():
    # The same rank bound for A_{1,Psi,Psi1} does not hold once m >= 4: the image
    # of R_A1(xi1, xi2, xi3) is spanned by psi xi1, psi1(xi3) xi1, psi xi2 and
    # psi1(xi3) xi2, and rank 4 is generic.  Kept at the stated bound.
    worst, by_m = 0, {}
    for m in range(2, 7):
        rng = np.random.default_rng(50 + m)
        sp = Space.riemannian(m)
        P, T = random_sym2(m, rng), random_sym3(m, rng)
        A1 = build_A1(P, T)
        r = max(covderiv_operator(sp, A1, *rng.standard_normal((3, m))).numerical_rank for _ in range(64))
        by_m[m] = r
        worst = max(worst, r)
    assert record("4a", "rank R_A1 <= 2 for one generator A_{1,Psi,Psi1}, m=2..6, 64 tuples", worst <= 2,
                  "max rank by m " + ", ".join(f"{m}:{r}" for m, r in by_m.items()))


def test_4b_4c_lemma21():
    ok, rows = True, []
    for mbar in (1, 2, 3):
        inst = lemma21_instance(mbar)
        sp = inst.space
        R = curvature_operator(sp, inst.A, inst.xi1, inst.xi2)
        R1 = covderiv_operator(sp, inst.A1, inst.xi1, inst.xi2, inst.xi3)
        eqs = all(np.array_equal(R.matrix @ inst.e(i), -inst.f(i))
                  and np.array_equal(R.matrix @ inst.f(i), inst.e(i))
                  and np.array_equal(R1.matrix @ inst.e(i), -2 * inst.f(i))
                  and np.array_equal(R1.matrix @ inst.f(i), 2 * inst.e(i)) for i in range(mbar))
        lower = nu_lower_bound(sp, inst.A, 64, 0, extra=[(inst.xi1, inst.xi2)])
        good = R.numerical_rank == R1.numerical_rank == 2 * mbar and eqs and lower == mbar
        ok &= good
        rows.append(f"mbar={mbar}: ranks {R.numerical_rank},{R1.numerical_rank} eqs={eqs} lower={lower}")
    assert record("4b/4c", "rank 2*mbar construction and lower bound", ok, "; ".join(rows))


def test_5_upper_bounds():
    rows, ok = [], True
    for m, k in ((2, 1), (3, 2)):
        wins = 0
        for s in range(10):
            A = random_element(m, CURV, 500 + 10 * m + s)
            d = decompose_curv(A, SolverConfig(max_terms=k, seed=s, tolerance=1e-6))
            wins += d.success and relative_residual(A, d.reconstruct_curv(m)) <= 1e-6
        ok &= wins == 10
        rows.append(f"curv m={m} k={k}: {wins}/10")
    for m in (2, 3, 4):
        wins = 0
        for s in range(10):
            A, A1 = random_element(m, CURV, 600 + 10 * m + s), random_element(m, COVDERIV, 700 + 10 * m + s)
            d = decompose_pair(A, A1, SolverConfig(seed=s, restarts=20, tolerance=1e-6))
            wins += (d.success and d.term_count <= max_terms_bound(m)
                     and all(t.lam == 1.0 for t in d.terms)
                     and relative_residual(A, d.reconstruct_curv(m)) <= 1e-6
                     and relative_residual(A1, d.reconstruct_covderiv(m)) <= 1e-6)
        ok &= wins == 10
        rows.append(f"pair m={m}: {wins}/10")
    cases = [(random_element(m, CURV, 800 + s), random_element(m, COVDERIV, 900 + s))
             for m in (2, 3) for s in range(3)]
    cases += [(random_element(4, CURV, 850), random_element(4, COVDERIV, 950))]
    cases += [(lemma21_instance(mb).A, lemma21_instance(mb).A1) for mb in (1, 2)]
    consistent = 0
    for A, A1 in cases:
        b = certify_bounds(A, A1, SolverConfig(seed=0), 32)
        consistent += (b.upper is not None and b.lower <= b.upper
                       and b.upper1 is not None and b.lower1 <= b.upper1)
    ok &= consistent == len(cases)
    rows.append(f"bounds consistent {consistent}/{len(cases)}")
    assert record(5, "solver witnesses and bound brackets", ok, "; ".join(rows))


def test_6_embedding_identities():
    exact_worst = fd_worst = 0.0
    n = 0
    for m in (2, 3):
        for s in range(10):
            rng = np.random.default_rng(60 + 10 * m + s)
            kappa = 1 + s % max_terms_bound(m)
            fs = random_graph_functions(m, kappa, rng, max_degree=4)
            dec = decompose_from_embedding(fs, m)
            A, A1 = dec.reconstruct_curv(m), dec.reconstruct_covderiv(m)
            R, nR = curvature_exact(build_graph_metric(fs, m))
            exact_worst = max(exact_worst, rel(R, A), rel(nR, A1))
            Rf, nRf = curvature_fd_oracle(build_graph_metric(fs, m), None, **FD_CHECK)
            fd_worst = max(fd_worst, rel(Rf, A), rel(nRf, A1))
            n += 1
    ok = exact_worst <= 1e-10 and fd_worst <= 1e-6
    assert record(6, f"graph curvature equals the Hessian generator sums, {n} f-lists", ok,
                  f"exact {exact_worst:.1e}, fd {fd_worst:.1e}")


def _gf_functions(p, rng):
    out = []
    for _ in range(3):
        mons = [[[2 if i == j else 0 for j in range(p)], 1.0 + rng.random()] for i in range(p)]
        mons += [[list(rng.integers(0, 3, p)), 0.2 * float(rng.standard_normal())] for _ in range(2 * p)]
        mons += [[[int(v) for v in rng.multinomial(3, [1 / p] * p)], 0.3 * float(rng.standard_normal())]
                 for _ in range(p)]
        out.append(Poly.from_monomials(p, mons))
    return out


def test_7_gf_family():
    worst, quad_worst = 0.0, 0.0
    for p in (3, 4):
        rng = np.random.default_rng(70 + p)
        for f in _gf_functions(p, rng):
            at = 0.2 * rng.standard_normal(p)
            metric, psi, psi1 = build_gf_metric(p, f, at)
            assert np.all(np.linalg.eigvalsh(psi.components[:p, :p]) > 0), "x block must be positive definite"
            x = gf_point(p, at, rng.standard_normal(p))
            Rf, nRf = curvature_fd_oracle(metric, x, **FD_CHECK)
            worst = max(worst, rel(Rf, build_A_Psi(psi)), rel(nRf, build_A1(psi, psi1)))
        quad = Poly.from_monomials(p, [[[2 if i == j else 0 for j in range(p)], 1.0 + i] for i in range(p)]
                                   + [[[1 if i in (0, 1) else 0 for i in range(p)], 0.5]])
        metric, psi, _ = build_gf_metric(p, quad)
        _, nRf = curvature_fd_oracle(metric, gf_point(p, 0.3 * np.ones(p), np.ones(p)), **FD_CHECK)
        quad_worst = max(quad_worst, float(np.max(np.abs(nRf.components))))
    ok = worst <= 1e-6 and quad_worst <= 1e-8
    assert record(7, "neutral-signature family matches its generators", ok,
                  f"fd {worst:.1e}; quadratic |nabla R| {quad_worst:.1e}")


def _cli(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main(argv + ["--no-timing"])
    return code, buf.getvalue()


def test_8_cli_determinism(tmp_path):
    a, a1, germ = (str(tmp_path / n) for n in ("A.json", "A1.json", "germ.json"))
    jio.write_json(a, jio.tensor_to_dict(random_element(3, CURV, 0)))
    jio.write_json(a1, jio.tensor_to_dict(random_element(3, COVDERIV, 0)))
    cli_main(["realize", "--in", f"{a},{a1}", "--out", germ, "--no-timing"])
    runs = [
        ["gen", "--m", "3", "--seed", "1", "--with-psi1"],
        ["check", "--in", a1],
        ["project", "--in", a],
        ["dims"],
        ["span-check", "--m", "3", "--which", "covderiv", "--seed", "2"],
        ["op", "jacobi", "--in", a, "--vectors", "1,2,3"],
        ["op", "szabo", "--in", a1, "--vectors", "1,2,3", "--signature", "1,2"],
        ["op", "skew", "--in", a, "--vectors", "1,0,0;0,1,0"],
        ["op", "curvop", "--in", a, "--vectors", "1,2,0;0,1,5"],
        ["op", "covop", "--in", a1, "--vectors", "1,2,0;0,1,5;1,1,1"],
        ["lemma21", "--mbar", "2", "--odd-pad"],
        ["bounds", "--m", "2", "--seed", "3"],
        ["decompose", "--in", f"{a},{a1}", "--seed", "4"],
        ["realize", "--in", f"{a},{a1}", "--verify"],
        ["curv-from-metric", "--in", germ],
        ["graph-decomp", "--m", "2", "--seed", "5"],
        ["gf-example", "--p", "2", "--seed", "6"],
        ["eig-constancy", "--m", "3", "--seed", "7", "--family", "szabo"],
    ]
    bad = []
    for argv in runs:
        first, second = _cli(argv), _cli(argv)
        if first != second or first[0] == 2:
            bad.append(" ".join(argv[:2]))
    assert record(8, f"byte-identical canonical reports, {len(runs)} invocations", not bad,
                  "differing: " + ", ".join(bad) if bad else "all identical")


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    RESULTS.clear()
    for name, fn in sorted((n, f) for n, f in globals().items() if n.startswith("test_")):
        with redirect_stdout(io.StringIO()):
            try:
                fn(Path(tempfile.mkdtemp())) if name == "test_8_cli_determinism" else fn()
            except AssertionError:
                pass
        print(RESULTS[-1])
    sys.exit(0 if all(r.startswith("[PASS]") for r in RESULTS) else 1)
