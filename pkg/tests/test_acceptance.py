"""Acceptance criteria 1-9, each printing one PASS/FAIL line with its numbers."""
import math
import time

import numpy as np
import pytest
import scipy.linalg as sla

from bubblezoom import asymptotics as asy
from bubblezoom import bubbles as bb
from bubblezoom import norms
from bubblezoom.assembly import (METHODS, MethodConfig, assemble_system, build_bubble_space,
                                 condense, norm_matrices, solve, solve_discrete, spec_of)
from bubblezoom.cli import run_points, table_rows
from bubblezoom.grid import build_mesh

import oracles

EPS = 1e-6
NS = [10, 20, 40, 80, 160]
STAB_160 = 0.169e-2
_RUNS = {}


def report(capsys, k, ok, msg):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {msg}"
    with capsys.disabled():
        print("\n" + line, flush=True)
    return ok


def manufactured_rows(method, form="standard"):
    """Table rows for the manufactured problem, computed once per (method, form)."""
    key = (method, form)
    if key not in _RUNS:
        t0 = time.perf_counter()
        pts = [("manufactured", method, N, EPS, form) for N in NS]
        _RUNS[key] = (table_rows(method, NS, run_points(pts)), time.perf_counter() - t0)
    return _RUNS[key][0]


def col(rows, k):
    return np.array([r[k] for r in rows])


def fmt(v):
    return "[" + ", ".join(f"{x:.3e}" for x in v) + "]"


def test_criterion_1_stability_table(capsys):
    bmz = manufactured_rows("bmz")
    stab = col(bmz, "stab")
    rates = norms.eoc(stab, NS)
    monotone = bool(np.all(np.diff(stab) < 0))
    rates_ok = bool(np.all(rates >= 1.0))
    forms = {"standard": float(stab[-1])}
    if not abs(math.log(stab[-1] / STAB_160)) <= math.log(2):
        forms["weighted"] = float(col(manufactured_rows("bmz", "weighted"), "stab")[-1])
    final_ok = any(abs(math.log(v / STAB_160)) <= math.log(2) for v in forms.values())
    s160 = {m: float(col(manufactured_rows(m), "stab")[-1]) for m in ("bmz", "rfbe", "rfb")}
    order_ok = s160["bmz"] < s160["rfbe"] < s160["rfb"]
    wall = sum(t for _, t in _RUNS.values())
    ok = monotone and rates_ok and final_ok and order_ok
    report(capsys, 1, ok,
           f"BMZ stab {fmt(stab)} decreasing={monotone}; EOC {np.round(rates, 2).tolist()} "
           f">= 1.0: {rates_ok}; N=160 {forms} within 2x of {STAB_160}: {final_ok}; "
           f"ordering bmz<rfbe<rfb at N=160 {s160}: {order_ok}; wall {wall:.0f} s")
    assert ok


def test_criterion_2_h1_trend(capsys):
    h1 = {m: col(manufactured_rows(m), "H1") for m in ("bmz", "rfbe", "rfb")}
    var = {m: h1[m].max() / h1[m].min() for m in ("rfb", "rfbe")}
    flat_ok = all(v < 2 for v in var.values())
    drop = h1["bmz"][0] / h1["bmz"][-1]
    drop_ok = drop >= 8
    ok = flat_ok and drop_ok
    report(capsys, 2, ok,
           f"H1 variation RFB {var['rfb']:.2f}x, RFBe {var['rfbe']:.2f}x (< 2: {flat_ok}); "
           f"BMZ {fmt(h1['bmz'])} drop {drop:.2f}x (>= 8: {drop_ok})")
    assert ok


def test_criterion_3_l2_trend(capsys):
    l2 = col(manufactured_rows("bmz"), "L2")
    rates = norms.eoc(l2, NS)
    rates_ok = bool(np.all(rates >= 1.2))
    rfbe = col(manufactured_rows("rfbe"), "L2")[-1]
    cmp_ok = l2[-1] < rfbe
    ok = rates_ok and cmp_ok
    report(capsys, 3, ok,
           f"BMZ L2 {fmt(l2)} EOC {np.round(rates, 2).tolist()} (>= 1.2: {rates_ok}); "
           f"N=160 BMZ {l2[-1]:.3e} < RFBe {rfbe:.3e}: {cmp_ok}")
    assert ok


def test_criterion_4_overshoot(capsys):
    one = norms.constant_rhs(1.0)
    ch = {m: norms.max_value(solve(50, EPS, one, MethodConfig(method=m))) for m in ("rfb", "bmz")}
    mf = {m: float(col(manufactured_rows(m), "max_value")[NS.index(80)]) for m in ("rfb", "bmz")}
    checks = {
        "channel RFB >= 1.3": ch["rfb"] >= 1.3,
        "channel BMZ in [0.95, 1.01]": 0.95 <= ch["bmz"] <= 1.01,
        "manufactured RFB >= 1.15": mf["rfb"] >= 1.15,
        "manufactured BMZ in [0.96, 1.01]": 0.96 <= mf["bmz"] <= 1.01,
    }
    ok = all(checks.values())
    report(capsys, 4, ok,
           f"channel N=50 max RFB {ch['rfb']:.4f}, BMZ {ch['bmz']:.4f}; manufactured N=80 "
           f"max RFB {mf['rfb']:.4f}, BMZ {mf['bmz']:.4f}; {checks}")
    assert ok


def test_criterion_5_robustness(capsys):
    e = col(manufactured_rows("bmz"), "eps_norm")
    r = (EPS * np.array(NS, dtype=float)) ** 0.25  # (eps / h)^(1/4)
    C = float(np.exp(np.mean(np.log(e[:2] / r[:2]))))
    mono = bool(np.all(np.diff(e) <= 0))
    bound = bool(np.all(e <= 1.5 * C * r))
    ok = mono and bound
    report(capsys, 5, ok,
           f"BMZ eps-norm {fmt(e)} nonincreasing={mono}; C={C:.3e}, "
           f"ratio to C(eps/h)^(1/4) {np.round(e / (C * r), 3).tolist()} <= 1.5: {bound}")
    assert ok


def test_criterion_6_coercivity(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240611)
    worst = np.inf
    violations = 0
    one = norms.constant_rhs(1.0)
    for eps in (1e-2, 1e-6):
        for N in (4, 8):
            for m in METHODS:
                space = build_bubble_space(build_mesh(spec_of(N, eps)),
                                           MethodConfig(method=m, form="weighted"), one)
                A, _ = assemble_system(space, None)
                D, Mm = norm_matrices(space)
                for _ in range(100):
                    v = rng.standard_normal(space.ndof)
                    lhs = v @ (A @ v)
                    rhs = (1 - eps) / 2 * (eps * (v @ (D @ v)) + v @ (Mm @ v))
                    violations += lhs < rhs - 1e-10
                    worst = min(worst, lhs / rhs)
    ok = violations == 0
    report(capsys, 6, ok,
           f"{violations} violations in 1600 samples (4 methods x N in {{4, 8}} x eps in "
           f"{{1e-2, 1e-6}} x 100); min a(v,v) / ((1-eps)/2 |v|_eps^2) = {worst:.3f}; "
           f"{time.perf_counter() - t0:.1f} s")
    assert ok


ENVELOPE_CLASSES = ([("1x1", r) for r in (bb.Constant(1.0), bb.RampBottom(), bb.RampTop())]
                    + [("2x1", r) for r in (bb.Constant(1.0), bb.RampBottom(), bb.RampTop())]
                    + [("1x2", r) for r in (bb.Constant(1.0), bb.RampBottom(), bb.RampTop())]
                    + [("1x1", bb.NodalQ1(k)) for k in range(1, 5)]
                    + [(a, bb.NodalQ1(k)) for a in ("2x1", "1x2") for k in range(1, 7)])


def test_criterion_7_bubble_properties(capsys):
    env = {}
    for ehat in (1e-1, 1e-3):
        worst = (0.0, None)
        for aspect, rhs in ENVELOPE_CLASSES:
            b = bb.solve_bubble(bb.SubDomain(aspect, 1.0, ehat), rhs)
            v = max(bb.envelope_excess(b, rhs))
            if v > worst[0] or worst[1] is None:
                worst = (v, f"{aspect} {rhs.kind}{rhs.data}")
        env[ehat] = worst
    env_ok = all(v <= 1e-10 for v, _ in env.values())
    depths = {}
    for k in range(1, 5):
        ratio = 10.0 ** k
        d = bb.get_catalog(1.0 / ratio).depth
        depths[int(ratio)] = d
    target = {r: math.ceil(math.log10(r) - 1e-12) for r in depths}
    depth_ok = all(target[r] <= d <= target[r] + 1 for r, d in depths.items())
    one = norms.constant_rhs(1.0)
    space = build_bubble_space(build_mesh(spec_of(4, 1e-2)), MethodConfig(method="rfb"), one)
    A, b = assemble_system(space, one)
    x = sla.solve(A.toarray(), b)
    S, g, back = condense(A, b, space.nodal_mask())
    cond = float(np.abs(back(sla.solve(S.toarray(), g)) - x).max())
    cond_ok = cond <= 1e-10
    zero = norms.zero_exact().rhs
    zero_ok = all(np.all(solve(4, 1e-3, zero, MethodConfig(method=m)).coeffs == 0) for m in METHODS)
    ok = env_ok and depth_ok and cond_ok and zero_ok
    report(capsys, 7, ok,
           f"envelope worst excess {{{', '.join(f'{e:g}: {v:.2e} ({c})' for e, (v, c) in env.items())}}} "
           f"<= 1e-10: {env_ok}; depths {depths} vs ceil(log10) {target}: {depth_ok}; "
           f"condensed vs explicit {cond:.1e}: {cond_ok}; f=0 gives 0: {zero_ok}")
    assert ok


def test_criterion_8_asymptotics(capsys):
    t0 = time.perf_counter()
    _, slopes = asy.corrector_sweep(asy.DEFAULT_SWEEP, n=256)
    target = {"phi_L2": (0.25, 0.05), "dy_phi_L2": (-0.25, 0.05), "zeta_L2": (0.75, 0.05),
              "xi_eps": (0.25, 0.1)}
    exp_ok = {k: abs(slopes[k] - c) <= tol for k, (c, tol) in target.items()}
    ids = {N: float(f"{asy.verify_zeroth_order_identities(N).max():.2e}") for N in (4, 16)}
    ids_ok = all(v <= 1e-11 for v in ids.values())
    erows, eslope = asy.expansion_sweep((1e-2, 3e-3, 1e-3), n=512)
    exp_err_ok = eslope >= 0.8
    wall = time.perf_counter() - t0
    ok = all(exp_ok.values()) and ids_ok and exp_err_ok and wall <= 600
    report(capsys, 8, ok,
           f"exponents {{{', '.join(f'{k}: {v:.4f}' for k, v in slopes.items())}}} ok={exp_ok}; "
           f"identity residuals {ids}; expansion errors {fmt([r[2] for r in erows])} slope "
           f"{eslope:.3f} (>= 0.8: {exp_err_ok}); wall {wall:.0f} s (<= 600)")
    assert ok


def test_criterion_9_oracle_equivalence(capsys):
    N = 3

    def f(x, y):
        return 1.0 + x + 2.0 * x * y

    space = build_bubble_space(build_mesh(spec_of(N, 1.0)), MethodConfig(method="galerkin"), f)
    A, b = assemble_system(space, f)
    xs = np.linspace(0, 1, N + 1)
    nodal, Ao, bo = oracles.galerkin_tensor(xs, xs, 1.0, (-1.0, 0.0), f, quad=4)
    idx = np.array([p * (N + 1) + q for p, q in space.layout.owners])
    dA = float(np.abs(A.toarray() - Ao.toarray()[np.ix_(idx, idx)]).max())
    db = float(np.abs(b - bo[idx]).max())
    u = solve_discrete(space.mesh, space.config, f)
    dense = sla.solve(Ao.toarray()[np.ix_(idx, idx)], bo[idx])
    dx = float(np.abs(u.coeffs - dense).max())
    ok = max(dA, db, dx) <= 1e-10
    report(capsys, 9, ok, f"matrix {dA:.1e}, load {db:.1e}, solution {dx:.1e} (<= 1e-10)")
    assert ok
