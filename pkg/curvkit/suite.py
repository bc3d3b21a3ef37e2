"""The acceptance battery behind ``verify-suite``.

Every check is seeded; the report holds no timings so identical runs give
identical reports.
"""

import logging
import math

import numpy as np

from curvkit import comparison, extension, flows, metric_core, warped
from curvkit.model_plane import ModelSpace, md, model_angles, model_sides, sn
from curvkit.utils import emitters

logger = logging.getLogger(__name__)


def _check(passed, **values):
    out = {"pass": bool(passed)}
    out.update(values)
    return out


def trig_kernel(rng, samples):
    worst = 0.0
    mono = math.inf
    ode = 0.0
    for kappa in (-1.0, 0.0, 1.0):
        b = rng.uniform(0.05, 1.4, samples)
        c = rng.uniform(0.05, 1.4, samples)
        phi = rng.uniform(0.01, math.pi - 0.01, samples)
        a = model_sides(kappa, phi, b, c)
        back = model_angles(kappa, a, b, c)
        worst = max(worst, float(np.nanmax(np.abs(back - phi))))
        x = rng.uniform(0.1, 1.4, 200)
        step = 1e-4
        for f, rhs in ((sn, 0.0), (md, 1.0)):
            second = (f(kappa, x + step) - 2 * f(kappa, x) + f(kappa, x - step)) / step**2
            ode = max(ode, float(np.max(np.abs(second + kappa * f(kappa, x) - rhs))))
    # model angles grow with kappa
    b = rng.uniform(0.1, 1.0, samples)
    c = rng.uniform(0.1, 1.0, samples)
    a = np.abs(b - c) + rng.uniform(0.05, 0.95, samples) * (b + c - np.abs(b - c))
    prev = None
    for kappa in np.linspace(-2.0, 2.0, 9):
        ang = model_angles(kappa, a, b, c)
        if prev is not None:
            ok = ~np.isnan(ang) & ~np.isnan(prev)
            mono = min(mono, float(np.min(ang[ok] - prev[ok], initial=math.inf)))
        prev = ang
    return _check(worst < 1e-9 and ode < 1e-6 and mono >= 0, roundtrip_error=worst, ode_residual=ode,
                  monotone_margin=mono)


def model_soundness(seed, count, n, jobs):
    failures = []
    for kappa, dim in ((0.0, 3), (1.0, 2), (-1.0, 2)):
        for k in range(count):
            M, _ = metric_core.sample_model_space(kappa, dim, n, seed=seed + k)
            for test in (comparison.is_cbb, comparison.is_cat):
                v = test(M, kappa, jobs=jobs)
                if not v.passed:
                    failures.append({"kappa": kappa, "sample": k, "test": v.test, "margin": v.margin})
    return _check(not failures, failures=failures)


def counterexamples():
    tripod = metric_core.tripod_metric()
    cbb = comparison.is_cbb(tripod, 0.0)
    cat = comparison.is_cat(tripod, 0.0)
    circle = comparison.is_cat(metric_core.circle_metric(4), 0.0)
    passed = (not cbb.passed and abs(cbb.margin + math.pi) < 1e-12 and cat.passed
              and not circle.passed and circle.witness is not None)
    return _check(passed, tripod_cbb_margin=cbb.margin, tripod_cat=cat.passed, circle_cat_margin=circle.margin)


def thresholds(seed, n, jobs):
    S, _ = metric_core.sample_model_space(1.0, 2, n, seed=seed)
    H, _ = metric_core.sample_model_space(-1.0, 2, n, seed=seed + 1)
    sup = comparison.cbb_sup_kappa(S, jobs=jobs)
    inf = comparison.cat_inf_kappa(H, jobs=jobs)
    return _check(sup >= 1 - 1e-4 and inf <= -1 + 1e-4, cbb_sup_sphere=sup, cat_inf_hyperbolic=inf)


def kirszbraun(rng, instances, oracle_instances):
    faults, infeasible = 0, 0
    for _ in range(instances):
        pts = rng.normal(size=(5, 3))
        M = metric_core.validate_metric(ModelSpace(0.0, 3).pairwise(pts))
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        images = (pts[1:] @ q)[:, :2]
        res = extension.kirszbraun_extend(M, 0, [1, 2, 3, 4], images)
        faults += int(res.soundness_fault)
        infeasible += int(not res.feasible)
    disagreements = 0
    checked = 0
    for _ in range(oracle_instances):
        centers = rng.uniform(-0.5, 0.5, size=(3, 2))
        radii = rng.uniform(0.1, 0.7, size=3)
        res = extension.ball_intersection(0.0, centers, radii)
        if abs(res.value) < 2e-3:
            continue
        feasible, _ = extension.grid_ball_oracle(centers, radii)
        checked += 1
        disagreements += int(feasible != res.feasible)
    return _check(faults == 0 and infeasible == 0 and disagreements == 0, soundness_faults=faults,
                  infeasible=infeasible, oracle_checked=checked, oracle_disagreements=disagreements)


def cone_transfer(fiber_points, jobs):
    short = warped.cone_space(metric_core.circle_metric(fiber_points, 1.5 * math.pi), [0.5, 1.0, 1.5])
    long_ = warped.cone_space(metric_core.circle_metric(fiber_points, 2.5 * math.pi), [0.2, 0.4])
    v_short = comparison.is_cbb(short, 0.0, jobs=jobs)
    v_long = comparison.is_cbb(long_, 0.0, jobs=jobs)
    near_tip = v_long.witness is not None and all(long_.d[0, i] <= 0.5 for i in v_long.witness.indices)

    circle = metric_core.circle_metric(fiber_points)
    angles = [k * math.pi / 6 for k in range(1, 6)]
    susp = warped.suspension_space(circle, angles)
    sphere = ModelSpace(1.0, 2)
    pts = [sphere.polar(0.0, 0.0)]
    for t in sorted(angles):
        pts.extend(sphere.polar(t, 2 * math.pi * i / fiber_points) for i in range(fiber_points))
    pts.append(sphere.polar(math.pi, 0.0))
    err = float(np.max(np.abs(sphere.pairwise(np.array(pts)) - susp.d)))
    v_susp = comparison.is_cbb(susp, 1.0, tol=1e-6, jobs=jobs)
    passed = v_short.passed and not v_long.passed and near_tip and err < 1e-8 and v_susp.passed
    return _check(passed, short_margin=v_short.margin, long_margin=v_long.margin, witness_near_tip=near_tip,
                  suspension_error=err, suspension_cbb=v_susp.passed)


def flow_checks(h=1e-3):
    plane = flows.ConvexDomainSpace("plane")
    f = flows.quadratic()
    v = flows.contraction_check(plane, f, [1.0, 0.0], [0.0, 1.0], h=h, T=2.0)
    half = flows.ConvexDomainSpace("halfplane", normal=[0.0, 1.0], offset=0.0)
    p = np.array([0.0, 0.5])
    gexp_err, gexp_integrated = 0.0, 0.0
    for vec in ([1.0, -2.0], [0.3, 0.4], [-1.0, -0.1]):
        target = half.project(p + np.asarray(vec))
        g = flows.gradient_exponent(half, p, vec)
        gexp_err = max(gexp_err, float(np.linalg.norm(g - target)))
        # the same point reached by integrating the radial curve
        g = flows.gradient_exponent(half, p, vec, h=h, closed_form=False)
        gexp_integrated = max(gexp_integrated, float(np.linalg.norm(g - target)))
    radial = flows.radial_comparison_check(half, p, [0.6, 0.1], [-0.3, 0.2], h=h, s_max=2.0, grid=50)
    passed = (v.details["max_deviation"] <= 3 * h and gexp_err <= 1e-12 and gexp_integrated <= 1e-9
              and radial.passed)
    return _check(passed, contraction_deviation=v.details["max_deviation"], gexp_error=gexp_err,
                  gexp_integrated_error=gexp_integrated,
                  radial_margin=radial.margin)


def developments(rng, geodesics, h=0.1):
    flat = metric_core.net_of_surface("cone", h, angle=1.5 * math.pi, radius=1.6)
    worst = math.inf
    done = 0
    while done < geodesics:
        x, y, p = (int(i) for i in rng.choice(flat.n_vertices, 3, replace=False))
        path = flat.geodesic(x, y)
        if p in path or len(path) < 3:
            continue
        worst = min(worst, flows.develop_path(flat, p, path).verdict.margin)
        done += 1

    sharp = metric_core.net_of_surface("cone", h, angle=2.5 * math.pi, radius=1.6)
    layout = sharp.mesh
    found = math.inf
    for r in (1.0, 1.3, 1.5):
        ring = np.flatnonzero(np.isclose(layout.rho, r))
        if ring.size == 0:
            continue
        t = layout.theta[ring]
        x = int(ring[np.argmin(np.abs(t - 0.0))])
        y = int(ring[np.argmin(np.abs(t - 1.25 * math.pi))])
        p = int(ring[np.argmin(np.abs(t - 0.625 * math.pi))])
        path = sharp.geodesic(x, y)
        if p in path:
            continue
        found = min(found, flows.develop_path(sharp, p, path, keep=[0]).verdict.margin)
    return _check(worst >= -1e-9 and found < 0, convex_margin=worst, sharp_margin=found,
                  budget_flat=flat.budget, budget_sharp=sharp.budget)


def implication(seed, instances):
    """(1+n)-point passes must imply Sturm passes; sphere data must certify at kappa 0 and -1.

    Euclidean samples always take the direct PSD branch, so sphere samples
    with radius 0.6 supply the instances that need Dykstra.
    """
    violations, residual = 0, 0.0
    dykstra, unresolved = 0, []
    for k in range(instances):
        cases = [(metric_core.sample_model_space(0.0, 3, 5, seed=seed + k)[0], 0.0)]
        S, _ = metric_core.sample_model_space(1.0, 2, 5, seed=seed + k, radius=0.6)
        cases += [(S, 0.0), (S, -1.0)]
        for M, kappa in cases:
            op = comparison.one_plus_n_test(M, 0, [1, 2, 3, 4], kappa)
            st = comparison.sturm_test(M, 0, [1, 2, 3, 4])
            if op.passed and not st.passed:
                violations += 1
            if op.details.get("method") == "dykstra":
                dykstra += 1
            if op.status != "pass":
                unresolved.append({"sample": k, "kappa": kappa, "status": op.status,
                                   "residual": op.details.get("residual")})
            else:
                residual = max(residual, op.details["residual"])
    passed = violations == 0 and residual < 1e-7 and not unresolved and (dykstra > 0 or instances == 0)
    return _check(passed, violations=violations, max_residual=residual, dykstra_instances=dykstra,
                  unresolved=unresolved)


def run_suite(seed, quick=False, jobs=1, status_callback=None, progress_callback=None):
    """Run the acceptance battery; returns the report dict."""
    emit_status, emit_progress = emitters(status_callback, progress_callback)
    rng = np.random.default_rng(seed)
    sizes = {
        "trig": 2000 if quick else 10000,
        "samples": 3 if quick else 100,
        "points": 12 if quick else 30,
        "kirszbraun": 50 if quick else 500,
        "oracle": 10 if quick else 50,
        "fiber": 8 if quick else 12,
        "geodesics": 20 if quick else 100,
        "implication": 20 if quick else 100,
    }
    steps = [
        ("trig_kernel", lambda: trig_kernel(rng, sizes["trig"])),
        ("model_soundness", lambda: model_soundness(seed, sizes["samples"], sizes["points"], jobs)),
        ("counterexamples", counterexamples),
        ("thresholds", lambda: thresholds(seed, sizes["points"], jobs)),
        ("kirszbraun", lambda: kirszbraun(rng, sizes["kirszbraun"], sizes["oracle"])),
        ("cone_transfer", lambda: cone_transfer(sizes["fiber"], jobs)),
        ("flows", flow_checks),
        ("developments", lambda: developments(rng, sizes["geodesics"])),
        ("implication", lambda: implication(seed, sizes["implication"])),
    ]
    checks = {}
    for k, (name, run) in enumerate(steps):
        emit_status(f"Running {name}...")
        checks[name] = run()
        logger.info("%s: %s", name, "pass" if checks[name]["pass"] else "FAIL")
        emit_progress(100 * (k + 1) / len(steps))
    return {"seed": seed, "quick": quick, "checks": checks, "pass": all(c["pass"] for c in checks.values())}
