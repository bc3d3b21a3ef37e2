#!/usr/bin/env python3
"""curvkit - comparison geometry checks on finite metric samples (command line)"""

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from curvkit import comparison, extension, flows, metric_core, suite, warped
from curvkit.config import RunConfig
from curvkit.formats import dumps_report, format_csv_metric, load_points, load_space, make_report
from curvkit.utils import DYKSTRA_MAX_ITER, ConfigError, CurvkitError, InputFormatError

logger = logging.getLogger("curvkit")

EXIT_PASS, EXIT_FAIL, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class ConsoleReporter:
    """Status and progress sink for long-running operations; everything goes to stderr."""

    def __init__(self, stream=None):
        self.stream = stream or sys.stderr
        self._last = -1

    def status(self, msg):
        logger.info(msg)

    def progress(self, value):
        value = int(value)
        if value == self._last:
            return
        self._last = value
        if self.stream.isatty():
            self.stream.write(f"\rprogress {value:3d}%")
            if value >= 100:
                self.stream.write("\n")
            self.stream.flush()
        else:
            logger.debug("progress %d%%", value)


# -- helpers --------------------------------------------------------------

def _load(cfg, position=0):
    if len(cfg.inputs) <= position:
        raise ConfigError(f"{cfg.command} needs an input file")
    return load_space(cfg.inputs[position])


def _finite(space):
    return getattr(space, "metric", space)


def _index(space, token):
    labels = list(getattr(_finite(space), "labels", None) or [])
    token = str(token)
    if token in labels:
        return labels.index(token)
    try:
        i = int(token)
    except ValueError:
        raise ConfigError(f"unknown point {token!r}") from None
    if not 0 <= i < len(space.d):
        raise ConfigError(f"point index {i} out of range")
    return i


def _indices(space, tokens):
    return [_index(space, t) for t in tokens or []]


def _verdict(v):
    """Report and outcome; the outcome is None when the verdict is inconclusive."""
    if v.status == "inconclusive":
        return v.to_dict(), None
    return v.to_dict(), v.status in ("pass", "vacuous")


def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


# -- subcommands ----------------------------------------------------------

def cmd_check(cfg, reporter):
    space = _load(cfg)
    test = comparison.is_cbb if cfg.command == "check-cbb" else comparison.is_cat
    v = test(space, cfg.kappa, tol=cfg.tol, jobs=cfg.jobs,
             progress_callback=reporter.progress, status_callback=reporter.status)
    return _verdict(v)


def cmd_kappa_range(cfg, reporter):
    space = _load(cfg)
    mode = cfg.options.get("mode", "both")
    result, passed = {}, True
    if mode in ("cbb", "both"):
        sup = comparison.cbb_sup_kappa(space, jobs=cfg.jobs, status_callback=reporter.status)
        result["cbb_sup_kappa"] = sup
        if cfg.kappa_min is not None:
            passed = passed and sup >= cfg.kappa_min
    if mode in ("cat", "both"):
        inf = comparison.cat_inf_kappa(space, jobs=cfg.jobs, status_callback=reporter.status)
        result["cat_inf_kappa"] = inf
        if cfg.kappa_max is not None:
            passed = passed and inf <= cfg.kappa_max
    result["pass"] = passed
    return result, passed


def cmd_one_plus_n(cfg, reporter):
    space = _finite(_load(cfg))
    p = _index(space, cfg.options["point"])
    xs = _indices(space, cfg.options["others"])
    v = comparison.one_plus_n_test(space, p, xs, cfg.kappa, max_iter=cfg.options.get("max_iter") or DYKSTRA_MAX_ITER)
    out, passed = _verdict(v)
    if v.certificate is not None and v.status == "pass":
        out["certificate"] = {"kappa": v.certificate.kappa, "points": np.asarray(v.certificate.points)}
    elif v.certificate is not None:
        out["certificate"] = v.certificate
    return out, passed


def cmd_sturm(cfg, reporter):
    space = _finite(_load(cfg))
    p = _index(space, cfg.options["point"])
    xs = _indices(space, cfg.options["others"])
    v = comparison.sturm_test(space, p, xs, tol=cfg.tol, seed=cfg.seed)
    out, passed = _verdict(v)
    out["certificate"] = v.certificate
    return out, passed


def cmd_extend(cfg, reporter):
    space = _finite(_load(cfg))
    p = _index(space, cfg.options["point"])
    xs = _indices(space, cfg.options["others"])
    images = load_points(cfg.options["images"])
    res = extension.kirszbraun_extend(space, p, xs, images, kappa=cfg.kappa)
    result = {"feasible": res.feasible, "margin": res.margin, "point": res.point,
              "soundness_fault": res.soundness_fault}
    return result, res.feasible and not res.soundness_fault


def cmd_barycenter(cfg, reporter):
    if not cfg.inputs:
        raise ConfigError("barycenter needs a CSV of anchor coordinates")
    anchors = load_points(cfg.inputs[0])
    weights = cfg.options.get("weights")
    weights = _floats(weights) if weights else [1.0] * len(anchors)
    point = extension.barycentric_point(cfg.kappa, anchors, weights)
    result = {"point": point, "weights": extension.SimplexWeights(tuple(weights)).array}
    resolution = cfg.options.get("resolution") or 8
    if cfg.options.get("lipschitz"):
        result["lipschitz_estimate"] = extension.barycentric_lipschitz_estimate(cfg.kappa, anchors, resolution)
    if cfg.plot:
        from plots import render_barycentric

        render_barycentric(cfg.kappa, anchors, cfg.plot, resolution=resolution)
    return result, True


def cmd_web(cfg, reporter):
    space = _load(cfg)
    anchors = _indices(space, cfg.options["anchors"])
    res = extension.web_compute(space, anchors, cfg.kappa, status_callback=reporter.status)
    return {"anchors": list(res.anchors), "web": res.web, "inner_web": res.inner_web}, True


def cmd_develop(cfg, reporter):
    space = _load(cfg)
    if not isinstance(space, metric_core.SampledSpace):
        raise ConfigError("develop needs a JSON graph input")
    p = _index(space, cfg.options["point"])
    x, y = _index(space, cfg.options["start"]), _index(space, cfg.options["end"])
    path = space.geodesic(x, y)
    dev = flows.develop_path(space, p, path, cfg.kappa, segments=cfg.options.get("segments") or 4)
    out, passed = _verdict(dev.verdict)
    out.update({"path": path, "rho": dev.rho, "theta": dev.theta, "margins": dev.margins})
    if cfg.plot:
        from plots import render_development

        render_development(dev, cfg.plot)
    return out, passed


def _domain(cfg):
    kind = cfg.options.get("domain") or "halfplane"
    if kind == "halfplane":
        return flows.ConvexDomainSpace("halfplane", normal=[0.0, 1.0], offset=0.0)
    if kind == "disk":
        return flows.ConvexDomainSpace("disk", radius=cfg.options.get("radius") or 1.0)
    return flows.ConvexDomainSpace(kind)


def cmd_radial(cfg, reporter):
    space = _domain(cfg)
    h = cfg.options.get("step") or flows.DEFAULT_STEP
    p = _floats(cfg.options["base"])
    a, b = _floats(cfg.options["start"]), _floats(cfg.options["other"])
    s_max = cfg.options.get("s_max")
    v = flows.radial_comparison_check(space, p, a, b, cfg.kappa, h=h, s_max=s_max)
    if cfg.plot:
        from plots import render_curves

        curves = [flows.radial_curve(space, p, q, cfg.kappa, h=h, s_max=s_max) for q in (a, b)]
        render_curves(curves, cfg.plot, title="radial curves")
    return _verdict(v)


def cmd_gradflow(cfg, reporter):
    space = _domain(cfg)
    name = cfg.options.get("objective") or "quadratic"
    if name == "linear":
        f = flows.linear(_floats(cfg.options.get("direction") or "1 0"))
    elif name == "neg_distance":
        f = flows.neg_distance(_floats(cfg.options.get("target") or "0 0"))
    else:
        f = flows.quadratic()
    h = cfg.options.get("step") or flows.DEFAULT_STEP
    curve = flows.gradient_curve(space, f, _floats(cfg.options["start"]), h=h, T=cfg.options.get("time") or 1.0)
    v = flows.self_contracting_check(curve, h=h)
    out, passed = _verdict(v)
    out["end"] = curve.points[-1]
    out["steps"] = len(curve) - 1
    return out, passed


def _metric_result(M, cfg, kappa):
    result = {"labels": list(M.labels), "distances": M.d}
    if cfg.options.get("check"):
        v = comparison.is_cbb(M, kappa, tol=cfg.tol, jobs=cfg.jobs)
        result["cbb"] = v.to_dict()
        return result, v.passed
    return result, True


def cmd_cone(cfg, reporter):
    fiber = _finite(_load(cfg))
    M = warped.cone_space(fiber, _floats(cfg.options["radii"]), cfg.kappa)
    return _metric_result(M, cfg, cfg.kappa)


def cmd_suspend(cfg, reporter):
    fiber = _finite(_load(cfg))
    M = warped.suspension_space(fiber, _floats(cfg.options["angles"]))
    return _metric_result(M, cfg, 1.0)


def cmd_double(cfg, reporter):
    space = _load(cfg)
    if not isinstance(space, metric_core.SampledSpace):
        raise ConfigError("double needs a JSON graph input")
    glue = cfg.options["glue"]
    A = space.tags.get(glue[0]) if len(glue) == 1 and glue[0] in space.tags else _indices(space, glue)
    D = warped.doubling(space, A)
    result = {"graph": D.to_graph()}
    if cfg.options.get("check"):
        v = comparison.is_cbb(D, cfg.kappa, tol=cfg.tol, jobs=cfg.jobs, progress_callback=reporter.progress)
        result["cbb"] = v.to_dict()
        return result, v.passed
    return result, True


def cmd_warp_dist(cfg, reporter):
    spec = warped.WarpSpec(cfg.options["warp"], value=cfg.options.get("value"),
                           a=cfg.options.get("base_min") or 0.0,
                           b=cfg.options.get("base_max") if cfg.options.get("base_max") is not None else math.inf)
    p, q, ell = cfg.options["p"], cfg.options["q"], cfg.options["ell"]
    res = warped.warped_1d_distance(spec, p, q, ell, n=cfg.options.get("resolution") or 40,
                                    status_callback=reporter.status)
    result = {"value": res.value, "fine": res.fine, "coarse": res.coarse, "budget": res.budget, "exact": res.exact}
    passed = res.exact is None or abs(res.exact - res.value) <= res.budget + cfg.tol
    return result, passed


def cmd_pack(cfg, reporter):
    space = _load(cfg)
    eps = _floats(cfg.options.get("eps") or "0.4 0.2 0.1")
    packs = {f"{e:g}": metric_core.pack_eps(space, e)[0] for e in eps}
    result = {"packs": packs}
    if len(eps) >= 2:
        result["dimension"], _ = metric_core.packing_dimension(space, eps)
    return result, True


GEN_KAPPA = {"sphere": 1.0, "plane": 0.0, "hyperbolic": -1.0}


def cmd_gen(cfg, reporter):
    """Corpus generators; writes CSV (metrics) or JSON graphs instead of a report."""
    kind = cfg.options["kind"]
    n = cfg.options.get("n") or 30
    if kind in GEN_KAPPA:
        kappa = GEN_KAPPA[kind]
        if kind == "sphere" and cfg.kappa > 0 or kind == "hyperbolic" and cfg.kappa < 0:
            kappa = cfg.kappa
        M, _ = metric_core.sample_model_space(kappa, cfg.options.get("dim") or 2, n, seed=cfg.seed)
        return format_csv_metric(M)
    if kind == "tripod":
        return format_csv_metric(metric_core.tripod_metric(cfg.options.get("leg") or 1.0))
    if kind == "circle":
        length = cfg.options.get("length") or 2 * math.pi
        return format_csv_metric(metric_core.circle_metric(n, length))
    h = cfg.options.get("step") or 0.1
    if kind == "grid":
        side = cfg.options.get("radius") or 1.0
        S = metric_core.grid_graph(side, side, h, status_callback=reporter.status)
    else:
        net_kind = cfg.options.get("net") or "cone"
        S = metric_core.net_of_surface(net_kind, h, kappa=cfg.kappa or None, angle=cfg.options.get("angle"),
                                       radius=cfg.options.get("radius") or 2.0, status_callback=reporter.status)
    return dumps_report(S.to_graph())


def cmd_verify_suite(cfg, reporter):
    report = suite.run_suite(cfg.seed, quick=bool(cfg.options.get("quick")), jobs=cfg.jobs,
                             status_callback=reporter.status, progress_callback=reporter.progress)
    return report, report["pass"]


# -- argument parsing -----------------------------------------------------

def _common(sub):
    sub.add_argument("--kappa", type=float, default=None, help="curvature bound")
    sub.add_argument("--kappa-min", type=float, default=None)
    sub.add_argument("--kappa-max", type=float, default=None)
    sub.add_argument("--tol", type=float, default=None, help="verdict tolerance")
    sub.add_argument("--seed", type=lambda s: int(s, 0), default=None, help="random seed (default 0xA1E)")
    sub.add_argument("--jobs", type=int, default=None, help="worker threads (default $CURVKIT_JOBS or 1)")
    sub.add_argument("--out", default=None, help="write the report here instead of stdout")
    sub.add_argument("--plot", default=None, help="SVG output (develop, radial, barycenter)")
    sub.add_argument("--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="curvkit", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, inputs="?"):
        sub = subs.add_parser(name)
        _common(sub)
        if inputs:
            sub.add_argument("inputs", nargs=inputs, default=[])
        sub.set_defaults(handler=handler)
        return sub

    add("check-cbb", cmd_check, "+")
    add("check-cat", cmd_check, "+")
    add("kappa-range", cmd_kappa_range, "+").add_argument("--mode", choices=["cbb", "cat", "both"], default="both")
    for name, handler in (("one-plus-n", cmd_one_plus_n), ("sturm", cmd_sturm)):
        sub = add(name, handler, "+")
        sub.add_argument("--point", required=True)
        sub.add_argument("--others", nargs="+", required=True)
        if name == "one-plus-n":
            sub.add_argument("--max-iter", type=int, default=None)
    sub = add("extend", cmd_extend, "+")
    sub.add_argument("--point", required=True)
    sub.add_argument("--others", nargs="+", required=True)
    sub.add_argument("--images", required=True, help="CSV of image coordinates, one row per point")
    sub = add("barycenter", cmd_barycenter, "+")
    sub.add_argument("--weights", default=None)
    sub.add_argument("--resolution", type=int, default=None)
    sub.add_argument("--lipschitz", action="store_true")
    add("web", cmd_web, "+").add_argument("--anchors", nargs="+", required=True)
    sub = add("develop", cmd_develop, "+")
    sub.add_argument("--point", required=True)
    sub.add_argument("--start", required=True)
    sub.add_argument("--end", required=True)
    sub.add_argument("--segments", type=int, default=None)
    for name, handler in (("radial", cmd_radial), ("gradflow", cmd_gradflow)):
        sub = add(name, handler, None)
        sub.add_argument("--domain", choices=["plane", "halfplane", "disk"], default="halfplane")
        sub.add_argument("--radius", type=float, default=None)
        sub.add_argument("--step", type=float, default=None)
        sub.add_argument("--start", required=True, help="'x y'")
        if name == "radial":
            sub.add_argument("--base", required=True, help="'x y'")
            sub.add_argument("--other", required=True, help="'x y'")
            sub.add_argument("--s-max", type=float, default=None)
        else:
            sub.add_argument("--objective", choices=sorted(flows.OBJECTIVES), default="quadratic")
            sub.add_argument("--direction", default=None)
            sub.add_argument("--target", default=None)
            sub.add_argument("--time", type=float, default=None)
    sub = add("cone", cmd_cone, "+")
    sub.add_argument("--radii", required=True)
    sub.add_argument("--check", action="store_true")
    sub = add("suspend", cmd_suspend, "+")
    sub.add_argument("--angles", required=True)
    sub.add_argument("--check", action="store_true")
    sub = add("double", cmd_double, "+")
    sub.add_argument("--glue", nargs="+", required=True, help="a tag name or vertex indices")
    sub.add_argument("--check", action="store_true")
    sub = add("warp-dist", cmd_warp_dist, None)
    sub.add_argument("--warp", required=True, help="id, sin, sinh, cosh, exp, const or const-1")
    sub.add_argument("--value", type=float, default=None)
    sub.add_argument("--base-min", type=float, default=None)
    sub.add_argument("--base-max", type=float, default=None)
    sub.add_argument("--resolution", type=int, default=None)
    sub.add_argument("p", type=float)
    sub.add_argument("q", type=float)
    sub.add_argument("ell", type=float)
    add("pack", cmd_pack, "+").add_argument("--eps", default=None)
    sub = add("gen", cmd_gen, None)
    sub.add_argument("kind", choices=["sphere", "plane", "hyperbolic", "tripod", "circle", "grid", "net"])
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--dim", type=int, default=None)
    sub.add_argument("--leg", type=float, default=None)
    sub.add_argument("--length", type=float, default=None)
    sub.add_argument("--step", type=float, default=None)
    sub.add_argument("--net", choices=["sphere", "plane", "hyperbolic", "cone", "glued"], default=None)
    sub.add_argument("--angle", type=float, default=None)
    sub.add_argument("--radius", type=float, default=None)
    add("verify-suite", cmd_verify_suite, None).add_argument("--quick", action="store_true")
    return parser


def _emit(text, out):
    if out:
        Path(out).write_text(text)
        logger.info("Saved: %s", out)
    else:
        sys.stdout.write(text)


def run(argv=None):
    """Parse, dispatch and write; returns the exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    handler = args.handler
    reporter = ConsoleReporter()
    try:
        cfg = RunConfig.from_args(args)
        if cfg.command == "gen":
            _emit(handler(cfg, reporter), cfg.out)
            return EXIT_PASS
        result, passed = handler(cfg, reporter)
        config = {"kappa": cfg.kappa, "kappa_min": cfg.kappa_min, "kappa_max": cfg.kappa_max, "tol": cfg.tol,
                  "seed": cfg.seed, "jobs": cfg.jobs, "inputs": cfg.inputs, "options": cfg.options}
        status = "inconclusive" if passed is None else "pass" if passed else "fail"
        report = make_report(cfg.command, result, config=config, status=status)
        _emit(dumps_report(report), cfg.out)
    except InputFormatError as e:
        where = f"{args.inputs[0]}: " if getattr(args, "inputs", None) else ""
        logger.error("%s%s", where, e)
        return EXIT_ERROR
    except (CurvkitError, OSError) as e:
        logger.error("%s", e)
        return EXIT_ERROR
    if passed is None:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS if passed else EXIT_FAIL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
