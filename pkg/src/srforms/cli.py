"""Command-line front end.

Subcommands: geodesic, surface, stability, isoperimetric, verify.
All numeric output is printed with 12 significant digits; JSON keys are
snake_case; every output file embeds the run configuration and the tool
version.  Exit codes: 0 success, 2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib.metadata import PackageNotFoundError, version as pkg_version

import numpy as np

from . import geodesic as gmod
from . import isoperimetry as imod
from . import ruled as rmod
from . import stability as smod
from .spaceform import sasakian_residuals, space_form, webster_curvature

try:
    VERSION = pkg_version("artifact")
except PackageNotFoundError:  # running from a source tree
    VERSION = "0.1.0"

MODELS = ("heisenberg", "sphere3", "projective3")


def _round12(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, np.floating):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_round12(v) for v in obj.tolist()]
    return obj


def _config_dict(args):
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return _round12(cfg)


def _write_json(path, payload, args):
    payload = dict(payload)
    payload["config"] = _config_dict(args)
    payload["version"] = VERSION
    text = json.dumps(_round12(payload), indent=2, sort_keys=True)
    if path is None or path == "-":
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _csv_header_lines(args):
    return [f"config: {json.dumps(_config_dict(args), sort_keys=True)}",
            f"version: {VERSION}"]


def _parse_vec(text, dim):
    vals = [float(x) for x in text.split(",")]
    if len(vals) != dim:
        raise ValueError(f"expected {dim} comma-separated components, got {len(vals)}")
    return np.asarray(vals)


def _default_start(model):
    if model.kind == "heisenberg":
        return np.zeros(3), np.array([1.0, 0.0, 0.0])
    return np.array([1.0, 0.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0, 0.0])


def _generator(args, model):
    dim = 3 if model.kind == "heisenberg" else 4
    p0, v0 = _default_start(model)
    if args.point is not None:
        p0 = _parse_vec(args.point, dim)
    if args.direction is not None:
        v0 = _parse_vec(args.direction, dim)
    p = model.point(p0)
    w = model.tangent(p, v0)
    return gmod.shoot(model, p, w, args.mu, args.length, args.step)


def cmd_geodesic(args):
    model = space_form(args.model)
    dim = 3 if model.kind == "heisenberg" else 4
    p0, v0 = _default_start(model)
    if args.point is not None:
        p0 = _parse_vec(args.point, dim)
    if args.direction is not None:
        v0 = _parse_vec(args.direction, dim)
    p = model.point(p0)
    w = model.tangent(p, v0)
    g = gmod.shoot(model, p, w, args.lam, args.length, args.step)
    closure = gmod.detect_closure(g, tol=args.closure_tol)
    if args.out:
        with open(args.out, "w") as fh:
            for line in _csv_header_lines(args):
                fh.write(f"# {line}\n")
            fh.write(g.to_csv())
    _write_json(args.report, {
        "closure": closure.kind,
        "length": closure.length,
        "speed_drift": g.speed_drift(),
        "vertical_drift": g.vertical_drift(),
        "curvature_estimate_max_error": float(
            np.abs(g.curvature_estimate() - args.lam).max()),
    }, args)
    return 0


def cmd_surface(args):
    model = space_form(args.model)
    g = _generator(args, model)
    asm = rmod.assemble_cmc(g, args.lam, max_generations=args.max_generations)
    ne, ns = (int(x) for x in args.resolution.split("x"))
    verts_all, faces_all = [], []
    off = 0
    for patch, _ in asm.patches:
        v, f, _ = rmod.patch_mesh(patch, ne, ns)
        verts_all.append(v)
        faces_all.append(f + off)
        off += len(v)
    verts = np.vstack(verts_all)
    faces = np.vstack(faces_all)
    verts, faces = rmod.weld_vertices(verts, faces)
    if args.out_obj:
        hdr = _csv_header_lines(args)
        if model.kind == "heisenberg":
            rmod.export_obj(verts, faces, args.out_obj, hdr)
        elif args.projection == "stereographic-obj":
            rmod.export_obj(rmod.stereographic_project(verts), faces, args.out_obj, hdr)
        else:
            rmod.export_csv4d(verts, faces, args.out_obj, hdr)
    summary = asm.summary()
    summary["euler_characteristic"] = rmod.euler_characteristic(faces)
    _write_json(args.out_json, summary, args)
    return 0


def cmd_stability(args):
    model = space_form(args.model)
    g = _generator(args, model)
    asm = rmod.assemble_cmc(g, args.lam, max_generations=args.max_generations)
    report = smod.instability_verdict(asm)
    if args.out_csv:
        with open(args.out_csv, "w") as fh:
            for line in _csv_header_lines(args):
                fh.write(f"# {line}\n")
            fh.write("sigma,q_value\n")
            for s, q in report.Q_sigma:
                fh.write(f"{s:.12g},{q:.12g}\n")
    _write_json(args.out_json, report.to_dict(), args)
    return 0


def cmd_isoperimetric(args):
    a, b, h = (float(x) for x in args.grid.split(":"))
    if h <= 0.0 or b < a:
        raise ValueError("grid must be start:stop:step with positive step")
    lams = np.arange(a, b + 0.5 * h, h)  # inclusive endpoint
    rows, interval = imod.compare_rp3(
        lams, n_samples=args.samples, seed=args.seed,
        n_directions=args.directions, n_s=args.s_steps)
    lines = _csv_header_lines(args)
    out_lines = [f"# {line}" for line in lines] + imod.comparison_csv_rows(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(out_lines) + "\n")
    else:
        print("\n".join(out_lines))
    if interval is not None:
        print(f"clifford wins on lambda in [{interval[0]:.12g}, {interval[1]:.12g}]")
    else:
        print("clifford wins nowhere on this grid")
    return 0


def _verify_checks(seed):
    rng = np.random.Generator(np.random.Philox(seed))
    checks = []

    def add(name, passed, detail):
        checks.append((name, bool(passed), detail))

    for kind in MODELS:
        m = space_form(kind)
        pts = m.random_points(200, rng)
        worst = 0.0
        for k in range(0, 200, 50):
            p = m.point(pts[k])
            raw = rng.normal(size=pts.shape[1])
            if m.kind != "heisenberg":
                raw = raw - np.dot(raw, pts[k]) * pts[k]
            v = m.tangent(p, raw)
            r = sasakian_residuals(m, p, v)
            worst = max(worst, r["reeb"], r["rotation"])
        kw = webster_curvature(m, pts)
        target = 0.0 if kind == "heisenberg" else 1.0
        add(f"sasakian_residuals_{kind}", worst < 1e-5, f"max={worst:.2e}")
        add(f"webster_curvature_{kind}", np.abs(kw - target).max() < 1e-3,
            f"max_err={np.abs(kw - target).max():.2e}")

    m = space_form("sphere3")
    p = m.point([1.0, 0.0, 0.0, 0.0])
    w = m.tangent(p, [0.0, 0.0, 1.0, 0.0])
    g = gmod.shoot(m, p, w, 0.7, 3.0, 1e-3)
    add("geodesic_conservation", g.speed_drift() < 3e-7 and g.vertical_drift() < 3e-7,
        f"speed={g.speed_drift():.2e} vertical={g.vertical_drift():.2e}")

    errs = []
    for _ in range(10):
        tau = float(rng.uniform(0.5, 12.0))
        mu = float(rng.uniform(-2.0, 2.0))
        i = int(rng.integers(1, 3))
        s = rmod.cut_constant(tau, mu, i)
        vj = gmod.vertical_jacobi(tau, 0.0, 2.0 * (-1.0) ** i, -4.0 * mu)
        errs.append(abs(vj.v(s)))
    add("cut_constant_roots", max(errs) < 1e-10, f"max|v(s_i)|={max(errs):.2e}")

    g0 = gmod.shoot(m, p, w, 0.0, 2 * np.pi + 0.01, 1e-3)
    cl = gmod.detect_closure(g0)
    patch = rmod.patch_from_geodesic(g0, 2, 0.0, eps_domain=("circle", cl.length))
    s = np.linspace(0.0, patch.s_cut, 257)
    sf = rmod.scalar_fields(patch, s)
    err = max(float(np.abs(sf["nh_norm"] - np.sin(2 * s)).max()),
              float(np.abs(sf["nt"] - np.cos(2 * s)).max()),
              float(np.abs(sf["bzs"] + 1.0).max()))
    add("reference_patch_fields", err < 1e-10, f"max_err={err:.2e}")
    sym = float(np.abs(patch.vj.v(patch.s_cut - s) - patch.vj.v(s)).max())
    add("v_symmetry", sym < 1e-12, f"max_err={sym:.2e}")

    vol, sd = imod.mc_hemisphere_volume(100_000, seed)
    add("mc_hemisphere_volume", abs(vol - np.pi ** 2) < 4 * sd + 1e-9,
        f"vol={vol:.6f} expected={np.pi**2:.6f}")
    add("clifford_verticality", imod.clifford_nh_check(0.6) < 1e-10,
        f"max_dev={imod.clifford_nh_check(0.6):.2e}")
    return checks


def cmd_verify(args):
    checks = _verify_checks(args.seed)
    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name} ({detail})")
        ok = ok and passed
    print(f"{sum(p for _, p, _ in checks)}/{len(checks)} properties passed")
    return 0 if ok else 3


def build_parser():
    ap = argparse.ArgumentParser(prog="srforms",
                                 description="sub-Riemannian space form toolkit")
    ap.add_argument("--seed", type=int, default=imod.DEFAULT_SEED,
                    help="seed for all randomness (u64)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("geodesic", help="integrate a CC-geodesic")
    g.add_argument("--model", choices=MODELS, required=True)
    g.add_argument("--lambda", dest="lam", type=float, required=True)
    g.add_argument("--length", type=float, default=2 * np.pi + 0.01)
    g.add_argument("--step", type=float, default=1e-3)
    g.add_argument("--point", default=None, help="comma-separated coordinates")
    g.add_argument("--direction", default=None, help="comma-separated components")
    g.add_argument("--closure-tol", type=float, default=1e-6)
    g.add_argument("--out", default=None, help="trajectory CSV path")
    g.add_argument("--report", default=None, help="closure report JSON path (default stdout)")
    g.set_defaults(func=cmd_geodesic)

    s = sub.add_parser("surface", help="assemble a ruled CMC surface")
    s.add_argument("--model", choices=MODELS, required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--mu", type=float, default=0.0)
    s.add_argument("--length", type=float, default=2 * np.pi + 0.01)
    s.add_argument("--step", type=float, default=1e-3)
    s.add_argument("--point", default=None)
    s.add_argument("--direction", default=None)
    s.add_argument("--max-generations", type=int, default=3)
    s.add_argument("--resolution", default="128x64")
    s.add_argument("--projection", choices=("none4d-csv", "stereographic-obj"),
                   default="stereographic-obj")
    s.add_argument("--out-json", default=None)
    s.add_argument("--out-obj", default=None)
    s.set_defaults(func=cmd_surface)

    st = sub.add_parser("stability", help="instability criterion report")
    st.add_argument("--model", choices=MODELS, required=True)
    st.add_argument("--lambda", dest="lam", type=float, required=True)
    st.add_argument("--mu", type=float, default=0.0)
    st.add_argument("--length", type=float, default=2 * np.pi + 0.01)
    st.add_argument("--step", type=float, default=1e-3)
    st.add_argument("--point", default=None)
    st.add_argument("--direction", default=None)
    st.add_argument("--max-generations", type=int, default=3)
    st.add_argument("--out-json", default=None)
    st.add_argument("--out-csv", default=None)
    st.set_defaults(func=cmd_stability)

    iso = sub.add_parser("isoperimetric", help="RP3 Pansu vs Clifford table")
    iso.add_argument("--grid", required=True, help="start:stop:step for lambda")
    iso.add_argument("--samples", type=int, default=200_000)
    iso.add_argument("--directions", type=int, default=128)
    iso.add_argument("--s-steps", type=int, default=64)
    iso.add_argument("--out", default=None)
    iso.set_defaults(func=cmd_isoperimetric)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
