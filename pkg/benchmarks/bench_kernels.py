"""Timing comparison of the compiled and pure-python kernel backends.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats 5]

Each kernel is timed on a representative workload; the table reports the
best wall time per backend and the speedup of the compiled extension.
"""

import argparse
import time

import numpy as np

from srforms import kernels
from srforms.isoperimetry import _bin_triangles, _cubemap_bins, sample_s3
from srforms.ruled import build_pansu
from srforms.spaceform import space_form


def _best(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _workloads():
    rng = np.random.Generator(np.random.Philox(1))

    # 64 Heisenberg geodesics, 20k steps each
    ph = rng.uniform(-1.0, 1.0, size=(64, 3))
    th = rng.uniform(0.0, 2.0 * np.pi, 64)
    wh = np.stack([np.cos(th), np.sin(th),
                   ph[:, 1] * np.cos(th) - ph[:, 0] * np.sin(th)], axis=1)
    yield "rk4_heisenberg (64 x 20k steps)", "rk4_heisenberg", (
        ph, wh, 0.7, 1e-3, 20_000, 20_000)

    # 64 spherical geodesics, 20k steps each
    ps = sample_s3(rng, 64)
    vs = rng.normal(size=(64, 4))
    vs -= np.einsum("ni,ni->n", vs, ps)[:, None] * ps
    T = np.stack([-ps[:, 1], ps[:, 0], -ps[:, 3], ps[:, 2]], axis=1)
    vs -= np.einsum("ni,ni->n", vs, T)[:, None] * T
    vs /= np.linalg.norm(vs, axis=1, keepdims=True)
    yield "rk4_sphere3 (64 x 20k steps)", "rk4_sphere3", (
        ps, vs, 0.7, 1e-3, 20_000, 20_000)

    # parity casting: 200k rays against a 128x64 Pansu mesh
    sphere = build_pansu(space_form("sphere3"), 1.0, n_directions=128, n_s=64)
    verts, faces = sphere.verts, sphere.faces
    pole = sphere.pole
    far = verts[int(np.argmax(np.arccos(np.clip(verts @ pole, -1, 1))))]
    c = pole + far
    c /= np.linalg.norm(c)
    B = np.linalg.svd(c[None])[2][1:]
    chart = (verts @ B.T) / (verts @ c)[:, None]
    tris = np.ascontiguousarray(chart[faces])
    bin_idx, bin_off = _bin_triangles(tris, 24)
    x = sample_s3(rng, 200_000)
    keep = x @ c > 1e-9
    u = np.ascontiguousarray((x[keep] @ B.T) / (x[keep] @ c)[:, None])
    sb = _cubemap_bins(u / np.linalg.norm(u, axis=1, keepdims=True), 24)
    yield "radial_parity (200k rays, 16k tris)", "radial_parity", (
        u, tris, sb, bin_idx, bin_off)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    backends = {"python": kernels.get_backend("python")}
    try:
        backends["compiled"] = kernels.get_backend("compiled")
    except ImportError:
        print("compiled extension not available; timing python only")

    print(f"active default backend: {kernels.BACKEND}\n")
    print(f"{'kernel':42s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for label, name, wargs in _workloads():
        row = {}
        for bname, mod in backends.items():
            fn = getattr(mod, name)
            row[bname] = _best(lambda: fn(*wargs), args.repeats)
        if "compiled" in row:
            ratio = row["python"] / row["compiled"]
            print(f"{label:42s} {row['python']:9.3f}s {row['compiled']:9.3f}s "
                  f"{ratio:7.1f}x")
        else:
            print(f"{label:42s} {row['python']:9.3f}s {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
