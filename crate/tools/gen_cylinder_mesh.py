"""Generate the channel-with-cylinder meshes shipped in crates/core/meshes.

Channel [0, 2.2] x [0, 0.41] minus the disc of radius 0.05 centred at
(0.2, 0.2). The circle is an inscribed polygon. Interior nodes are placed
by force-based smoothing (Persson-Strang) on a graded size field and
triangulated with scipy's Delaunay.

    python3 tools/gen_cylinder_mesh.py coarse crates/core/meshes/cylinder-coarse.msh
"""

import sys

import numpy as np
from scipy.spatial import Delaunay

L, H = 2.2, 0.41
CX, CY, R = 0.2, 0.2, 0.05

LEVELS = {
    # circle segments, size at the cylinder, growth rate, wake size, far size
    "coarse": dict(segments=72, growth=0.12, wake=0.016, far=0.032),
    "fine": dict(segments=128, growth=0.08, wake=0.010, far=0.022),
}


def size_field(p, lv):
    hc = 2 * np.pi * R / lv["segments"]
    d = np.hypot(p[:, 0] - CX, p[:, 1] - CY) - R
    h = np.minimum(hc + lv["growth"] * np.maximum(d, 0.0), lv["far"])
    in_wake = (p[:, 0] > CX) & (p[:, 0] < 1.4) & (np.abs(p[:, 1] - CY) < 0.14)
    return np.where(in_wake, np.minimum(h, lv["wake"]), h)


def signed_distance(p):
    rect = -np.minimum.reduce([p[:, 0], L - p[:, 0], p[:, 1], H - p[:, 1]])
    circ = R - np.hypot(p[:, 0] - CX, p[:, 1] - CY)
    return np.maximum(rect, circ)


def segment_points(a, b, lv):
    """Points on segment a-b (a included, b excluded) spaced by the size field."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    length = np.linalg.norm(b - a)
    s = np.linspace(0.0, 1.0, 4001)
    h = size_field(a + s[:, None] * (b - a), lv)
    arc = np.concatenate([[0.0], np.cumsum(0.5 * (1 / h[1:] + 1 / h[:-1]) * np.diff(s) * length)])
    n = max(int(round(arc[-1])), 1)
    targets = np.linspace(0.0, arc[-1], n + 1)[:-1]
    return a + np.interp(targets, arc, s)[:, None] * (b - a)


def boundary_points(lv):
    corners = [(0, 0), (L, 0), (L, H), (0, H)]
    outer = np.vstack([segment_points(corners[i], corners[(i + 1) % 4], lv) for i in range(4)])
    th = 2 * np.pi * np.arange(lv["segments"]) / lv["segments"]
    circle = np.column_stack([CX + R * np.cos(th), CY + R * np.sin(th)])
    return np.vstack([outer, circle])


def generate(lv, seed=7, iterations=120):
    rng = np.random.default_rng(seed)
    fixed = boundary_points(lv)
    h0 = 2 * np.pi * R / lv["segments"]
    # rejection sampling on a fine grid proportional to 1 / h^2
    x, y = np.meshgrid(np.arange(h0 / 2, L, h0 * 0.9), np.arange(h0 / 2, H, h0 * 0.9 * np.sqrt(3) / 2))
    x[1::2] += h0 * 0.45
    cand = np.column_stack([x.ravel(), y.ravel()])
    cand = cand[signed_distance(cand) < -0.5 * h0]
    keep = rng.random(len(cand)) < (h0 / size_field(cand, lv)) ** 2
    p = np.vstack([fixed, cand[keep]])
    nf = len(fixed)
    for _ in range(iterations):
        tri = Delaunay(p).simplices
        cent = p[tri].mean(axis=1)
        tri = tri[signed_distance(cent) < -1e-3 * h0]
        edges = np.unique(np.sort(np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1), axis=0)
        vec = p[edges[:, 0]] - p[edges[:, 1]]
        ln = np.linalg.norm(vec, axis=1)
        hb = size_field(0.5 * (p[edges[:, 0]] + p[edges[:, 1]]), lv)
        l0 = hb * 1.2 * np.sqrt((ln ** 2).sum() / (hb ** 2).sum())
        f = np.maximum(l0 - ln, 0.0)
        fv = (f / ln)[:, None] * vec
        force = np.zeros_like(p)
        np.add.at(force, edges[:, 0], fv)
        np.add.at(force, edges[:, 1], -fv)
        force[:nf] = 0.0
        p = p + 0.2 * force
        # project escaped nodes back with a numerical gradient of the distance
        d = signed_distance(p)
        out = d > 0
        if out.any():
            e = 1e-8
            q = p[out]
            gx = (signed_distance(q + [e, 0]) - d[out]) / e
            gy = (signed_distance(q + [0, e]) - d[out]) / e
            p[out] = q - d[out][:, None] * np.column_stack([gx, gy])
    tri = Delaunay(p).simplices
    tri = tri[signed_distance(p[tri].mean(axis=1)) < -1e-3 * h0]
    # counter-clockwise orientation
    a, b, c = p[tri[:, 0]], p[tri[:, 1]], p[tri[:, 2]]
    area = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    tri[area < 0] = tri[area < 0][:, [0, 2, 1]]
    used = np.unique(tri)
    remap = -np.ones(len(p), dtype=int)
    remap[used] = np.arange(len(used))
    return p[used], remap[tri]


def boundary_edges(p, tri):
    all_edges = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    key = np.sort(all_edges, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    bnd = all_edges[counts[inv.ravel()] == 1]
    out = []
    tol = 1e-9
    for i, j in bnd:
        m = 0.5 * (p[i] + p[j])
        if abs(m[0]) < tol:
            marker = "inlet"
        elif abs(m[0] - L) < tol:
            marker = "outlet"
        elif abs(m[1]) < tol or abs(m[1] - H) < tol:
            marker = "wall"
        elif np.hypot(m[0] - CX, m[1] - CY) < 1.5 * R:
            marker = "cylinder"
        else:
            raise RuntimeError(f"unclassified boundary edge at {m}")
        out.append((i, j, marker))
    return out


def quality(p, tri):
    a, b, c = p[tri[:, 0]], p[tri[:, 1]], p[tri[:, 2]]
    la, lb, lc = (np.linalg.norm(b - c, axis=1), np.linalg.norm(c - a, axis=1), np.linalg.norm(a - b, axis=1))
    area = 0.5 * np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    return 4 * np.sqrt(3) * area / (la ** 2 + lb ** 2 + lc ** 2)


def main():
    level, path = sys.argv[1], sys.argv[2]
    p, tri = generate(LEVELS[level])
    bnd = boundary_edges(p, tri)
    q = quality(p, tri)
    with open(path, "w") as f:
        f.write("emaclab-mesh 1\n")
        f.write(f"# channel 2.2 x 0.41, cylinder r=0.05 at (0.2, 0.2), {level} level, "
                f"{LEVELS[level]['segments']}-segment circle\n")
        f.write(f"{len(p)} {len(tri)} {len(bnd)}\n")
        for x, y in p:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for t in tri:
            f.write(f"{t[0]} {t[1]} {t[2]}\n")
        for i, j, m in bnd:
            f.write(f"{i} {j} {m}\n")
    n_edges = len(p) + len(tri)  # Euler: V - E + T = 1 - holes, one hole
    print(f"{level}: V={len(p)} T={len(tri)} B={len(bnd)} velocity dofs {2 * (len(p) + n_edges)}"
          f" min quality {q.min():.3f} mean {q.mean():.3f}")


if __name__ == "__main__":
    main()
