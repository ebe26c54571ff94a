"""Wulff shapes: the map x -> F(x) x + grad F(x), meshes, exports and the self-test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anisotropy import UNIT_TOL, ConvexityError, SphereFunction, convexity_audit, two_term_wulff
from .geometry import WulffSurface, hyperspherical
from .integrals import build_grid, evaluate_grid

CROSS_CHECK_TOL = 1e-10
MESH_CONVEXITY_TOL = 1e-8


def wulff_point(F: SphereFunction, x, cross_check: bool = True) -> np.ndarray:
    """Image of unit vectors ``x`` (shape ``(..., n+1)``) on the Wulff shape of F."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > UNIT_TOL):
        raise ValueError("wulff_point needs unit vectors")
    phi = F.jet(x).grad
    if cross_check:
        other = two_term_wulff(F, x)
        if np.max(np.abs(phi - other), initial=0.0) > CROSS_CHECK_TOL * max(1.0, np.max(np.abs(phi), initial=0.0)):
            raise ArithmeticError("gradient and two-term forms of the Wulff map disagree")
    return phi


@dataclass
class Mesh:
    vertices: np.ndarray  # (V, 3)
    faces: np.ndarray  # (T, 3), 0-based, counter-clockwise seen from outside

    def write_obj(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.to_obj())

    def to_obj(self) -> str:
        lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in self.vertices]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in self.faces]
        return "\n".join(lines) + "\n"

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=-1)

    def signed_volume(self) -> float:
        p = self.vertices[self.faces]
        return float(np.sum(np.einsum("ij,ij->i", p[:, 0], np.cross(p[:, 1], p[:, 2]))) / 6.0)

    def is_watertight(self) -> bool:
        """Every directed edge appears once and is matched by its reverse."""
        edges = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        directed = {tuple(e) for e in edges.tolist()}
        if len(directed) != len(edges):
            return False
        return all((b, a) in directed for a, b in directed)

    def max_convexity_violation(self) -> float:
        """Largest signed distance of a neighbouring vertex above a face plane (<= 0 for convex meshes)."""
        p = self.vertices[self.faces]
        normal = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
        opposite = {}
        for t, (a, b, c) in enumerate(self.faces.tolist()):
            for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
                opposite[(u, v)] = (t, w)
        worst = -np.inf
        for (u, v), (t, _) in opposite.items():
            _, w = opposite[(v, u)]
            d = float(np.dot(self.vertices[w] - p[t, 0], normal[t]))
            worst = max(worst, d)
        return worst


def sphere_grid_mesh(res, vertex_map) -> Mesh:
    """Latitude-longitude triangulation of S^2 with pole fans, mapped through ``vertex_map``."""
    n_theta, n_phi = (int(v) for v in res)
    if n_theta < 8 or n_phi < 16:
        raise ValueError("mesh resolution must be at least 8x16")
    theta = np.pi * np.arange(1, n_theta) / n_theta
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    ring = np.stack(hyperspherical([T.ravel(), P.ravel()]), axis=-1)
    pts = np.concatenate([[[0.0, 0.0, 1.0]], ring, [[0.0, 0.0, -1.0]]])
    north, south = 0, len(pts) - 1

    def vid(i, j):
        return 1 + i * n_phi + (j % n_phi)

    verts = vertex_map(pts)
    faces = []
    for j in range(n_phi):
        faces.append((north, vid(0, j), vid(0, j + 1)))
    for i in range(n_theta - 2):
        for j in range(n_phi):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            # split along the diagonal whose fold is convex (d below the plane of a, b, c)
            pa, pb, pc, pd = verts[[a, b, c, d]]
            if np.dot(pd - pa, np.cross(pb - pa, pc - pa)) <= 0:
                faces += [(a, b, c), (a, c, d)]
            else:
                faces += [(a, b, d), (b, c, d)]
    last = n_theta - 2
    for j in range(n_phi):
        faces.append((south, vid(last, j + 1), vid(last, j)))
    mesh = Mesh(verts, np.array(faces, dtype=np.int64))
    scale = float(np.max(np.linalg.norm(verts, axis=-1)))
    if mesh.max_convexity_violation() > MESH_CONVEXITY_TOL * scale:
        # A lat-long grid on a strongly anisotropic convex body can fold across
        # meridian edges; the hull of the same vertices is the convex triangulation.
        # Vertices of a non-convex shape (forced runs) keep the grid triangulation.
        try:
            mesh = Mesh(verts, hull_faces(verts))
        except (ValueError, RuntimeError):  # qhull errors derive from RuntimeError
            pass
    return mesh


def hull_faces(verts) -> np.ndarray:
    """Triangles of the convex hull of ``verts``, counter-clockwise seen from outside.

    Every vertex must be extreme (true for samples of a strictly convex surface).
    """
    from scipy.spatial import ConvexHull

    hull = ConvexHull(verts)
    if len(hull.vertices) != len(verts):
        raise ValueError("mesh vertices are not in strictly convex position")
    faces = hull.simplices.copy()
    p = verts[faces]
    normal = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = np.einsum("ij,ij->i", normal, hull.equations[:, :3]) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def wulff_mesh(F: SphereFunction, res=(32, 64)) -> Mesh:
    if F.ambient_dim != 3:
        raise ValueError("meshes are only produced for surfaces in R^3")
    return sphere_grid_mesh(res, lambda x: wulff_point(F, x))


def wulff_samples_csv(F: SphereFunction, x) -> str:
    """CSV with one row per sample: source point then image point."""
    x = np.asarray(x, dtype=float)
    phi = wulff_point(F, x)
    m = F.ambient_dim
    head = ",".join([f"x{i + 1}" for i in range(m)] + [f"phi{i + 1}" for i in range(m)])
    rows = [",".join(f"{v:.17g}" for v in np.concatenate([a, b])) for a, b in zip(x, phi)]
    return head + "\n" + "\n".join(rows) + "\n"


def wulff_selftest(F: SphereFunction, res, threads: int = 1, audit: bool = True) -> dict:
    """Sup over a quadrature grid of |lambda_i - 1| on the constructed Wulff shape.

    With the inner normal, F is evaluated at ``-x`` where the outward normal is
    ``x``; the shape whose anisotropic principal curvatures are all 1 is then
    the Wulff shape of ``x -> F(-x)``, i.e. the point reflection of W_F.  For
    centrally symmetric F the two coincide.
    """
    if audit:
        report = convexity_audit(F)
        if not report.passed:
            raise ConvexityError(f"convexity audit failed: min eigenvalue {report.min_eigenvalue:.6g}")
    surface = WulffSurface(F.reflected())
    grid = build_grid(surface, res)
    data = evaluate_grid(surface, F, grid, threads)
    err = np.abs(data.packets.lam - 1.0)
    return {
        "F": F.to_text(),
        "resolution": list(grid.resolution),
        "nodes": len(grid),
        "sup_abs_lambda_minus_1": float(err.max()),
    }
