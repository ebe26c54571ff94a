import math

import numpy as np
import pytest

from wulffkit.anisotropy import ConvexityError, SphereFunction, two_term_wulff
from wulffkit.geometry import WulffSurface
from wulffkit.integrals import build_grid, evaluate_grid
from wulffkit.sampling import sphere_samples
from wulffkit.spec_parser import parse_fspec
from wulffkit.wulff import hull_faces, sphere_grid_mesh, wulff_mesh, wulff_point, wulff_samples_csv, wulff_selftest


def F_of(text, dim=3):
    return SphereFunction(parse_fspec(text, dim))


def test_isotropic_wulff_shape_is_unit_sphere():
    x = sphere_samples(3, 200)
    np.testing.assert_allclose(wulff_point(F_of("const:1"), x), x, atol=1e-15)
    np.testing.assert_allclose(wulff_point(F_of("const:2.5", 4), sphere_samples(4, 50)), 2.5 * sphere_samples(4, 50), atol=1e-14)


def test_ellipsoid_support_function_gives_that_ellipsoid():
    a = np.array([1.1, 0.9, 1.2])
    phi = wulff_point(F_of("ellipsoid:1.1,0.9,1.2"), sphere_samples(3, 500))
    np.testing.assert_allclose(np.sum(phi**2 / a**2, axis=-1), 1.0, rtol=1e-14)


@pytest.mark.parametrize("text", ["pnorm:4,0.05", "expr:1 + 0.1*x1*x2", "expr:2 + 0.3*sin(x1) - 0.2*x2*x3^2", "ellipsoid:1,2,3"])
def test_gradient_form_matches_two_term_form(text):
    F = F_of(text)
    x = sphere_samples(3, 300)
    np.testing.assert_allclose(F.jet(x).grad, two_term_wulff(F, x), atol=1e-13)


def test_support_identity():
    # <phi(x), x> = F(x)
    F = F_of("expr:2 + 0.3*sin(x1) - 0.2*x2*x3^2")
    x = sphere_samples(3, 300)
    np.testing.assert_allclose(np.sum(wulff_point(F, x) * x, axis=-1), F(x), rtol=1e-14)


def test_scaling_and_translation():
    x = sphere_samples(3, 200)
    base = wulff_point(F_of("expr:1 + 0.1*x1*x2"), x)
    np.testing.assert_allclose(wulff_point(F_of("expr:3*(1 + 0.1*x1*x2)"), x), 3 * base, atol=1e-14)
    shifted = wulff_point(F_of("expr:1 + 0.1*x1*x2 + 0.2*x1 - 0.3*x3"), x)
    np.testing.assert_allclose(shifted, base + np.array([0.2, 0.0, -0.3]), atol=1e-14)


def test_rejects_non_unit_input():
    with pytest.raises(ValueError):
        wulff_point(F_of("const:1"), np.array([[2.0, 0, 0]]))


def test_sphere_mesh():
    mesh = wulff_mesh(F_of("const:1"), (32, 64))
    np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=-1), 1.0, rtol=1e-15)
    assert len(mesh.vertices) == 31 * 64 + 2
    assert len(mesh.faces) == 2 * 64 + 2 * 30 * 64
    assert mesh.is_watertight()
    assert mesh.max_convexity_violation() <= 1e-8
    assert 0 < mesh.signed_volume() < 4 * math.pi / 3
    assert mesh.triangle_areas().min() > 0


def test_linear_term_translates_the_mesh():
    mesh = wulff_mesh(F_of("expr:1+0.3*x1"), (32, 64))
    np.testing.assert_allclose(mesh.vertices.mean(axis=0), [0.3, 0, 0], atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(mesh.vertices - [0.3, 0, 0], axis=-1), 1.0, rtol=1e-14)


@pytest.mark.parametrize("text", ["pnorm:4,0.05", "ellipsoid:1.1,0.9,1.2", "expr:1 + 0.1*x1*x2", "expr:1+0.05*x1^3"])
def test_meshes_of_convex_anisotropies_are_convex(text):
    mesh = wulff_mesh(F_of(text), (32, 64))
    scale = np.linalg.norm(mesh.vertices, axis=-1).max()
    assert mesh.is_watertight()
    assert mesh.max_convexity_violation() <= 1e-8 * scale
    assert mesh.signed_volume() > 0


def test_mesh_volume_converges_to_ellipsoid_volume():
    mesh = wulff_mesh(F_of("ellipsoid:1.1,0.9,1.2"), (64, 128))
    exact = 4 * math.pi / 3 * 1.1 * 0.9 * 1.2
    assert abs(mesh.signed_volume() - exact) / exact < 2e-3


def test_hull_faces_are_outward():
    pts = sphere_samples(3, 300) * np.array([1.0, 2.0, 0.5])
    faces = hull_faces(pts)
    p = pts[faces]
    normals = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    assert np.all(np.einsum("ij,ij->i", normals, p.mean(axis=1)) > 0)


def test_grid_mesh_requires_minimum_resolution():
    with pytest.raises(ValueError):
        sphere_grid_mesh((4, 8), lambda x: x)
    with pytest.raises(ValueError):
        wulff_mesh(F_of("const:1", 4), (8, 16))


def test_obj_format(tmp_path):
    mesh = wulff_mesh(F_of("ellipsoid:1.1,0.9,1.2"), (8, 16))
    path = tmp_path / "e.obj"
    mesh.write_obj(path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    raw.decode("ascii")
    lines = raw.decode().splitlines()
    v = [ln for ln in lines if ln.startswith("v ")]
    f = [ln for ln in lines if ln.startswith("f ")]
    assert len(v) == len(mesh.vertices) and len(f) == len(mesh.faces)
    assert lines.index(f[0]) > lines.index(v[-1])
    parsed = np.array([[float(t) for t in ln.split()[1:]] for ln in v])
    np.testing.assert_array_equal(parsed, mesh.vertices)
    idx = np.array([[int(t) for t in ln.split()[1:]] for ln in f])
    assert idx.min() == 1 and idx.max() == len(mesh.vertices)


def test_samples_csv_for_other_dimensions():
    F = F_of("ellipsoid:1,2,0.5,1.5", 4)
    x = sphere_samples(4, 10)
    text = wulff_samples_csv(F, x)
    rows = text.strip().split("\n")
    assert rows[0] == "x1,x2,x3,x4,phi1,phi2,phi3,phi4"
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    np.testing.assert_array_equal(data[:, :4], x)
    np.testing.assert_allclose(np.sum(data[:, 4:] ** 2 / np.array([1, 4, 0.25, 2.25]), axis=-1), 1.0, rtol=1e-14)


@pytest.mark.parametrize("text", ["ellipsoid:1.1,0.9,1.2", "pnorm:4,0.05", "expr:1 + 0.1*x1*x2", "expr:1+0.05*x1^3"])
def test_selftest_constant_unit_curvatures(text):
    out = wulff_selftest(F_of(text), (24, 48))
    assert out["sup_abs_lambda_minus_1"] <= 1e-6
    assert out["nodes"] == 24 * 48


def test_selftest_in_other_dimensions():
    assert wulff_selftest(F_of("expr:1.5 + 0.2*cos(x1 + x2)", 2), (64,))["sup_abs_lambda_minus_1"] <= 1e-10
    assert wulff_selftest(F_of("ellipsoid:1,2,0.5,1.5", 4), (8, 8, 16))["sup_abs_lambda_minus_1"] <= 1e-10


def test_odd_anisotropy_needs_the_reflected_shape():
    # with the inner normal, lambda = 1 holds on the Wulff shape of x -> F(-x); for odd F that differs from W_F
    F = F_of("expr:1+0.05*x1^3")
    surface = WulffSurface(F)
    grid = build_grid(surface, (16, 32))
    lam = evaluate_grid(surface, F, grid).packets.lam
    assert np.abs(lam - 1).max() > 0.05
    even = F_of("ellipsoid:1.1,0.9,1.2")
    lam = evaluate_grid(WulffSurface(even), even, build_grid(WulffSurface(even), (16, 32))).packets.lam
    assert np.abs(lam - 1).max() < 1e-12


def test_selftest_refuses_nonconvex_F():
    with pytest.raises(ConvexityError):
        wulff_selftest(F_of("expr:1 + 1.5*x1^2"), (16, 32))
