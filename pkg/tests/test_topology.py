import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hsfractal import topology
from hsfractal._core import BudgetExceeded, ParameterError
from hsfractal.labeling import FACE, enumerate_face_labels, enumerate_node_labels


def brute_counts(n, m):
    """Vertex/face totals by simulating one subdivision per face, face by face."""
    faces = [n]  # tier-1 faces
    vertices = n
    for _ in range(m - 1):
        new_faces = 0
        for _face in range(faces[-1]):
            vertices += n  # N-1 midpoints plus one apex
            new_faces += 2 * (n - 1)
        faces.append(new_faces)
    return vertices, faces[-1]


@pytest.mark.parametrize("n", range(3, 11))
@pytest.mark.parametrize("m", range(1, 7))
def test_closed_form_matches_recurrence(n, m):
    v, e = topology.count_nodes_recurrence(n, m)
    assert topology.count_nodes(n, m) == v
    assert topology.count_faces(n, m) == e


@pytest.mark.parametrize("n,m", [(3, 1), (3, 4), (5, 3), (7, 2)])
def test_closed_form_matches_brute_force(n, m):
    assert (topology.count_nodes(n, m), topology.count_faces(n, m)) == brute_counts(n, m)


def test_known_values():
    assert topology.count_nodes(3, 1) == 3
    assert topology.count_nodes(3, 2) == 12
    assert topology.count_nodes(3, 3) == 48
    assert topology.count_faces(3, 3) == 48
    assert topology.count_nodes(4, 2) == 20
    assert topology.count_nodes(10, 12) == 10 + 100 * (18 ** 11 - 1) // 17


def test_params_object_and_errors():
    assert topology.count_nodes(topology.FractalParams(4, 3)) == 116
    for bad in [(2, 3), (3, 0), (3.0, 2), (True, 2)]:
        with pytest.raises(ParameterError):
            topology.FractalParams(*bad)


def test_approx_count_shape():
    # 2^(m-2) N^m is the leading term; ratio tends to (N/(N-1))^(m-1)-ish, within 2x
    for n in (8, 24):
        for m in (3, 5):
            ratio = topology.count_nodes(n, m) / topology.approx_node_count(n, m)
            assert 0.5 < ratio < 2


@pytest.mark.parametrize("n,m", [(n, m) for n in range(3, 7) for m in range(1, 4)])
def test_mesh_matches_enumerations(n, m):
    mesh = topology.construct(n, m)
    assert len(mesh.vertices) == topology.count_nodes(n, m)
    assert len(mesh.faces) == topology.count_faces(n, m)
    assert set(mesh.vertices) == set(enumerate_node_labels(n, m))
    assert set(mesh.faces) == set(enumerate_face_labels(n, m))
    assert all(f.kind == FACE for f in mesh.faces)


@pytest.mark.parametrize("n,m", [(3, 3), (4, 3), (5, 2), (6, 2)])
def test_geometry(n, m):
    mesh = topology.construct(n, m)
    pts = np.array(list(mesh.vertices.values()))
    assert np.allclose(pts.sum(axis=1), 0.0)
    for lab, (a, b) in mesh.midpoint_parents.items():
        assert np.allclose(mesh.vertices[lab], (mesh.vertices[a] + mesh.vertices[b]) / 2)
    height = topology.simplex_height(topology.base_simplex(n))
    for apex, face in mesh.apex_source.items():
        tier = len(face.pairs)
        roles = [v for v in mesh.midpoint_parents if v.pairs[:-1] == face.pairs]
        assert len(roles) == n - 1
        corners = [mesh.vertices[x] for pair in (mesh.midpoint_parents[r] for r in roles)
                   for x in pair]
        corners = np.unique(np.array(corners), axis=0)
        centroid = corners.mean(axis=0)
        offset = mesh.vertices[apex] - centroid
        assert np.isclose(np.linalg.norm(offset), height / 2 ** tier)
        # on the normal line: orthogonal to every edge of the face
        for c in corners[1:]:
            assert abs(offset @ (c - corners[0])) < 1e-9
    for face, verts in mesh.faces.items():
        assert len(set(verts)) == n - 1


def test_base_simplex_is_regular():
    for n in range(3, 8):
        pts = topology.base_simplex(n)
        d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        off = d[~np.eye(n, dtype=bool)]
        assert np.allclose(off, np.sqrt(2))


def test_face_normal_degenerate():
    pts = np.array([[1.0, -1.0, 0.0], [2.0, -2.0, 0.0]])
    assert topology.face_normal(pts) is not None  # a segment in the plane has a normal
    flat = np.zeros((3, 4))
    assert topology.face_normal(flat) is None


def test_budget_guard():
    with pytest.raises(BudgetExceeded):
        topology.construct(6, 8)
    with pytest.raises(BudgetExceeded):
        topology.construct(3, 3, budget=10)


def test_serializations():
    mesh = topology.construct(3, 2)
    doc = json.loads(mesh.dumps())
    assert doc["n"] == 3 and doc["m"] == 2
    assert len(doc["vertices"]) == 12 and len(doc["faces"]) == 12
    obj = mesh.to_obj()
    assert obj.count("\nv ") == 12 and obj.count("\nf ") == 12
    assert mesh.dumps() == topology.construct(3, 2).dumps()


@given(st.integers(3, 40), st.integers(1, 9))
def test_counts_positive_and_growing(n, m):
    assert topology.count_nodes(n, m + 1) - topology.count_nodes(n, m) == n * topology.count_faces(n, m)
    assert topology.count_faces(n, m + 1) == 2 * (n - 1) * topology.count_faces(n, m)


@pytest.mark.parametrize("n,m", [(3, 3), (4, 3), (5, 2)])
def test_growth_per_face(n, m):
    small, big = topology.construct(n, m), topology.construct(n, m + 1)
    for face in small.faces:
        spawned = [v for v in big.vertices if v.pairs[:-1] == face.pairs]
        children = [f for f in big.faces if f.pairs[:-1] == face.pairs]
        assert len(spawned) == n
        assert len(children) == 2 * (n - 1)
    assert set(small.vertices) < set(big.vertices)


@pytest.mark.parametrize("n", [3, 4, 8, 10])
def test_approx_ratio_growth(n):
    # approx / exact grows monotonically; its per-tier growth factor tends to N/(N-1)
    ratios = [topology.approx_node_count(n, m) / topology.count_nodes(n, m) for m in range(1, 13)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    factors = [b / a for a, b in zip(ratios, ratios[1:])]
    gaps = [abs(f - n / (n - 1)) for f in factors[1:]]
    assert all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3


def test_spec_examples():
    assert topology.approx_node_count(10, 5) == 800000
    assert topology.approx_node_count(3, 3) == 54
    assert topology.count_faces(8, 4) == 21952
    mesh = topology.construct(4, 2)
    assert (len(mesh.vertices), len(mesh.faces)) == (20, 24)
