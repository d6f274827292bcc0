"""Iterated subdivision of the N-simplex and its node/face counts.

Every face of tier ``t`` is an (N-2)-simplex with ``N-1`` vertices.  Each
vertex plays a *role* digit inside the face, and the missing digit equals the
first digit of the face label's last pair (the face's apex digit).  One
subdivision of face ``Y`` with apex digit ``a``:

* creates ``v_{Y,(a,0)}`` (the apex, off the face along its outer normal) and
  ``v_{Y,(j,0)}`` for every role ``j != a`` (an edge midpoint);
* replaces ``Y`` by ``Y,(l,0)`` (the corner at role ``l``) and ``Y,(l,1)``
  (the same corner lifted to the apex) for every ``l != a``.

In both children the corner (or apex) takes role ``a`` and the midpoint
``v_{Y,(j,0)}`` keeps role ``j``, so the apex digit of ``Y,(l,s)`` is ``l``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._core import (
    DEFAULT_BUDGET,
    ParameterError,
    check_budget,
    check_params,
    face_count,
    node_count,
)
from .labeling import FACE, NODE, PairLabel


@dataclass(frozen=True)
class FractalParams:
    n: int
    m: int

    def __post_init__(self):
        check_params(self.n, self.m)


def _params(params, m=None) -> FractalParams:
    if isinstance(params, FractalParams):
        return params
    return FractalParams(params, m)


def count_nodes(params, m: int | None = None) -> int:
    """Exact ``|V_{N,m}|``; accepts ``FractalParams`` or ``(n, m)``."""
    p = _params(params, m)
    return node_count(p.n, p.m)


def count_faces(params, m: int | None = None) -> int:
    p = _params(params, m)
    return face_count(p.n, p.m)


def count_nodes_recurrence(n: int, m: int) -> tuple[int, int]:
    """(|V|, |E|) by iterating the per-face growth rule; independent of the closed form."""
    check_params(n, m)
    v, e = n, n
    for _ in range(m - 1):
        v, e = v + n * e, 2 * (n - 1) * e
    return v, e


def approx_node_count(params, m: int | None = None) -> float:
    p = _params(params, m)
    return 2.0 ** (p.m - 2) * float(p.n) ** p.m


# -- geometry ------------------------------------------------------------------

def base_simplex(n: int) -> np.ndarray:
    """Regular simplex on the N basis vectors, centered at the origin."""
    return np.eye(n) - 1.0 / n


def simplex_height(vertices: np.ndarray) -> float:
    """Distance from vertex 0 to the hyperplane of the opposite facet."""
    apex = vertices[0]
    facet = vertices[1:]
    basis = (facet[1:] - facet[0]).T
    rel = apex - facet[0]
    if basis.size:
        coef, *_ = np.linalg.lstsq(basis, rel, rcond=None)
        rel = rel - basis @ coef
    return float(np.linalg.norm(rel))


def face_normal(points: np.ndarray) -> np.ndarray | None:
    """Unit normal of an (N-2)-simplex inside the hyperplane sum(x) = 0.

    Returns None when the points are affinely degenerate.
    """
    n = points.shape[1]
    rows = [points[k] - points[0] for k in range(1, len(points))]
    rows.append(np.ones(n))
    _, sing, vt = np.linalg.svd(np.array(rows))
    if len(sing) < n - 1 or sing[n - 2] < 1e-12 * max(1.0, sing[0]):
        return None
    normal = vt[-1]
    return normal / np.linalg.norm(normal)


def _midpoint_parents(roles: list[int], j: int) -> tuple[int, int]:
    """Edge whose midpoint becomes ``v_{Y,(j,0)}``: the two roles after ``j`` cyclically."""
    k = roles.index(j)
    return roles[(k + 1) % len(roles)], roles[(k + 2) % len(roles)]


@dataclass
class FractalMesh:
    n: int
    tier: int
    vertices: dict[PairLabel, np.ndarray]
    faces: dict[PairLabel, tuple[PairLabel, ...]]
    # provenance used by the geometric sanity checks
    midpoint_parents: dict[PairLabel, tuple[PairLabel, PairLabel]] = field(default_factory=dict)
    apex_source: dict[PairLabel, PairLabel] = field(default_factory=dict)
    face_roles: dict[PairLabel, dict[int, PairLabel]] = field(default_factory=dict)
    face_normals: dict[PairLabel, np.ndarray] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.tier,
            "vertices": {str(k): [float(x) for x in v] for k, v in self.vertices.items()},
            "faces": {str(k): [str(x) for x in v] for k, v in self.faces.items()},
        }

    def to_obj(self) -> str:
        index = {lab: i + 1 for i, lab in enumerate(self.vertices)}
        lines = [f"# hyper-simplex fractal N={self.n} m={self.tier}"]
        for lab, xyz in self.vertices.items():
            lines.append("v " + " ".join(f"{x:.12g}" for x in xyz) + f"  # {lab}")
        for lab, verts in self.faces.items():
            lines.append("f " + " ".join(str(index[v]) for v in verts) + f"  # {lab}")
        return "\n".join(lines) + "\n"

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def construct(params, m: int | None = None, budget: int | None = None) -> FractalMesh:
    """Build the tier-``m`` mesh by repeated subdivision of the base simplex."""
    p = _params(params, m)
    n = p.n
    check_budget(node_count(n, p.m), budget, f"construct V_{{{n},{p.m}}}")

    base = base_simplex(n)
    height = simplex_height(base)
    vertices: dict[PairLabel, np.ndarray] = {}
    for i in range(1, n + 1):
        vertices[PairLabel(((i, 0),), NODE)] = base[i - 1]

    mesh = FractalMesh(n=n, tier=1, vertices=vertices, faces={})
    current: dict[PairLabel, dict[int, PairLabel]] = {}
    normals: dict[PairLabel, np.ndarray] = {}
    for k in range(1, n + 1):
        face = PairLabel(((k, 0),), FACE)
        current[face] = {i: PairLabel(((i, 0),), NODE) for i in range(1, n + 1) if i != k}
        pts = np.array([vertices[v] for v in current[face].values()])
        nrm = face_normal(pts)
        centroid = pts.mean(axis=0)
        if nrm @ centroid < 0:  # base simplex is centered at the origin
            nrm = -nrm
        normals[face] = nrm

    for it in range(1, p.m):
        nxt: dict[PairLabel, dict[int, PairLabel]] = {}
        nxt_normals: dict[PairLabel, np.ndarray] = {}
        for face, roles in current.items():
            a = face.last_digit
            order = sorted(roles)
            pts = np.array([vertices[roles[j]] for j in order])
            centroid = pts.mean(axis=0)
            apex = PairLabel(face.pairs + ((a, 0),), NODE)
            vertices[apex] = centroid + height * normals[face] / 2.0 ** it
            mesh.apex_source[apex] = face
            mids = {}
            for j in order:
                lab = PairLabel(face.pairs + ((j, 0),), NODE)
                pa, pb = _midpoint_parents(order, j)
                vertices[lab] = 0.5 * (vertices[roles[pa]] + vertices[roles[pb]])
                mesh.midpoint_parents[lab] = (roles[pa], roles[pb])
                mids[j] = lab
            spawned = (pts.sum(axis=0) + vertices[apex]) / n
            for l in order:
                inner = {a: roles[l], **{j: mids[j] for j in order if j != l}}
                outer = {a: apex, **{j: mids[j] for j in order if j != l}}
                for bit, child_roles in ((0, inner), (1, outer)):
                    child = PairLabel(face.pairs + ((l, bit),), FACE)
                    nxt[child] = dict(sorted(child_roles.items()))
                    nxt_normals[child] = _child_normal(
                        vertices, nxt[child], normals[face], spawned, bit)
        current, normals = nxt, nxt_normals

    mesh.tier = p.m
    mesh.face_roles = current
    mesh.face_normals = normals
    mesh.faces = {f: tuple(r.values()) for f, r in current.items()}
    return mesh


def _child_normal(vertices, roles, parent_normal, spawned_centroid, bit):
    if bit == 0:
        # inner corner faces stay in the parent's hyperplane
        return parent_normal
    pts = np.array([vertices[v] for v in roles.values()])
    nrm = face_normal(pts)
    if nrm is None:
        return parent_normal
    if nrm @ (pts.mean(axis=0) - spawned_centroid) < 0:
        nrm = -nrm
    return nrm


__all__ = [
    "DEFAULT_BUDGET",
    "FractalMesh",
    "FractalParams",
    "ParameterError",
    "approx_node_count",
    "construct",
    "count_faces",
    "count_nodes",
    "count_nodes_recurrence",
]
