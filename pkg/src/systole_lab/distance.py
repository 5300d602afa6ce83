"""Upper bounds on conformal distances via shortest paths on a geodesic grid.

Every graph path is an actual piecewise-geodesic curve on the sphere, so
graph distances are honest upper bounds for the metric distance.  Estimates
are made monotone in the resolution by taking a running minimum over nested
refinement levels.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .metrics import ConformalFactor, SphereInvolution
from .quadrature import adaptive_interval
from .sphere import project_array, rotation_matrix, unproject

_GAUSS_N, _GAUSS_W = np.polynomial.legendre.leggauss(8)


@lru_cache(maxsize=None)
def _icosphere_vertices(level: int) -> tuple:
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            verts += [(0, a, b), (a, b, 0), (b, 0, a)]
    verts = np.array(verts, float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    verts = verts @ rotation_matrix([0.31, 0.52, 0.79], 0.4567).T
    from scipy.spatial import ConvexHull

    faces = ConvexHull(verts).simplices
    for _ in range(level):
        verts, faces = _subdivide_mesh(verts, faces)
    return verts, faces


def _subdivide_mesh(verts: np.ndarray, faces: np.ndarray):
    verts = list(verts)
    midpoint: dict = {}

    def mid(i, j):
        key = (min(i, j), max(i, j))
        if key not in midpoint:
            m = verts[i] + verts[j]
            verts.append(m / np.linalg.norm(m))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        new_faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    return np.array(verts), np.array(new_faces, dtype=int)


def _arc_weights(f: ConformalFactor, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """f-lengths of the great arcs between paired endpoint rows."""
    dot = np.clip(np.sum(src * dst, axis=1), -1.0, 1.0)
    theta = np.arccos(dot)
    safe = theta > 1e-15
    u = dst - dot[:, None] * src
    norm = np.linalg.norm(u, axis=1)
    u = np.where(safe[:, None], u / np.where(norm[:, None] == 0, 1.0, norm[:, None]), 0.0)
    t = 0.5 * (1.0 + _GAUSS_N) [None, :] * theta[:, None]
    pts = (np.cos(t)[..., None] * src[:, None, :] + np.sin(t)[..., None] * u[:, None, :])
    vals = f(project_array(pts.reshape(-1, 3))).reshape(t.shape)
    w = 0.5 * theta * (vals @ _GAUSS_W)
    return np.where(safe, w, 0.0)


def _refine_singular_edges(f, src, dst, weights):
    """Recompute edges passing near singular points with adaptive quadrature."""
    if not f.singularities:
        return weights
    mid = src + dst
    mid /= np.maximum(np.linalg.norm(mid, axis=1, keepdims=True), 1e-30)
    zmid = project_array(mid)
    dot = np.clip(np.sum(src * dst, axis=1), -1.0, 1.0)
    theta = np.arccos(dot)
    near = np.zeros(len(src), dtype=bool)
    for s in f.singularities:
        near |= s.chart_dist_array(zmid) < 8.0 * np.maximum(theta, 1e-12)
    idx = np.nonzero(near)[0]
    for k in idx:
        a, b = src[k], dst[k]
        d = float(np.clip(np.dot(a, b), -1, 1))
        th = math.acos(d)
        if th < 1e-15:
            continue
        u = b - d * a
        u /= np.linalg.norm(u)

        def g(t, a=a, u=u):
            pts = np.cos(t)[:, None] * a + np.sin(t)[:, None] * u
            return f(project_array(pts))

        weights[k] = adaptive_interval(g, 0.0, th, tol=1e-10)
    return weights


class DistanceGrid:
    """Shortest-path distance estimator on one icosphere refinement level.

    ``involutions`` symmetrize the node set so that graph paths map to graph
    paths under each involution, which keeps averaged-metric comparisons
    one-sided.
    """

    def __init__(self, f: ConformalFactor, level: int,
                 involutions: tuple[SphereInvolution, ...] = (),
                 k_neighbors: int = 18):
        verts, _ = _icosphere_vertices(level)
        nodes = [verts]
        for F in involutions:
            nodes.append(np.atleast_2d(F.apply(verts)))
        nodes = np.concatenate(nodes)
        # dedupe coincident nodes (symmetric meshes can map onto themselves)
        tree = cKDTree(nodes)
        groups = tree.query_ball_point(nodes, 1e-9)
        keep = np.array([min(g) == i for i, g in enumerate(groups)])
        self.nodes = nodes[keep]
        self.f = f
        self.involutions = involutions
        self.k = k_neighbors
        tree = cKDTree(self.nodes)
        _, nn = tree.query(self.nodes, k=min(self.k + 1, len(self.nodes)))
        ii = np.repeat(np.arange(len(self.nodes)), nn.shape[1] - 1)
        jj = nn[:, 1:].ravel()
        order = ii < jj
        pairs = np.stack([np.where(order, ii, jj), np.where(order, jj, ii)], axis=1)
        pairs = np.unique(pairs, axis=0)
        self.edges = pairs
        w = _arc_weights(f, self.nodes[pairs[:, 0]], self.nodes[pairs[:, 1]])
        self.weights = _refine_singular_edges(f, self.nodes[pairs[:, 0]],
                                              self.nodes[pairs[:, 1]], w)
        self._tree = tree

    def _attach(self, points: np.ndarray):
        """Connection edges from query points to their nearest grid nodes."""
        k = min(10, len(self.nodes))
        _, nn = self._tree.query(points, k=k)
        nn = np.atleast_2d(nn)
        src = np.repeat(points, k, axis=0)
        dst = self.nodes[nn.ravel()]
        w = _arc_weights(self.f, src, dst)
        w = _refine_singular_edges(self.f, src, dst, w)
        return nn, w.reshape(len(points), k)

    def query(self, p: complex, q: complex) -> float:
        pts = []
        for z in (p, q):
            pts.append(unproject(z))
        for F in self.involutions:
            pts.append(F.apply(unproject(p)))
            pts.append(F.apply(unproject(q)))
        pts = np.asarray(pts)
        n = len(self.nodes)
        nn, cw = self._attach(pts)
        rows = [self.edges[:, 0], np.repeat(np.arange(len(pts)) + n, nn.shape[1])]
        cols = [self.edges[:, 1], nn.ravel()]
        vals = [self.weights, cw.ravel()]
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        size = n + len(pts)
        graph = csr_matrix((vals, (rows, cols)), shape=(size, size))
        dist = dijkstra(graph, directed=False, indices=[n])[0]
        return float(dist[n + 1])


def _level_for_resolution(resolution: int) -> int:
    resolution = max(int(resolution), 4)
    return max(1, math.ceil(math.log2(resolution / 5.675)))


def estimate_distance(f: ConformalFactor, p: complex, q: complex,
                      resolution: int = 64) -> float:
    """Upper bound on dist_{f^2 g0}(p, q), monotone non-increasing in resolution."""
    if abs(complex(p) - complex(q)) == 0.0:
        return 0.0
    top = _level_for_resolution(resolution)
    best = math.inf
    for level in range(1, top + 1):
        grid = DistanceGrid(f, level)
        best = min(best, grid.query(p, q))
    return best
