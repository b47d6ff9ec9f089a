import numpy as np
import pytest

from mdaposteriori.grid import BoundaryTag, MortarInterface, assemble_mdgrid, build_validation_grid, make_subdomain
from mdaposteriori.mesh import make_mesh


def square_mesh(n: int, jitter: float = 0.0, seed: int = 0):
    """Unit square split into 2 n^2 triangles, optionally with moved interior nodes."""
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    if jitter:
        rng = np.random.default_rng(seed)
        inner = (nodes > 0).all(axis=1) & (nodes < 1).all(axis=1)
        nodes[inner] += rng.uniform(-jitter, jitter, (inner.sum(), 2)) / n
    cells = []
    for j in range(n):
        for i in range(n):
            a, b = j * (n + 1) + i, j * (n + 1) + i + 1
            c, d = a + n + 1, b + n + 1
            cells += [[a, b, d], [a, d, c]]
    return make_mesh(2, nodes, np.array(cells))


def equilateral_mesh(n: int, h: float = 0.25):
    """Parallelogram of 2 n^2 equilateral triangles (centroids are circumcentres)."""
    e1, e2 = np.array([h, 0.0]), np.array([h / 2, h * np.sqrt(3) / 2])
    ij = np.array([(i, j) for j in range(n + 1) for i in range(n + 1)])
    nodes = ij[:, :1] * e1 + ij[:, 1:] * e2
    nid = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = []
    for j in range(n):
        for i in range(n):
            cells += [[nid(i, j), nid(i + 1, j), nid(i, j + 1)], [nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)]]
    return make_mesh(2, nodes, np.array(cells))


def single_domain_grid(mesh, tag=BoundaryTag.DIRICHLET):
    tags = np.zeros(mesh.num_faces, dtype=np.int64)
    tags[mesh.boundary_faces] = tag
    return assemble_mdgrid(mesh.ambient_dim, [make_subdomain(0, mesh, tags)], [])


def segment_grid(xs, left=BoundaryTag.DIRICHLET, right=BoundaryTag.DIRICHLET):
    xs = np.asarray(xs, dtype=float)
    n = xs.size - 1
    mesh = make_mesh(1, xs[:, None], np.column_stack([np.arange(n), np.arange(1, n + 1)]))
    tags = np.zeros(mesh.num_faces, dtype=np.int64)
    for f in mesh.boundary_faces:
        tags[f] = left if mesh.face_centers[f, 0] < xs.mean() else right
    return assemble_mdgrid(1, [make_subdomain(0, mesh, tags)], [])


def line(xs, x0=0.5):
    xs = np.asarray(xs, float)
    n = xs.size - 1
    return make_mesh(1, np.column_stack([np.full(xs.size, x0), xs]), np.column_stack([np.arange(n), np.arange(1, n + 1)]))


def strip_grid(trace_ys, mortar_ys, lower_ys):
    """Square [0, 0.5] x [0, 1] whose right edge couples to a fracture at x = 0.5."""
    ys = np.asarray(trace_ys, float)
    nodes = np.vstack([np.column_stack([np.zeros_like(ys), ys]), np.column_stack([np.full_like(ys, 0.5), ys])])
    n = ys.size
    cells = []
    for j in range(n - 1):
        cells += [[j, n + j, n + j + 1], [j, n + j + 1, j + 1]]
    mesh = make_mesh(2, nodes, np.array(cells))
    tags = np.zeros(mesh.num_faces, dtype=np.int64)
    iface = -np.ones(mesh.num_faces, dtype=np.int64)
    bnd = mesh.boundary_faces
    right = np.isclose(mesh.face_centers[bnd, 0], 0.5)
    tags[bnd] = BoundaryTag.DIRICHLET
    tags[bnd[right]] = BoundaryTag.INTERNAL
    iface[bnd[right]] = 0
    low = line(lower_ys)
    ltags = np.zeros(low.num_faces, dtype=np.int64)
    ltags[low.boundary_faces] = BoundaryTag.DIRICHLET
    sds = [make_subdomain(0, mesh, tags, iface), make_subdomain(1, low, ltags)]
    e = MortarInterface(0, 1, 0, "minus", line(mortar_ys))
    return assemble_mdgrid(2, sds, [e])


@pytest.fixture(scope="session")
def zeta1_grid():
    return build_validation_grid((0.05, 0.1, 0.07143))


@pytest.fixture(scope="session")
def coarse_grid():
    return build_validation_grid((0.125, 0.25, 0.1))


_RUNS = {}


def study_run(method: str, level: int, **kw):
    """Cached validation run at a 1-based refinement level."""
    from mdaposteriori.grid import TABLE1_LEVELS
    from mdaposteriori.study import run_level

    key = (method, level, tuple(sorted(kw.items())))
    if key not in _RUNS:
        _RUNS[key] = run_level(TABLE1_LEVELS[level - 1], method, f"zeta{level}", **kw)
    return _RUNS[key]
