"""Transaction-region maps built from the binding gradient constraints.

A node's label is the set of unordered asset pairs ``i/j`` whose constraint
binds there (either direction), so zones where several constraints bind at
once stay visible.  Two-asset maps use a fixed eight-colour legend.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .errors import EmptyNTRegion, OutputError, UnsupportedDimension

NT = "NT"

LEGEND = {
    frozenset(): (255, 255, 255),
    frozenset({"1/2"}): (0, 0, 255),
    frozenset({"0/1"}): (255, 0, 0),
    frozenset({"0/2"}): (255, 255, 0),
    frozenset({"0/1", "0/2"}): (255, 165, 0),
    frozenset({"1/2", "0/1"}): (238, 130, 238),
    frozenset({"1/2", "0/2"}): (0, 128, 0),
    frozenset({"0/1", "0/2", "1/2"}): (0, 0, 0),
}


def pair_names(d: int) -> list[str]:
    """Unordered pair names ``i/j`` for ``0 <= i < j <= d`` in lexicographic order."""
    return [f"{i}/{j}" for i, j in itertools.combinations(range(d + 1), 2)]


@dataclass(frozen=True)
class RegionMap:
    radius: float
    n: int
    d: int
    codes: np.ndarray  # bitmask over ``names``, shape (n,) * d
    names: tuple
    w: np.ndarray
    a_bar: float
    tol_bind: float
    degenerate: bool = False
    nt_components: int = 1

    @property
    def h(self) -> float:
        return 2.0 * self.radius / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.radius, self.radius, self.n)

    @property
    def nt_mask(self) -> np.ndarray:
        return self.codes == 0

    def label_of(self, code: int) -> str:
        parts = [nm for k, nm in enumerate(self.names) if code >> k & 1]
        return "+".join(parts) if parts else NT

    def label_sets(self) -> np.ndarray:
        out = np.empty(self.codes.shape, dtype=object)
        for idx in np.ndindex(self.codes.shape):
            c = int(self.codes[idx])
            out[idx] = frozenset(nm for k, nm in enumerate(self.names) if c >> k & 1)
        return out

    def has(self, name: str) -> np.ndarray:
        """Mask of nodes where the unordered pair ``name`` binds."""
        return (self.codes >> self.names.index(name) & 1).astype(bool)

    def colors(self) -> np.ndarray:
        """RGB array of shape ``(n,) * d + (3,)``."""
        if self.d > 2:
            raise UnsupportedDimension("the colour legend covers at most two assets")
        table = np.zeros((1 << len(self.names), 3), dtype=np.uint8)
        for code in range(table.shape[0]):
            parts = frozenset(nm for k, nm in enumerate(self.names) if code >> k & 1)
            table[code] = LEGEND[parts]
        return table[self.codes]


def classify_regions(solution) -> RegionMap:
    """Label every node by the unordered pairs whose constraint binds there.

    Raises :class:`EmptyNTRegion` if the origin is not in the no-trade set.
    With every finite cost equal to zero the gradient constraints reduce to
    ``Dw = 0`` and bind everywhere; that degenerate case is reported as a
    blank map (no-trade everywhere) with ``degenerate`` set.
    """
    problem = solution.problem
    names = pair_names(problem.d)
    codes = np.zeros(problem.shape, dtype=np.int64)
    degenerate = problem.lam_max == 0.0
    if not degenerate:
        for k, (i, j) in enumerate(problem.pairs):
            bit = names.index(f"{min(i, j)}/{max(i, j)}")
            codes |= solution.binding[k].astype(np.int64) << bit
    nt = codes == 0
    if not nt[problem.center]:
        raise EmptyNTRegion("the origin is not in the no-trade region")
    structure = ndimage.generate_binary_structure(problem.d, 1)
    _, ncomp = ndimage.label(nt, structure=structure)
    return RegionMap(
        radius=problem.radius,
        n=problem.n,
        d=problem.d,
        codes=codes,
        names=tuple(names),
        w=solution.w,
        a_bar=float(solution.a_bar),
        tol_bind=float(solution.tol_bind),
        degenerate=degenerate,
        nt_components=int(ncomp),
    )


def central_nt_component(rmap: RegionMap) -> np.ndarray:
    """Mask of the 4-connected no-trade component that holds the origin."""
    structure = ndimage.generate_binary_structure(rmap.d, 1)
    lab, _ = ndimage.label(rmap.nt_mask, structure=structure)
    c = ((rmap.n - 1) // 2,) * rmap.d
    return lab == lab[c]


# serialisation


def csv_text(rmap: RegionMap) -> str:
    axis = rmap.axis
    lines = [f"# tol_bind={rmap.tol_bind:.17g}"]
    lines.append(",".join([f"rho{k + 1}" for k in range(rmap.d)] + ["label", "w", "aBar"]))
    labels = {int(c): rmap.label_of(int(c)) for c in np.unique(rmap.codes)}
    ab = f"{rmap.a_bar:.17g}"
    for idx in np.ndindex(rmap.codes.shape):
        coords = [f"{axis[k]:.17g}" for k in idx]
        lines.append(",".join(coords + [labels[int(rmap.codes[idx])], f"{rmap.w[idx]:.17g}", ab]))
    return "\n".join(lines) + "\n"


def emit_csv(rmap: RegionMap, path) -> Path:
    """One row per node in row-major order, preceded by a ``# tol_bind=`` comment."""
    path = Path(path)
    try:
        path.write_text(csv_text(rmap), encoding="ascii", newline="\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def image_bytes(rmap: RegionMap, scale: int = 2) -> bytes:
    if rmap.d != 2:
        raise UnsupportedDimension(f"images need two assets, got d={rmap.d}")
    if scale < 1:
        raise ValueError("scale must be a positive integer")
    rgb = rmap.colors()  # [i1, i2]
    img = rgb.transpose(1, 0, 2)[::-1]  # rows: rho2 from top (max) to bottom; cols: rho1
    img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def emit_image(rmap: RegionMap, path, scale: int = 2) -> Path:
    """Binary PPM with ``scale x scale`` pixel blocks per node, rho1 rightward, rho2 upward."""
    data = image_bytes(rmap, scale)
    path = Path(path)
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def read_ppm(path) -> np.ndarray:
    """Inverse of :func:`emit_image` for the files it writes."""
    raw = Path(path).read_bytes()
    magic, dims, maxval, body = raw.split(b"\n", 3)
    if magic != b"P6" or maxval != b"255":
        raise ValueError("not a P6/255 file")
    w, h = (int(x) for x in dims.split())
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3)


# geometric predicates


def nt_points(rmap: RegionMap) -> np.ndarray:
    mask = central_nt_component(rmap)
    mesh = np.meshgrid(*([rmap.axis] * rmap.d), indexing="ij")
    return np.stack(mesh, axis=-1)[mask]


def bounding_box(rmap: RegionMap) -> np.ndarray:
    """``(d, 2)`` extent of the central no-trade component."""
    pts = nt_points(rmap)
    return np.stack([pts.min(axis=0), pts.max(axis=0)], axis=1)


def box_fill_ratio(rmap: RegionMap) -> float:
    """Share of the bounding box's nodes that are no-trade nodes (1 for a box)."""
    mask = central_nt_component(rmap)
    idx = np.argwhere(mask)
    lo, hi = idx.min(axis=0), idx.max(axis=0)
    box = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
    return float(mask[box].mean())


def hausdorff_to_box(rmap: RegionMap, box: np.ndarray) -> float:
    """Hausdorff distance between the no-trade nodes and the grid nodes inside ``box``."""
    from scipy.spatial.distance import directed_hausdorff

    pts = nt_points(rmap)
    mesh = np.stack(np.meshgrid(*([rmap.axis] * rmap.d), indexing="ij"), axis=-1)
    inside = np.all((mesh >= box[:, 0] - 1e-12) & (mesh <= box[:, 1] + 1e-12), axis=-1)
    ref = mesh[inside]
    if ref.size == 0:
        ref = np.zeros((1, rmap.d))
    return float(max(directed_hausdorff(pts, ref)[0], directed_hausdorff(ref, pts)[0]))


def half_widths(rmap: RegionMap) -> np.ndarray:
    """No-trade half-width along each axis through the origin (units of rho)."""
    mask = central_nt_component(rmap)
    c = (rmap.n - 1) // 2
    out = []
    for k in range(rmap.d):
        sl = [c] * rmap.d
        sl[k] = slice(None)
        line = mask[tuple(sl)]
        up = c
        while up + 1 < rmap.n and line[up + 1]:
            up += 1
        lo = c
        while lo - 1 >= 0 and line[lo - 1]:
            lo -= 1
        out.append(0.5 * (up - lo) * rmap.h)
    return np.array(out)


def principal_axis(rmap: RegionMap) -> np.ndarray:
    """Unit eigenvector of the largest second moment of the no-trade nodes."""
    pts = nt_points(rmap)
    pts = pts - pts.mean(axis=0)
    vals, vecs = np.linalg.eigh(pts.T @ pts)
    v = vecs[:, -1]
    return v if v[0] >= 0 else -v


def shear_sign(rmap: RegionMap) -> int:
    """Sign of the correlation of the no-trade nodes (2D): +1 along (1,1), -1 along (1,-1)."""
    if rmap.d != 2:
        raise UnsupportedDimension("shear is defined for two assets")
    pts = nt_points(rmap)
    pts = pts - pts.mean(axis=0)
    cov = float(np.mean(pts[:, 0] * pts[:, 1]))
    scale = float(np.sqrt(np.mean(pts[:, 0] ** 2) * np.mean(pts[:, 1] ** 2)))
    if abs(cov) <= 1e-3 * scale:
        return 0
    return 1 if cov > 0 else -1


def convexity_defect(rmap: RegionMap) -> float:
    """Share of grid nodes inside the convex hull of the no-trade set that are not no-trade."""
    pts = nt_points(rmap)
    if pts.shape[0] <= rmap.d + 1:
        return 0.0
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return 0.0
    mesh = np.stack(np.meshgrid(*([rmap.axis] * rmap.d), indexing="ij"), axis=-1)
    flat = mesh.reshape(-1, rmap.d)
    eqs = hull.equations
    tol = 1e-9 * rmap.radius
    inside = np.all(flat @ eqs[:, :-1].T + eqs[:, -1] <= tol, axis=1)
    nt = central_nt_component(rmap).ravel()
    n_in = int(inside.sum())
    return float(np.sum(inside & ~nt) / n_in) if n_in else 0.0


def is_convex(rmap: RegionMap, tol: float = 0.0) -> bool:
    return convexity_defect(rmap) <= tol


def point_symmetric(rmap: RegionMap) -> bool:
    """Labels invariant under rho -> -rho."""
    flipped = rmap.codes[(slice(None, None, -1),) * rmap.d]
    return bool(np.array_equal(flipped, rmap.codes))
