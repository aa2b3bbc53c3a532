"""Animated linear-projection paths: grand, guided, radial tours and slices.

Frames are p x d orthonormal bases; paths interpolate between bases along
Grassmann geodesics obtained from the principal-angle decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9
DEFAULT_STEP = 0.05          # radians between emitted frames
DEFAULT_N_BASES = 20
DEFAULT_MAX_ITER = 500
INITIAL_HALF_ANGLE = np.pi / 4
COOLING = 0.95
RESTART_WINDOW = 30


class TourError(ValueError):
    """Raised for invalid frames or tour settings."""


@dataclass(frozen=True)
class ProjectionFrame:
    basis: np.ndarray     # p x d, orthonormal columns

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise TourError("basis must be a p x d matrix")
        dev = np.abs(b.T @ b - np.eye(b.shape[1])).max()
        if dev >= ORTHO_TOL:
            raise TourError(f"basis columns not orthonormal (deviation {dev:.2e})")
        object.__setattr__(self, "basis", b)

    @property
    def p(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class TourPath:
    kind: str
    base_frames: tuple[ProjectionFrame, ...]
    interpolated: tuple[ProjectionFrame, ...]
    seed: int | None = None
    step: float = DEFAULT_STEP
    index_trace: tuple[float, ...] | None = None


@dataclass(frozen=True)
class SliceResult:
    distances: np.ndarray
    in_slice: np.ndarray
    h: float


def orthonormalize(m: np.ndarray) -> ProjectionFrame:
    """Gram-Schmidt orthonormalization preserving the first column direction."""
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    q, r = np.linalg.qr(m)
    diag = np.diag(r)
    if np.min(np.abs(diag)) < 1e-12 * max(1.0, np.abs(diag).max()):
        raise TourError("columns are linearly dependent")
    q = q * np.sign(diag)
    return ProjectionFrame(basis=q)


def _principal_decomposition(f: np.ndarray, g: np.ndarray):
    """SVD of f'g giving aligned bases, angles, and orthogonal directions."""
    u, s, vt = np.linalg.svd(f.T @ g)
    theta = np.arccos(np.clip(s, -1.0, 1.0))
    fa = f @ u
    ga = g @ vt.T
    # direction orthogonal to fa along the geodesic, per principal angle
    b = np.zeros_like(fa)
    for i, th in enumerate(theta):
        if th > 1e-9:
            vec = ga[:, i] - np.cos(th) * fa[:, i]
            b[:, i] = vec / np.sin(th)
    return u, theta, fa, b


def geodesic_distance(f: ProjectionFrame, g: ProjectionFrame) -> float:
    """Geodesic (root sum of squared principal angles) between frame spans."""
    s = np.linalg.svd(f.basis.T @ g.basis, compute_uv=False)
    theta = np.arccos(np.clip(s, -1.0, 1.0))
    return float(np.sqrt((theta**2).sum()))


def geodesic_point(f: ProjectionFrame, g: ProjectionFrame, t: float) -> ProjectionFrame:
    """Frame at fraction t along the geodesic from f toward the span of g."""
    u, theta, fa, b = _principal_decomposition(f.basis, g.basis)
    frame = (fa * np.cos(t * theta) + b * np.sin(t * theta)) @ u.T
    q, _ = np.linalg.qr(frame)  # re-orthonormalize against rounding drift
    # keep orientation consistent with the analytic frame
    q = q * np.sign(np.sum(q * frame, axis=0))
    return ProjectionFrame(basis=q)


def geodesic_interpolate(f: ProjectionFrame, g: ProjectionFrame, step: float = DEFAULT_STEP) -> list[ProjectionFrame]:
    """Frames along the geodesic from f to the span of g, spaced <= step.

    The first frame is f itself; the last spans g.  Identical spans yield a
    single frame.
    """
    if f.basis.shape != g.basis.shape:
        raise TourError("frames must have matching dimensions")
    dist = geodesic_distance(f, g)
    if dist < 1e-12:
        return [f]
    m = max(1, int(np.ceil(dist / step)))
    return [f] + [geodesic_point(f, g, i / m) for i in range(1, m + 1)]


def _random_frame(rng: np.random.Generator, p: int, d: int) -> ProjectionFrame:
    return orthonormalize(rng.standard_normal((p, d)))


def _chain(kind: str, bases: list[ProjectionFrame], step: float, seed, index_trace=None) -> TourPath:
    frames: list[ProjectionFrame] = [bases[0]]
    for g in bases[1:]:
        # continue from the frame actually reached so playback stays smooth
        frames.extend(geodesic_interpolate(frames[-1], g, step)[1:])
    return TourPath(
        kind=kind,
        base_frames=tuple(bases),
        interpolated=tuple(frames),
        seed=seed,
        step=step,
        index_trace=tuple(index_trace) if index_trace is not None else None,
    )


def grand_tour(p: int, d: int = 2, n_bases: int = DEFAULT_N_BASES, seed: int = 0, step: float = DEFAULT_STEP) -> TourPath:
    """Random geodesic walk through uniformly drawn orthonormal frames."""
    if d >= p:
        raise TourError("projection dimension must be below data dimension")
    rng = np.random.default_rng(seed)
    bases = [_random_frame(rng, p, d) for _ in range(n_bases)]
    return _chain("grand", bases, step, seed)


def _group_labels(groups) -> np.ndarray:
    if hasattr(groups, "group_of"):
        return np.asarray(groups.group_of)
    if hasattr(groups, "cluster_of"):
        return np.asarray(groups.cluster_of)
    return np.asarray(groups)


def _scatter_matrices(projected: np.ndarray, labels: np.ndarray):
    grand = projected.mean(axis=0)
    d = projected.shape[1]
    w = np.zeros((d, d))
    b = np.zeros((d, d))
    for g in np.unique(labels):
        rows = projected[labels == g]
        mean_g = rows.mean(axis=0)
        dev = rows - mean_g
        w += dev.T @ dev
        gap = (mean_g - grand)[:, None]
        b += rows.shape[0] * (gap @ gap.T)
    return w, b


def lda_index(projected: np.ndarray, groups) -> float:
    """Group-separation index 1 - |W| / |W + B| on projected data."""
    projected = np.atleast_2d(np.asarray(projected, dtype=float))
    if projected.shape[0] == 1:
        projected = projected.T
    labels = _group_labels(groups)
    if np.unique(labels).size < 2:
        raise TourError("lda_index needs at least 2 groups")
    w, b = _scatter_matrices(projected, labels)
    total = np.linalg.det(w + b)
    if not np.isfinite(total) or abs(total) < 1e-300:
        return 0.0
    return float(1.0 - np.linalg.det(w) / total)


def pda_index(projected: np.ndarray, groups, lam: float) -> float:
    """Penalized separation index; lam in [0,1) regularizes the scatters."""
    if not 0.0 <= lam < 1.0:
        raise TourError("lambda must be in [0, 1)")
    projected = np.atleast_2d(np.asarray(projected, dtype=float))
    if projected.shape[0] == 1:
        projected = projected.T
    labels = _group_labels(groups)
    if np.unique(labels).size < 2:
        raise TourError("pda_index needs at least 2 groups")
    n, d = projected.shape
    w, b = _scatter_matrices(projected, labels)
    eye = np.eye(d)
    num = np.linalg.det((1 - lam) * w + n * lam * eye)
    den = np.linalg.det((1 - lam) * (w + b) + n * lam * eye)
    return float(1.0 - num / den)


def make_index(name: str, lam: float = 0.1):
    """Index evaluator by name: 'lda' or 'pda' (with regularization lam)."""
    if name == "lda":
        return lambda projected, groups: lda_index(projected, groups)
    if name == "pda":
        return lambda projected, groups: pda_index(projected, groups, lam)
    raise TourError(f"unknown index {name!r}")


def guided_tour(
    coords: np.ndarray,
    groups,
    index: str = "lda",
    d: int = 2,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    lam: float = 0.1,
    step: float = DEFAULT_STEP,
    start: ProjectionFrame | None = None,
    callback=None,
) -> TourPath:
    """Stochastic geodesic hill climb maximizing a projection pursuit index.

    Proposals are frames within a shrinking geodesic neighborhood of the
    current frame (initial half-angle pi/4, cooled by 0.95 per rejection,
    reset every 30 consecutive rejections); only strict improvements are
    accepted.
    """
    coords = np.asarray(coords, dtype=float)
    labels = _group_labels(groups)
    if np.unique(labels).size < 2:
        raise TourError("guided tour needs at least 2 groups")
    evaluate = make_index(index, lam)
    p = coords.shape[1]
    rng = np.random.default_rng(seed)
    current = start if start is not None else _random_frame(rng, p, d)
    bases = [current]
    trace = [evaluate(coords @ current.basis, labels)]

    half_angle = INITIAL_HALF_ANGLE
    rejections = 0
    for it in range(max_iter):
        if callback is not None:
            callback(it, max_iter)
        target = _random_frame(rng, p, d)
        dist = geodesic_distance(current, target)
        if dist < 1e-12:
            continue
        angle = half_angle * rng.uniform(0.1, 1.0)
        candidate = geodesic_point(current, target, min(1.0, angle / dist))
        value = evaluate(coords @ candidate.basis, labels)
        if value > trace[-1]:
            current = candidate
            bases.append(candidate)
            trace.append(value)
            rejections = 0
            half_angle = INITIAL_HALF_ANGLE
        else:
            rejections += 1
            half_angle *= COOLING
            if rejections % RESTART_WINDOW == 0:
                half_angle = INITIAL_HALF_ANGLE
    return _chain("guided", bases, step, seed, index_trace=trace)


def radial_tour(start: ProjectionFrame, variable: int, step: float = DEFAULT_STEP) -> TourPath:
    """Interpolate one variable's frame contribution to zero and back.

    `variable` is 1-based.  The midpoint frame has an exactly-zero row for
    the chosen variable; the path ends back at the start frame.
    """
    p, d = start.p, start.d
    if not 1 <= variable <= p:
        raise TourError(f"variable {variable} out of range 1..{p}")
    if d > p - 1:
        raise TourError("removing the variable leaves a rank-deficient frame")
    removed = start.basis.copy()
    removed[variable - 1, :] = 0.0
    # target span: the zeroed columns, completed orthonormally within the
    # subspace that excludes the removed variable
    sub = np.delete(removed, variable - 1, axis=0)
    u = np.linalg.svd(sub, full_matrices=True)[0][:, :d]
    mid_basis = np.insert(u, variable - 1, 0.0, axis=0)
    mid = ProjectionFrame(basis=mid_basis)
    out = geodesic_interpolate(start, mid, step)
    frames = out + out[-2::-1]      # palindrome: back to the exact start frame
    # force the zero row exactly at the midpoint
    mid_idx = len(out) - 1
    basis = frames[mid_idx].basis.copy()
    basis[variable - 1, :] = 0.0
    frames[mid_idx] = orthonormalize(basis)
    return _chain_from_frames("radial", [start, mid, start], frames, step)


def _chain_from_frames(kind, bases, frames, step) -> TourPath:
    return TourPath(
        kind=kind,
        base_frames=tuple(bases),
        interpolated=tuple(frames),
        seed=None,
        step=step,
        index_trace=None,
    )


def project(coords: np.ndarray, f: ProjectionFrame) -> np.ndarray:
    """Project n x p coordinates through the frame to n x d."""
    coords = np.asarray(coords, dtype=float)
    if coords.shape[1] != f.p:
        raise TourError(f"coordinate width {coords.shape[1]} does not match frame p={f.p}")
    return coords @ f.basis


def slice_mask(coords: np.ndarray, f: ProjectionFrame, h: float | None = None) -> SliceResult:
    """Orthogonal distances to the projection plane and the in-slice mask.

    Coordinates are centered on their mean first.  When h is None, the
    thickness is chosen so the slice holds 20% of the observations (ties
    included).
    """
    coords = np.asarray(coords, dtype=float)
    centered = coords - coords.mean(axis=0)
    proj = centered @ f.basis
    residual = centered - proj @ f.basis.T
    distances = np.linalg.norm(residual, axis=1)
    if h is None:
        k = max(1, int(np.ceil(0.2 * coords.shape[0])))
        h = float(np.nextafter(np.sort(distances)[k - 1], np.inf))
    elif h <= 0:
        raise TourError("slice thickness must be positive")
    return SliceResult(distances=distances, in_slice=distances < h, h=float(h))


def hold_frame(path: TourPath, position: int) -> ProjectionFrame:
    """Frame at a 1-based position in the interpolated sequence."""
    if not 1 <= position <= len(path.interpolated):
        raise TourError(f"position {position} out of range 1..{len(path.interpolated)}")
    return path.interpolated[position - 1]


def serialize_path(path: TourPath, inline_frames: bool = False) -> dict:
    """JSON-ready document: seed, kind, step, base frames, index trace."""
    doc = {
        "kind": path.kind,
        "seed": path.seed,
        "step": path.step,
        "base_frames": [f.basis.tolist() for f in path.base_frames],
        "index_trace": list(path.index_trace) if path.index_trace is not None else None,
    }
    if inline_frames:
        doc["interpolated"] = [f.basis.tolist() for f in path.interpolated]
    return doc
