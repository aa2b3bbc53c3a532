"""Two-dimensional non-linear embeddings behind a pluggable method registry.

Built-ins: t-SNE (distance-matrix driven, fixed reference hyperparameters)
and classical metric scaling.  Plugins receive both the coordinate matrix
and the distance matrix and return an n x 2 embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import DistanceMatrix

TSNE_ITERS = 1000
TSNE_LEARNING_RATE = 200.0
TSNE_EXAGGERATION = 12.0
TSNE_EXAGGERATION_ITERS = 250
TSNE_MOMENTUM_EARLY = 0.5
TSNE_MOMENTUM_LATE = 0.8
TSNE_INIT_SD = 1e-4
PERPLEXITY_MAX_ITERS = 64
PERPLEXITY_TOL = 1e-5


class NldrError(ValueError):
    """Raised for invalid embedding inputs or unknown methods."""


class CancelledError(RuntimeError):
    """Raised inside a cooperative cancellation callback."""


def _stable_sum(a: np.ndarray, axis=None):
    """Summation independent of element order (sort first).

    Keeps the t-SNE trajectory bitwise equivariant under observation
    permutation; rounding differences would otherwise amplify chaotically.
    """
    return np.sort(a, axis=axis).sum(axis=axis)


@dataclass(frozen=True)
class Embedding:
    method_id: str
    Y: np.ndarray               # n x 2
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def to_doc(self) -> dict:
        return {
            "method": self.method_id,
            "params": dict(self.params),
            "seed": self.seed,
            "Y": self.Y.tolist(),
        }


def perplexity_calibration(d_row: np.ndarray, perplexity: float) -> np.ndarray:
    """Conditional neighbor probabilities with entropy matched to perplexity.

    Bisection on the Gaussian precision so that 2^H(p) = perplexity; the
    row of distances excludes the observation itself.
    """
    d_row = np.asarray(d_row, dtype=float)
    n_neighbors = d_row.shape[0]
    if not 1.0 <= perplexity < n_neighbors + 1:
        raise NldrError(f"perplexity {perplexity} not attainable with {n_neighbors} neighbors")
    target = np.log2(perplexity)
    d2 = d_row**2
    beta, lo, hi = 1.0, 0.0, np.inf

    p = None
    for _ in range(PERPLEXITY_MAX_ITERS):
        logits = -d2 * beta
        logits -= logits.max()
        p = np.exp(logits)
        p /= _stable_sum(p)
        nz = p > 0
        entropy = -_stable_sum(p[nz] * np.log2(p[nz]))
        if abs(entropy - target) < PERPLEXITY_TOL:
            return p
        if entropy > target:
            lo = beta
            beta = beta * 2 if hi == np.inf else (lo + hi) / 2
        else:
            hi = beta
            beta = (lo + hi) / 2
    entropy = -_stable_sum(p[p > 0] * np.log2(p[p > 0]))
    if abs(2**entropy - perplexity) > 1e-4 * perplexity:
        raise NldrError(f"perplexity {perplexity} not attained (entropy {entropy:.4f})")
    return p


def _joint_probabilities(d: np.ndarray, perplexity: float) -> np.ndarray:
    n = d.shape[0]
    cond = np.zeros((n, n))
    mask = ~np.eye(n, dtype=bool)
    for i in range(n):
        cond[i, mask[i]] = perplexity_calibration(d[i, mask[i]], perplexity)
    p = (cond + cond.T) / (2.0 * n)
    return np.maximum(p, 1e-12)


def default_perplexity(n: int) -> float:
    return min(30.0, (n - 1) / 3.0)


def tsne(
    d: DistanceMatrix,
    perplexity: float | None = None,
    iters: int = TSNE_ITERS,
    seed: int = 0,
    init: np.ndarray | None = None,
    callback=None,
) -> Embedding:
    """t-SNE embedding of a distance matrix with pinned hyperparameters.

    Gradient descent with momentum 0.5 (0.8 after iteration 250), learning
    rate 200, and 12x early exaggeration for the first 250 iterations.
    Initial coordinates are seeded per observation id so runs are
    deterministic and permutation-alignable.
    """
    n = d.n
    if n < 4:
        raise NldrError("t-SNE needs at least 4 observations")
    if perplexity is None:
        perplexity = default_perplexity(n)
    p = _joint_probabilities(d.d, perplexity)

    if init is not None:
        y = np.array(init, dtype=float, copy=True)
        if y.shape != (n, 2):
            raise NldrError("init must be n x 2")
    else:
        y = tsne_init(n, seed)
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)

    for it in range(iters):
        if callback is not None:
            callback(it, iters)
        exaggeration = TSNE_EXAGGERATION if it < TSNE_EXAGGERATION_ITERS else 1.0
        momentum = TSNE_MOMENTUM_EARLY if it < TSNE_EXAGGERATION_ITERS else TSNE_MOMENTUM_LATE
        grad, _ = _tsne_gradient(exaggeration * p, y)
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - TSNE_LEARNING_RATE * gains * grad
        y = y + velocity
        y = y - _stable_sum(y, axis=0) / n
    return Embedding(method_id="tsne", Y=y, params={"perplexity": perplexity, "iters": iters}, seed=seed)


def tsne_init(n: int, seed: int) -> np.ndarray:
    """Initial layout: one small seeded normal draw per observation id."""
    return np.vstack(
        [np.random.default_rng([seed, i]).normal(0.0, TSNE_INIT_SD, 2) for i in range(n)]
    )


def _tsne_gradient(p: np.ndarray, y: np.ndarray):
    diff = y[:, None, :] - y[None, :, :]
    dist2 = (diff**2).sum(axis=2)
    num = 1.0 / (1.0 + dist2)
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / _stable_sum(num, axis=None), 1e-12)
    w = (p - q) * num
    grad = 4.0 * np.stack(
        [_stable_sum(w * diff[:, :, k], axis=1) for k in range(y.shape[1])], axis=1
    )
    return grad, q


def tsne_kl(d: DistanceMatrix, y: np.ndarray, perplexity: float | None = None) -> float:
    """KL divergence of the low-dimensional layout against the affinities."""
    if perplexity is None:
        perplexity = default_perplexity(d.n)
    p = _joint_probabilities(d.d, perplexity)
    _, q = _tsne_gradient(p, y)
    return float((p * np.log(p / q)).sum())


def classical_mds(d: DistanceMatrix) -> Embedding:
    """Classical metric scaling: double-centered Gram matrix, top-2 eigenpairs."""
    n = d.n
    if n < 3:
        raise NldrError("classical scaling needs at least 3 observations")
    j = np.eye(n) - np.ones((n, n)) / n
    gram = -0.5 * j @ (d.d**2) @ j
    eigvals, eigvecs = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1][:2]
    vals = np.clip(eigvals[order], 0.0, None)
    vals[vals < 1e-12 * max(eigvals.max(), 0.0)] = 0.0  # rank noise, not structure
    y = eigvecs[:, order] * np.sqrt(vals)
    degenerate = int((vals > 0).sum()) < 2
    return Embedding(method_id="mds", Y=y, params={"degenerate": degenerate}, seed=None)


class NldrRegistry:
    """Name -> method map; methods take (coords, dist) and return an Embedding.

    The built-ins "tsne" and "mds" are always present.
    """

    def __init__(self):
        self._methods = {}
        self.register("tsne", lambda coords, dist, seed=0, callback=None: tsne(dist, seed=seed, callback=callback))
        self.register("mds", lambda coords, dist, seed=0, callback=None: classical_mds(dist))

    def register(self, name: str, fn) -> None:
        if name in self._methods:
            raise NldrError(f"method {name!r} already registered")
        self._methods[name] = fn

    def names(self) -> list[str]:
        return sorted(self._methods)

    def run(self, name: str, coords: np.ndarray, dist: DistanceMatrix, seed: int = 0, callback=None) -> Embedding:
        if name not in self._methods:
            raise NldrError(f"unknown method {name!r}; registered: {', '.join(self.names())}")
        try:
            result = self._methods[name](coords, dist, seed=seed, callback=callback)
        except TypeError:
            result = self._methods[name](coords, dist)
        if not isinstance(result, Embedding):
            y = np.asarray(getattr(result, "Y", result), dtype=float)
            result = Embedding(method_id=name, Y=y, seed=seed)
        y = result.Y
        if y.shape != (dist.n, 2) or not np.all(np.isfinite(y)):
            raise NldrError(f"method {name!r} returned a malformed embedding")
        return result


def run_method(reg: NldrRegistry, name: str, coords: np.ndarray, d: DistanceMatrix, seed: int = 0) -> Embedding:
    return reg.run(name, coords, d, seed=seed)
