"""Deterministic paired-domain toy scenes.

Each scene is a piecewise-constant class map on an H x W grid, a depth
map whose per-class base level rises with the class index (so depth
carries class information), and features obtained by pushing the class
one-hot plus depth through a fixed random linear embedding. A shift
spec turns source-style scenes into a target domain: features are
scaled, offset, and noised, and true depth is replaced by a noisy
pseudo-depth stand-in.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numeric import ContractError
from .objectives import LabelMap, LabelSource
from .rng import RngState

DEPTH_FLOOR = 1e-3
DEPTH_NOISE_SD = 0.05
FEATURE_NOISE_SD = 0.05
VERTICAL_RANGE = 0.5
EMBED_SEED = 916191  # fixed; the embedding never varies with the run seed
DEPTH_EMBED_GAIN = 0.2  # depth spans ~5 units; keeps its feature share comparable to the one-hot part


class Domain(Enum):
    SOURCE = "source"
    TARGET = "target"


@dataclass
class Scene:
    features: np.ndarray  # C x N, N = h * w flattened row-major
    labels: LabelMap
    depth: np.ndarray  # 1 x N, strictly positive
    domain: Domain
    h: int
    w: int
    labels_eval_only: bool = False

    def __post_init__(self):
        n = self.h * self.w
        self.features = np.asarray(self.features, dtype=np.float64)
        self.depth = np.asarray(self.depth, dtype=np.float64).reshape(1, -1)
        if self.features.ndim != 2 or self.features.shape[1] != n:
            raise ContractError(f"features must be C x {n}, got {self.features.shape}")
        if self.depth.shape[1] != n or self.labels.labels.size != n:
            raise ContractError("depth / labels do not cover the grid")
        if not np.all(self.depth > 0):
            raise ContractError("depth must be strictly positive")
        if np.unique(self.labels.labels).size < 2:
            raise ContractError("a scene must show at least 2 classes")


@dataclass
class ShiftSpec:
    """Domain-gap recipe; scalars broadcast over channels."""

    feature_shift: object = 0.0
    feature_scale: object = 1.0
    noise_sd: float = 0.0
    depth_noise_sd: float = 0.0

    def __post_init__(self):
        self.feature_shift = np.atleast_1d(
            np.asarray(self.feature_shift, dtype=np.float64)
        ).reshape(-1, 1)
        self.feature_scale = np.atleast_1d(
            np.asarray(self.feature_scale, dtype=np.float64)
        ).reshape(-1, 1)
        if not np.all(self.feature_scale > 0):
            raise ContractError("feature_scale must be positive")
        if self.noise_sd < 0 or self.depth_noise_sd < 0:
            raise ContractError("noise levels must be >= 0")


_EMBED_CACHE = {}


def embedding_matrix(k: int, channels: int) -> np.ndarray:
    """The fixed channels x (k + 1) map from (one-hot, depth) to features.

    The depth column carries a reduced gain: depth values are several
    units wide while the one-hot block is 0/1, and features in a
    roughly unit range keep the downstream tanh layers off their flat
    tails.
    """
    key = (k, channels)
    if key not in _EMBED_CACHE:
        m = RngState(EMBED_SEED, (k, channels)).normal(channels, k + 1, 1.0)
        m[:, -1] *= DEPTH_EMBED_GAIN
        _EMBED_CACHE[key] = m
    return _EMBED_CACHE[key]


def _strips(rng: RngState, h: int, w: int, k: int) -> np.ndarray:
    """k vertical strips in a random class order; requires w >= k."""
    cuts = np.sort(rng.integers(1, w, 8))
    edges = [0]
    for c in cuts:
        if len(edges) == k:
            break
        if c > edges[-1]:
            edges.append(int(c))
    if len(edges) < k:  # draws collided: fall back to even spacing
        edges = [i * w // k for i in range(k)]
    edges.append(w)
    order = np.argsort(rng.uniform(0.0, 1.0, 1, k).ravel())
    grid = np.empty((h, w), dtype=np.int64)
    for i in range(k):
        grid[:, edges[i] : edges[i + 1]] = order[i]
    return grid


def _class_map(rng: RngState, h: int, w: int, k: int) -> np.ndarray:
    """Axis-aligned piecewise-constant classes: strips plus overlay boxes.

    Strips run along whichever axis fits k of them; grids too small for
    strips get a cell-level cyclic pattern. Should the overlays ever
    bury all but one class, the cyclic pattern replaces the map so the
    two-class scene invariant always holds.
    """
    if w >= k:
        grid = _strips(rng, h, w, k)
    elif h >= k:
        grid = _strips(rng, w, h, k).T.copy()
    else:
        grid = (np.arange(h * w, dtype=np.int64) % k).reshape(h, w)
    n_boxes = int(rng.integers(1, 4, 1)[0])
    for _ in range(n_boxes):
        bh = int(rng.integers(1, max(2, h // 2 + 1), 1)[0])
        bw = int(rng.integers(1, max(2, w // 2 + 1), 1)[0])
        r0 = int(rng.integers(0, h - bh + 1, 1)[0])
        c0 = int(rng.integers(0, w - bw + 1, 1)[0])
        grid[r0 : r0 + bh, c0 : c0 + bw] = int(rng.integers(0, k, 1)[0])
    if np.unique(grid).size < 2:
        grid = (np.arange(h * w, dtype=np.int64) % k).reshape(h, w)
    return grid


def gen_scene(rng: RngState, h: int, w: int, k: int, channels: int = 8) -> Scene:
    """One source-style scene, a pure function of the rng key."""
    if k < 2:
        raise ContractError(f"need at least 2 classes, got {k}")
    if k > h * w:
        raise ContractError(f"{k} classes cannot fit {h * w} cells")
    grid = _class_map(rng, h, w, k)
    labels = grid.ravel()

    rows = np.repeat(np.arange(h), w)
    base = 1.0 + labels.astype(np.float64)
    vertical = VERTICAL_RANGE * rows / max(1, h - 1)
    depth = base + vertical + rng.normal(1, h * w, DEPTH_NOISE_SD).ravel()
    depth = np.maximum(depth, DEPTH_FLOOR).reshape(1, -1)

    one_hot = np.zeros((k, h * w))
    one_hot[labels, np.arange(h * w)] = 1.0
    signal = np.vstack([one_hot, depth])
    features = embedding_matrix(k, channels) @ signal
    features = features + rng.normal(channels, h * w, FEATURE_NOISE_SD)

    return Scene(
        features=features,
        labels=LabelMap(labels=labels, source=LabelSource.GROUND_TRUTH),
        depth=depth,
        domain=Domain.SOURCE,
        h=h,
        w=w,
    )


def shift_scene(scene: Scene, spec: ShiftSpec, rng: RngState) -> Scene:
    """Apply the domain gap: a null spec returns byte-equal data."""
    features = scene.features * spec.feature_scale + spec.feature_shift
    features = features + rng.normal(*scene.features.shape, spec.noise_sd)
    pseudo = scene.depth + rng.normal(1, scene.depth.size, spec.depth_noise_sd)
    pseudo = np.maximum(pseudo, DEPTH_FLOOR)
    return Scene(
        features=features,
        labels=LabelMap(scene.labels.labels.copy(), scene.labels.source),
        depth=pseudo,
        domain=Domain.TARGET,
        h=scene.h,
        w=scene.w,
        labels_eval_only=True,
    )


def make_domain_pair(
    rng: RngState,
    spec: ShiftSpec,
    n_scenes: int,
    dims: tuple,
    k: int,
    channels: int = 8,
) -> tuple:
    """n_scenes source scenes and n_scenes shifted target scenes.

    Scene i draws from the child stream keyed i (source) or
    n_scenes + i (target), so the two sets never share raw draws and
    adding scenes never disturbs earlier ones.
    """
    if n_scenes < 1:
        raise ContractError(f"n_scenes must be >= 1, got {n_scenes}")
    h, w = dims
    source = [
        gen_scene(rng.derive(i), h, w, k, channels) for i in range(n_scenes)
    ]
    target = []
    for i in range(n_scenes):
        child = rng.derive(n_scenes + i)
        raw = gen_scene(child, h, w, k, channels)
        target.append(shift_scene(raw, spec, child.derive(1)))
    return source, target
