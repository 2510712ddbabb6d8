"""Iterative GrabCut: assign components, refit mixtures, cut, repeat."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .color import (
    COVARIANCE_FLOOR,
    assign_components,
    init_by_kmeans,
    neg_log_density,
    refit,
)
from .errors import DimensionMismatch
from .mincut import (
    GAMMA_DEFAULT,
    HARD_WEIGHT,
    GridGraph,
    SmoothnessParams,
    _pair_weights,
    compute_beta,
    max_flow,
)
from .raster import BinaryMask, RasterImage, Trimap, TrimapLabel


@dataclass(frozen=True)
class SegmentationConfig:
    components_per_side: int = 5
    max_iterations: int = 5
    convergence_fraction: float = 0.001
    gamma: float = GAMMA_DEFAULT
    seed: int = 17
    covariance_floor: float = COVARIANCE_FLOOR

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 <= self.convergence_fraction < 1.0:
            raise ValueError("convergence_fraction must be in [0, 1)")
        if self.components_per_side < 1:
            raise ValueError("components_per_side must be >= 1")


@dataclass(frozen=True)
class SegmentationResult:
    mask: BinaryMask
    iterations_run: int
    final_energy: float
    energy_trace: tuple[float, ...] = field(default=())


def energy(
    image: RasterImage,
    fg_labels: np.ndarray,
    fg_model,
    bg_model,
    params: SmoothnessParams,
    trimap: Trimap,
) -> float:
    """Data term over trimap-probable pixels plus the contrast pairwise term."""
    if fg_labels.shape != (image.height, image.width):
        raise DimensionMismatch("label grid does not match image")
    labels = trimap.labels
    probable = (labels == TrimapLabel.PROBABLE_FG) | (labels == TrimapLabel.PROBABLE_BG)
    flat = image.pixels.reshape(-1, 3)
    fg_flat = fg_labels.reshape(-1)
    prob_flat = probable.reshape(-1)
    u = 0.0
    sel = prob_flat & fg_flat
    if sel.any():
        u += float(np.sum(neg_log_density(fg_model, flat[sel])))
    sel = prob_flat & ~fg_flat
    if sel.any():
        u += float(np.sum(neg_log_density(bg_model, flat[sel])))

    caps = _pair_weights(image, params)
    h, w = image.height, image.width
    v = 0.0
    for a, b, c in (
        (fg_labels[:, : w - 1], fg_labels[:, 1:], caps[:, : w - 1, 0]),
        (fg_labels[: h - 1, :], fg_labels[1:, :], caps[: h - 1, :, 1]),
        (fg_labels[: h - 1, : w - 1], fg_labels[1:, 1:], caps[: h - 1, : w - 1, 2]),
        (fg_labels[: h - 1, 1:], fg_labels[1:, : w - 1], caps[: h - 1, 1:, 3]),
    ):
        v += float(c[a != b].sum())
    return u + v


def segment(
    image: RasterImage, trimap: Trimap, config: SegmentationConfig | None = None
) -> SegmentationResult:
    """Run iterative GrabCut under the trimap's hard constraints."""
    config = config or SegmentationConfig()
    if (image.width, image.height) != (trimap.width, trimap.height):
        raise DimensionMismatch("image and trimap shapes differ")
    labels = trimap.labels
    fg = (labels == TrimapLabel.DEFINITE_FG) | (labels == TrimapLabel.PROBABLE_FG)
    probable = (labels == TrimapLabel.PROBABLE_FG) | (labels == TrimapLabel.PROBABLE_BG)

    # nothing to optimize: clamped labeling is the answer
    if not probable.any() or fg.all() or not fg.any():
        return SegmentationResult(
            mask=BinaryMask.from_array(fg), iterations_run=0, final_energy=0.0
        )

    flat = image.pixels.reshape(-1, 3)
    k = config.components_per_side
    floor = config.covariance_floor
    fg_model, _ = init_by_kmeans(flat[fg.reshape(-1)], k, config.seed, floor)
    bg_model, _ = init_by_kmeans(flat[~fg.reshape(-1)], k, config.seed + 1, floor)

    params = SmoothnessParams(
        gamma=config.gamma, beta=compute_beta(image), hard_weight=HARD_WEIGHT
    )
    pair_caps = _pair_weights(image, params)
    fg_hard = labels == TrimapLabel.DEFINITE_FG
    bg_hard = labels == TrimapLabel.DEFINITE_BG
    n_total = image.width * image.height

    trace: list[float] = []
    iterations = 0
    for _ in range(config.max_iterations):
        fg_flat = fg.reshape(-1)
        fg_px = flat[fg_flat]
        bg_px = flat[~fg_flat]
        fg_model = refit(fg_px, assign_components(fg_model, fg_px), fg_model.k, floor)
        bg_model = refit(bg_px, assign_components(bg_model, bg_px), bg_model.k, floor)

        source = np.asarray(neg_log_density(bg_model, flat)).reshape(fg.shape).copy()
        sink = np.asarray(neg_log_density(fg_model, flat)).reshape(fg.shape).copy()
        source[fg_hard] = params.hard_weight
        sink[fg_hard] = 0.0
        source[bg_hard] = 0.0
        sink[bg_hard] = params.hard_weight
        graph = GridGraph(
            width=image.width,
            height=image.height,
            source_cap=source,
            sink_cap=sink,
            neighbor_caps=pair_caps,
        )
        cut = max_flow(graph)

        new_fg = fg.copy()
        new_fg[probable] = cut.side[probable]
        changed = int((new_fg != fg).sum())
        fg = new_fg
        iterations += 1
        trace.append(energy(image, fg, fg_model, bg_model, params, trimap))
        if changed < config.convergence_fraction * n_total:
            break

    return SegmentationResult(
        mask=BinaryMask.from_array(fg),
        iterations_run=iterations,
        final_energy=trace[-1],
        energy_trace=tuple(trace),
    )
