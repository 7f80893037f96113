"""Box prediction from calibrated maps and the localization metrics.

Boxes are half-open integer pixel rectangles [x0, x1) x [y0, y1). Score maps
are min-max normalized before thresholding; thresholding is strict (value >
gamma); components are 4-connected. All IoU comparisons against a threshold
delta are inclusive (>= delta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import component_stats
from .diffusion import gap_logits
from .errors import ArgumentError, ShapeError, StorageError, ValidationError

DEFAULT_GAMMA_GRID = tuple(round(0.05 * i, 2) for i in range(20))  # 0.00 .. 0.95
DEFAULT_DELTAS = (0.3, 0.5, 0.7)

_MODES = ("largest_component", "all_components")


@dataclass(frozen=True, order=True)
class BBox:
    """Half-open pixel rectangle; x1 > x0 and y1 > y0 enforced."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValidationError(f"degenerate box ({self.x0},{self.y0},{self.x1},{self.y1})")

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def astuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union in pixel area; 0 for disjoint boxes."""
    ix0 = max(a.x0, b.x0)
    iy0 = max(a.y0, b.y0)
    ix1 = min(a.x1, b.x1)
    iy1 = min(a.y1, b.y1)
    inter = max(0, ix1 - ix0) * max(0, iy1 - iy0)
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


def couple_maps(score_map: np.ndarray, sem_map: np.ndarray, class_idx: int) -> np.ndarray:
    """Elementwise product of the attention map with one semantic channel."""
    f = np.asarray(score_map, dtype=np.float64)
    s = np.asarray(sem_map, dtype=np.float64)
    if s.ndim != 3 or f.shape != s.shape[:2]:
        raise ShapeError(f"map {f.shape} and semantics {s.shape} do not align")
    if not 0 <= class_idx < s.shape[2]:
        raise ArgumentError(f"class index {class_idx} outside 0..{s.shape[2] - 1}")
    return f * s[:, :, class_idx]


def _axis_coords(n_in: int, n_out: int):
    # corner-aligned source positions for each output index
    if n_out == 1:
        zero = np.zeros(1, dtype=np.int64)
        return zero, zero, np.zeros(1)
    scale = (n_in - 1) / (n_out - 1)
    src = np.arange(n_out) * scale
    i0 = np.minimum(src.astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def upsample_bilinear(m: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize.

    Exact at grid corners; a constant map stays exactly constant (the
    interpolation is written as a + t*(b - a)); equal in/out dims reproduce
    the input bit for bit.
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-d map, got {arr.shape}")
    in_h, in_w = arr.shape
    if out_h < in_h or out_w < in_w:
        raise ArgumentError(
            f"output {out_h}x{out_w} must not be smaller than input {in_h}x{in_w}"
        )
    y0, y1, ty = _axis_coords(in_h, out_h)
    rows = arr[y0, :] + ty[:, None] * (arr[y1, :] - arr[y0, :])
    x0, x1, tx = _axis_coords(in_w, out_w)
    return rows[:, x0] + tx[None, :] * (rows[:, x1] - rows[:, x0])


def normalize_minmax(m: np.ndarray) -> np.ndarray:
    """(m - min) / (max - min); an all-equal map maps to all zeros."""
    arr = np.asarray(m, dtype=np.float64)
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def boxes_from_map(m: np.ndarray, gamma: float, mode: str = "largest_component") -> list[BBox]:
    """Tight boxes of the 4-connected components above the threshold.

    m should be normalized to [0, 1]; binarization is strict (> gamma).
    mode "largest_component" returns at most one box (largest pixel area,
    ties broken by first pixel in scan order); "all_components" returns one
    box per component in scan order. Empty foreground -> empty list.
    """
    if not 0.0 <= gamma < 1.0:
        raise ArgumentError(f"gamma must lie in [0, 1), got {gamma}")
    if mode not in _MODES:
        raise ArgumentError(f"mode must be one of {_MODES}, got {mode!r}")
    arr = np.asarray(m, dtype=np.float64)
    boxes, areas = component_stats(arr > gamma)
    if boxes.shape[0] == 0:
        return []
    if mode == "largest_component":
        best = int(np.argmax(areas))
        x0, y0, x1, y1 = boxes[best]
        return [BBox(int(x0), int(y0), int(x1), int(y1))]
    return [BBox(int(x0), int(y0), int(x1), int(y1)) for x0, y0, x1, y1 in boxes]


def gt_known(pred: BBox | None, gts, delta: float = 0.5) -> bool:
    """Localization hit: prediction exists and best IoU over ground truths >= delta."""
    gts = list(gts)
    if not gts:
        raise ArgumentError("gt_known needs at least one ground-truth box")
    if pred is None:
        return False
    return max(iou(pred, g) for g in gts) >= delta


def loc_acc_topk(
    logits: np.ndarray,
    label: int,
    pred: BBox | None,
    gts,
    k: int,
    delta: float = 0.5,
) -> bool:
    """Classification-aware hit: label in the top-k logits AND gt_known."""
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    scores = np.asarray(logits, dtype=np.float64)
    # stable sort so equal logits rank by ascending class index
    top = np.argsort(-scores, kind="stable")[:k]
    if label not in top:
        return False
    return gt_known(pred, gts, delta)


def _validate_gammas(gammas) -> tuple[float, ...]:
    grid = tuple(float(g) for g in gammas)
    if not grid:
        raise ArgumentError("gamma grid must be non-empty")
    for g in grid:
        if not 0.0 <= g < 1.0:
            raise ArgumentError(f"gamma must lie in [0, 1), got {g}")
    return grid


def _sweep_ious(maps, gts_list, gammas):
    """Per (image, gamma): IoU of the largest-component box and the best
    box-pair IoU over all components. Maps are normalized here."""
    n = len(maps)
    largest = np.zeros((n, len(gammas)))
    best_pair = np.zeros((n, len(gammas)))
    for i, (m, gts) in enumerate(zip(maps, gts_list)):
        norm = normalize_minmax(m)
        for j, gamma in enumerate(gammas):
            boxes, areas = component_stats(norm > gamma)
            if boxes.shape[0] == 0:
                continue
            cand = [BBox(int(a), int(b), int(c), int(d)) for a, b, c, d in boxes]
            pair_best = 0.0
            for box in cand:
                for gt in gts:
                    pair_best = max(pair_best, iou(box, gt))
            best_pair[i, j] = pair_best
            top = cand[int(np.argmax(areas))]
            largest[i, j] = max(iou(top, gt) for gt in gts)
    return largest, best_pair


def maxbox_acc_v1(maps, gts_list, gammas=DEFAULT_GAMMA_GRID) -> tuple[float, float]:
    """Best-threshold localization accuracy with a single largest-component box.

    For each gamma the dataset fraction with IoU >= 0.5 is computed; returns
    (max fraction over the grid, the gamma attaining it — earliest on ties).
    """
    grid = _validate_gammas(gammas)
    if len(maps) == 0:
        return 0.0, grid[0]
    largest, _ = _sweep_ious(maps, gts_list, grid)
    scores = (largest >= 0.5).mean(axis=0)
    j = int(np.argmax(scores))
    return float(scores[j]), grid[j]


def maxbox_acc_v2(
    maps, gts_list, gammas=DEFAULT_GAMMA_GRID, deltas=DEFAULT_DELTAS
) -> tuple[float, dict[float, float], dict[float, float]]:
    """Multi-threshold, multi-box variant.

    An image counts at (gamma, delta) iff the best IoU over all
    (component box, gt box) pairs is >= delta. Each delta takes its own best
    gamma; the headline score is the mean over deltas. Returns
    (score, {delta: fraction}, {delta: best_gamma}).
    """
    grid = _validate_gammas(gammas)
    deltas = tuple(float(d) for d in deltas)
    if not deltas:
        raise ArgumentError("deltas must be non-empty")
    if len(maps) == 0:
        return 0.0, {d: 0.0 for d in deltas}, {d: grid[0] for d in deltas}
    _, best_pair = _sweep_ious(maps, gts_list, grid)
    per_delta = {}
    per_gamma = {}
    for d in deltas:
        scores = (best_pair >= d).mean(axis=0)
        j = int(np.argmax(scores))
        per_delta[d] = float(scores[j])
        per_gamma[d] = grid[j]
    overall = sum(per_delta.values()) / len(deltas)
    return overall, per_delta, per_gamma


def predict_image(
    score_map: np.ndarray,
    sem_map: np.ndarray,
    gamma: float,
    out_h: int,
    out_w: int,
) -> tuple[BBox | None, np.ndarray]:
    """Full single-image prediction.

    Pool the semantic map into logits, pick the argmax class (ties -> lowest
    index), couple the attention map with that channel, upsample to the image
    size, min-max normalize, and box the largest component above gamma.
    Returns (box or None, logits).
    """
    logits = gap_logits(sem_map)
    cls = int(np.argmax(logits))
    coupled = couple_maps(score_map, sem_map, cls)
    heat = normalize_minmax(upsample_bilinear(coupled, out_h, out_w))
    boxes = boxes_from_map(heat, gamma, "largest_component")
    return (boxes[0] if boxes else None), logits


@dataclass(frozen=True)
class EvalReport:
    """Dataset-level evaluation summary.

    best_gamma holds the attaining threshold per swept metric: key
    "maxbox_v1" plus one "maxbox_v2@<delta>" per delta. fixed_gamma is the
    threshold used for the non-swept metrics (gt_known, top-1/top-5).
    """

    num_images: int
    fixed_gamma: float
    gt_known: float
    top1_loc: float
    top5_loc: float
    maxbox_v1: float
    maxbox_v2: float
    maxbox_v2_per_delta: dict[float, float]
    best_gamma: dict[str, float]

    def __post_init__(self):
        fractions = [
            self.gt_known,
            self.top1_loc,
            self.top5_loc,
            self.maxbox_v1,
            self.maxbox_v2,
            *self.maxbox_v2_per_delta.values(),
        ]
        for v in fractions:
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"fraction {v} outside [0, 1]")
        if self.maxbox_v2_per_delta:
            mean = sum(self.maxbox_v2_per_delta.values()) / len(self.maxbox_v2_per_delta)
            if abs(mean - self.maxbox_v2) > 1e-9:
                raise ValidationError("maxbox_v2 must equal the mean of its per-delta entries")


def evaluate_dataset(
    entries,
    gamma: float = 0.5,
    gammas=DEFAULT_GAMMA_GRID,
    deltas=DEFAULT_DELTAS,
) -> EvalReport:
    """Score a dataset.

    entries: iterable of (normalized upsampled map, logits, label, gt_boxes).
    gamma is the fixed threshold for gt_known / top-1 / top-5; gammas is the
    sweep grid for the max-box metrics.
    """
    entries = list(entries)
    grid = _validate_gammas(gammas)
    n = len(entries)
    if n == 0:
        zero_pd = {d: 0.0 for d in deltas}
        zero_bg = {"maxbox_v1": grid[0], **{f"maxbox_v2@{d}": grid[0] for d in deltas}}
        return EvalReport(0, gamma, 0.0, 0.0, 0.0, 0.0, 0.0, zero_pd, zero_bg)

    hits_gtk = hits_t1 = hits_t5 = 0
    for m, logits, label, gts in entries:
        boxes = boxes_from_map(m, gamma, "largest_component")
        pred = boxes[0] if boxes else None
        if gt_known(pred, gts):
            hits_gtk += 1
        if loc_acc_topk(logits, label, pred, gts, k=1):
            hits_t1 += 1
        if loc_acc_topk(logits, label, pred, gts, k=5):
            hits_t5 += 1

    maps = [e[0] for e in entries]
    gts_list = [e[3] for e in entries]
    v1, v1_gamma = maxbox_acc_v1(maps, gts_list, grid)
    v2, v2_per_delta, v2_gammas = maxbox_acc_v2(maps, gts_list, grid, deltas)
    best_gamma = {"maxbox_v1": v1_gamma}
    for d, g in v2_gammas.items():
        best_gamma[f"maxbox_v2@{d}"] = g
    return EvalReport(
        num_images=n,
        fixed_gamma=gamma,
        gt_known=hits_gtk / n,
        top1_loc=hits_t1 / n,
        top5_loc=hits_t5 / n,
        maxbox_v1=v1,
        maxbox_v2=v2,
        maxbox_v2_per_delta=v2_per_delta,
        best_gamma=best_gamma,
    )


def render_report(report: EvalReport) -> str:
    """Line-oriented text form; stable ordering and formatting.

    Sweep lines (maxbox_*) appear only when the sweep ran, i.e. when
    best_gamma carries their attaining thresholds."""
    lines = [
        f"images           {report.num_images}",
        f"fixed gamma      {report.fixed_gamma:.2f}",
        f"gt_known         {report.gt_known:.4f}",
        f"top1_loc         {report.top1_loc:.4f}",
        f"top5_loc         {report.top5_loc:.4f}",
    ]
    if "maxbox_v1" in report.best_gamma:
        lines.append(
            f"maxbox_v1        {report.maxbox_v1:.4f}  "
            f"(best gamma {report.best_gamma['maxbox_v1']:.2f})"
        )
    if report.maxbox_v2_per_delta:
        lines.append(f"maxbox_v2        {report.maxbox_v2:.4f}")
        for d in sorted(report.maxbox_v2_per_delta):
            g = report.best_gamma[f"maxbox_v2@{d}"]
            lines.append(
                f"maxbox_v2@{d:.1f}    {report.maxbox_v2_per_delta[d]:.4f}  (best gamma {g:.2f})"
            )
    return "\n".join(lines) + "\n"


def report_record(report: EvalReport) -> dict:
    """JSON-ready dict mirror of the report."""
    return {
        "num_images": report.num_images,
        "fixed_gamma": report.fixed_gamma,
        "gt_known": report.gt_known,
        "top1_loc": report.top1_loc,
        "top5_loc": report.top5_loc,
        "maxbox_v1": report.maxbox_v1,
        "maxbox_v2": report.maxbox_v2,
        "maxbox_v2_per_delta": {str(k): v for k, v in report.maxbox_v2_per_delta.items()},
        "best_gamma": report.best_gamma,
    }


def write_pgm(path, m: np.ndarray) -> None:
    """Export a normalized [0, 1] map as binary PGM (P5, maxval 255).

    Values are scaled by 255 and truncated toward zero.
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-d map, got {arr.shape}")
    pixels = (np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(pixels.tobytes())
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
