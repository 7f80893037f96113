"""Command-line entry point: reproducible calibration, prediction, and
evaluation runs plus the validation subcommands (simulate, gradcheck, synth,
heatmap).

Configuration precedence is flag > config file > built-in default. The
config file is flat ``key = value`` text; keys are the long flag names
(dashes or underscores both accepted). Every subcommand is deterministic
given its inputs: ids are processed in sorted order, manifests carry no
timestamps, and worker pools only parallelize per-image math while a single
collector writes outputs in order.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import flow_oracle, metrics, sensitivity, synth
from .backbone_adapter import (
    SemanticHead,
    apply_semantic_head,
    assemble_attention,
    load_head,
    load_stack,
    load_tokens,
)
from .diffusion import (
    DiffusionParams,
    build_laplacian,
    gap_logits,
    semantic_similarity,
    stack_forward,
)
from .errors import ParseError, ScmapError, ValidationError
from .metrics import BBox
from .patch_graph import build_grid_graph
from .tensor_store import Tensor, read_annotations, read_tensor, write_tensor

_METRICS = ("gtk", "loc", "v1", "v2")


@dataclass
class RunConfig:
    tensors: str | None = None
    annotations: str | None = None
    predictions: str | None = None
    out: str | None = None
    grid: tuple[int, int] = (14, 14)
    image_size: tuple[int, int] = (224, 224)
    layers: int = 4
    lam: tuple[float, ...] = (1.0,)
    beta: tuple[float, ...] = (0.5,)
    alpha: float = 0.002
    iters: int = 4
    sign: str = "main"
    residual_f: bool = True
    residual_s: bool = True
    filter_input: str = "diffused"
    gamma: float = 0.5
    gamma_grid: tuple[float, ...] = metrics.DEFAULT_GAMMA_GRID
    metric: tuple[str, ...] = _METRICS
    seed: int = 0
    jobs: int = 1
    images: int = 10
    classes: int = 8
    attn_layers: int = 2
    heatmap: bool = False
    sweep: bool = False
    dt: float | None = None
    steps: int = 4000
    shift: float | None = None
    h: float = 1e-5
    tol: float = 1e-4
    explicit: frozenset = frozenset()  # field names set via flag or config file

    def diffusion_params(self) -> DiffusionParams:
        lam = self.lam if len(self.lam) > 1 else self.lam * max(self.layers, 1)
        beta = self.beta if len(self.beta) > 1 else self.beta * max(self.layers, 1)
        return DiffusionParams(
            num_layers=self.layers,
            lam=lam,
            beta=beta,
            alpha=self.alpha,
            iterations=self.iters,
            laplacian_sign=self.sign,
            residual_attn=self.residual_f,
            residual_sem=self.residual_s,
            filter_input=self.filter_input,
        )


def _parse_bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "on", "yes"):
        return True
    if v in ("0", "false", "off", "no"):
        return False
    raise ParseError(f"expected on/off, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.replace(",", " ").split())
    except ValueError as exc:
        raise ParseError(f"bad number list {text!r}") from exc


def _parse_gamma_grid(text: str) -> tuple[float, ...]:
    """Either 'start:stop:step' (inclusive endpoints, rounded to 1e-2) or a
    comma/space separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ParseError(f"gamma grid range must be start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as exc:
            raise ParseError(f"bad gamma grid {text!r}") from exc
        if step <= 0:
            raise ParseError("gamma grid step must be positive")
        count = int(round((stop - start) / step)) + 1
        return tuple(round(start + i * step, 10) for i in range(count))
    return _parse_floats(text)


def _parse_int_pair(text: str) -> tuple[int, int]:
    toks = text.replace("x", " ").replace(",", " ").split()
    if len(toks) != 2:
        raise ParseError(f"expected two integers, got {text!r}")
    return int(toks[0]), int(toks[1])


def read_config_file(path) -> dict[str, str]:
    """Flat key = value lines; '#' starts a comment; keys normalized to
    underscores."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}: line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


_FIELD_PARSERS = {
    "tensors": str,
    "annotations": str,
    "predictions": str,
    "out": str,
    "grid": _parse_int_pair,
    "image_size": _parse_int_pair,
    "layers": int,
    "lam": _parse_floats,
    "beta": _parse_floats,
    "alpha": float,
    "iters": int,
    "sign": str,
    "residual_f": _parse_bool,
    "residual_s": _parse_bool,
    "filter_input": str,
    "gamma": float,
    "gamma_grid": _parse_gamma_grid,
    "metric": lambda s: tuple(s.replace(",", " ").split()),
    "seed": int,
    "jobs": int,
    "images": int,
    "classes": int,
    "attn_layers": int,
    "heatmap": _parse_bool,
    "sweep": _parse_bool,
    "dt": float,
    "steps": int,
    "shift": float,
    "h": float,
    "tol": float,
}

# config-file key -> RunConfig field when the flag name differs
_KEY_ALIASES = {"lambda": "lam"}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags over config-file entries over defaults."""
    cfg = RunConfig()
    file_values = {}
    if getattr(args, "config", None):
        raw = read_config_file(args.config)
        for key, value in raw.items():
            field = _KEY_ALIASES.get(key, key)
            if field not in _FIELD_PARSERS:
                raise ParseError(f"unknown config key {key!r}")
            file_values[field] = _FIELD_PARSERS[field](value)
    explicit = set()
    for field, parser in _FIELD_PARSERS.items():
        flag_value = getattr(args, field, None)
        if flag_value is not None:
            value = parser(flag_value) if isinstance(flag_value, str) and parser is not str else flag_value
            setattr(cfg, field, value)
            explicit.add(field)
        elif field in file_values:
            setattr(cfg, field, file_values[field])
            explicit.add(field)
    cfg.explicit = frozenset(explicit)
    for m in cfg.metric:
        if m not in _METRICS:
            raise ParseError(f"unknown metric {m!r} (choose from {_METRICS})")
    return cfg


def _image_ids(tensor_dir: str, suffix: str) -> list[str]:
    pattern = os.path.join(glob.escape(tensor_dir), f"*.{suffix}")
    return sorted(os.path.basename(p)[: -len(suffix) - 1] for p in glob.glob(pattern))


def _load_base_maps(tensor_dir: str, image_id: str, grid, head: SemanticHead | None):
    """Base (attention, semantic) grids for one image, from either a raw
    backbone export or a previously written calibration trace."""
    raw_path = os.path.join(tensor_dir, f"{image_id}.attn.scmt")
    if os.path.exists(raw_path):
        if head is None:
            raise ValidationError(f"{tensor_dir}: head.kernel.scmt required for raw exports")
        stack = load_stack(tensor_dir, image_id, grid)
        tokens = load_tokens(tensor_dir, image_id, grid)
        return assemble_attention(stack), apply_semantic_head(tokens, head)
    attn = read_tensor(os.path.join(tensor_dir, f"{image_id}.attn.0.scmt")).to_array()
    sem = read_tensor(os.path.join(tensor_dir, f"{image_id}.sem.0.scmt")).to_array()
    return np.asarray(attn, dtype=np.float64), np.asarray(sem, dtype=np.float64)


def _discover_ids(tensor_dir: str) -> list[str]:
    ids = _image_ids(tensor_dir, "attn.scmt")
    if ids:
        return ids
    return _image_ids(tensor_dir, "attn.0.scmt")


def _maybe_head(tensor_dir: str) -> SemanticHead | None:
    if os.path.exists(os.path.join(tensor_dir, "head.kernel.scmt")):
        return load_head(tensor_dir)
    return None


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValidationError(message)


def cmd_calibrate(cfg: RunConfig) -> int:
    _require(cfg.tensors is not None, "calibrate needs --tensors")
    _require(cfg.out is not None, "calibrate needs --out")
    _require(os.path.isdir(cfg.tensors), f"tensor dir not found: {cfg.tensors}")
    params = cfg.diffusion_params()
    graph = build_grid_graph(*cfg.grid)
    ids = _discover_ids(cfg.tensors)
    _require(bool(ids), f"no input tensors in {cfg.tensors}")
    head = _maybe_head(cfg.tensors)
    os.makedirs(cfg.out, exist_ok=True)

    def run_one(image_id: str):
        attn0, sem0 = _load_base_maps(cfg.tensors, image_id, cfg.grid, head)
        return stack_forward(attn0, sem0, params, graph)

    with ThreadPoolExecutor(max_workers=max(cfg.jobs, 1)) as pool:
        traces = list(pool.map(run_one, ids))

    manifest_path = os.path.join(cfg.out, "manifest.jsonl")
    with open(manifest_path, "w", encoding="utf-8") as mf:
        mf.write(
            json.dumps(
                {
                    "kind": "run",
                    "grid": list(cfg.grid),
                    "layers": params.num_layers,
                    "lambda": list(params.lam[: params.num_layers]),
                    "beta": list(params.beta[: params.num_layers]),
                    "alpha": params.alpha,
                    "iterations": params.iterations,
                    "sign": params.laplacian_sign,
                    "residual_f": params.residual_attn,
                    "residual_s": params.residual_sem,
                    "filter_input": params.filter_input,
                }
            )
            + "\n"
        )
        for image_id, trace in zip(ids, traces):
            attn_files, sem_files = [], []
            for level, (attn, sem) in enumerate(trace):
                attn_name = f"{image_id}.attn.{level}.scmt"
                sem_name = f"{image_id}.sem.{level}.scmt"
                write_tensor(os.path.join(cfg.out, attn_name), Tensor.from_array(attn))
                write_tensor(os.path.join(cfg.out, sem_name), Tensor.from_array(sem))
                attn_files.append(attn_name)
                sem_files.append(sem_name)
            mf.write(
                json.dumps({"kind": "image", "image_id": image_id, "attn": attn_files, "sem": sem_files})
                + "\n"
            )
    print(f"calibrated {len(ids)} images -> {cfg.out}")
    return 0


def _annotation_index(cfg: RunConfig):
    if cfg.annotations is None:
        return None
    _require(os.path.exists(cfg.annotations), f"annotation file not found: {cfg.annotations}")
    return {a.image_id: a for a in read_annotations(cfg.annotations)}


def _predict_one(cfg: RunConfig, image_id: str, head, ann_by_id):
    attn0, sem0 = _load_base_maps(cfg.tensors, image_id, cfg.grid, head)
    if ann_by_id is not None and image_id in ann_by_id:
        ann = ann_by_id[image_id]
        out_h, out_w = ann.image_height, ann.image_width
    else:
        out_h, out_w = cfg.image_size
    box, logits = metrics.predict_image(attn0, sem0, cfg.gamma, out_h, out_w)
    cls = int(np.argmax(logits))
    heat = None
    if cfg.heatmap:
        coupled = metrics.couple_maps(attn0, sem0, cls)
        heat = metrics.normalize_minmax(metrics.upsample_bilinear(coupled, out_h, out_w))
    return box, cls, logits, heat


def cmd_predict(cfg: RunConfig) -> int:
    _require(cfg.tensors is not None, "predict needs --tensors")
    _require(cfg.out is not None, "predict needs --out")
    _require(os.path.isdir(cfg.tensors), f"tensor dir not found: {cfg.tensors}")
    ids = _discover_ids(cfg.tensors)
    head = _maybe_head(cfg.tensors)
    ann_by_id = _annotation_index(cfg)
    os.makedirs(cfg.out, exist_ok=True)

    with ThreadPoolExecutor(max_workers=max(cfg.jobs, 1)) as pool:
        results = list(pool.map(lambda i: _predict_one(cfg, i, head, ann_by_id), ids))

    boxes_path = os.path.join(cfg.out, "boxes.jsonl")
    with open(boxes_path, "w", encoding="utf-8") as fh:
        for image_id, (box, cls, logits, heat) in zip(ids, results):
            fh.write(
                json.dumps(
                    {
                        "image_id": image_id,
                        "box": list(box.astuple()) if box is not None else None,
                        "class": cls,
                        "gamma": cfg.gamma,
                        "logits": [float(v) for v in logits],
                    }
                )
                + "\n"
            )
            if heat is not None:
                metrics.write_pgm(os.path.join(cfg.out, f"{image_id}.pgm"), heat)
    print(f"predicted {len(ids)} images -> {boxes_path}")
    return 0


def _read_predictions(path):
    preds = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    box = rec["box"]
                    preds[rec["image_id"]] = (
                        BBox(*box) if box is not None else None,
                        np.asarray(rec["logits"], dtype=np.float64),
                    )
                except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                    raise ParseError(f"{path}: line {lineno}: bad prediction record ({exc})") from exc
    except OSError as exc:
        raise ParseError(f"cannot read predictions {path}: {exc}") from exc
    return preds


def cmd_eval(cfg: RunConfig) -> int:
    _require(cfg.annotations is not None, "eval needs --annotations")
    _require(
        cfg.tensors is not None or cfg.predictions is not None,
        "eval needs --tensors and/or --predictions",
    )
    annotations = read_annotations(cfg.annotations)
    ann_ids = [a.image_id for a in annotations]

    want = set(cfg.metric)
    if cfg.tensors is None and (want & {"v1", "v2"}) and "metric" in cfg.explicit:
        raise ValidationError("metrics v1/v2 need --tensors (score maps), not just predictions")
    if cfg.tensors is None:
        want &= {"gtk", "loc"}

    entries = None
    if cfg.tensors is not None:
        _require(os.path.isdir(cfg.tensors), f"tensor dir not found: {cfg.tensors}")
        ids = _discover_ids(cfg.tensors)
        missing = sorted(set(ann_ids) - set(ids))
        extra = sorted(set(ids) - set(ann_ids))
        if missing or extra:
            raise ValidationError(
                "annotation/tensor id mismatch; "
                f"missing tensors: {missing or 'none'}; unannotated tensors: {extra or 'none'}"
            )
        head = _maybe_head(cfg.tensors)
        ann_by_id = {a.image_id: a for a in annotations}

        def entry(image_id):
            attn0, sem0 = _load_base_maps(cfg.tensors, image_id, cfg.grid, head)
            ann = ann_by_id[image_id]
            logits = gap_logits(sem0)
            coupled = metrics.couple_maps(attn0, sem0, int(np.argmax(logits)))
            heat = metrics.normalize_minmax(
                metrics.upsample_bilinear(coupled, ann.image_height, ann.image_width)
            )
            return heat, logits, ann.class_label, list(ann.gt_boxes)

        with ThreadPoolExecutor(max_workers=max(cfg.jobs, 1)) as pool:
            entries = list(pool.map(entry, ann_ids))
        report = metrics.evaluate_dataset(entries, cfg.gamma, cfg.gamma_grid)
    else:
        preds = _read_predictions(cfg.predictions)
        missing = sorted(set(ann_ids) - set(preds))
        if missing:
            raise ValidationError(f"predictions missing for ids: {missing}")
        hits_gtk = hits_t1 = hits_t5 = 0
        for ann in annotations:
            box, logits = preds[ann.image_id]
            gts = list(ann.gt_boxes)
            if metrics.gt_known(box, gts):
                hits_gtk += 1
            if metrics.loc_acc_topk(logits, ann.class_label, box, gts, k=1):
                hits_t1 += 1
            if metrics.loc_acc_topk(logits, ann.class_label, box, gts, k=5):
                hits_t5 += 1
        n = len(annotations)
        report = metrics.EvalReport(
            num_images=n,
            fixed_gamma=cfg.gamma,
            gt_known=hits_gtk / n if n else 0.0,
            top1_loc=hits_t1 / n if n else 0.0,
            top5_loc=hits_t5 / n if n else 0.0,
            maxbox_v1=0.0,
            maxbox_v2=0.0,
            maxbox_v2_per_delta={},
            best_gamma={},
        )

    text = metrics.render_report(report)
    selected = _filter_report_lines(text, want)
    print(selected, end="")

    if cfg.sweep and entries is not None:
        print("per-gamma sweep (v1 fraction / v2 fraction per delta):")
        maps = [e[0] for e in entries]
        gts_list = [e[3] for e in entries]
        for g in cfg.gamma_grid:
            v1_hits = 0
            pair_best = []
            for m, gts in zip(maps, gts_list):
                boxes = metrics.boxes_from_map(m, g, "largest_component")
                if boxes and metrics.gt_known(boxes[0], gts):
                    v1_hits += 1
                all_boxes = metrics.boxes_from_map(m, g, "all_components")
                best = 0.0
                for b in all_boxes:
                    for gt in gts:
                        best = max(best, metrics.iou(b, gt))
                pair_best.append(best)
            per_delta = " ".join(
                f"{d:.1f}:{np.mean([1.0 if p >= d else 0.0 for p in pair_best]):.3f}"
                for d in metrics.DEFAULT_DELTAS
            )
            print(f"  gamma {g:.2f}  v1 {v1_hits / len(maps):.3f}  v2 {per_delta}")

    if cfg.out is not None:
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "report.txt"), "w", encoding="utf-8") as fh:
            fh.write(text)
        with open(os.path.join(cfg.out, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(metrics.report_record(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


_REPORT_KEYS = {
    "gtk": ("gt_known",),
    "loc": ("top1_loc", "top5_loc"),
    "v1": ("maxbox_v1",),
    "v2": ("maxbox_v2",),
}


def _filter_report_lines(text: str, want) -> str:
    keep_prefixes = ["images", "fixed gamma"]
    for m in want:
        keep_prefixes.extend(_REPORT_KEYS[m])
    out = [line for line in text.splitlines() if any(line.startswith(p) for p in keep_prefixes)]
    return "\n".join(out) + "\n"


def cmd_simulate(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    gh, gw = cfg.grid
    graph = build_grid_graph(gh, gw)
    n = graph.num_nodes
    sem = 0.2 + rng.random((gh, gw, 4))
    sim = semantic_similarity(sem)
    lam = cfg.lam[0]
    coupling = build_laplacian(graph, sim, lam, cfg.sign)
    if cfg.shift is not None:
        shift = cfg.shift
    else:
        # Gershgorin: rows of (coupling - shift I) then sit strictly in the
        # left half plane, making the flow stable and the matrix invertible
        shift = 1.05 * np.abs(coupling).sum(axis=1).max()
    lap = coupling - shift * np.eye(n)
    source = 0.1 + rng.random((gh, gw))

    norm_inf = np.abs(lap).sum(axis=1).max()
    dt = cfg.dt if cfg.dt is not None else 0.1 / norm_inf
    every = max(cfg.steps // 10, 1)
    print(f"grid {gh}x{gw}  lambda {lam}  sign {cfg.sign}  shift {shift:.6f}  dt {dt:.6f}")
    print(f"{'step':>6} {'t':>10} {'||i||':>12} {'residual':>12}")

    def report(step, t, state, residual):
        if step % every == 0 or step == cfg.steps:
            print(f"{step:>6} {t:>10.4f} {np.abs(state).max():>12.6f} {residual:>12.3e}")

    final = flow_oracle.simulate_flow(lap, source, dt, cfg.steps, callback=report)
    reference = -flow_oracle.exact_solve(lap, source)
    scale = np.abs(reference).max()
    rel = np.abs(final.values - reference).max() / (scale if scale > 0 else 1.0)
    if rel <= 1e-3:
        print(f"converged: max rel err {rel:.3e} against the direct solve")
        return 0
    print(f"not converged: max rel err {rel:.3e} after {cfg.steps} steps")
    return 1


def cmd_gradcheck(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    gh, gw = cfg.grid
    graph = build_grid_graph(gh, gw)
    attn0 = rng.random((gh, gw))
    sem0 = 0.1 + rng.random((gh, gw, cfg.classes))
    lam = tuple(0.8 + 0.4 * rng.random(cfg.layers))
    beta = tuple(0.3 + 0.4 * rng.random(cfg.layers))
    params = DiffusionParams(
        num_layers=cfg.layers,
        lam=lam,
        beta=beta,
        alpha=cfg.alpha,
        iterations=cfg.iters,
        laplacian_sign=cfg.sign,
        residual_attn=cfg.residual_f,
        residual_sem=cfg.residual_s,
        filter_input=cfg.filter_input,
    )
    rows = sensitivity.gradcheck(attn0, sem0, params, graph, h=cfg.h, tol=cfg.tol)
    print(f"{'parameter':<12} {'dual':>14} {'fd':>14} {'rel err':>10}  status")
    ok = True
    for name, dual, fd, rel, passed in rows:
        ok &= passed
        print(f"{name:<12} {dual:>14.8f} {fd:>14.8f} {rel:>10.2e}  {'pass' if passed else 'FAIL'}")
    return 0 if ok else 1


def cmd_synth(cfg: RunConfig) -> int:
    _require(cfg.out is not None, "synth needs --out")
    ids = synth.write_dataset(
        cfg.out,
        count=cfg.images,
        seed=cfg.seed,
        grid=cfg.grid,
        image_size=cfg.image_size,
        classes=cfg.classes,
        attn_layers=cfg.attn_layers,
    )
    print(f"wrote {len(ids)} synthetic fixtures -> {cfg.out}")
    return 0


def cmd_heatmap(cfg: RunConfig) -> int:
    _require(cfg.tensors is not None, "heatmap needs --tensors")
    _require(cfg.out is not None, "heatmap needs --out")
    _require(os.path.isdir(cfg.tensors), f"tensor dir not found: {cfg.tensors}")
    ids = _discover_ids(cfg.tensors)
    head = _maybe_head(cfg.tensors)
    ann_by_id = _annotation_index(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    for image_id in ids:
        attn0, sem0 = _load_base_maps(cfg.tensors, image_id, cfg.grid, head)
        if ann_by_id is not None and image_id in ann_by_id:
            out_h = ann_by_id[image_id].image_height
            out_w = ann_by_id[image_id].image_width
        else:
            out_h, out_w = cfg.image_size
        logits = gap_logits(sem0)
        coupled = metrics.couple_maps(attn0, sem0, int(np.argmax(logits)))
        heat = metrics.normalize_minmax(metrics.upsample_bilinear(coupled, out_h, out_w))
        metrics.write_pgm(os.path.join(cfg.out, f"{image_id}.pgm"), heat)
    print(f"wrote {len(ids)} heatmaps -> {cfg.out}")
    return 0


_COMMANDS = {
    "calibrate": cmd_calibrate,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
    "gradcheck": cmd_gradcheck,
    "synth": cmd_synth,
    "heatmap": cmd_heatmap,
}


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--tensors", help="input tensor directory")
    sub.add_argument("--annotations", help="annotations .jsonl file")
    sub.add_argument("--predictions", help="boxes .jsonl from predict")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--grid", help="patch grid, e.g. '14 14'")
    sub.add_argument("--image-size", dest="image_size", help="pixel size, e.g. '224 224'")
    sub.add_argument("--layers", type=int, help="number of calibration layers")
    sub.add_argument("--lambda", dest="lam", help="per-layer lambda list or one value")
    sub.add_argument("--beta", help="per-layer beta list or one value")
    sub.add_argument("--alpha", type=float, help="inverse-iteration scale")
    sub.add_argument("--iters", type=int, help="inverse-iteration count")
    sub.add_argument("--sign", choices=["main", "appendix"], help="laplacian coupling sign")
    sub.add_argument("--residual-f", dest="residual_f", help="attention residual: on/off")
    sub.add_argument("--residual-s", dest="residual_s", help="semantic residual: on/off")
    sub.add_argument(
        "--filter-input",
        dest="filter_input",
        choices=["diffused", "raw"],
        help="apply the soft shrink to the diffused or the raw map",
    )
    sub.add_argument("--gamma", type=float, help="fixed box threshold")
    sub.add_argument("--gamma-grid", dest="gamma_grid", help="'start:stop:step' or list")
    sub.add_argument("--metric", help=f"subset of {','.join(_METRICS)}")
    sub.add_argument("--seed", type=int, help="seed for synthetic generation")
    sub.add_argument("--jobs", type=int, help="worker threads for per-image math")
    sub.add_argument("--images", type=int, help="synthetic image count")
    sub.add_argument("--classes", type=int, help="semantic channel count")
    sub.add_argument("--attn-layers", dest="attn_layers", type=int, help="synthetic attention layers")
    sub.add_argument("--heatmap", nargs="?", const="on", help="write PGM heatmaps (on/off)")
    sub.add_argument("--sweep", nargs="?", const="on", help="print the per-gamma table (on/off)")
    sub.add_argument("--dt", type=float, help="integration step (default 0.1/||L||)")
    sub.add_argument("--steps", type=int, help="integration step count")
    sub.add_argument("--shift", type=float, help="diagonal stabilizing shift (default auto)")
    sub.add_argument("--h", type=float, help="finite-difference step")
    sub.add_argument("--tol", type=float, help="gradcheck relative tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scmap",
        description="Activation-map calibration, box prediction, and localization metrics.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        _add_common_flags(subs.add_parser(name))
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](cfg)
    except ScmapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
