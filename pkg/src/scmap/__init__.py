"""scmap: activation-map calibration on patch grids, box prediction, and
weakly supervised localization metrics, with built-in numerical oracles."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .backbone_adapter import (
    AttentionStack,
    SemanticHead,
    TokenGrid,
    apply_semantic_head,
    assemble_attention,
)
from .diffusion import (
    DiffusionParams,
    block_forward,
    build_laplacian,
    diffuse,
    dynamic_filter,
    gap_logits,
    newton_schulz,
    semantic_similarity,
    stack_forward,
)
from .errors import (
    ArgumentError,
    ConvergenceError,
    FormatError,
    InstabilityError,
    NumericError,
    ParseError,
    ScmapError,
    ShapeError,
    SingularMatrixError,
    StorageError,
    ValidationError,
)
from .flow_oracle import FlowState, converged_ns_inverse, exact_solve, simulate_flow
from .metrics import (
    BBox,
    EvalReport,
    boxes_from_map,
    couple_maps,
    evaluate_dataset,
    gt_known,
    iou,
    loc_acc_topk,
    maxbox_acc_v1,
    maxbox_acc_v2,
    normalize_minmax,
    predict_image,
    upsample_bilinear,
    write_pgm,
)
from .patch_graph import PatchGraph, build_grid_graph, flatten, unflatten
from .sensitivity import Dual, dual_sensitivity, finite_difference, scalar_output
from .tensor_store import (
    Annotation,
    Tensor,
    read_annotations,
    read_tensor,
    write_annotations,
    write_tensor,
)

__version__ = "0.1.0"
