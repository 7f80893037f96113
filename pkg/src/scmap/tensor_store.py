"""Bit-exact binary tensor files plus line-delimited box annotations.

Tensor file layout (little-endian throughout):

    bytes 0..3   magic ``SCMT``
    byte  4      format version (0x01)
    byte  5      dtype code (0x00 = float32; the only code defined)
    byte  6      rank (1..4)
    then         rank * u32 dims, each >= 1
    then         prod(dims) float32 values, row-major

Header size is exactly ``7 + 4*rank`` bytes. Readers reject anything that
deviates: wrong magic, unknown version or dtype, rank outside 1..4, a zero
dim, or a payload whose byte length does not match the dims.

Annotations are one JSON object per line: ``image_id``, ``width``,
``height``, ``label``, ``boxes`` (list of [x0, y0, x1, y1] pixel quadruples,
half-open, x1 > x0, y1 > y0, inside the image).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParseError, StorageError, ValidationError
from .metrics import BBox

MAGIC = b"SCMT"
VERSION = 1
DTYPE_FLOAT32 = 0

_MAX_RANK = 4


@dataclass(frozen=True)
class Tensor:
    """A rank 1..4 float32 array with explicit dims.

    ``data`` is the flat row-major payload; use :meth:`to_array` for the
    shaped view.
    """

    dims: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        if not 1 <= len(self.dims) <= _MAX_RANK:
            raise ValidationError(f"rank must be 1..{_MAX_RANK}, got {len(self.dims)}")
        if any(d < 1 for d in self.dims):
            raise ValidationError(f"dims must be positive, got {self.dims}")
        if self.data.dtype != np.float32 or self.data.ndim != 1:
            raise ValidationError("data must be a flat float32 array")
        n = 1
        for d in self.dims:
            n *= d
        if self.data.size != n:
            raise ValidationError(
                f"dims {self.dims} imply {n} elements, data has {self.data.size}"
            )

    @property
    def rank(self) -> int:
        return len(self.dims)

    def to_array(self) -> np.ndarray:
        """Shaped row-major float32 view of the payload."""
        return self.data.reshape(self.dims)

    @classmethod
    def from_array(cls, arr) -> "Tensor":
        a = np.ascontiguousarray(arr, dtype=np.float32)
        return cls(dims=tuple(int(d) for d in a.shape), data=a.reshape(-1))


def write_tensor(path, tensor: Tensor) -> None:
    """Serialize ``tensor`` to ``path``. Same tensor -> same bytes."""
    header = MAGIC + struct.pack(
        f"<BBB{tensor.rank}I", VERSION, DTYPE_FLOAT32, tensor.rank, *tensor.dims
    )
    payload = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def read_tensor(path) -> Tensor:
    """Parse a tensor file, validating every header field and the payload size."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    return tensor_from_bytes(raw, name=str(path))


def tensor_from_bytes(raw: bytes, name: str = "<bytes>") -> Tensor:
    if len(raw) < 7:
        raise FormatError(f"{name}: {len(raw)} bytes is too short for a header")
    if raw[:4] != MAGIC:
        raise FormatError(f"{name}: bad magic {raw[:4]!r}")
    version, dtype_code, rank = raw[4], raw[5], raw[6]
    if version != VERSION:
        raise FormatError(f"{name}: unsupported version {version}")
    if dtype_code != DTYPE_FLOAT32:
        raise FormatError(f"{name}: unknown dtype code {dtype_code}")
    if not 1 <= rank <= _MAX_RANK:
        raise FormatError(f"{name}: rank {rank} outside 1..{_MAX_RANK}")
    header_end = 7 + 4 * rank
    if len(raw) < header_end:
        raise FormatError(f"{name}: truncated dim list")
    dims = struct.unpack(f"<{rank}I", raw[7:header_end])
    if any(d == 0 for d in dims):
        raise FormatError(f"{name}: zero dim in {dims}")
    count = 1
    for d in dims:
        count *= d
    expected = header_end + 4 * count
    if len(raw) != expected:
        raise FormatError(
            f"{name}: dims {dims} need {expected} bytes total, file has {len(raw)}"
        )
    data = np.frombuffer(raw[header_end:], dtype="<f4").astype(np.float32, copy=True)
    return Tensor(dims=tuple(int(d) for d in dims), data=data)


@dataclass(frozen=True)
class Annotation:
    """Ground truth for one image: pixel size, category, and >= 1 boxes."""

    image_id: str
    image_width: int
    image_height: int
    class_label: int
    gt_boxes: tuple[BBox, ...]

    def __post_init__(self):
        if self.image_width < 1 or self.image_height < 1:
            raise ValidationError(f"{self.image_id}: non-positive image size")
        if not self.gt_boxes:
            raise ValidationError(f"{self.image_id}: at least one box required")
        for b in self.gt_boxes:
            if b.x0 < 0 or b.y0 < 0 or b.x1 > self.image_width or b.y1 > self.image_height:
                raise ValidationError(
                    f"{self.image_id}: box {b.astuple()} outside "
                    f"{self.image_width}x{self.image_height} image"
                )


def read_annotations(path) -> list[Annotation]:
    """Read one JSON record per line. Empty file -> empty list.

    Raises ParseError (with the 1-based line number) for malformed lines and
    ValidationError for records that parse but violate box invariants.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
        try:
            image_id = rec["image_id"]
            width = int(rec["width"])
            height = int(rec["height"])
            label = int(rec["label"])
            raw_boxes = rec["boxes"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: line {lineno}: missing or malformed field ({exc})") from exc
        if not isinstance(raw_boxes, list) or not all(
            isinstance(q, (list, tuple)) and len(q) == 4 for q in raw_boxes
        ):
            raise ParseError(f"{path}: line {lineno}: boxes must be [x0,y0,x1,y1] quadruples")
        boxes = tuple(BBox(int(x0), int(y0), int(x1), int(y1)) for x0, y0, x1, y1 in raw_boxes)
        out.append(
            Annotation(
                image_id=str(image_id),
                image_width=width,
                image_height=height,
                class_label=label,
                gt_boxes=boxes,
            )
        )
    return out


def write_annotations(path, annotations) -> None:
    """Inverse of read_annotations; stable key order, one record per line."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for a in annotations:
                rec = {
                    "image_id": a.image_id,
                    "width": a.image_width,
                    "height": a.image_height,
                    "label": a.class_label,
                    "boxes": [list(b.astuple()) for b in a.gt_boxes],
                }
                fh.write(json.dumps(rec) + "\n")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
