"""Dense containers and the tensor container file format.

A video is handled as a Casorati matrix: each frame vectorized row-major
into a column, pixels down the rows, time across the columns. Everything
downstream (the solvers, the metrics, the CLI) assumes this convention.

File container: magic b"NDT1", u8 rank, rank little-endian u32 dims,
then prod(dims) little-endian f32 payload. No padding, no compression.
"""

import struct

import numpy as np

from .errors import FormatError, ShapeError

MAGIC = b"NDT1"

ROI_LABELS = ("ventricle", "septum", "other")

# refuse silly headers before allocating: 2^31 floats is already 8 GiB
_MAX_ELEMENTS = 2 ** 31


def _as_readonly(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class Frame:
    """A single vectorized frame with its spatial shape."""

    def __init__(self, values, height, width):
        values = _as_readonly(values)
        if values.ndim != 1:
            raise ShapeError("frame values must be a vector")
        if height <= 0 or width <= 0:
            raise ValueError("height and width must be positive")
        if values.size != height * width:
            raise ShapeError(
                f"frame length {values.size} != {height}x{width}")
        if not np.all(np.isfinite(values)):
            raise ValueError("frame contains non-finite entries")
        self.values = values
        self.height = int(height)
        self.width = int(width)

    def to_image(self):
        return self.values.reshape(self.height, self.width)

    def __eq__(self, other):
        return (isinstance(other, Frame)
                and self.height == other.height
                and self.width == other.width
                and np.array_equal(self.values, other.values))


class CasoratiMatrix:
    """n x p matrix of p vectorized frames, n = height * width."""

    def __init__(self, values, frame_height, frame_width):
        values = _as_readonly(values)
        if values.ndim != 2:
            raise ShapeError("Casorati values must be a matrix")
        if frame_height <= 0 or frame_width <= 0:
            raise ValueError("frame dimensions must be positive")
        n, p = values.shape
        if n != frame_height * frame_width:
            raise ShapeError(
                f"{n} rows but frames are {frame_height}x{frame_width}")
        if p < 1:
            raise ShapeError("need at least one frame")
        if not np.all(np.isfinite(values)):
            raise ValueError("matrix contains non-finite entries")
        self.values = values
        self.frame_height = int(frame_height)
        self.frame_width = int(frame_width)

    @property
    def num_pixels(self):
        return self.values.shape[0]

    @property
    def num_frames(self):
        return self.values.shape[1]


class RoiMask:
    """Boolean pixel mask naming a region of interest."""

    def __init__(self, mask, label):
        mask = np.ascontiguousarray(mask, dtype=bool)
        mask.setflags(write=False)
        if mask.ndim != 1:
            raise ShapeError("mask must be a vector")
        if label not in ROI_LABELS:
            raise ValueError(f"label must be one of {ROI_LABELS}")
        if not mask.any():
            raise ValueError("mask selects no pixels")
        self.mask = mask
        self.label = label


def stack_frames(frames):
    """Stack a sequence of frames into a Casorati matrix, column t = frame t."""
    frames = list(frames)
    if not frames:
        raise ShapeError("empty frame sequence")
    h, w = frames[0].height, frames[0].width
    for i, f in enumerate(frames):
        if (f.height, f.width) != (h, w):
            raise ShapeError(f"frame {i} is {f.height}x{f.width}, expected {h}x{w}")
    m = np.column_stack([f.values for f in frames])
    return CasoratiMatrix(m, h, w)


def unstack_frames(m):
    """Split a Casorati matrix back into its frames. Inverse of stack_frames."""
    return [Frame(m.values[:, t], m.frame_height, m.frame_width)
            for t in range(m.num_frames)]


def write_tensor(path, data):
    """Write a Frame (rank 2) or CasoratiMatrix (rank 3: frames, h, w).

    Payload is cast to little-endian f32; values already representable in
    f32 round-trip bit-exactly.
    """
    if isinstance(data, CasoratiMatrix):
        dims = (data.num_frames, data.frame_height, data.frame_width)
        # column t of the Casorati matrix is frame t, stored consecutively
        payload = np.ascontiguousarray(data.values.T, dtype="<f4")
    elif isinstance(data, Frame):
        dims = (data.height, data.width)
        payload = np.ascontiguousarray(data.values, dtype="<f4")
    elif isinstance(data, RoiMask):
        dims = (data.mask.size,)
        payload = np.ascontiguousarray(data.mask, dtype="<f4")
    else:
        raise TypeError(f"cannot serialize {type(data).__name__}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(payload.tobytes())


def read_tensor(path):
    """Read a tensor container file.

    rank 3 -> CasoratiMatrix (dims are frames, height, width), rank 2 ->
    Frame, rank 1 -> Frame with width 1. Raises FormatError with the byte
    offset at which parsing failed.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}",
                          byte_offset=0)
    if len(blob) < 5:
        raise FormatError("truncated header: no rank byte", byte_offset=4)
    rank = blob[4]
    off = 5
    if rank < 1 or rank > 3:
        raise FormatError(f"unsupported rank {rank}", byte_offset=4)
    need = 4 * rank
    if len(blob) < off + need:
        raise FormatError("truncated header: missing dims", byte_offset=off)
    dims = struct.unpack(f"<{rank}I", blob[off:off + need])
    off += need
    count = 1
    for d in dims:
        if d == 0:
            raise FormatError(f"zero dimension in {dims}", byte_offset=5)
        count *= d
    if count > _MAX_ELEMENTS:
        raise FormatError(f"dims {dims} overflow element budget",
                          byte_offset=5)
    expected = 4 * count
    actual = len(blob) - off
    if actual != expected:
        raise FormatError(
            f"payload is {actual} bytes, expected {expected}",
            byte_offset=off)
    flat = np.frombuffer(blob, dtype="<f4", offset=off, count=count)
    flat = flat.astype(np.float64)
    if rank == 3:
        p, h, w = dims
        return CasoratiMatrix(flat.reshape(p, h * w).T, h, w)
    if rank == 2:
        h, w = dims
        return Frame(flat, h, w)
    return Frame(flat, dims[0], 1)


def read_mask(path, label="other"):
    """Read a tensor file as a boolean RoiMask (nonzero -> True)."""
    f = read_tensor(path)
    if isinstance(f, CasoratiMatrix):
        raise FormatError("mask file must be rank 1 or 2")
    return RoiMask(f.values != 0.0, label)
