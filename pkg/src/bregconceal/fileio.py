"""Readers and writers: PGM frames, raw 4:2:0 luma, loss masks, CSV reports."""

import csv
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .concealment import LossMask
from .exceptions import (
    DomainError,
    FormatError,
    FrameIndexError,
    MalformedHeaderError,
    TruncatedDataError,
)

REPORT_HEADER = ("frame", "method", "psnr_db", "lost_mbs", "outer_iters", "final_q")

_PGM_HEADER = re.compile(rb"P5(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)(?:\s|#[^\n]*\n)+(\d+)\s")


def quantize(frame):
    """Clamp to [0, 255] and round half away from zero to ``uint8``."""
    arr = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 255.0)
    return np.floor(arr + 0.5).astype(np.uint8)


def read_pgm(path):
    """Read a binary (P5) PGM with maxval 255 as a float frame."""
    raw = Path(path).read_bytes()
    m = _PGM_HEADER.match(raw)
    if m is None:
        raise MalformedHeaderError(f"{path}: not a binary P5 PGM")
    width, height, maxval = (int(g) for g in m.groups())
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise MalformedHeaderError(f"{path}: maxval {maxval} unsupported (need 255)")
    body = raw[m.end():]
    if len(body) < width * height:
        raise TruncatedDataError(f"{path}: expected {width * height} bytes, got {len(body)}")
    data = np.frombuffer(body, dtype=np.uint8, count=width * height)
    return data.reshape(height, width).astype(np.float64)


def write_pgm(frame, path):
    q = quantize(frame)
    if q.ndim != 2:
        raise DomainError("write_pgm expects a 2-D frame")
    height, width = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def yuv420_frame_bytes(width, height):
    chroma = ((width + 1) // 2) * ((height + 1) // 2)
    return width * height + 2 * chroma


def count_yuv420_frames(path, width, height):
    size = os.path.getsize(path)
    frame_bytes = yuv420_frame_bytes(width, height)
    if size % frame_bytes:
        raise TruncatedDataError(
            f"{path}: size {size} is not a multiple of the {frame_bytes}-byte frame"
        )
    return size // frame_bytes


def read_yuv420_luma(path, width, height, frame_index):
    """Luma plane of frame ``frame_index`` in a planar 4:2:0 file."""
    if width < 1 or height < 1:
        raise DomainError(f"invalid dimensions {width}x{height}")
    frame_bytes = yuv420_frame_bytes(width, height)
    size = os.path.getsize(path)
    offset = frame_index * frame_bytes
    if frame_index < 0 or offset >= size:
        raise FrameIndexError(
            f"{path}: frame {frame_index} out of range ({size // frame_bytes} frames)"
        )
    if offset + frame_bytes > size:
        raise TruncatedDataError(f"{path}: frame {frame_index} is incomplete")
    with open(path, "rb") as fh:
        fh.seek(offset)
        luma = fh.read(width * height)
    return np.frombuffer(luma, dtype=np.uint8).reshape(height, width).astype(np.float64)


def write_yuv420(frames, path):
    """Write luma frames as planar 4:2:0 with neutral (128) chroma."""
    with open(path, "wb") as fh:
        for frame in frames:
            q = quantize(frame)
            height, width = q.shape
            fh.write(q.tobytes())
            chroma = ((width + 1) // 2) * ((height + 1) // 2)
            fh.write(bytes([128]) * (2 * chroma))


@dataclass(frozen=True)
class SequenceSource:
    """Where input frames come from.

    ``format`` is ``"pgm-directory"`` (sorted ``*.pgm`` files) or
    ``"raw-yuv420"`` (``width``/``height`` required).
    """

    path: str
    format: str = "pgm-directory"
    width: int = None
    height: int = None
    frame_count: int = None

    @classmethod
    def from_path(cls, path, raw_size=None, frame_count=None):
        if raw_size is not None:
            width, height = raw_size
            return cls(str(path), "raw-yuv420", width, height, frame_count)
        return cls(str(path), "pgm-directory", frame_count=frame_count)

    def pgm_files(self):
        return sorted(Path(self.path).glob("*.pgm"))

    def __len__(self):
        if self.format == "raw-yuv420":
            total = count_yuv420_frames(self.path, self.width, self.height)
        else:
            total = len(self.pgm_files())
        if self.frame_count is None:
            return total
        if self.frame_count > total:
            raise FrameIndexError(f"{self.path}: requested {self.frame_count} frames, found {total}")
        return self.frame_count

    def read(self):
        """Load all frames; PGM frames must share one resolution."""
        if not Path(self.path).exists():
            raise FileNotFoundError(f"{self.path}: no such file or directory")
        n = len(self)
        if self.format == "raw-yuv420":
            return [read_yuv420_luma(self.path, self.width, self.height, k) for k in range(n)]
        if self.format != "pgm-directory":
            raise DomainError(f"unknown sequence format {self.format!r}")
        frames = [read_pgm(p) for p in self.pgm_files()[:n]]
        if not frames:
            raise FormatError(f"{self.path}: no .pgm frames found")
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            raise FormatError(f"{self.path}: frames have differing sizes {sorted(shapes)}")
        return frames


def write_mask(mask, path):
    lines = [f"{mask.mb_size} {mask.mb_cols} {mask.mb_rows}"]
    lines += [str(a) for a in mask.lost_addresses]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_mask(path):
    """Parse the ``mb_size cols rows`` + sorted-address text format."""
    lines = [ln.strip() for ln in Path(path).read_text(encoding="ascii").splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise MalformedHeaderError(f"{path}: empty mask file")
    try:
        mb_size, cols, rows = (int(t) for t in lines[0].split())
        addresses = [int(t) for t in lines[1:]]
    except ValueError as exc:
        raise MalformedHeaderError(f"{path}: {exc}") from None
    if addresses != sorted(set(addresses)):
        raise FormatError(f"{path}: addresses must be unique and ascending")
    lost = np.zeros(rows * cols, dtype=bool)
    if addresses and (addresses[0] < 0 or addresses[-1] >= lost.size):
        raise FormatError(f"{path}: macroblock address out of range")
    lost[addresses] = True
    return LossMask(rows, cols, lost, mb_size)


def _fmt(value):
    return "" if value is None else f"{value:.6f}"


def write_report(reports, path):
    """CSV of concealment reports, ordered by frame then method."""
    ordered = sorted(reports, key=lambda r: (r.frame_index, r.method))
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for r in ordered:
            writer.writerow([
                r.frame_index, r.method, _fmt(r.psnr_db), r.lost_mb_count,
                r.solver_outer_iters, _fmt(r.final_q),
            ])
