"""Raw waveform persistence: little-endian binary container with a
self-describing header.

Layout (all little-endian):

    file header:   magic b"CVQF" | u16 version | u32 frame count
    frame header:  u8 domain (0 baseband, 1 passband) | u8 dtype
                   (0 complex128, 1 float64) | u16 reserved
                   | f64 sample_rate | f64 scale | u64 length (samples)
    frame payload: raw sample bytes
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .frames import Domain, IQFrame

MAGIC = b"CVQF"
VERSION = 1
_FILE_HEADER = struct.Struct("<4sHI")
_FRAME_HEADER = struct.Struct("<BBHddQ")


class FrameFormatError(IOError):
    """File does not parse as a frame container."""


def persist_frames(frames: Sequence[IQFrame] | IQFrame, path: str | Path) -> Path:
    """Write frames losslessly; returns the path."""
    if isinstance(frames, IQFrame):
        frames = [frames]
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_FILE_HEADER.pack(MAGIC, VERSION, len(frames)))
        for frame in frames:
            passband = frame.domain is Domain.PASSBAND
            payload = np.ascontiguousarray(
                frame.samples,
                dtype="<f8" if passband else "<c16").tobytes()
            fh.write(_FRAME_HEADER.pack(
                1 if passband else 0,
                1 if passband else 0,
                0,
                frame.sample_rate,
                frame.scale,
                len(frame),
            ))
            fh.write(payload)
    return path


def load_frames(path: str | Path) -> list[IQFrame]:
    """Read a frame container; any header inconsistency raises FrameFormatError."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _FILE_HEADER.size:
        raise FrameFormatError(f"{path}: truncated file header")
    magic, version, count = _FILE_HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FrameFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FrameFormatError(f"{path}: unsupported version {version}")
    frames = []
    offset = _FILE_HEADER.size
    for i in range(count):
        if offset + _FRAME_HEADER.size > len(data):
            raise FrameFormatError(f"{path}: truncated header of frame {i}")
        domain_tag, dtype_tag, _, rate, scale, length = \
            _FRAME_HEADER.unpack_from(data, offset)
        offset += _FRAME_HEADER.size
        if domain_tag not in (0, 1) or dtype_tag not in (0, 1):
            raise FrameFormatError(f"{path}: corrupt tags in frame {i}")
        dtype = np.dtype("<f8") if dtype_tag == 1 else np.dtype("<c16")
        nbytes = length * dtype.itemsize
        if offset + nbytes > len(data):
            raise FrameFormatError(
                f"{path}: frame {i} declares {length} samples but only "
                f"{(len(data) - offset) // dtype.itemsize} remain")
        samples = np.frombuffer(data, dtype=dtype, count=length, offset=offset)
        offset += nbytes
        frames.append(IQFrame(
            samples.copy(),
            sample_rate=rate,
            domain=Domain.PASSBAND if domain_tag else Domain.BASEBAND,
            scale=scale,
        ))
    return frames
