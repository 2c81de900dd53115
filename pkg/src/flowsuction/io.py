"""Netpbm images, float rasters, manifests and trajectory text files.

Float rasters are little-endian: a 16-byte header ``b"FSRF"`` + width +
height + channel count (uint32 each), then ``channels`` planes of float32 in
row-major order.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .types import PixelTrajectory

RAW_MAGIC = b"FSRF"
_RAW_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    """A file does not match the format it claims to have."""


# --- netpbm -----------------------------------------------------------------


def _read_header(data: bytes, fields: int) -> tuple[list[bytes], int]:
    """Whitespace-separated header tokens (comments skipped) and the offset of the raster."""
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < fields:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise FormatError("truncated netpbm header")
        tokens.append(data[i:j])
        i = j
    if i >= n or not data[i : i + 1].isspace():
        raise FormatError("netpbm header must end with a single whitespace byte")
    return tokens, i + 1


def _dims(tokens: list[bytes]) -> tuple[int, int]:
    try:
        w, h = int(tokens[1]), int(tokens[2])
    except ValueError:
        raise FormatError(f"bad netpbm dimensions {tokens[1:3]!r}") from None
    if w <= 0 or h <= 0:
        raise FormatError(f"non-positive netpbm dimensions {w}x{h}")
    return w, h


def read_netpbm(path) -> np.ndarray:
    """Read P4, P5 or P6.

    P4 returns a bool array (True where the bit is set), P5 a float array in
    [0, 1] scaled by maxval, and P6 an (h, w, 3) uint8 array.
    """
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic == b"P4":
        tokens, off = _read_header(data, 3)
        w, h = _dims(tokens)
        stride = (w + 7) // 8
        if len(data) - off < stride * h:
            raise FormatError(f"{path}: P4 raster too short")
        body = np.frombuffer(data, dtype=np.uint8, count=stride * h, offset=off)
        return np.unpackbits(body.reshape(h, stride), axis=1)[:, :w].astype(bool)
    if magic in (b"P5", b"P6"):
        tokens, off = _read_header(data, 4)
        w, h = _dims(tokens)
        try:
            maxval = int(tokens[3])
        except ValueError:
            raise FormatError(f"bad maxval {tokens[3]!r}") from None
        if not 0 < maxval < 65536:
            raise FormatError(f"maxval {maxval} out of range")
        channels = 1 if magic == b"P5" else 3
        dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
        count = w * h * channels
        if len(data) - off < count * dtype.itemsize:
            raise FormatError(f"{path}: raster too short")
        body = np.frombuffer(data, dtype=dtype, count=count, offset=off)
        if channels == 1:
            return body.reshape(h, w).astype(np.float64) / maxval
        return body.reshape(h, w, 3).astype(np.uint8) if maxval == 255 else (
            np.round(body.reshape(h, w, 3) * (255.0 / maxval)).astype(np.uint8)
        )
    raise FormatError(f"{path}: not a P4/P5/P6 file (magic {magic!r})")


def write_pgm(path, image: np.ndarray) -> None:
    """8-bit P5 from intensities in [0, 1]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("P5 needs a 2-D array")
    pixels = np.round(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)
    h, w = img.shape
    _write(path, f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes())


def write_pbm(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("P4 needs a 2-D array")
    h, w = mask.shape
    _write(path, f"P4\n{w} {h}\n".encode() + np.packbits(mask, axis=1).tobytes())


def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("P6 needs an (h, w, 3) array")
    h, w, _ = rgb.shape
    _write(path, f"P6\n{w} {h}\n255\n".encode() + rgb.astype(np.uint8).tobytes())


def _write(path, payload: bytes) -> None:
    Path(path).write_bytes(payload)


# --- float rasters ------------------------------------------------------------


def write_raw(path, *planes: np.ndarray) -> None:
    if not planes:
        raise ValueError("need at least one plane")
    shape = np.shape(planes[0])
    if len(shape) != 2 or any(np.shape(p) != shape for p in planes):
        raise ValueError("planes must be 2-D and equally shaped")
    h, w = shape
    body = np.stack([np.asarray(p, dtype="<f4") for p in planes]).tobytes()
    _write(path, _RAW_HEADER.pack(RAW_MAGIC, w, h, len(planes)) + body)


def read_raw(path) -> np.ndarray:
    """Returns shape (channels, h, w) float64."""
    data = Path(path).read_bytes()
    if len(data) < _RAW_HEADER.size:
        raise FormatError(f"{path}: shorter than the raw header")
    magic, w, h, c = _RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = _RAW_HEADER.size + 4 * w * h * c
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    body = np.frombuffer(data, dtype="<f4", offset=_RAW_HEADER.size)
    return body.reshape(c, h, w).astype(np.float64)


# --- manifest ---------------------------------------------------------------


@dataclass(frozen=True)
class Manifest:
    scene: str
    frames: int
    width: int
    height: int

    def dump(self) -> str:
        return f"scene={self.scene}\nframes={self.frames}\nwidth={self.width}\nheight={self.height}\n"

    @classmethod
    def parse(cls, text: str) -> "Manifest":
        values = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"manifest line without '=': {line!r}")
            values[key.strip()] = value.strip()
        try:
            return cls(values["scene"], int(values["frames"]), int(values["width"]), int(values["height"]))
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad manifest: {exc}") from None


MANIFEST = "manifest.txt"


def frame_name(t: int) -> str:
    return f"frame_{t:04d}.pgm"


def truth_mask_name(t: int) -> str:
    return f"truth_{t:04d}.pbm"


def truth_flow_name(t: int) -> str:
    return f"flow_{t:04d}.raw"


def read_manifest(directory) -> Manifest:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise FormatError(f"no {MANIFEST} in {directory}")
    return Manifest.parse(path.read_text())


def write_manifest(directory, manifest: Manifest) -> None:
    (Path(directory) / MANIFEST).write_text(manifest.dump())


# --- trajectories and overlays --------------------------------------------------


def format_trajectory(traj: PixelTrajectory) -> str:
    return "".join(f"{c} {r}\n" for c, r in traj)


def write_trajectory(path, traj: PixelTrajectory) -> None:
    Path(path).write_text(format_trajectory(traj))


def read_trajectory(path) -> PixelTrajectory:
    points = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'col row'")
        try:
            points.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-integer coordinate") from None
    return PixelTrajectory(tuple(points))


def overlay(mask: np.ndarray, traj: PixelTrajectory | None, background: np.ndarray | None = None) -> np.ndarray:
    """RGB picture: mask tinted red, path in green, start blue, end yellow."""
    mask = np.asarray(mask, dtype=bool)
    if background is None:
        base = np.full(mask.shape, 0.85)
    else:
        base = np.clip(np.asarray(background, dtype=np.float64), 0, 1)
    rgb = np.repeat((base * 255).astype(np.uint8)[..., None], 3, axis=2)
    rgb[mask] = (rgb[mask] * 0.4 + np.array([200, 0, 0]) * 0.6).astype(np.uint8)
    if traj is not None and len(traj):
        for c, r in traj:
            rgb[r, c] = (0, 220, 0)
        (c0, r0), (c1, r1) = traj.waypoints[0], traj.waypoints[-1]
        rgb[r0, c0] = (40, 80, 255)
        rgb[r1, c1] = (255, 230, 0)
    return rgb


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
