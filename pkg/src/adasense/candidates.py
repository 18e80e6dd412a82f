"""Feasible sensing-row families (the constrained set of candidate blocks).

Each member is an ``(r, D)`` block of unit-norm rows.  Member order is fixed
at construction; selection breaks ties by lowest member index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.fft import dct
from scipy.linalg import hadamard as _hadamard

from .errors import ConfigError, DimensionError, InvalidInputError
from .numerics import pinv

FAMILIES = ("pixel", "fourier", "hadamard", "radon", "explicit")


@dataclass(eq=False)
class CandidateSet:
    family: str
    members: np.ndarray  # (M, r, D)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.members, dtype=float)
        if m.ndim == 2:
            m = m[:, None, :]
        if m.ndim != 3 or m.shape[0] == 0:
            raise DimensionError("members must be a non-empty (M, r, D) array")
        norms = np.linalg.norm(m, axis=2)
        if np.any(norms == 0):
            raise InvalidInputError("candidate rows must be non-zero")
        self.members = m / norms[:, :, None]

    def __len__(self) -> int:
        return self.members.shape[0]

    @property
    def block_size(self) -> int:
        return self.members.shape[1]

    @property
    def dim(self) -> int:
        return self.members.shape[2]

    @cached_property
    def gram_pinv(self) -> np.ndarray:
        """Per-member (H H^T)^+, precomputed once so H^+ H = H^T G H is cheap."""
        grams = self.members @ self.members.transpose(0, 2, 1)
        eye = np.eye(self.block_size)
        if np.allclose(grams, eye, atol=1e-12):
            return np.broadcast_to(eye, grams.shape).copy()
        return np.stack([pinv(g) for g in grams])

    @cached_property
    def orthonormal_members(self) -> bool:
        grams = self.members @ self.members.transpose(0, 2, 1)
        return bool(np.allclose(grams, np.eye(self.block_size), atol=1e-10))

    def stack(self, indices) -> np.ndarray:
        idx = list(indices)
        if not idx:
            return np.zeros((0, self.dim))
        return self.members[idx].reshape(-1, self.dim)

    def to_dict(self) -> dict:
        if self.family == "explicit":
            return {"family": "explicit", "block_size": self.block_size,
                    "rows": self.members.reshape(-1, self.dim).tolist()}
        return {"family": self.family, **self.params}

    @classmethod
    def from_dict(cls, spec: dict) -> "CandidateSet":
        spec = dict(spec)
        family = spec.pop("family", None)
        try:
            if family == "pixel":
                return pixel_candidates(**spec)
            if family == "fourier":
                return fourier_candidates(**spec)
            if family == "hadamard":
                return hadamard_candidates(**spec)
            if family == "radon":
                return radon_candidates(**spec)
            if family == "explicit":
                rows = np.asarray(spec["rows"], dtype=float)
                block = int(spec.get("block_size", 1))
                if rows.ndim != 2 or rows.shape[0] % block:
                    raise ConfigError("explicit rows must form whole blocks")
                return cls("explicit", rows.reshape(-1, block, rows.shape[1]))
        except TypeError as exc:
            raise ConfigError(f"bad parameters for candidate family {family!r}: {exc}") from exc
        raise ConfigError(f"unknown candidate family {family!r}; expected one of {FAMILIES}")


def _resolve_dim(dim, image_width, block):
    if block not in ("row", "column"):
        raise ConfigError(f"block must be 'row' or 'column', got {block!r}")
    if block == "column":
        if image_width is None:
            raise ConfigError("column blocks need image_width")
        return image_width * image_width
    if dim is None and image_width is not None:
        return image_width * image_width
    if dim is None:
        raise ConfigError("need dim or image_width")
    return int(dim)


def _params(**kw) -> dict:
    return {k: v for k, v in kw.items() if v is not None}


def pixel_candidates(dim: int | None = None, image_width: int | None = None, block: str = "row") -> CandidateSet:
    """Single pixels, or whole image columns when ``block='column'``."""
    d = _resolve_dim(dim, image_width, block)
    eye = np.eye(d)
    if block == "row":
        members = eye[:, None, :]
    else:
        w = image_width
        members = np.stack([eye[np.arange(w) * w + j] for j in range(w)])
    return CandidateSet("pixel", members, _params(dim=dim, image_width=image_width, block=block))


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix; rows are basis functions."""
    return dct(np.eye(n), norm="ortho", axis=0)


def real_dft_matrix(n: int) -> np.ndarray:
    """Orthonormal real DFT basis: DC, then (cos, sin) pairs, then Nyquist if n is even."""
    j = np.arange(n)
    rows = [np.full(n, 1.0 / np.sqrt(n))]
    for k in range(1, (n + 1) // 2):
        rows.append(np.sqrt(2.0 / n) * np.cos(2 * np.pi * k * j / n))
        rows.append(np.sqrt(2.0 / n) * np.sin(2 * np.pi * k * j / n))
    if n % 2 == 0:
        rows.append((-1.0) ** j / np.sqrt(n))
    return np.array(rows)


def fourier_candidates(
    dim: int | None = None, image_width: int | None = None, block: str = "row", basis: str = "dct"
) -> CandidateSet:
    """Real Fourier-type rows.

    ``block='row'``: each 1-D basis row of length ``dim`` is one candidate.
    ``block='column'``: separable 2-D basis on a ``w x w`` image; one candidate
    holds every vertical frequency for a single horizontal frequency, i.e. a
    k-space column.
    """
    if basis not in ("dct", "dft"):
        raise ConfigError(f"basis must be 'dct' or 'dft', got {basis!r}")
    d = _resolve_dim(dim, image_width, block)
    make = dct_matrix if basis == "dct" else real_dft_matrix
    params = _params(dim=dim, image_width=image_width, block=block, basis=basis)
    if block == "row":
        return CandidateSet("fourier", make(d)[:, None, :], params)
    w = image_width
    f = make(w)
    members = np.stack([np.stack([np.kron(f[u], f[v]) for u in range(w)]) for v in range(w)])
    return CandidateSet("fourier", members, params)


def hadamard_candidates(dim: int) -> CandidateSet:
    """Normalized Walsh-Hadamard rows (Sylvester order); ``dim`` a power of two."""
    if dim < 1 or dim & (dim - 1):
        raise ConfigError("hadamard dim must be a power of two")
    return CandidateSet("hadamard", (_hadamard(dim) / np.sqrt(dim))[:, None, :], {"dim": dim})


def radon_matrix(image_width: int, n_angles: int) -> np.ndarray:
    """Discrete parallel-beam projector, shape (n_angles, w, w*w).

    Pixel-driven with linear interpolation onto ``w`` unit-spaced detector
    bins; only pixels inside the inscribed circle contribute, so every angle
    sees the same support.
    """
    w = image_width
    c = (w - 1) / 2.0
    xs = np.arange(w) - c
    gx, gy = np.meshgrid(xs, -xs)  # row i, column j -> (x_j, y_i)
    inside = (gx**2 + gy**2) <= (w / 2.0) ** 2
    px, py = gx[inside], gy[inside]
    flat = np.flatnonzero(inside.ravel())
    bins = np.arange(w) - c
    out = np.zeros((n_angles, w, w * w))
    for a in range(n_angles):
        theta = np.pi * a / n_angles
        proj = px * np.cos(theta) + py * np.sin(theta)
        weight = np.clip(1.0 - np.abs(proj[None, :] - bins[:, None]), 0.0, None)
        out[a][:, flat] = weight
    return out


def radon_candidates(image_width: int, n_angles: int) -> CandidateSet:
    """One candidate per projection angle: a whole sinogram column of unit-norm rows."""
    rows = radon_matrix(image_width, n_angles)
    if np.any(np.linalg.norm(rows, axis=2) == 0):
        raise ConfigError(f"image_width={image_width} leaves empty detector bins")
    return CandidateSet("radon", rows, {"image_width": image_width, "n_angles": n_angles})
