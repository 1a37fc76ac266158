"""Block signature of a generalized ellipsoid and points on its unbounded model.

A signature collects ``s`` groups of complex variables with block dimensions
``n_1, ..., n_s`` and exponents ``m_1, ..., m_{s-1}`` (the last block always
enters the defining function quadratically).  The hypersurface is

    Im z^{n+1} = |z_1|^{2 m_1} + ... + |z_{s-1}|^{2 m_{s-1}} + |z_s|^2,

carrying the chart coordinates (z, t) with t = Re z^{n+1}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InadmissiblePoint


@dataclass(frozen=True)
class Signature:
    """Index data (s, m_1..m_{s-1}, n_1..n_s) of a generalized ellipsoid.

    Blocks 1..s-1 require m_j >= 2 and n_j >= 2; the last block may have
    n_s = 0 (no quadratic variables at all).  ``s == 1`` is the flat
    Heisenberg/Siegel model with defining function |z|^2.
    """

    m: tuple[int, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        if len(self.n) == 0:
            raise ValueError("need at least one block")
        if len(self.m) != len(self.n) - 1:
            raise ValueError(
                f"expected {len(self.n) - 1} exponents for {len(self.n)} blocks, got {len(self.m)}"
            )
        for j, mj in enumerate(self.m):
            if mj < 2:
                raise ValueError(f"exponent m_{j + 1} = {mj} violates m_j >= 2")
        for j, nj in enumerate(self.n[:-1]):
            if nj < 2:
                raise ValueError(f"block dimension n_{j + 1} = {nj} violates n_j >= 2")
        if self.n[-1] < 0:
            raise ValueError("last block dimension must be >= 0")

    @property
    def s(self) -> int:
        return len(self.n)

    @property
    def total_n(self) -> int:
        return sum(self.n)

    @property
    def exponents(self) -> tuple[float, ...]:
        """Per-block exponent with the quadratic last block counted as 1."""
        return tuple(float(v) for v in self.m) + (1.0,)

    @property
    def blocks(self) -> tuple[range, ...]:
        out = []
        start = 0
        for nj in self.n:
            out.append(range(start, start + nj))
            start += nj
        return tuple(out)

    @property
    def block_of(self) -> np.ndarray:
        out = np.empty(self.total_n, dtype=np.int64)
        for j, blk in enumerate(self.blocks):
            out[list(blk)] = j
        return out

    def orthogonal(self, alpha: int, beta: int) -> bool:
        """Whether two indices live in different blocks."""
        return self.block_of[alpha] != self.block_of[beta]

    @classmethod
    def parse(cls, text: str) -> "Signature":
        """Parse ``"m=2,3;n=2,2,1"``; the flat model is ``"n=2"`` (no m part)."""
        parts = [p.strip() for p in text.strip().split(";") if p.strip()]
        m: tuple[int, ...] = ()
        n: tuple[int, ...] | None = None
        for part in parts:
            key, _, val = part.partition("=")
            key = key.strip()
            vals = tuple(int(v) for v in val.split(",")) if val.strip() else ()
            if key == "m":
                m = vals
            elif key == "n":
                n = vals
            else:
                raise ValueError(f"unknown signature field {key!r}")
        if n is None:
            raise ValueError("signature text must contain an n= part")
        return cls(m=m, n=n)

    def __str__(self) -> str:
        mtxt = ",".join(str(v) for v in self.m)
        ntxt = ",".join(str(v) for v in self.n)
        return f"m={mtxt};n={ntxt}" if self.m else f"n={ntxt}"


@dataclass(frozen=True, eq=False)
class SurfacePoint:
    """Chart coordinates (z, t) of a point on the hypersurface.

    The missing ambient coordinate is z^{n+1} = t + i p(z, conj z).
    """

    z: np.ndarray
    t: float

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.complex128).reshape(-1)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "t", float(self.t))

    def to_json(self) -> str:
        return json.dumps(
            {"z": [[v.real, v.imag] for v in self.z], "t": self.t}
        )

    @classmethod
    def from_json(cls, text: str) -> "SurfacePoint":
        data = json.loads(text)
        z = np.array([complex(re, im) for re, im in data["z"]], dtype=np.complex128)
        return cls(z=z, t=float(data["t"]))


ADMISSIBILITY_MARGIN = 1e-8


def block_norms(sig: Signature, z: np.ndarray) -> np.ndarray:
    """Squared norms |z_j|^2 for each block (length s)."""
    z = np.asarray(z)
    return np.array([float(np.sum(np.abs(z[list(blk)]) ** 2)) for blk in sig.blocks])


def is_admissible(sig: Signature, point: SurfacePoint, margin: float = ADMISSIBILITY_MARGIN) -> bool:
    if len(point.z) != sig.total_n:
        return False
    q = block_norms(sig, point.z)
    return bool(np.all(np.sqrt(q[: sig.s - 1]) > margin))


def require_admissible(sig: Signature, point: SurfacePoint, margin: float = ADMISSIBILITY_MARGIN) -> None:
    if len(point.z) != sig.total_n:
        raise InadmissiblePoint(
            f"point has {len(point.z)} coordinates, signature needs {sig.total_n}"
        )
    q = np.sqrt(block_norms(sig, point.z))
    for j in range(sig.s - 1):
        if q[j] <= margin:
            raise InadmissiblePoint(f"|z_{j + 1}| = {q[j]:.3e} <= margin {margin:.1e}")
