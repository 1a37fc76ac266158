"""The explicit CR map families on the unbounded model and their algebra.

Four generators act on ambient coordinates (z, z^{n+1}):

  * ``inv``  the inversion  z_j -> z_j / (z^{n+1})^{1/m_j}, z^{n+1} -> -1/z^{n+1}
  * ``dil``  dilations      z_j -> r^{1/m_j} z_j, z^{n+1} -> r^2 z^{n+1}
  * ``phi``  quadratic-block translations by (a_s, t0 + i|a_s|^2)
  * ``psi``  block-permuting unitaries with a translation on the last block

Words compose as written: ``"g . h"`` means g after h.  Every generator is
holomorphic on its domain, so pushforwards are computed analytically from the
ambient Jacobian and cross-checked by finite differences on the chart.
"""

from __future__ import annotations

import re as _re
from dataclasses import dataclass

import numpy as np

from .errors import (
    BranchFailure,
    InvalidParameter,
    MapDomainError,
    MapSyntaxError,
    TypeMismatch,
)
from .frame import TangentVector, levi_matrix, levi_pair
from .model import from_ambient, p_grad, p_value, to_ambient
from .signature import Signature, SurfacePoint, require_admissible

INV_GUARD = 1e-10
UNITARY_TOL = 1e-12
ON_SURFACE_TOL = 1e-10


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Inversion:
    def __str__(self) -> str:
        return "inv"


@dataclass(frozen=True)
class Dilation:
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise InvalidParameter(f"dilation needs r > 0, got {self.r}")
        object.__setattr__(self, "r", float(self.r))

    def __str__(self) -> str:
        return f"dil(r={_fmt_float(self.r)})"


@dataclass(frozen=True, eq=False)
class Translation:
    """phi_a: translate the quadratic block by a_s and the height accordingly."""

    a_s: np.ndarray
    t0: float

    def __post_init__(self):
        a = np.asarray(self.a_s, dtype=np.complex128).reshape(-1)
        a.setflags(write=False)
        object.__setattr__(self, "a_s", a)
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def a_height(self) -> complex:
        return complex(self.t0, float(np.sum(np.abs(self.a_s) ** 2)))

    def __str__(self) -> str:
        return f"phi(a={_fmt_cvec(self.a_s)};t0={_fmt_float(self.t0)})"


@dataclass(frozen=True, eq=False)
class BlockUnitary:
    """psi: image block sigma(j) = B_j (input block j), plus last-block affine part.

    ``sigma`` holds 1-based images of blocks 1..s-1 and must preserve both the
    exponent and the dimension of each block.  ``B`` lists the unitaries for
    blocks 1..s-1 in input order; ``B_s`` acts on the quadratic block.
    """

    sigma: tuple
    B: tuple
    B_s: np.ndarray | None
    b_s: np.ndarray
    t0: float

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(int(v) for v in self.sigma))
        mats = tuple(np.asarray(M, dtype=np.complex128) for M in self.B)
        for M in mats:
            _check_unitary(M)
        object.__setattr__(self, "B", mats)
        if self.B_s is not None:
            Bs = np.asarray(self.B_s, dtype=np.complex128)
            _check_unitary(Bs)
            object.__setattr__(self, "B_s", Bs)
        b = np.asarray(self.b_s, dtype=np.complex128).reshape(-1)
        b.setflags(write=False)
        object.__setattr__(self, "b_s", b)
        object.__setattr__(self, "t0", float(self.t0))
        k = len(self.sigma)
        if sorted(self.sigma) != list(range(1, k + 1)):
            raise InvalidParameter(f"sigma {self.sigma} is not a permutation of 1..{k}")
        if len(mats) != k:
            raise InvalidParameter(f"need {k} block unitaries, got {len(mats)}")

    @property
    def b_height(self) -> complex:
        return complex(self.t0, float(np.sum(np.abs(self.b_s) ** 2)))

    def __str__(self) -> str:
        parts = []
        if self.sigma:
            parts.append("sigma=[" + ",".join(str(v) for v in self.sigma) + "]")
        for j, M in enumerate(self.B):
            parts.append(f"B{j + 1}={_fmt_cmat(M)}")
        if self.B_s is not None:
            parts.append(f"B{len(self.B) + 1}={_fmt_cmat(self.B_s)}")
        parts.append(f"b={_fmt_cvec(self.b_s)}")
        parts.append(f"t0={_fmt_float(self.t0)}")
        return "psi(" + ";".join(parts) + ")"


Generator = Inversion | Dilation | Translation | BlockUnitary


def _check_unitary(M: np.ndarray) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidParameter(f"unitary block must be square, got shape {M.shape}")
    defect = np.abs(M.conj().T @ M - np.eye(M.shape[0])).max()
    if defect > UNITARY_TOL:
        raise InvalidParameter(f"block matrix fails unitarity by {defect:.2e}")


@dataclass(frozen=True, eq=False)
class MapDescriptor:
    """Composition word; ``word[0]`` is applied last (g . h means g after h)."""

    word: tuple

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(self.word))

    def __str__(self) -> str:
        return " . ".join(str(g) for g in self.word)

    def __len__(self) -> int:
        return len(self.word)


IDENTITY = MapDescriptor(word=())


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_FLOAT_RE = _re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_complex(c: complex) -> str:
    return f"{_fmt_float(c.real)}{'+' if c.imag >= 0 else '-'}{_fmt_float(abs(c.imag))}i"


def _fmt_cvec(v) -> str:
    return "[" + ",".join(_fmt_complex(complex(x)) for x in v) + "]"


def _fmt_cmat(M) -> str:
    return "[" + ",".join(_fmt_cvec(row) for row in M) + "]"


def _parse_float(text: str, offset: int) -> float:
    if not _FLOAT_RE.match(text.strip()):
        raise MapSyntaxError(f"expected a float, got {text!r}", offset)
    return float(text)


def _parse_complex(text: str, offset: int) -> complex:
    raw = text.strip().replace("i", "j")
    try:
        return complex(raw)
    except ValueError:
        raise MapSyntaxError(f"expected a complex scalar re+imi, got {text!r}", offset)


def _split_top(text: str, sep: str):
    """Split on a separator at bracket depth zero, yielding (piece, offset)."""
    out = []
    depth = 0
    start = 0
    for i, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == sep and depth == 0:
            out.append((text[start:i], start))
            start = i + 1
    out.append((text[start:], start))
    return out


def _parse_cvec(text: str, offset: int) -> np.ndarray:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise MapSyntaxError("expected [..] vector", offset)
    inner = text[1:-1].strip()
    if not inner:
        return np.zeros(0, dtype=np.complex128)
    vals = [
        _parse_complex(piece, offset + 1 + off)
        for piece, off in _split_top(inner, ",")
    ]
    return np.array(vals, dtype=np.complex128)


def _parse_cmat(text: str, offset: int) -> np.ndarray:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise MapSyntaxError("expected [[..],..] matrix", offset)
    inner = text[1:-1].strip()
    rows = [
        _parse_cvec(piece.strip(), offset + 1 + off)
        for piece, off in _split_top(inner, ",")
        if piece.strip()
    ]
    if not rows:
        raise MapSyntaxError("empty matrix", offset)
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise MapSyntaxError("ragged matrix rows", offset)
    return np.array(rows, dtype=np.complex128)


def _parse_perm(text: str, offset: int) -> tuple:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise MapSyntaxError("expected [..] permutation", offset)
    inner = text[1:-1].strip()
    if not inner:
        return ()
    try:
        return tuple(int(v) for v in inner.split(","))
    except ValueError:
        raise MapSyntaxError(f"bad permutation {text!r}", offset)


def _parse_params(body: str, offset: int) -> dict:
    params: dict = {}
    for piece, off in _split_top(body, ";"):
        if not piece.strip():
            continue
        key, eq, val = piece.partition("=")
        if not eq:
            raise MapSyntaxError(f"expected key=value, got {piece!r}", offset + off)
        params[key.strip()] = (val, offset + off + len(key) + 1)
    return params


def _parse_term(term: str, offset: int, sig: Signature | None) -> Generator:
    term_stripped = term.strip()
    pad = offset + (len(term) - len(term.lstrip()))
    head, paren, rest = term_stripped.partition("(")
    head = head.strip()
    if head == "inv":
        if paren:
            raise MapSyntaxError("inv takes no parameters", pad)
        return Inversion()
    if not paren or not rest.endswith(")"):
        raise MapSyntaxError(f"malformed term {term_stripped!r}", pad)
    body = rest[:-1]
    body_off = pad + len(head) + 1
    params = _parse_params(body, body_off)
    if head == "dil":
        if set(params) != {"r"}:
            raise MapSyntaxError("dil takes exactly r=<float>", pad)
        r = _parse_float(*params["r"])
        return Dilation(r=r)
    if head == "phi":
        if set(params) - {"a", "t0"}:
            raise MapSyntaxError("phi takes a=<cvec>;t0=<float>", pad)
        a = _parse_cvec(*params["a"]) if "a" in params else np.zeros(0, complex)
        t0 = _parse_float(*params["t0"]) if "t0" in params else 0.0
        if sig is not None and len(a) != sig.n[-1]:
            raise InvalidParameter(
                f"phi translation has {len(a)} components, last block needs {sig.n[-1]}"
            )
        return Translation(a_s=a, t0=t0)
    if head == "psi":
        return _parse_psi(params, pad, sig)
    raise MapSyntaxError(f"unknown generator {head!r}", pad)


def _parse_psi(params: dict, offset: int, sig: Signature | None) -> BlockUnitary:
    known = {"sigma", "b", "t0"}
    mats: dict[int, np.ndarray] = {}
    for key, (val, off) in params.items():
        if key in known:
            continue
        if key.startswith("B"):
            try:
                j = int(key[1:])
            except ValueError:
                raise MapSyntaxError(f"bad psi parameter {key!r}", off)
            mats[j] = _parse_cmat(val, off)
        else:
            raise MapSyntaxError(f"bad psi parameter {key!r}", off)
    sigma = _parse_perm(*params["sigma"]) if "sigma" in params else None
    b = _parse_cvec(*params["b"]) if "b" in params else np.zeros(0, complex)
    t0 = _parse_float(*params["t0"]) if "t0" in params else 0.0
    if sig is None:
        if sigma is None:
            raise InvalidParameter(
                "psi without a signature context needs sigma= explicitly"
            )
        n_perm = len(sigma)
        B = tuple(mats[j] for j in range(1, n_perm + 1) if j in mats)
        if len(B) != n_perm:
            raise InvalidParameter(
                "psi without a signature context needs B1..B_{s-1} explicitly"
            )
        B_s = mats.get(n_perm + 1)
        return BlockUnitary(sigma=sigma, B=B, B_s=B_s, b_s=b, t0=t0)
    # signature-aware defaults and validation
    s = sig.s
    if sigma is None:
        sigma = tuple(range(1, s))
    if len(sigma) != s - 1:
        raise InvalidParameter(f"sigma must permute 1..{s - 1}, got {sigma}")
    B = tuple(
        mats.get(j, np.eye(sig.n[j - 1], dtype=np.complex128)) for j in range(1, s)
    )
    B_s = mats.get(s)
    if B_s is None and sig.n[-1] >= 1:
        B_s = np.eye(sig.n[-1], dtype=np.complex128)
    psi = BlockUnitary(sigma=sigma, B=B, B_s=B_s, b_s=b, t0=t0)
    validate_generator(sig, psi)
    return psi


def parse_map(text: str, sig: Signature | None = None) -> MapDescriptor:
    """Parse a composition word; validates against the signature when given."""
    if not text.strip():
        return IDENTITY
    gens = []
    for piece, off in _split_top(text, "."):
        if not piece.strip():
            raise MapSyntaxError("empty term", off)
        gens.append(_parse_term(piece, off, sig))
    desc = MapDescriptor(word=tuple(gens))
    if sig is not None:
        validate_descriptor(sig, desc)
    return desc


def validate_generator(sig: Signature, gen: Generator) -> None:
    s = sig.s
    ns = sig.n[-1]
    if isinstance(gen, Translation):
        if len(gen.a_s) != ns:
            raise InvalidParameter(
                f"phi translation has {len(gen.a_s)} components, last block needs {ns}"
            )
    elif isinstance(gen, BlockUnitary):
        if len(gen.sigma) != s - 1:
            raise InvalidParameter(f"sigma must permute 1..{s - 1}")
        for j, img in enumerate(gen.sigma, start=1):
            if sig.m[img - 1] != sig.m[j - 1] or sig.n[img - 1] != sig.n[j - 1]:
                raise InvalidParameter(
                    f"sigma sends block {j} to block {img} with different (m, n)"
                )
            if gen.B[j - 1].shape != (sig.n[j - 1], sig.n[j - 1]):
                raise InvalidParameter(f"B{j} has wrong shape {gen.B[j - 1].shape}")
        if ns >= 1:
            if gen.B_s is None or gen.B_s.shape != (ns, ns):
                raise InvalidParameter("psi needs a last-block unitary of size n_s")
        elif gen.B_s is not None:
            raise InvalidParameter("psi has a last-block unitary but n_s = 0")
        if len(gen.b_s) != ns:
            raise InvalidParameter(f"psi translation has {len(gen.b_s)} components")


def validate_descriptor(sig: Signature, desc: MapDescriptor) -> None:
    for gen in desc.word:
        validate_generator(sig, gen)


# --------------------------------------------------------------------------
# evaluation and ambient Jacobians
# --------------------------------------------------------------------------


def _ambient_apply(sig: Signature, gen: Generator, w: np.ndarray) -> np.ndarray:
    n = sig.total_n
    out = np.zeros(n + 1, dtype=np.complex128)
    if isinstance(gen, Inversion):
        zn1 = w[n]
        if abs(zn1) < INV_GUARD:
            raise MapDomainError(f"inversion at |z^(n+1)| = {abs(zn1):.2e}")
        if sig.s > 1 and zn1.real <= 0 and abs(zn1.imag) < 1e-14:
            raise BranchFailure("fractional power on the branch cut")
        for j, blk in enumerate(sig.blocks):
            out[list(blk)] = w[list(blk)] / zn1 ** (1.0 / sig.exponents[j])
        out[n] = -1.0 / zn1
        return out
    if isinstance(gen, Dilation):
        for j, blk in enumerate(sig.blocks):
            out[list(blk)] = gen.r ** (1.0 / sig.exponents[j]) * w[list(blk)]
        out[n] = gen.r**2 * w[n]
        return out
    if isinstance(gen, Translation):
        out[:n] = w[:n]
        sblk = list(sig.blocks[-1])
        out[sblk] = w[sblk] + gen.a_s
        out[n] = w[n] + gen.a_height + 2j * np.sum(w[sblk] * np.conj(gen.a_s))
        return out
    if isinstance(gen, BlockUnitary):
        for j in range(sig.s - 1):
            src = list(sig.blocks[j])
            dst = list(sig.blocks[gen.sigma[j] - 1])
            out[dst] = gen.B[j] @ w[src]
        sblk = list(sig.blocks[-1])
        rotated = gen.B_s @ w[sblk] if gen.B_s is not None else np.zeros(0, complex)
        out[sblk] = rotated + gen.b_s
        out[n] = w[n] + gen.b_height + 2j * np.sum(rotated * np.conj(gen.b_s))
        return out
    raise TypeMismatch(f"unknown generator {gen!r}")


def _ambient_jacobian(sig: Signature, gen: Generator, w: np.ndarray) -> np.ndarray:
    n = sig.total_n
    J = np.zeros((n + 1, n + 1), dtype=np.complex128)
    if isinstance(gen, Inversion):
        zn1 = w[n]
        if abs(zn1) < INV_GUARD:
            raise MapDomainError(f"inversion at |z^(n+1)| = {abs(zn1):.2e}")
        for j, blk in enumerate(sig.blocks):
            mj = sig.exponents[j]
            for a in blk:
                J[a, a] = zn1 ** (-1.0 / mj)
                J[a, n] = -(1.0 / mj) * w[a] * zn1 ** (-1.0 / mj - 1.0)
        J[n, n] = zn1**-2.0
        return J
    if isinstance(gen, Dilation):
        for j, blk in enumerate(sig.blocks):
            for a in blk:
                J[a, a] = gen.r ** (1.0 / sig.exponents[j])
        J[n, n] = gen.r**2
        return J
    if isinstance(gen, Translation):
        J[:n, :n] = np.eye(n)
        for k, a in enumerate(sig.blocks[-1]):
            J[n, a] = 2j * np.conj(gen.a_s[k])
        J[n, n] = 1.0
        return J
    if isinstance(gen, BlockUnitary):
        for j in range(sig.s - 1):
            src = list(sig.blocks[j])
            dst = list(sig.blocks[gen.sigma[j] - 1])
            J[np.ix_(dst, src)] = gen.B[j]
        sblk = list(sig.blocks[-1])
        if gen.B_s is not None:
            J[np.ix_(sblk, sblk)] = gen.B_s
            J[n, sblk] = 2j * (gen.B_s.T @ np.conj(gen.b_s))
        J[n, n] = 1.0
        return J
    raise TypeMismatch(f"unknown generator {gen!r}")


@dataclass(frozen=True, eq=False)
class MapJet:
    """Image point and ambient holomorphic Jacobian dzeta[b, a] = d zeta^b / d z^a."""

    image: SurfacePoint
    dzeta: np.ndarray


def apply_word(sig: Signature, desc: MapDescriptor, point: SurfacePoint) -> SurfacePoint:
    """Evaluate the word at a chart point; the image must land on the surface."""
    require_admissible(sig, point)
    w = to_ambient(sig, point)
    for gen in reversed(desc.word):
        w = _ambient_apply(sig, gen, w)
    image = from_ambient(sig, w, tol=ON_SURFACE_TOL)
    require_admissible(sig, image)
    return image


def map_jet(sig: Signature, desc: MapDescriptor, point: SurfacePoint) -> MapJet:
    """Image and chain-rule ambient Jacobian of the word at a point."""
    require_admissible(sig, point)
    w = to_ambient(sig, point)
    J = np.eye(sig.total_n + 1, dtype=np.complex128)
    for gen in reversed(desc.word):
        J = _ambient_jacobian(sig, gen, w) @ J
        w = _ambient_apply(sig, gen, w)
    image = from_ambient(sig, w, tol=ON_SURFACE_TOL)
    require_admissible(sig, image)
    return MapJet(image=image, dzeta=J)


# --------------------------------------------------------------------------
# chart Jacobians (Wirtinger form) and pushforwards
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChartJacobian:
    """Complexified Jacobian of the chart map (z, t) -> (zeta, tau).

    ``mat`` acts on column (dz, dzbar, dt) and returns (dzeta, dzetabar,
    dtau); shape (2n+1, 2n+1).
    """

    mat: np.ndarray

    @property
    def n(self) -> int:
        return (self.mat.shape[0] - 1) // 2

    @property
    def jz(self) -> np.ndarray:
        return self.mat[: self.n, : self.n]

    @property
    def jzb(self) -> np.ndarray:
        return self.mat[: self.n, self.n : 2 * self.n]

    @property
    def jt(self) -> np.ndarray:
        return self.mat[: self.n, 2 * self.n]

    @property
    def tz(self) -> np.ndarray:
        return self.mat[2 * self.n, : self.n]

    @property
    def tt(self) -> complex:
        return self.mat[2 * self.n, 2 * self.n]

    def compose(self, inner: "ChartJacobian") -> "ChartJacobian":
        return ChartJacobian(mat=self.mat @ inner.mat)


def chart_jacobian_from_ambient(
    sig: Signature, point: SurfacePoint, dzeta: np.ndarray
) -> ChartJacobian:
    """Chart-Jacobian blocks of a holomorphic ambient map along the surface."""
    n = sig.total_n
    pg = p_grad(sig, point.z)
    col = dzeta[:n, n]
    hcol = dzeta[n, :]
    jz = dzeta[:n, :n] + np.einsum("b,a->ba", col, 1j * pg)
    jzb = np.einsum("b,a->ba", col, 1j * np.conj(pg))
    jt = col
    # height row: tau = Re zeta^{n+1} on the chart
    dh_z = hcol[:n] + 1j * pg * hcol[n]
    dh_zb = 1j * np.conj(pg) * hcol[n]
    tz = 0.5 * (dh_z + np.conj(dh_zb))
    tt = np.real(hcol[n])
    mat = np.zeros((2 * n + 1, 2 * n + 1), dtype=np.complex128)
    mat[:n, :n] = jz
    mat[:n, n : 2 * n] = jzb
    mat[:n, 2 * n] = jt
    mat[n : 2 * n, :n] = np.conj(jzb)
    mat[n : 2 * n, n : 2 * n] = np.conj(jz)
    mat[n : 2 * n, 2 * n] = np.conj(jt)
    mat[2 * n, :n] = tz
    mat[2 * n, n : 2 * n] = np.conj(tz)
    mat[2 * n, 2 * n] = tt
    return ChartJacobian(mat=mat)


def chart_jacobian_fd(chart_fun, sig: Signature, point: SurfacePoint, step: float = 1e-6) -> ChartJacobian:
    """Chart Jacobian of an arbitrary chart map by central differences."""
    n = sig.total_n
    z0, t0 = point.z, point.t

    def ev(z, t):
        zeta, tau = chart_fun(z, t)
        return np.concatenate([np.asarray(zeta, complex).reshape(-1), [tau]])

    cols_z = np.zeros((n + 1, n), dtype=np.complex128)
    cols_zb = np.zeros((n + 1, n), dtype=np.complex128)
    for a in range(n):
        e = np.zeros(n, dtype=np.complex128)
        e[a] = step
        fx = (ev(z0 + e, t0) - ev(z0 - e, t0)) / (2 * step)
        fy = (ev(z0 + 1j * e, t0) - ev(z0 - 1j * e, t0)) / (2 * step)
        cols_z[:, a] = 0.5 * (fx - 1j * fy)
        cols_zb[:, a] = 0.5 * (fx + 1j * fy)
    col_t = (ev(z0, t0 + step) - ev(z0, t0 - step)) / (2 * step)
    mat = np.zeros((2 * n + 1, 2 * n + 1), dtype=np.complex128)
    mat[:n, :n] = cols_z[:n]
    mat[:n, n : 2 * n] = cols_zb[:n]
    mat[:n, 2 * n] = col_t[:n]
    mat[n : 2 * n, :n] = np.conj(cols_zb[:n])
    mat[n : 2 * n, n : 2 * n] = np.conj(cols_z[:n])
    mat[n : 2 * n, 2 * n] = np.conj(col_t[:n])
    mat[2 * n, :n] = cols_z[n]
    mat[2 * n, n : 2 * n] = cols_zb[n]
    mat[2 * n, 2 * n] = col_t[n].real
    return ChartJacobian(mat=mat)


def push_through_chart(
    sig: Signature,
    point: SurfacePoint,
    image: SurfacePoint,
    cj: ChartJacobian,
    V: TangentVector,
) -> TangentVector:
    """Push a tangent vector through a chart Jacobian and re-frame at the image."""
    n = sig.total_n
    pg = p_grad(sig, point.z)
    col = np.zeros(2 * n + 1, dtype=np.complex128)
    col[:n] = V.hol
    col[n : 2 * n] = V.antihol
    col[2 * n] = V.t_comp + 1j * np.sum(V.hol * pg) - 1j * np.sum(V.antihol * np.conj(pg))
    out = cj.mat @ col
    pgi = p_grad(sig, image.z)
    a, b, r = out[:n], out[n : 2 * n], out[2 * n]
    c = r - 1j * np.sum(a * pgi) + 1j * np.sum(b * np.conj(pgi))
    return TangentVector(hol=a, antihol=b, t_comp=c, base=image)


def pushforward_matrix(sig: Signature, desc: MapDescriptor, point: SurfacePoint):
    """(image, C) with f_* Z_a = sum_b C[b, a] Z_b at the image; C = Z_a zeta^b."""
    mj = map_jet(sig, desc, point)
    n = sig.total_n
    pg = p_grad(sig, point.z)
    C = mj.dzeta[:n, :n] + np.einsum("b,a->ba", mj.dzeta[:n, n], 2j * pg)
    return mj.image, C


def pushforward(
    sig: Signature,
    desc: MapDescriptor,
    point: SurfacePoint,
    V: TangentVector,
    check: bool = True,
    fd_step: float = 1e-6,
    agree_tol: float = 1e-6,
) -> TangentVector:
    """Pushforward computed analytically; optionally FD-verified on the chart."""
    mj = map_jet(sig, desc, point)
    cj_analytic = chart_jacobian_from_ambient(sig, point, mj.dzeta)
    out = push_through_chart(sig, point, mj.image, cj_analytic, V)
    if check:
        cj_fd = chart_jacobian_fd(
            lambda z, t: _chart_eval(sig, desc, z, t), sig, point, step=fd_step
        )
        out_fd = push_through_chart(sig, point, mj.image, cj_fd, V)
        scale = max(1.0, float(np.abs(out.hol).max(initial=0.0)))
        diff = max(
            float(np.abs(out.hol - out_fd.hol).max(initial=0.0)),
            float(np.abs(out.antihol - out_fd.antihol).max(initial=0.0)),
            abs(out.t_comp - out_fd.t_comp),
        )
        if diff > agree_tol * scale:
            raise MapDomainError(
                f"analytic and finite-difference pushforwards disagree by {diff:.2e}"
            )
    return out


def _chart_eval(sig: Signature, desc: MapDescriptor, z: np.ndarray, t: float):
    w = np.concatenate([z, [t + 1j * p_value(sig, z)]])
    for gen in reversed(desc.word):
        w = _ambient_apply(sig, gen, w)
    return w[: sig.total_n], float(np.real(w[sig.total_n]))


# --------------------------------------------------------------------------
# CR factor and CR verification
# --------------------------------------------------------------------------


def cr_factor_from_jet(sig: Signature, point: SurfacePoint, mj: MapJet) -> float:
    n = sig.total_n
    pgi = p_grad(sig, mj.image.z)
    lam = mj.dzeta[n, n] - 2j * np.sum(pgi * mj.dzeta[:n, n])
    if abs(lam.imag) > 1e-9 * max(1.0, abs(lam)):
        raise MapDomainError(f"CR factor came out non-real: {lam}")
    if lam.real <= 0:
        raise MapDomainError(f"CR factor came out non-positive: {lam.real}")
    return float(lam.real)


def cr_factor_from_chart(
    sig: Signature, image: SurfacePoint, cj: ChartJacobian
) -> float:
    pgi = p_grad(sig, image.z)
    lam = cj.tt + 2.0 * np.imag(np.sum(cj.jt * pgi))
    return float(np.real(lam))


def cr_factor(
    sig: Signature,
    desc: MapDescriptor,
    point: SurfacePoint,
    check: bool = True,
    check_tol: float = 1e-8,
) -> float:
    """theta_{f(P)}(f_* T); cross-checked against Levi-length ratios."""
    mj = map_jet(sig, desc, point)
    lam = cr_factor_from_jet(sig, point, mj)
    if check:
        image, C = pushforward_matrix(sig, desc, point)
        H_p = levi_matrix(sig, point.z)
        H_i = levi_matrix(sig, image.z)
        rng = np.random.default_rng(0)
        for _ in range(3):
            v = rng.normal(size=sig.total_n) + 1j * rng.normal(size=sig.total_n)
            ratio = levi_pair(H_i, C @ v, C @ v).real / levi_pair(H_p, v, v).real
            if abs(ratio - lam) > check_tol * max(1.0, lam):
                raise MapDomainError(
                    f"CR factor {lam} disagrees with length ratio {ratio}"
                )
    return lam


@dataclass(frozen=True, eq=False)
class CrVerifyReport:
    theta_residual: float
    antiholomorphic_leakage: float
    pairing_residual: float
    min_factor: float
    n_points: int
    failures: tuple

    @property
    def ok(self) -> bool:
        return not self.failures


def verify_cr(
    sig: Signature,
    target,
    points,
    tol: float = 1e-8,
    fd_step: float = 1e-6,
    seed: int = 0,
) -> CrVerifyReport:
    """Check f* theta = lambda theta with lambda > 0 by finite differences.

    ``target`` is a MapDescriptor or any oracle with ``point`` /
    ``chart_fun`` semantics.  Per sample this verifies that pushforwards of
    the holomorphic frame have no theta component and no antiholomorphic
    leakage, that lambda is positive, and that Levi pairings scale by lambda.
    """
    oracle = as_oracle(sig, target)
    points = list(points)
    rng = np.random.default_rng(seed)
    worst_theta = 0.0
    worst_leak = 0.0
    worst_pair = 0.0
    min_factor = np.inf
    failures = []
    n = sig.total_n
    for k, P in enumerate(points):
        try:
            image = oracle.point(P)
            cj = chart_jacobian_fd(oracle.chart_fun, sig, P, step=fd_step)
        except (MapDomainError, BranchFailure) as exc:
            failures.append((k, f"domain: {exc}"))
            continue
        lam = cr_factor_from_chart(sig, image, cj)
        min_factor = min(min_factor, lam)
        pushed = []
        for a in range(n):
            e = np.zeros(n, dtype=np.complex128)
            e[a] = 1.0
            V = TangentVector.holomorphic(P, e)
            out = push_through_chart(sig, P, image, cj, V)
            pushed.append(out)
            worst_theta = max(worst_theta, abs(out.t_comp))
            worst_leak = max(worst_leak, float(np.abs(out.antihol).max()))
        H_p = levi_matrix(sig, P.z)
        H_i = levi_matrix(sig, image.z)
        for _ in range(3):
            x = rng.normal(size=n) + 1j * rng.normal(size=n)
            y = rng.normal(size=n) + 1j * rng.normal(size=n)
            fx = sum(x[a] * pushed[a].hol for a in range(n))
            fy = sum(y[a] * pushed[a].hol for a in range(n))
            lhs = levi_pair(H_i, fx, fy)
            rhs = lam * levi_pair(H_p, x, y)
            scale = max(1.0, abs(rhs))
            worst_pair = max(worst_pair, abs(lhs - rhs) / scale)
        if lam <= 0:
            failures.append((k, f"CR factor {lam} not positive"))
    if worst_theta > tol:
        failures.append((-1, f"theta residual {worst_theta:.2e} > {tol:.0e}"))
    if worst_leak > tol:
        failures.append((-1, f"antiholomorphic leakage {worst_leak:.2e} > {tol:.0e}"))
    if worst_pair > tol:
        failures.append((-1, f"pairing residual {worst_pair:.2e} > {tol:.0e}"))
    return CrVerifyReport(
        theta_residual=worst_theta,
        antiholomorphic_leakage=worst_leak,
        pairing_residual=worst_pair,
        min_factor=float(min_factor),
        n_points=len(points),
        failures=tuple(failures),
    )


# --------------------------------------------------------------------------
# oracles
# --------------------------------------------------------------------------


class DescriptorOracle:
    """Black-box view of a descriptor: evaluation and chart Jacobian only."""

    supports_queries = True

    def __init__(self, sig: Signature, desc: MapDescriptor):
        self._sig = sig
        self._desc = desc

    def point(self, P: SurfacePoint) -> SurfacePoint:
        return apply_word(self._sig, self._desc, P)

    def chart_fun(self, z: np.ndarray, t: float):
        return _chart_eval(self._sig, self._desc, z, t)

    def chart_jacobian(self, P: SurfacePoint):
        mj = map_jet(self._sig, self._desc, P)
        return mj.image, chart_jacobian_from_ambient(self._sig, P, mj.dzeta)


class ChartMapOracle:
    """Oracle for an arbitrary chart map; Jacobian by finite differences."""

    supports_queries = True

    def __init__(self, sig: Signature, fun, step: float = 1e-6):
        self._sig = sig
        self._fun = fun
        self._step = step

    def point(self, P: SurfacePoint) -> SurfacePoint:
        zeta, tau = self._fun(P.z, P.t)
        return SurfacePoint(z=np.asarray(zeta, complex), t=float(tau))

    def chart_fun(self, z: np.ndarray, t: float):
        return self._fun(z, t)

    def chart_jacobian(self, P: SurfacePoint):
        cj = chart_jacobian_fd(self._fun, self._sig, P, step=self._step)
        return self.point(P), cj


def as_oracle(sig: Signature, target):
    if isinstance(target, MapDescriptor):
        return DescriptorOracle(sig, target)
    if hasattr(target, "point") and hasattr(target, "chart_fun"):
        return target
    raise TypeMismatch(f"cannot interpret {target!r} as a map oracle")


# --------------------------------------------------------------------------
# group algebra helpers
# --------------------------------------------------------------------------


def invert_generator(sig: Signature, gen: Generator) -> list:
    """Inverse of one generator as a short word (inversion needs a phase fix)."""
    if isinstance(gen, Dilation):
        return [Dilation(r=1.0 / gen.r)]
    if isinstance(gen, Translation):
        return [Translation(a_s=-gen.a_s, t0=-gen.t0)]
    if isinstance(gen, BlockUnitary):
        inv_sigma = [0] * len(gen.sigma)
        for j, img in enumerate(gen.sigma, start=1):
            inv_sigma[img - 1] = j
        B_inv = tuple(
            gen.B[inv_sigma[j] - 1].conj().T for j in range(len(gen.sigma))
        )
        if gen.B_s is not None:
            Bs_inv = gen.B_s.conj().T
            bs_inv = -(Bs_inv @ gen.b_s)
        else:
            Bs_inv = None
            bs_inv = np.zeros(0, dtype=np.complex128)
        return [
            BlockUnitary(
                sigma=tuple(inv_sigma), B=B_inv, B_s=Bs_inv, b_s=bs_inv, t0=-gen.t0
            )
        ]
    if isinstance(gen, Inversion):
        # inv . inv is the block-phase map with phases e^{-i pi / m_j}; undo it
        phases = tuple(
            np.exp(1j * np.pi / sig.exponents[j]) * np.eye(sig.n[j], dtype=np.complex128)
            for j in range(sig.s - 1)
        )
        ns = sig.n[-1]
        Bs = -np.eye(ns, dtype=np.complex128) if ns >= 1 else None
        fix = BlockUnitary(
            sigma=tuple(range(1, sig.s)),
            B=phases,
            B_s=Bs,
            b_s=np.zeros(ns, dtype=np.complex128),
            t0=0.0,
        )
        return [fix, Inversion()]
    raise TypeMismatch(f"unknown generator {gen!r}")


def invert_word(sig: Signature, desc: MapDescriptor) -> MapDescriptor:
    gens: list = []
    for gen in reversed(desc.word):
        gens.extend(invert_generator(sig, gen))
    return MapDescriptor(word=tuple(gens))


def compose_translations(f: Translation, g: Translation) -> Translation:
    """The composite f after g; the height offset picks up a cross term."""
    a = f.a_s + g.a_s
    t0 = f.t0 + g.t0 - 2.0 * float(np.imag(np.sum(g.a_s * np.conj(f.a_s))))
    return Translation(a_s=a, t0=t0)
