"""Adapted frame on the hypersurface: Levi form, radial fields, projection.

The holomorphic frame is Z_alpha = d/dz^alpha + i p_alpha d/dt with
characteristic field T = d/dt, contact form theta = dt - i(p_a dz^a -
p_abar dzbar^a).  Per block the radial field E_j = (1/m_j) sum z^a Z_a spans
the radial subbundle; the Levi-orthogonal projection Q kills it and produces
the tangential fields W_a with W_a p = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InadmissiblePoint,
    RankDeficiency,
    TypeMismatch,
    UnsupportedField,
    ZeroVector,
)
from .model import jet, p_grad, p_value
from .signature import Signature, SurfacePoint, block_norms, require_admissible

# below this squared block norm the s-block radial field is treated as absent
RADIAL_CUTOFF_SQ = 1e-16


@dataclass(frozen=True, eq=False)
class TangentVector:
    """a^alpha Z_alpha + b^alpha Z_alphabar + c T at a base point."""

    hol: np.ndarray
    antihol: np.ndarray
    t_comp: complex
    base: SurfacePoint

    def __post_init__(self):
        hol = np.asarray(self.hol, dtype=np.complex128).reshape(-1)
        anti = np.asarray(self.antihol, dtype=np.complex128).reshape(-1)
        object.__setattr__(self, "hol", hol)
        object.__setattr__(self, "antihol", anti)
        object.__setattr__(self, "t_comp", complex(self.t_comp))

    @classmethod
    def holomorphic(cls, base: SurfacePoint, coeffs) -> "TangentVector":
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        return cls(hol=coeffs, antihol=np.zeros_like(coeffs), t_comp=0.0, base=base)

    @classmethod
    def characteristic(cls, base: SurfacePoint, n: int) -> "TangentVector":
        zero = np.zeros(n, dtype=np.complex128)
        return cls(hol=zero, antihol=zero.copy(), t_comp=1.0, base=base)

    def is_type10(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.abs(self.hol).max(initial=0.0)))
        return (
            float(np.abs(self.antihol).max(initial=0.0)) <= tol * scale
            and abs(self.t_comp) <= tol * scale
        )

    def conjugate(self) -> "TangentVector":
        return TangentVector(
            hol=np.conj(self.antihol),
            antihol=np.conj(self.hol),
            t_comp=np.conj(self.t_comp),
            base=self.base,
        )

    def __add__(self, other: "TangentVector") -> "TangentVector":
        return TangentVector(
            hol=self.hol + other.hol,
            antihol=self.antihol + other.antihol,
            t_comp=self.t_comp + other.t_comp,
            base=self.base,
        )

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        return self + (-1.0) * other

    def __rmul__(self, scalar) -> "TangentVector":
        return TangentVector(
            hol=scalar * self.hol,
            antihol=scalar * self.antihol,
            t_comp=scalar * self.t_comp,
            base=self.base,
        )


@dataclass(frozen=True, eq=False)
class LeviData:
    """Levi form h_{a b-bar} and its inverse h^{a b-bar} at a point.

    Matrix layout: ``h[a, b] = h_{a b-bar}`` and ``h_inv[a, b] = h^{a b-bar}``
    with the pairing convention h^{a b-bar} h_{g b-bar} = delta^a_g.
    """

    h: np.ndarray
    h_inv: np.ndarray
    base: SurfacePoint


def levi_matrix(sig: Signature, z: np.ndarray) -> np.ndarray:
    """Closed-form Levi matrix 2 m_j q_j^{m_j-1} (I + (m_j-1) zbar z^T / q_j)."""
    z = np.asarray(z, dtype=np.complex128)
    n = sig.total_n
    H = np.zeros((n, n), dtype=np.complex128)
    q = block_norms(sig, z)
    for j, blk in enumerate(sig.blocks):
        m = sig.exponents[j]
        idx = list(blk)
        w = np.conj(z[idx])
        base = np.eye(len(idx), dtype=np.complex128)
        if m != 1.0:
            base = base + (m - 1.0) * np.einsum("a,b->ab", w, np.conj(w)) / q[j]
        H[np.ix_(idx, idx)] = 2.0 * m * q[j] ** (m - 1.0) * base
    return H


def levi_inverse_matrix(sig: Signature, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    n = sig.total_n
    G = np.zeros((n, n), dtype=np.complex128)
    q = block_norms(sig, z)
    for j, blk in enumerate(sig.blocks):
        m = sig.exponents[j]
        idx = list(blk)
        v = z[idx]
        base = np.eye(len(idx), dtype=np.complex128)
        if m != 1.0:
            base = base - (m - 1.0) / m * np.einsum("a,b->ab", v, np.conj(v)) / q[j]
        G[np.ix_(idx, idx)] = base / (2.0 * m * q[j] ** (m - 1.0))
    return G


def levi(sig: Signature, point: SurfacePoint) -> LeviData:
    """Levi form at an admissible point, cross-checked against 2 p_hess."""
    require_admissible(sig, point)
    H = levi_matrix(sig, point.z)
    two_hess = 2.0 * jet(sig, point).hess
    if np.abs(H - two_hess).max() > 1e-9 * max(1.0, np.abs(H).max()):
        raise InadmissiblePoint("closed-form Levi matrix disagrees with 2 p_hess")
    G = levi_inverse_matrix(sig, point.z)
    resid = np.abs(np.einsum("ag,bg->ab", G, H) - np.eye(sig.total_n)).max()
    if resid > 1e-10:
        raise InadmissiblePoint(f"Levi inverse residual {resid:.2e} exceeds 1e-10")
    return LeviData(h=H, h_inv=G, base=point)


def levi_pair(h: np.ndarray, x: np.ndarray, y: np.ndarray) -> complex:
    """L(X, conj Y) for (1,0) coefficient vectors x, y."""
    return complex(np.einsum("a,ab,b->", x, h, np.conj(y)))


def levi_pair_vec(sig: Signature, levi_data: LeviData, U: TangentVector, V: TangentVector) -> complex:
    if not (U.is_type10() and V.is_type10()):
        raise TypeMismatch("Levi pairing defined here for (1,0) inputs")
    return levi_pair(levi_data.h, U.hol, V.hol)


def q_coefficients(sig: Signature, z: np.ndarray) -> np.ndarray:
    """Projection coefficients Q_a^b = delta - zbar^a z^b / |z_j|^2 per block.

    When the last block vanishes its radial field is absent from the
    projection, leaving the identity on that block.
    """
    z = np.asarray(z, dtype=np.complex128)
    n = sig.total_n
    QC = np.eye(n, dtype=np.complex128)
    q = block_norms(sig, z)
    for j, blk in enumerate(sig.blocks):
        if q[j] <= RADIAL_CUTOFF_SQ:
            continue
        idx = list(blk)
        w = np.conj(z[idx])
        QC[np.ix_(idx, idx)] -= np.einsum("a,b->ab", w, np.conj(w)) / q[j]
    return QC


@dataclass(frozen=True, eq=False)
class FrameDecomposition:
    """Radial basis, per-block tangential bases, and projection coefficients.

    ``W_bases[j]`` is a Levi-orthonormal basis of the block-j tangential
    subspace extracted from the spanning fields W_a = Q(Z_a); ``E_basis``
    holds the (unnormalized) radial fields that exist at the point;
    ``ew_basis`` is a Levi-orthonormal basis of the cone block W_s + E.
    """

    E_basis: tuple
    W_bases: tuple
    Q_coeff: np.ndarray
    levi: LeviData
    ew_basis: tuple


def _gram_schmidt(h: np.ndarray, vectors, drop_tol: float = 1e-10):
    """Levi-orthonormalize coefficient vectors, dropping dependent ones."""
    out = []
    for v in vectors:
        v = np.array(v, dtype=np.complex128)
        for u in out:
            v = v - levi_pair(h, v, u) * u
        nrm2 = levi_pair(h, v, v).real
        if nrm2 > drop_tol:
            out.append(v / np.sqrt(nrm2))
    return out


def frame_fields(sig: Signature, point: SurfacePoint) -> FrameDecomposition:
    require_admissible(sig, point)
    ld = levi(sig, point)
    n = sig.total_n
    q = block_norms(sig, point.z)
    QC = q_coefficients(sig, point.z)

    e_vectors = []
    for j, blk in enumerate(sig.blocks):
        if q[j] <= RADIAL_CUTOFF_SQ:
            continue
        coeff = np.zeros(n, dtype=np.complex128)
        idx = list(blk)
        coeff[idx] = point.z[idx] / sig.exponents[j]
        e_vectors.append(TangentVector.holomorphic(point, coeff))

    w_bases = []
    for j, blk in enumerate(sig.blocks):
        spanning = [QC[a] for a in blk]
        basis = _gram_schmidt(ld.h, spanning)
        expected = len(blk) - (1 if q[j] > RADIAL_CUTOFF_SQ else 0)
        if len(basis) != expected:
            raise RankDeficiency(
                f"block {j + 1}: tangential rank {len(basis)}, expected {expected}"
            )
        w_bases.append(tuple(TangentVector.holomorphic(point, v) for v in basis))

    # W_s + E is spanned by all radial fields together with the s-block
    # tangential fields; the radial fields are already mutually orthogonal
    ew = [
        TangentVector.holomorphic(
            point, ev.hol / np.sqrt(levi_pair(ld.h, ev.hol, ev.hol).real)
        )
        for ev in e_vectors
    ]
    ew.extend(w_bases[-1])
    return FrameDecomposition(
        E_basis=tuple(e_vectors),
        W_bases=tuple(w_bases),
        Q_coeff=QC,
        levi=ld,
        ew_basis=tuple(ew),
    )


def q_flat(sig: Signature, point: SurfacePoint, U: TangentVector, V: TangentVector) -> complex:
    """Hermitian form L(Q(U), conj V) on (1,0) vectors."""
    if not (U.is_type10() and V.is_type10()):
        raise TypeMismatch("q_flat requires (1,0) vectors")
    ld = levi(sig, point)
    QC = q_coefficients(sig, point.z)
    qu = U.hol @ QC
    return levi_pair(ld.h, qu, V.hol)


# --------------------------------------------------------------------------
# named frame fields and numeric Lie brackets
# --------------------------------------------------------------------------

_FIELD_KINDS = ("Z", "Zbar", "E", "Ebar", "W", "Wbar", "T")


@dataclass(frozen=True)
class FieldSpec:
    """A named frame field: Z/Zbar/W/Wbar take a 0-based coordinate index,
    E/Ebar a 0-based block index, T none."""

    kind: str
    index: int = -1

    def __post_init__(self):
        if self.kind not in _FIELD_KINDS:
            raise UnsupportedField(f"unknown field kind {self.kind!r}")


def _field_coords(sig: Signature, spec: FieldSpec, z: np.ndarray, t: float) -> np.ndarray:
    """Coordinate components (dz, dzbar, dt) of a named field at (z, t)."""
    n = sig.total_n
    out = np.zeros(2 * n + 1, dtype=np.complex128)
    kind, i = spec.kind, spec.index
    if kind == "T":
        out[2 * n] = 1.0
        return out
    if kind in ("Z", "Zbar", "W", "Wbar") and not (0 <= i < n):
        raise UnsupportedField(f"coordinate index {i} out of range")
    if kind in ("E", "Ebar") and not (0 <= i < sig.s):
        raise UnsupportedField(f"block index {i} out of range")
    pg = p_grad(sig, z)
    if kind == "Z":
        out[i] = 1.0
        out[2 * n] = 1j * pg[i]
    elif kind == "Zbar":
        out[n + i] = 1.0
        out[2 * n] = -1j * np.conj(pg[i])
    elif kind == "E":
        blk = sig.blocks[i]
        m = sig.exponents[i]
        q = block_norms(sig, z)[i]
        out[list(blk)] = z[list(blk)] / m
        out[2 * n] = 1j * q ** m
    elif kind == "Ebar":
        blk = sig.blocks[i]
        m = sig.exponents[i]
        q = block_norms(sig, z)[i]
        out[[n + a for a in blk]] = np.conj(z[list(blk)]) / m
        out[2 * n] = -1j * q ** m
    elif kind == "W":
        QC = q_coefficients(sig, z)
        out[:n] = QC[i]
    elif kind == "Wbar":
        QC = q_coefficients(sig, z)
        out[n : 2 * n] = np.conj(QC[i])
    return out


def _coords_to_vector(sig: Signature, point: SurfacePoint, comps: np.ndarray) -> TangentVector:
    n = sig.total_n
    a, b, r = comps[:n], comps[n : 2 * n], comps[2 * n]
    pg = p_grad(sig, point.z)
    c = r - 1j * np.sum(a * pg) + 1j * np.sum(b * np.conj(pg))
    return TangentVector(hol=a, antihol=b, t_comp=c, base=point)


def lie_bracket(
    sig: Signature,
    point: SurfacePoint,
    X: FieldSpec,
    Y: FieldSpec,
    step: float = 1e-5,
) -> TangentVector:
    """[X, Y] by finite differences of the coefficient functions on the chart."""
    require_admissible(sig, point)
    n = sig.total_n
    z0, t0 = point.z, point.t

    def coords(spec):
        return lambda z, t: _field_coords(sig, spec, z, t)

    cx, cy = coords(X), coords(Y)

    def directional(fun, direction):
        # derivative of each coefficient component along a complexified vector
        dz, dzb, dt = direction[:n], direction[n : 2 * n], direction[2 * n]
        total = np.zeros(2 * n + 1, dtype=np.complex128)
        for a in range(n):
            if dz[a] == 0 and dzb[a] == 0:
                continue
            e = np.zeros(n, dtype=np.complex128)
            e[a] = step
            fx = (fun(z0 + e, t0) - fun(z0 - e, t0)) / (2 * step)
            fy = (fun(z0 + 1j * e, t0) - fun(z0 - 1j * e, t0)) / (2 * step)
            da = 0.5 * (fx - 1j * fy)
            dab = 0.5 * (fx + 1j * fy)
            total += dz[a] * da + dzb[a] * dab
        if dt != 0:
            total += dt * (fun(z0, t0 + step) - fun(z0, t0 - step)) / (2 * step)
        return total

    x0 = cx(z0, t0)
    y0 = cy(z0, t0)
    comps = directional(cy, x0) - directional(cx, y0)
    return _coords_to_vector(sig, point, comps)


def closed_bracket(
    sig: Signature, point: SurfacePoint, X: FieldSpec, Y: FieldSpec
) -> TangentVector | None:
    """Displayed closed forms for brackets of the named fields, where known."""
    n = sig.total_n
    pj = jet(sig, point)
    q = block_norms(sig, point.z)

    def t_vector(coeff):
        return TangentVector(
            hol=np.zeros(n), antihol=np.zeros(n), t_comp=coeff, base=point
        )

    if X.kind == "T" or Y.kind == "T":
        other = Y if X.kind == "T" else X
        if other.kind in _FIELD_KINDS:
            return t_vector(0.0)
    if X.kind == "Z" and Y.kind == "Zbar":
        return t_vector(-2j * pj.hess[X.index, Y.index])
    if X.kind == "Zbar" and Y.kind == "Z":
        return t_vector(2j * pj.hess[Y.index, X.index])
    if X.kind == "Z" and Y.kind == "Z":
        return t_vector(0.0)
    if X.kind == "Zbar" and Y.kind == "Zbar":
        return t_vector(0.0)
    if X.kind == "E" and Y.kind == "Ebar":
        mj = sig.exponents[X.index]
        val = -2j * q[X.index] ** mj if X.index == Y.index else 0.0
        return t_vector(val)
    if X.kind == "Ebar" and Y.kind == "E":
        mj = sig.exponents[Y.index]
        val = 2j * q[Y.index] ** mj if X.index == Y.index else 0.0
        return t_vector(val)
    if X.kind == "E" and Y.kind == "Zbar":
        if X.index <= sig.s - 2 and sig.block_of[Y.index] == sig.s - 1:
            return t_vector(0.0)
    if X.kind == "Zbar" and Y.kind == "E":
        if Y.index <= sig.s - 2 and sig.block_of[X.index] == sig.s - 1:
            return t_vector(0.0)
    return None
