"""Tanaka-Webster connection, curvature, torsion, and the Chern tensor.

Every tensor is computed along two independent routes: direct differentiation
of the Levi form using exact jets of the defining function, and the block
closed forms.  Index layout of 4-tensors is [alpha][beta-bar][lambda][mu-bar];
indices are raised with the first-slot convention u^g = h^{g b-bar} u_{b-bar}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ZeroVector
from .frame import TangentVector, levi_inverse_matrix, levi_matrix, levi_pair, q_coefficients
from .model import jet
from .signature import Signature, SurfacePoint, block_norms, require_admissible

STRUCTURAL_ZERO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConnectionCoeffs:
    """Christoffel symbols gamma[l, a, s] = Gamma_{l a}^s = h^{s g-bar} d_l h_{a g-bar}.

    Mixed covariant derivatives vanish (nabla_{Z_a} Z_b-bar = 0, nabla T = 0),
    so these coefficients carry the whole connection.  They vanish whenever
    the lower indices sit in different blocks.
    """

    gamma: np.ndarray
    base: SurfacePoint


@dataclass(frozen=True, eq=False)
class CurvatureData:
    """Curvature package at one point.

    riem[a, b, l, m] = R_{a b-bar l m-bar}; ricci[a, m] = R_{a m-bar};
    scalar = h^{a m-bar} R_{a m-bar}; torsion[a, b] = A_{a b} (identically
    zero on this model); chern[a, b, l, m] = S_{a b-bar l m-bar}.
    """

    riem: np.ndarray
    ricci: np.ndarray
    scalar: float
    torsion: np.ndarray
    chern: np.ndarray
    base: SurfacePoint


def connection(sig: Signature, point: SurfacePoint) -> ConnectionCoeffs:
    require_admissible(sig, point)
    pj = jet(sig, point)
    G = levi_inverse_matrix(sig, point.z)
    gamma = 2.0 * np.einsum("sg,agl->las", G, pj.third)
    return ConnectionCoeffs(gamma=gamma, base=point)


def webster_chern(h: np.ndarray, riem: np.ndarray, ricci: np.ndarray, scalar: float) -> np.ndarray:
    """Trace-adjusted curvature built from the pseudohermitian tensors."""
    n = h.shape[0]
    S = riem - (
        np.einsum("ab,lm->ablm", h, ricci)
        + np.einsum("lb,am->ablm", h, ricci)
        + np.einsum("am,lb->ablm", h, ricci)
        + np.einsum("lm,ab->ablm", h, ricci)
    ) / (n + 2) + scalar * (
        np.einsum("ab,lm->ablm", h, h) + np.einsum("lb,am->ablm", h, h)
    ) / ((n + 1) * (n + 2))
    return S


def _torsion_numeric(sig: Signature, point: SurfacePoint, h: np.ndarray) -> np.ndarray:
    """A_{a b} assembled from its definition.

    With nabla T = 0 the torsion of Z_a reduces to the part of the numeric
    bracket [T, Z_a] outside T^{1,0}; the frame coefficients are
    t-independent so this vanishes up to finite-difference noise.
    """
    from .frame import FieldSpec, lie_bracket

    n = sig.total_n
    A = np.zeros((n, n), dtype=np.complex128)
    for a in range(n):
        br = lie_bracket(sig, point, FieldSpec("T"), FieldSpec("Z", a))
        # tau(Z_a) = pi_+([T, Z_a]) - [T, Z_a]; pair its antiholomorphic part
        for b in range(n):
            A[a, b] = np.sum(br.antihol * h[b])
    return A


def curvature_numeric(sig: Signature, point: SurfacePoint, with_torsion: bool = False) -> CurvatureData:
    """Curvature by direct differentiation of the Levi form via exact jets."""
    require_admissible(sig, point)
    pj = jet(sig, point)
    H = 2.0 * pj.hess
    G = np.conj(np.linalg.inv(H))
    D3 = 2.0 * np.ascontiguousarray(np.einsum("agl->lag", pj.third))
    D3b = 2.0 * np.ascontiguousarray(np.conj(np.einsum("gam->mag", pj.third)))
    D4 = 2.0 * np.ascontiguousarray(np.einsum("aglm->lmag", pj.fourth))
    R = _kernels.curvature_numeric_core(H, G, D3, D3b, D4)
    ricci = np.einsum("lb,ablm->am", G, R)
    scalar = complex(np.einsum("am,am->", G, ricci))
    torsion = (
        _torsion_numeric(sig, point, H)
        if with_torsion
        else np.zeros((sig.total_n, sig.total_n), dtype=np.complex128)
    )
    return CurvatureData(
        riem=R,
        ricci=ricci,
        scalar=scalar.real,
        torsion=torsion,
        chern=webster_chern(H, R, ricci, scalar.real),
        base=point,
    )


def curvature_closed(sig: Signature, point: SurfacePoint) -> CurvatureData:
    """Curvature from the block closed forms.

    Within block j the 4-tensor is
    -((m_j - 1) / 2 m_j) |z_j|^{-2 m_j} (Q_{l m-bar} Q_{a b-bar} +
    Q_{a m-bar} Q_{l b-bar}); any component with two orthogonal indices
    vanishes, as does anything touching the quadratic block.
    """
    require_admissible(sig, point)
    n = sig.total_n
    H = levi_matrix(sig, point.z)
    G = levi_inverse_matrix(sig, point.z)
    QC = q_coefficients(sig, point.z)
    QF = QC @ H  # Q_{a b-bar} = Q_a^g h_{g b-bar}
    q = block_norms(sig, point.z)
    coeffs = np.zeros(sig.s, dtype=np.float64)
    ricci = np.zeros((n, n), dtype=np.complex128)
    scalar = 0.0
    for j, blk in enumerate(sig.blocks):
        m = sig.exponents[j]
        if m == 1.0:
            continue
        coeffs[j] = -(m - 1.0) / (2.0 * m) * q[j] ** (-m)
        nj = len(blk)
        idx = list(blk)
        ricci[np.ix_(idx, idx)] = nj * coeffs[j] * QF[np.ix_(idx, idx)]
        scalar += -nj * (nj - 1) * (m - 1.0) / (2.0 * m) * q[j] ** (-m)
    R = _kernels.curvature_closed_core(QF, coeffs, sig.block_of)
    torsion = np.zeros((n, n), dtype=np.complex128)
    return CurvatureData(
        riem=R,
        ricci=ricci,
        scalar=scalar,
        torsion=torsion,
        chern=webster_chern(H, R, ricci, scalar),
        base=point,
    )


def chern(sig: Signature, point: SurfacePoint) -> np.ndarray:
    """Chern tensor S_{a b-bar l m-bar} from the closed-form curvature."""
    return curvature_closed(sig, point).chern


def contract4(T: np.ndarray, U, V, Z, W) -> complex:
    """T(U, conj V, Z, conj W) for coefficient vectors in the Z-frame."""
    return complex(
        np.einsum("ablm,a,b,l,m->", T, U, np.conj(V), Z, np.conj(W))
    )


def sectional(sig: Signature, point: SurfacePoint, V: TangentVector) -> float:
    """Pseudohermitian sectional curvature R(V, Vbar, V, Vbar) / |V|^4."""
    if not V.is_type10():
        raise ZeroVector("sectional curvature takes a (1,0) vector")
    H = levi_matrix(sig, point.z)
    nrm2 = levi_pair(H, V.hol, V.hol).real
    if nrm2 < 1e-16:
        raise ZeroVector("vector has vanishing Levi length")
    R = curvature_closed(sig, point).riem
    val = contract4(R, V.hol, V.hol, V.hol, V.hol)
    return float(val.real) / nrm2**2


def sectional_closed(sig: Signature, point: SurfacePoint, V: TangentVector) -> float:
    """Block formula -|V|^{-4} sum_j ((m_j-1)/m_j) |z_j|^{-2m_j} |V_j|^4.

    Valid for V in the orthogonal complement of the radial bundle.
    """
    if not V.is_type10():
        raise ZeroVector("sectional curvature takes a (1,0) vector")
    H = levi_matrix(sig, point.z)
    nrm2 = levi_pair(H, V.hol, V.hol).real
    if nrm2 < 1e-16:
        raise ZeroVector("vector has vanishing Levi length")
    q = block_norms(sig, point.z)
    total = 0.0
    for j, blk in enumerate(sig.blocks):
        m = sig.exponents[j]
        if m == 1.0:
            continue
        idx = list(blk)
        vj = np.zeros_like(V.hol)
        vj[idx] = V.hol[idx]
        nrm_j = levi_pair(H, vj, vj).real
        total -= (m - 1.0) / m * q[j] ** (-m) * nrm_j**2
    return total / nrm2**2
