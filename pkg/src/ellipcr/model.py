"""Defining function of the generalized ellipsoid and its exact derivative jets.

The defining function is p(z, conj z) = sum_j |z_j|^{2 m_j} + |z_s|^2.  All
derivatives through fourth order have closed forms (p is polynomial in the
real chart coordinates); finite differences exist only as a test oracle.
Wirtinger convention throughout: d/dz = (d/dx - i d/dy) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BranchFailure
from .signature import Signature, SurfacePoint, block_norms, require_admissible


@dataclass(frozen=True, eq=False)
class PJet:
    """Exact jet of the defining function at one point.

    Index layout (alpha, beta, lambda, mu): holomorphic slots alpha, lambda;
    antiholomorphic slots beta, mu.  ``hess[a, b]`` is p_{a b-bar},
    ``third[a, b, l]`` is p_{a b-bar l}, ``fourth[a, b, l, m]`` is
    p_{a b-bar l m-bar}.  Mixed-block entries vanish identically.
    """

    p: float
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray
    fourth: np.ndarray


def _block_arrays(sig: Signature):
    starts = np.array([blk.start for blk in sig.blocks], dtype=np.int64)
    stops = np.array([blk.stop for blk in sig.blocks], dtype=np.int64)
    exps = np.array(sig.exponents, dtype=np.float64)
    return starts, stops, exps


def jet(sig: Signature, point: SurfacePoint) -> PJet:
    """Exact analytic derivatives of p at an admissible point."""
    require_admissible(sig, point)
    starts, stops, exps = _block_arrays(sig)
    p, grad, hess, third, fourth = _kernels.pjet_core(
        np.ascontiguousarray(point.z), starts, stops, exps
    )
    return PJet(p=float(p), grad=grad, hess=hess, third=third, fourth=fourth)


def p_value(sig: Signature, z: np.ndarray) -> float:
    q = block_norms(sig, z)
    return float(np.sum(q ** np.asarray(sig.exponents)))


def p_grad(sig: Signature, z: np.ndarray) -> np.ndarray:
    """p_alpha = m_j q_j^{m_j - 1} conj(z^alpha) on block j."""
    z = np.asarray(z, dtype=np.complex128)
    g = np.zeros(sig.total_n, dtype=np.complex128)
    q = block_norms(sig, z)
    for j, blk in enumerate(sig.blocks):
        m = sig.exponents[j]
        idx = list(blk)
        g[idx] = m * q[j] ** (m - 1.0) * np.conj(z[idx])
    return g


def pure_hess(sig: Signature, z: np.ndarray) -> np.ndarray:
    """Second derivative p_{alpha beta} in two holomorphic slots."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.zeros((sig.total_n, sig.total_n), dtype=np.complex128)
    q = block_norms(sig, z)
    for j, blk in enumerate(sig.blocks):
        m = sig.exponents[j]
        if m < 2:
            continue
        idx = list(blk)
        f2 = m * (m - 1.0) * q[j] ** (m - 2.0)
        w = np.conj(z[idx])
        out[np.ix_(idx, idx)] = f2 * np.einsum("a,b->ab", w, w)
    return out


def height(sig: Signature, point: SurfacePoint) -> complex:
    """Ambient coordinate z^{n+1} = t + i p of a chart point."""
    return complex(point.t, p_value(sig, point.z))


def to_ambient(sig: Signature, point: SurfacePoint) -> np.ndarray:
    """(z, z^{n+1}) in C^{n+1}."""
    return np.concatenate([point.z, [height(sig, point)]])


def from_ambient(sig: Signature, w: np.ndarray, tol: float = 1e-10) -> SurfacePoint:
    """Chart point of an ambient vector; checks the on-surface residual."""
    w = np.asarray(w, dtype=np.complex128)
    z = w[: sig.total_n]
    res = abs(float(np.imag(w[-1])) - p_value(sig, z))
    if res > tol * max(1.0, abs(w[-1])):
        raise BranchFailure(f"ambient point off the surface by {res:.3e}")
    return SurfacePoint(z=z, t=float(np.real(w[-1])))


def to_bounded(sig: Signature, point: SurfacePoint) -> np.ndarray:
    """Image of a surface point on the boundary of the bounded ellipsoid.

    Componentwise 2^{1/m_j} z_j / (i + z^{n+1})^{1/m_j} on each block and
    (i - z^{n+1}) / (i + z^{n+1}) on the last slot; principal branch of the
    fractional powers (i + z^{n+1} has positive imaginary part on the
    closure of the domain, so the cut along the non-positive reals is never
    approached except at -i).
    """
    require_admissible(sig, point)
    zn1 = height(sig, point)
    den = 1j + zn1
    if abs(den) < 1e-12:
        raise BranchFailure(f"|i + z^(n+1)| = {abs(den):.2e} too small")
    w = np.zeros(sig.total_n + 1, dtype=np.complex128)
    for j, blk in enumerate(sig.blocks):
        m = sig.exponents[j]
        idx = list(blk)
        w[idx] = 2.0 ** (1.0 / m) * point.z[idx] / den ** (1.0 / m)
    w[-1] = (1j - zn1) / den
    return w


def bounded_residual(sig: Signature, w: np.ndarray) -> float:
    """Defect of the bounded-ellipsoid defining equation at w."""
    w = np.asarray(w, dtype=np.complex128)
    total = abs(w[-1]) ** 2
    for j, blk in enumerate(sig.blocks):
        m = sig.exponents[j]
        total += float(np.sum(np.abs(w[list(blk)]) ** 2)) ** m
    return abs(total - 1.0)
