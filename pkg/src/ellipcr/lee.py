"""Covariant scalar jets and the transformation laws of the invariants.

The inverse CR factor u = 1/lambda of a CR map satisfies coupled identities
relating Ricci, torsion, scalar curvature, and the Chern tensor at a point
and at its image.  This module evaluates those identities numerically:
frame derivatives come from chart finite differences assembled with exact
jets of the defining function, curvature values from the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import connection, curvature_closed
from .errors import EvaluationFailure
from .frame import levi_inverse_matrix, levi_matrix, q_coefficients
from .maps import (
    MapDescriptor,
    as_oracle,
    cr_factor_from_chart,
    pushforward_matrix,
)
from .model import jet, p_grad, p_value, pure_hess
from .signature import Signature, SurfacePoint, block_norms, require_admissible

FIRST_STEP = 1e-5
SECOND_STEP = 2e-3


@dataclass(frozen=True, eq=False)
class ScalarJet:
    """Covariant derivatives of a scalar function through second order.

    ``d_hol[a]`` is the frame derivative Z_a u, ``d_anti[a]`` is Z_abar u,
    ``d_t`` is Tu.  ``cov2[a, b]`` is the second covariant derivative in two
    holomorphic slots (with the Christoffel correction), ``cov2_mixed[a, b]``
    the mixed one Z_bbar Z_a u (no correction).  The Laplacian sums both
    mixed orders; the gradient square pairs d_hol against d_anti.
    """

    value: complex
    d_hol: np.ndarray
    d_anti: np.ndarray
    d_t: complex
    cov2: np.ndarray
    cov2_mixed: np.ndarray
    laplacian: complex
    grad_sq: complex
    zt_hess: np.ndarray  # raw chart second derivatives d_t d_a (diagnostics)
    t2: complex


def _chart_jet2(fun, z0: np.ndarray, t0: float, h1: float, h2: float, richardson: bool):
    n = len(z0)
    nn = 2 * n + 1
    x0 = np.concatenate([z0.real, z0.imag, [t0]])

    def ev(dx):
        x = x0 + dx
        zz = x[:n] + 1j * x[n : 2 * n]
        try:
            return complex(fun(zz, float(x[2 * n])))
        except Exception as exc:  # surface the offending displacement
            raise EvaluationFailure(f"scalar handle failed off-center: {exc}") from exc

    f0 = ev(np.zeros(nn))
    grad = np.zeros(nn, dtype=np.complex128)
    for i in range(nn):
        e = np.zeros(nn)
        e[i] = h1
        grad[i] = (ev(e) - ev(-e)) / (2 * h1)

    def hess_at(h):
        H = np.zeros((nn, nn), dtype=np.complex128)
        for i in range(nn):
            e = np.zeros(nn)
            e[i] = h
            H[i, i] = (ev(e) - 2 * f0 + ev(-e)) / h**2
        for i in range(nn):
            for j in range(i + 1, nn):
                ei = np.zeros(nn)
                ej = np.zeros(nn)
                ei[i] = h
                ej[j] = h
                H[i, j] = (ev(ei + ej) - ev(ei - ej) - ev(-ei + ej) + ev(-ei - ej)) / (
                    4 * h**2
                )
                H[j, i] = H[i, j]
        return H

    if richardson:
        hess = (4.0 * hess_at(h2 / 2) - hess_at(h2)) / 3.0
    else:
        hess = hess_at(h2)
    return f0, grad, hess


def scalar_jet(
    sig: Signature,
    point: SurfacePoint,
    fun,
    first_step: float = FIRST_STEP,
    second_step: float = SECOND_STEP,
    richardson: bool = True,
) -> ScalarJet:
    """Covariant 2-jet of a chart function ``fun(z, t)`` at a point.

    Chart derivatives are central differences (Richardson-extrapolated at
    second order to stay below the identity tolerances); the assembly into
    frame and covariant derivatives uses exact jets of the defining function.
    """
    require_admissible(sig, point)
    n = sig.total_n
    f0, grad, hess = _chart_jet2(
        fun, point.z, point.t, first_step, second_step, richardson
    )
    ux, uy, ut = grad[:n], grad[n : 2 * n], grad[2 * n]
    du = 0.5 * (ux - 1j * uy)
    dub = 0.5 * (ux + 1j * uy)
    Hxx = hess[:n, :n]
    Hyy = hess[n : 2 * n, n : 2 * n]
    Hxy = hess[:n, n : 2 * n]
    Htx = hess[2 * n, :n]
    Hty = hess[2 * n, n : 2 * n]
    Htt = hess[2 * n, 2 * n]
    d2 = 0.25 * (Hxx - Hyy - 1j * (Hxy + Hxy.T))
    d2m = 0.25 * (Hxx + Hyy + 1j * (Hxy - Hxy.T))
    dt_a = 0.5 * (Htx - 1j * Hty)

    pg = p_grad(sig, point.z)
    P2 = pure_hess(sig, point.z)
    P2m = jet(sig, point).hess
    u_a = du + 1j * pg * ut
    u_ab = dub - 1j * np.conj(pg) * ut
    ZZ = (
        d2
        + 1j * P2 * ut
        + 1j * np.einsum("a,b->ab", pg, dt_a)
        + 1j * np.einsum("b,a->ab", pg, dt_a)
        - np.einsum("a,b->ab", pg, pg) * Htt
    )
    ZZb = (
        d2m
        + 1j * P2m * ut
        + 1j * np.einsum("a,b->ab", pg, np.conj(dt_a))
        - 1j * np.einsum("b,a->ab", np.conj(pg), dt_a)
        + np.einsum("a,b->ab", pg, np.conj(pg)) * Htt
    )
    gamma = connection(sig, point).gamma
    cov2 = ZZ - np.einsum("bas,s->ab", gamma, u_a)
    H = levi_matrix(sig, point.z)
    G = levi_inverse_matrix(sig, point.z)
    mixed_other = ZZb - 1j * H * ut  # u_{,bbar a}
    lap = complex(np.einsum("gb,gb->", G, ZZb) + np.einsum("gb,gb->", G, mixed_other))
    grad_sq = complex(np.einsum("gb,g,b->", G, u_a, u_ab))
    return ScalarJet(
        value=f0,
        d_hol=u_a,
        d_anti=u_ab,
        d_t=complex(ut),
        cov2=cov2,
        cov2_mixed=ZZb,
        laplacian=lap,
        grad_sq=grad_sq,
        zt_hess=dt_a,
        t2=complex(Htt),
    )


def inverse_factor_handle(sig: Signature, target):
    """u = 1/lambda as a chart function handle for a map or oracle."""
    oracle = as_oracle(sig, target)

    def u_fun(z, t):
        P = SurfacePoint(z=z, t=t)
        image, cj = oracle.chart_jacobian(P)
        return 1.0 / cr_factor_from_chart(sig, image, cj)

    return u_fun


@dataclass(frozen=True, eq=False)
class LeeReport:
    ricci_residual: float
    ricci_scale: float
    torsion_residual: float
    torsion_scale: float
    scalar_residual: float
    scalar_scale: float
    tol: float

    @property
    def worst(self) -> float:
        return max(
            self.ricci_residual / self.ricci_scale,
            self.torsion_residual / self.torsion_scale,
            self.scalar_residual / self.scalar_scale,
        )

    @property
    def ok(self) -> bool:
        return self.worst <= self.tol


def check_lee(
    sig: Signature,
    desc: MapDescriptor,
    point: SurfacePoint,
    tol: float = 1e-6,
) -> LeeReport:
    """Residuals of the Ricci / torsion / contracted-scalar transformation laws.

    The left-hand sides evaluate closed-form curvature at the image on
    pushforwards; the right-hand sides combine curvature at the point with
    covariant derivatives of u = 1/lambda.
    """
    require_admissible(sig, point)
    n = sig.total_n
    sj = scalar_jet(sig, point, inverse_factor_handle(sig, desc))
    u = sj.value.real
    image, C = pushforward_matrix(sig, desc, point)
    cd_img = curvature_closed(sig, image)
    cd_pt = curvature_closed(sig, point)
    H = levi_matrix(sig, point.z)

    lhs = np.einsum("ca,cd,db->ab", C, cd_img.ricci, np.conj(C))
    mixed = sj.cov2_mixed
    mixed_other = mixed - 1j * H * sj.d_t
    corr1 = (n + 2) / (2 * u) * (
        mixed + mixed_other - (2.0 / u) * np.einsum("a,b->ab", sj.d_hol, sj.d_anti)
    )
    corr2 = (1.0 / (2 * u)) * (sj.laplacian - 2 * (n + 2) / u * sj.grad_sq) * H
    rhs = cd_pt.ricci + corr1 + corr2
    scale = max(1.0, float(np.abs(lhs).max()), float(np.abs(rhs).max()))
    ricci_residual = float(np.abs(lhs - rhs).max())

    # scale of the torsion identity: size of the pieces before cancellation
    gam = connection(sig, point).gamma
    gterm = np.einsum("bas,s->ab", gam, sj.d_hol)
    torsion_scale = max(
        1.0,
        float(np.abs(sj.cov2 + gterm).max()) / u,
        float(np.abs(gterm).max()) / u,
    )
    torsion_residual = float(np.abs(sj.cov2 / u).max())

    lam = 1.0 / u
    lhs_s = lam * cd_img.scalar
    rhs_s = cd_pt.scalar + (n + 1) * lam * (
        sj.laplacian.real - (n + 2) * lam * sj.grad_sq.real
    )
    scalar_scale = max(1.0, abs(lhs_s), abs(cd_pt.scalar))
    scalar_residual = abs(lhs_s - rhs_s)

    return LeeReport(
        ricci_residual=ricci_residual,
        ricci_scale=scale,
        torsion_residual=torsion_residual,
        torsion_scale=torsion_scale,
        scalar_residual=scalar_residual,
        scalar_scale=scalar_scale,
        tol=tol,
    )


@dataclass(frozen=True, eq=False)
class ChernInvarianceReport:
    tensor_residual: float
    sample_residual: float
    scale: float
    tol: float

    @property
    def ok(self) -> bool:
        return max(self.tensor_residual, self.sample_residual) <= self.tol * self.scale


def check_chern_invariance(
    sig: Signature,
    desc: MapDescriptor,
    point: SurfacePoint,
    quad_samples: int = 20,
    seed: int = 42,
    tol: float = 1e-6,
) -> ChernInvarianceReport:
    """S(f_* .) = lambda S(.) on the full frame basis and random quadruples."""
    from .maps import cr_factor

    require_admissible(sig, point)
    image, C = pushforward_matrix(sig, desc, point)
    lam = cr_factor(sig, desc, point, check=False)
    S_pt = curvature_closed(sig, point).chern
    S_img = curvature_closed(sig, image).chern
    lhs = np.einsum("ABLM,Aa,Bb,Ll,Mm->ablm", S_img, C, np.conj(C), C, np.conj(C))
    rhs = lam * S_pt
    scale = max(1.0, float(np.abs(rhs).max()))
    tensor_residual = float(np.abs(lhs - rhs).max())
    rng = np.random.default_rng(seed)
    n = sig.total_n
    sample_residual = 0.0
    for _ in range(quad_samples):
        vs = rng.normal(size=(4, n)) + 1j * rng.normal(size=(4, n))
        l = np.einsum(
            "ablm,a,b,l,m->", lhs, vs[0], np.conj(vs[1]), vs[2], np.conj(vs[3])
        )
        r = np.einsum(
            "ablm,a,b,l,m->", rhs, vs[0], np.conj(vs[1]), vs[2], np.conj(vs[3])
        )
        sample_residual = max(
            sample_residual, abs(l - r) / max(1.0, abs(r))
        )
    return ChernInvarianceReport(
        tensor_residual=tensor_residual,
        sample_residual=sample_residual,
        scale=scale,
        tol=tol,
    )


@dataclass(frozen=True, eq=False)
class CrFunctionReport:
    cov2_residual: float
    commutation_residual: float
    contracted_residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return (
            max(
                self.cov2_residual,
                self.commutation_residual,
                self.contracted_residual,
            )
            <= self.tol
        )


def cr_affine_function(sig: Signature, k: float, a_s: np.ndarray, t0: float):
    """v = k (z^{n+1} + a^{n+1} + 2i z_s . conj a_s) as a chart handle."""
    a_s = np.asarray(a_s, dtype=np.complex128).reshape(-1)
    a_height = complex(t0, float(np.sum(np.abs(a_s) ** 2)))
    sblk = list(sig.blocks[-1])

    def v_fun(z, t):
        zn1 = t + 1j * p_value(sig, z)
        return k * (zn1 + a_height + 2j * np.sum(z[sblk] * np.conj(a_s)))

    return v_fun


def check_cr_function_identities(
    sig: Signature,
    point: SurfacePoint,
    k: float,
    a_s,
    t0: float,
    tol: float = 1e-7,
) -> CrFunctionReport:
    """Identities satisfied by the affine CR family: flat second covariant
    derivatives, the third-order commutation identity tying Z_a T v to W_a v,
    and the contracted first-order equation."""
    require_admissible(sig, point)
    v_fun = cr_affine_function(sig, k, np.asarray(a_s, complex), t0)
    sj = scalar_jet(sig, point, v_fun)
    n = sig.total_n
    scale = max(1.0, abs(k))
    cov2_residual = float(np.abs(sj.cov2).max()) / scale

    # Z_a T v against the curvature-weighted tangential derivative
    pg = p_grad(sig, point.z)
    lhs = sj.zt_hess + 1j * pg * sj.t2
    QC = q_coefficients(sig, point.z)
    Wv = QC @ sj.d_hol
    q = block_norms(sig, point.z)
    coeff = np.zeros(n, dtype=np.complex128)
    for j, blk in enumerate(sig.blocks):
        m = sig.exponents[j]
        if m == 1.0:
            continue
        nj = len(blk)
        coeff[list(blk)] = nj * (m - 1.0) / (2j * m * (n + 1) * q[j] ** m)
    commutation_residual = float(np.abs(lhs - coeff * Wv).max()) / scale

    G = levi_inverse_matrix(sig, point.z)
    lhs_c = 1j * (np.conj(sj.value) * sj.d_t - sj.value * np.conj(sj.d_t))
    rhs_c = np.einsum("gm,g,m->", G, sj.d_hol, np.conj(sj.d_hol))
    contracted_residual = abs(lhs_c - rhs_c) / max(1.0, abs(rhs_c))
    return CrFunctionReport(
        cov2_residual=cov2_residual,
        commutation_residual=commutation_residual,
        contracted_residual=contracted_residual,
        tol=tol,
    )


def factor_w_annihilation(
    sig: Signature, desc: MapDescriptor, point: SurfacePoint, step: float = 1e-5
) -> float:
    """max |W_a lambda| over the strict blocks; vanishes for block-preserving maps."""
    require_admissible(sig, point)
    oracle = as_oracle(sig, desc)

    def lam_fun(z, t):
        P = SurfacePoint(z=z, t=t)
        image, cj = oracle.chart_jacobian(P)
        return cr_factor_from_chart(sig, image, cj)

    n = sig.total_n
    z0, t0 = point.z, point.t
    dz = np.zeros(n, dtype=np.complex128)
    for a in range(n):
        e = np.zeros(n, dtype=np.complex128)
        e[a] = step
        fx = (lam_fun(z0 + e, t0) - lam_fun(z0 - e, t0)) / (2 * step)
        fy = (lam_fun(z0 + 1j * e, t0) - lam_fun(z0 - 1j * e, t0)) / (2 * step)
        dz[a] = 0.5 * (fx - 1j * fy)
    dt = (lam_fun(z0, t0 + step) - lam_fun(z0, t0 - step)) / (2 * step)
    frame_d = dz + 1j * p_grad(sig, z0) * dt
    QC = q_coefficients(sig, z0)
    Wlam = QC @ frame_d
    strict = [a for j in range(sig.s - 1) for a in sig.blocks[j]]
    if not strict:
        return 0.0
    return float(np.abs(Wlam[strict]).max())


def scalar_transport_residual(
    sig: Signature, desc: MapDescriptor, point: SurfacePoint
) -> float:
    """|lambda R(f(P)) - R(P)| / scale for block-preserving maps."""
    from .maps import cr_factor

    image, _ = pushforward_matrix(sig, desc, point)
    lam = cr_factor(sig, desc, point, check=False)
    r_img = curvature_closed(sig, image).scalar
    r_pt = curvature_closed(sig, point).scalar
    return abs(lam * r_img - r_pt) / max(1.0, abs(r_pt), abs(lam * r_img))
