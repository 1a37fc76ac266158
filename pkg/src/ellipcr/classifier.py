"""Decision procedure recovering the normal form of a black-box CR map.

Every CR self-map of the model factors as psi . dil_r . J . phi_a with J the
inversion or the identity.  Given only evaluation and chart-Jacobian access,
the stages are: decide whether the CR factor is constant; if not, fit the
inverse factor u = k^2 |z^{n+1} + a^{n+1} + 2i z_s . conj a_s|^2 (exactly
quadratic in t, so the fit is closed-form); divide out dil_{1/k} . inv .
phi_a; and read the residual Levi-isometric factor off one Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BlockRoutingAmbiguous,
    FitFailure,
    MapDomainError,
    NotLeviIsometric,
    ValidationFailure,
)
from .frame import TangentVector, frame_fields, levi_pair
from .maps import (
    BlockUnitary,
    ChartJacobian,
    Dilation,
    Inversion,
    MapDescriptor,
    Translation,
    apply_word,
    as_oracle,
    chart_jacobian_from_ambient,
    cr_factor_from_chart,
    invert_word,
    map_jet,
    push_through_chart,
    validate_generator,
    verify_cr,
)
from .model import height, p_value
from .signature import Signature, SurfacePoint, require_admissible

CONSTANT_SPREAD_TOL = 1e-6
FIT_TOL = 1e-6
ISOMETRY_TOL = 1e-7
UNITARY_DEFECT_TOL = 1e-8
VALIDATION_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class Classification:
    """Recovered normal-form data with its held-out reconstruction error."""

    J: str  # "Identity" | "Inversion"
    r: float
    a_s: np.ndarray
    a_t0: float
    psi: BlockUnitary
    residual: float
    gauge_note: str
    word: MapDescriptor


class ComposedOracle:
    """Oracle for f . g with f an oracle and g a descriptor word."""

    supports_queries = True

    def __init__(self, sig: Signature, outer, inner_desc: MapDescriptor):
        self._sig = sig
        self._outer = outer
        self._inner = inner_desc

    def point(self, P: SurfacePoint) -> SurfacePoint:
        return self._outer.point(apply_word(self._sig, self._inner, P))

    def chart_fun(self, z, t):
        mid = apply_word(self._sig, self._inner, SurfacePoint(z=z, t=t))
        return self._outer.chart_fun(mid.z, mid.t)

    def chart_jacobian(self, P: SurfacePoint):
        mj = map_jet(self._sig, self._inner, P)
        cj_inner = chart_jacobian_from_ambient(self._sig, P, mj.dzeta)
        image, cj_outer = self._outer.chart_jacobian(mj.image)
        return image, cj_outer.compose(cj_inner)


def _factor_at(sig: Signature, oracle, P: SurfacePoint) -> float:
    image, cj = oracle.chart_jacobian(P)
    return cr_factor_from_chart(sig, image, cj)


def _ball_samples(sig, P0, radius, rng, count):
    out = []
    attempts = 0
    while len(out) < count and attempts < 50 * count:
        attempts += 1
        dz = radius * 0.5 * (rng.normal(size=sig.total_n) + 1j * rng.normal(size=sig.total_n))
        dt = radius * float(rng.normal())
        Q = SurfacePoint(z=P0.z + dz, t=P0.t + dt)
        try:
            require_admissible(sig, Q)
        except Exception:
            continue
        out.append(Q)
    if len(out) < count:
        raise MapDomainError("could not sample enough admissible ball points")
    return out


def recover_factor(
    sig: Signature,
    target,
    P0: SurfacePoint,
    radius: float = 0.25,
    seed: int = 42,
    spread_tol: float = CONSTANT_SPREAD_TOL,
    fit_tol: float = FIT_TOL,
):
    """Constant CR factor, or the parameters (k, a_s, t0) of the inverse factor.

    Returns ``("constant", lambda)`` when 20 sampled factors agree to relative
    ``spread_tol``; otherwise fits u = 1/lambda through its exact quadratic
    structure in t (second difference for k^2, one first difference per
    quadratic-block coordinate for the linear part) and validates the fit.
    """
    oracle = as_oracle(sig, target)
    rng = np.random.default_rng(seed)
    samples = _ball_samples(sig, P0, radius, rng, 20)
    lams = np.array([_factor_at(sig, oracle, Q) for Q in samples])
    spread = (lams.max() - lams.min()) / max(abs(lams.mean()), 1e-300)
    if spread < spread_tol:
        return ("constant", float(lams.mean()))

    def u_of(z, t):
        return 1.0 / _factor_at(sig, oracle, SurfacePoint(z=z, t=t))

    z0, t0c = P0.z, P0.t
    ht = max(0.25, 0.1 * (1 + abs(t0c)))
    u_plus = u_of(z0, t0c + ht)
    u_mid = u_of(z0, t0c)
    u_minus = u_of(z0, t0c - ht)
    k2 = (u_plus - 2 * u_mid + u_minus) / (2 * ht**2)
    if not k2 > 0:
        raise FitFailure(f"second difference gave k^2 = {k2:.3e}")
    k = float(np.sqrt(k2))

    def c1_of(z):
        up = u_of(z, t0c + ht)
        um = u_of(z, t0c - ht)
        return (up - um) / (4 * k2 * ht) - t0c

    sblk = list(sig.blocks[-1])
    a_s = np.zeros(len(sblk), dtype=np.complex128)
    hz = 0.2
    for idx, a in enumerate(sblk):
        e = np.zeros(sig.total_n, dtype=np.complex128)
        e[a] = hz
        dc_dx = (c1_of(z0 + e) - c1_of(z0 - e)) / (2 * hz)
        dc_dy = (c1_of(z0 + 1j * e) - c1_of(z0 - 1j * e)) / (2 * hz)
        a_s[idx] = -0.5 * dc_dy + 0.5j * dc_dx
    t0 = float(c1_of(z0) + 2.0 * np.imag(np.sum(z0[sblk] * np.conj(a_s))))

    a_height = complex(t0, float(np.sum(np.abs(a_s) ** 2)))
    worst = 0.0
    biggest = 1.0
    for Q in samples:
        u_pred = k2 * abs(height(sig, Q) + a_height + 2j * np.sum(Q.z[sblk] * np.conj(a_s))) ** 2
        u_true = u_of(Q.z, Q.t)
        worst = max(worst, abs(u_pred - u_true))
        biggest = max(biggest, abs(u_true))
    if worst > fit_tol * biggest:
        raise FitFailure(f"inverse-factor fit residual {worst:.2e} on scale {biggest:.2e}")
    return (k, a_s, t0)


def recover_levi_isometry(
    sig: Signature,
    target,
    P0: SurfacePoint,
    seed: int = 42,
    factor_tol: float = ISOMETRY_TOL,
    routing_tol: float = 1e-8,
) -> BlockUnitary:
    """Normal-form parameters of a map with CR factor identically one.

    Block routing comes from pushing the tangential bases through the chart
    Jacobian; the unitaries are constant Jacobian blocks (polar-projected),
    the affine parts come from the image of the base point.
    """
    oracle = as_oracle(sig, target)
    rng = np.random.default_rng(seed)
    for Q in _ball_samples(sig, P0, 0.2, rng, 8) + [P0]:
        lam = _factor_at(sig, oracle, Q)
        if abs(lam - 1.0) > factor_tol:
            raise NotLeviIsometric(f"CR factor {lam} deviates from 1 at a sample")

    image0, cj = oracle.chart_jacobian(P0)
    fd_pt = frame_fields(sig, P0)
    fd_img = frame_fields(sig, image0)
    h_img = fd_img.levi.h

    def block_mass(u):
        masses = []
        for j in range(sig.s - 1):
            acc = 0.0
            for b in fd_img.W_bases[j]:
                acc += abs(levi_pair(h_img, u, b.hol)) ** 2
            masses.append(acc)
        acc = 0.0
        for b in fd_img.ew_basis:
            acc += abs(levi_pair(h_img, u, b.hol)) ** 2
        masses.append(acc)
        return np.array(masses)

    sigma = [0] * (sig.s - 1)
    for j in range(sig.s - 1):
        carriers = set()
        for v in fd_pt.W_bases[j]:
            pushed = push_through_chart(sig, P0, image0, cj, v)
            mass = block_mass(pushed.hol)
            nrm2 = levi_pair(h_img, pushed.hol, pushed.hol).real
            kbest = int(np.argmax(mass))
            leak = np.sqrt(float(np.sum(mass) - mass[kbest]) / nrm2)
            if leak > routing_tol:
                raise BlockRoutingAmbiguous(
                    f"tangential block {j + 1} spreads across image blocks"
                )
            carriers.add(kbest)
        if len(carriers) != 1 or sig.s - 1 in carriers:
            raise BlockRoutingAmbiguous(f"block {j + 1} carriers: {sorted(carriers)}")
        sigma[j] = carriers.pop() + 1

    B = []
    for j in range(sig.s - 1):
        src = list(sig.blocks[j])
        dst = list(sig.blocks[sigma[j] - 1])
        Bj = np.asarray(cj.jz[np.ix_(dst, src)])
        defect = np.abs(Bj.conj().T @ Bj - np.eye(len(src))).max()
        if defect > UNITARY_DEFECT_TOL:
            raise NotLeviIsometric(f"block {j + 1} Jacobian off unitary by {defect:.2e}")
        u_, _, vh = np.linalg.svd(Bj)
        B.append(u_ @ vh)
    sblk = list(sig.blocks[-1])
    if sblk:
        Bs = np.asarray(cj.jz[np.ix_(sblk, sblk)])
        defect = np.abs(Bs.conj().T @ Bs - np.eye(len(sblk))).max()
        if defect > UNITARY_DEFECT_TOL:
            raise NotLeviIsometric(f"last-block Jacobian off unitary by {defect:.2e}")
        u_, _, vh = np.linalg.svd(Bs)
        Bs = u_ @ vh
        b_s = image0.z[sblk] - Bs @ P0.z[sblk]
    else:
        Bs = None
        b_s = np.zeros(0, dtype=np.complex128)
    b_height = height(sig, image0) - height(sig, P0) - 2j * np.sum(
        (Bs @ P0.z[sblk] if sblk else 0.0) * np.conj(b_s)
    )
    t0 = float(np.real(b_height))
    psi = BlockUnitary(sigma=tuple(sigma), B=tuple(B), B_s=Bs, b_s=b_s, t0=t0)
    validate_generator(sig, psi)
    return psi


def classify(
    sig: Signature,
    target,
    P0: SurfacePoint,
    seed: int = 42,
    validation_points: int = 50,
    validation_tol: float = VALIDATION_TOL,
) -> Classification:
    """Full normal-form recovery with held-out validation.

    The translation gauge is canonicalized: when the CR factor is constant
    the phi stage is redundant against the psi translation, and a = 0 is
    reported with the translation absorbed into psi.
    """
    oracle = as_oracle(sig, target)
    rng = np.random.default_rng(seed)
    pre = verify_cr(sig, oracle, _ball_samples(sig, P0, 0.2, rng, 8))
    if not pre.ok:
        raise ValidationFailure(f"map failed CR verification: {pre.failures}")

    rf = recover_factor(sig, oracle, P0, seed=seed)
    if isinstance(rf, tuple) and rf[0] == "constant":
        lam = rf[1]
        r = float(np.sqrt(lam))
        J = "Identity"
        a_s = np.zeros(sig.n[-1], dtype=np.complex128)
        a_t0 = 0.0
        G = MapDescriptor(word=(Dilation(r=r),))
        gauge_note = (
            "constant factor: translations absorbed into the isometric stage; a = 0"
        )
    else:
        k, a_s, a_t0 = rf
        r = 1.0 / k
        J = "Inversion"
        G = MapDescriptor(
            word=(Dilation(r=r), Inversion(), Translation(a_s=a_s, t0=a_t0))
        )
        gauge_note = "inverse factor fit pins (k, a); r = 1/k"

    g_inv = invert_word(sig, G)
    psi_oracle = ComposedOracle(sig, oracle, g_inv)
    base = apply_word(sig, G, P0)
    psi = recover_levi_isometry(sig, psi_oracle, base, seed=seed)

    word = [psi, Dilation(r=r)]
    if J == "Inversion":
        word.append(Inversion())
        word.append(Translation(a_s=a_s, t0=a_t0))
    recon = MapDescriptor(word=tuple(word))

    worst = 0.0
    for Q in _ball_samples(sig, P0, 0.3, rng, validation_points):
        try:
            expected = oracle.point(Q)
            got = apply_word(sig, recon, Q)
        except MapDomainError:
            continue
        scale = max(1.0, float(np.abs(expected.z).max()), abs(expected.t))
        worst = max(
            worst,
            float(np.abs(expected.z - got.z).max()) / scale,
            abs(expected.t - got.t) / scale,
        )
    if worst > validation_tol:
        raise ValidationFailure(
            f"reconstruction misses the oracle by {worst:.2e} on held-out points"
        )
    return Classification(
        J=J,
        r=r,
        a_s=a_s,
        a_t0=a_t0,
        psi=psi,
        residual=worst,
        gauge_note=gauge_note,
        word=recon,
    )


# --------------------------------------------------------------------------
# tabulated-sample mode
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleRecord:
    point: SurfacePoint
    image: SurfacePoint
    jacobian: ChartJacobian


def classify_from_samples(
    sig: Signature,
    records: list,
    seed: int = 42,
    validation_tol: float = VALIDATION_TOL,
) -> Classification:
    """Classification from tabulated (point, image, chart Jacobian) triples.

    Query-free variant: the inverse factor is fitted globally as a rank-one
    Hermitian quadratic form in (z^{n+1}, z_s, 1), which is exact for the
    model family; the isometric stage is read off composed Jacobians.
    """
    if len(records) < 8:
        raise FitFailure("need at least 8 tabulated samples")
    lams = np.array(
        [cr_factor_from_chart(sig, r.image, r.jacobian) for r in records]
    )
    sblk = list(sig.blocks[-1])
    if (lams.max() - lams.min()) / max(abs(lams.mean()), 1e-300) < CONSTANT_SPREAD_TOL:
        lam = float(lams.mean())
        r = float(np.sqrt(lam))
        J = "Identity"
        a_s = np.zeros(len(sblk), dtype=np.complex128)
        a_t0 = 0.0
        G = MapDescriptor(word=(Dilation(r=r),))
        gauge_note = "constant factor (tabulated); a = 0"
    else:
        k, a_s, a_t0 = _fit_factor_quadratic(sig, records, lams)
        r = 1.0 / k
        J = "Inversion"
        G = MapDescriptor(
            word=(Dilation(r=r), Inversion(), Translation(a_s=a_s, t0=a_t0))
        )
        gauge_note = "inverse factor fitted as rank-one quadratic form (tabulated)"

    g_inv = invert_word(sig, G)
    # chart Jacobian of psi = f . G^{-1} at G(P_i) composes the tabulated
    # Jacobian with the analytic one of G^{-1}
    rec0 = records[0]
    base = apply_word(sig, G, rec0.point)
    mj = map_jet(sig, g_inv, base)
    cj_inner = chart_jacobian_from_ambient(sig, base, mj.dzeta)
    cj_psi = rec0.jacobian.compose(cj_inner)

    psi = _isometry_from_jacobian(sig, base, rec0.image, cj_psi)
    word = [psi, Dilation(r=r)]
    if J == "Inversion":
        word.append(Inversion())
        word.append(Translation(a_s=a_s, t0=a_t0))
    recon = MapDescriptor(word=tuple(word))

    worst = 0.0
    for rec in records:
        got = apply_word(sig, recon, rec.point)
        scale = max(1.0, float(np.abs(rec.image.z).max()), abs(rec.image.t))
        worst = max(
            worst,
            float(np.abs(rec.image.z - got.z).max()) / scale,
            abs(rec.image.t - got.t) / scale,
        )
    if worst > validation_tol:
        raise ValidationFailure(
            f"tabulated reconstruction misses samples by {worst:.2e}"
        )
    return Classification(
        J=J, r=r, a_s=a_s, a_t0=a_t0, psi=psi, residual=worst,
        gauge_note=gauge_note, word=recon,
    )


def _fit_factor_quadratic(sig: Signature, records, lams):
    """Least-squares rank-one fit of u = |k z^{n+1} + c . z_s + d|^2."""
    sblk = list(sig.blocks[-1])
    d = len(sblk) + 2
    rows = []
    rhs = []
    for rec, lam in zip(records, lams):
        y = np.concatenate([[height(sig, rec.point)], rec.point.z[sblk], [1.0]])
        outer = np.einsum("p,q->pq", y, np.conj(y))
        rows.append(np.concatenate([outer.real.reshape(-1), outer.imag.reshape(-1)]))
        rhs.append(1.0 / lam)
    A = np.array(rows)
    b = np.array(rhs)
    # unknown Hermitian X entered as X = Xr + i Xi with Xr symmetric, Xi skew
    sol, *_ = np.linalg.lstsq(
        np.concatenate([A[:, : d * d], -A[:, d * d :]], axis=1), b, rcond=None
    )
    Xr = sol[: d * d].reshape(d, d)
    Xi = sol[d * d :].reshape(d, d)
    X = 0.5 * (Xr + Xr.T) + 0.5j * (Xi - Xi.T)
    evals, evecs = np.linalg.eigh(X)
    if evals[-1] <= 0:
        raise FitFailure("quadratic-form fit is not positive")
    if d > 1 and abs(evals[-2]) > 1e-6 * evals[-1]:
        raise FitFailure(
            f"inverse factor is not rank-one: spectrum tail {evals[:-1]}"
        )
    v = np.sqrt(evals[-1]) * evecs[:, -1]
    v = v * np.exp(-1j * np.angle(v[0]))
    k = float(v[0].real)
    if k <= 0:
        raise FitFailure("leading coefficient k came out non-positive")
    c = v[1:-1]
    dcoef = complex(v[-1])
    a_s = np.conj(c / (2j * k))
    t0 = float((dcoef / k).real)
    im_defect = abs((dcoef / k).imag - float(np.sum(np.abs(a_s) ** 2)))
    if im_defect > 1e-6:
        raise FitFailure(f"height offset inconsistent with |a|^2 by {im_defect:.2e}")
    return k, a_s, t0


def _isometry_from_jacobian(
    sig: Signature, base: SurfacePoint, image: SurfacePoint, cj: ChartJacobian
) -> BlockUnitary:
    """Read psi parameters from one chart Jacobian plus the image point."""
    lam = cr_factor_from_chart(sig, image, cj)
    if abs(lam - 1.0) > ISOMETRY_TOL:
        raise NotLeviIsometric(f"residual map has CR factor {lam}")
    fd_pt = frame_fields(sig, base)
    fd_img = frame_fields(sig, image)
    h_img = fd_img.levi.h
    sigma = [0] * (sig.s - 1)
    for j in range(sig.s - 1):
        carriers = set()
        for v in fd_pt.W_bases[j]:
            pushed = push_through_chart(sig, base, image, cj, v)
            for kblk in range(sig.s - 1):
                acc = sum(
                    abs(levi_pair(h_img, pushed.hol, b.hol)) ** 2
                    for b in fd_img.W_bases[kblk]
                )
                nrm2 = levi_pair(h_img, pushed.hol, pushed.hol).real
                if acc / nrm2 > 0.5:
                    carriers.add(kblk)
        if len(carriers) != 1:
            raise BlockRoutingAmbiguous(f"block {j + 1} carriers: {sorted(carriers)}")
        sigma[j] = carriers.pop() + 1
    B = []
    for j in range(sig.s - 1):
        src = list(sig.blocks[j])
        dst = list(sig.blocks[sigma[j] - 1])
        Bj = np.asarray(cj.jz[np.ix_(dst, src)])
        defect = np.abs(Bj.conj().T @ Bj - np.eye(len(src))).max()
        if defect > UNITARY_DEFECT_TOL:
            raise NotLeviIsometric(f"block {j + 1} off unitary by {defect:.2e}")
        u_, _, vh = np.linalg.svd(Bj)
        B.append(u_ @ vh)
    sblk = list(sig.blocks[-1])
    if sblk:
        Bs = np.asarray(cj.jz[np.ix_(sblk, sblk)])
        u_, _, vh = np.linalg.svd(Bs)
        Bs = u_ @ vh
        b_s = image.z[sblk] - Bs @ base.z[sblk]
    else:
        Bs = None
        b_s = np.zeros(0, dtype=np.complex128)
    b_height = height(sig, image) - height(sig, base) - 2j * np.sum(
        (Bs @ base.z[sblk] if sblk else 0.0) * np.conj(b_s)
    )
    psi = BlockUnitary(
        sigma=tuple(sigma), B=tuple(B), B_s=Bs, b_s=b_s, t0=float(np.real(b_height))
    )
    validate_generator(sig, psi)
    return psi
