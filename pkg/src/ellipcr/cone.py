"""The curvature-null cone in the holomorphic tangent space.

A (1,0) vector U belongs to the cone at P when R(U, Vbar, Z, Wbar) = 0 for
every triple V, Z, W that is Levi-orthogonal to U and Z in the four required
pairings.  On the generalized ellipsoid the cone decomposes as the union of
the strict-block tangential subspaces with the quadratic-plus-radial block,
and CR maps carry the cone at P onto the cone at the image point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import curvature_closed
from .errors import BlockRoutingAmbiguous, ZeroVector
from .frame import FrameDecomposition, TangentVector, frame_fields, levi_pair
from .maps import MapDescriptor, pushforward_matrix
from .signature import Signature, SurfacePoint

DEFINITIONAL_TOL = 1e-8
STRUCTURAL_TOL = 1e-9
ROUTING_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ConeVerdict:
    member: bool
    max_residual: float
    witness: tuple | None = None  # (V, Z, W, value) coefficient vectors


@dataclass(frozen=True, eq=False)
class ConeContext:
    """Per-point data shared by repeated cone tests."""

    sig: Signature
    point: SurfacePoint
    frame: FrameDecomposition
    riem: np.ndarray

    @classmethod
    def build(cls, sig: Signature, point: SurfacePoint) -> "ConeContext":
        return cls(
            sig=sig,
            point=point,
            frame=frame_fields(sig, point),
            riem=curvature_closed(sig, point).riem,
        )

    @property
    def h(self) -> np.ndarray:
        return self.frame.levi.h

    def block_bases(self):
        """Coefficient bases of W_1, ..., W_{s-1} and of W_s + E."""
        out = [
            [v.hol for v in basis] for basis in self.frame.W_bases[: self.sig.s - 1]
        ]
        out.append([v.hol for v in self.frame.ew_basis])
        return out


def _unit(ctx: ConeContext, u: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    nrm = np.sqrt(levi_pair(ctx.h, u, u).real)
    if nrm < floor:
        raise ZeroVector(f"Levi length {nrm:.2e} below {floor:.0e}")
    return u / nrm


def _coeffs(U) -> np.ndarray:
    if isinstance(U, TangentVector):
        if not U.is_type10():
            raise ZeroVector("cone tests take (1,0) vectors")
        return U.hol
    return np.asarray(U, dtype=np.complex128)


def cone_test_definitional(
    sig: Signature,
    point: SurfacePoint,
    U,
    z_samples: int = 20,
    seed: int = 42,
    tol: float = DEFINITIONAL_TOL,
    ctx: ConeContext | None = None,
) -> ConeVerdict:
    """Membership by exhausting curvature pairings over orthogonal triples.

    For each candidate Z (frame basis plus seeded random vectors) the test
    orthonormalizes the complement of span{U, Z}, evaluates the curvature on
    all complement pairs, and compares against a scale-coupled threshold.
    """
    if ctx is None:
        ctx = ConeContext.build(sig, point)
    n = sig.total_n
    u = _unit(ctx, _coeffs(U))
    scale = max(1.0, float(np.abs(ctx.riem).max()))
    rng = np.random.default_rng(seed)
    candidates = [np.eye(n, dtype=np.complex128)[a] for a in range(n)]
    for _ in range(z_samples):
        candidates.append(rng.normal(size=n) + 1j * rng.normal(size=n))
    candidates = [_unit(ctx, zv, floor=1e-12) for zv in candidates]

    worst = 0.0
    witness = None
    for zvec in candidates:
        span = []
        for v in (u, zvec):
            w = v.astype(np.complex128)
            for prev in span:
                w = w - levi_pair(ctx.h, w, prev) * prev
            nrm2 = levi_pair(ctx.h, w, w).real
            if nrm2 > 1e-12:
                span.append(w / np.sqrt(nrm2))
        comp = []
        for a in range(n):
            w = np.eye(n, dtype=np.complex128)[a]
            for prev in span + comp:
                w = w - levi_pair(ctx.h, w, prev) * prev
            nrm2 = levi_pair(ctx.h, w, w).real
            if nrm2 > 1e-10:
                comp.append(w / np.sqrt(nrm2))
        if not comp:
            continue
        VB = np.array(comp)
        # pairings R(U, conj v_i, Z, conj w_j) on all complement pairs
        RUZ = np.einsum("ablm,a,l->bm", ctx.riem, u, zvec)
        M = np.einsum("bm,ib,jm->ij", RUZ, np.conj(VB), np.conj(VB))
        k = int(np.argmax(np.abs(M)))
        i, j = divmod(k, M.shape[1])
        if abs(M[i, j]) > worst:
            worst = abs(M[i, j])
            witness = (VB[i], zvec.copy(), VB[j], complex(M[i, j]))
    member = worst <= tol * scale
    return ConeVerdict(
        member=member,
        max_residual=float(worst),
        witness=None if member else witness,
    )


def cone_test_structural(
    sig: Signature,
    point: SurfacePoint,
    U,
    tol: float = STRUCTURAL_TOL,
    ctx: ConeContext | None = None,
) -> ConeVerdict:
    """Membership by block projection against the orthogonal decomposition."""
    if ctx is None:
        ctx = ConeContext.build(sig, point)
    u = _unit(ctx, _coeffs(U))
    norms2 = []
    for basis in ctx.block_bases():
        acc = 0.0
        for b in basis:
            acc += abs(levi_pair(ctx.h, u, b)) ** 2
        norms2.append(acc)
    total = sum(norms2)
    best = int(np.argmax(norms2))
    complementary = np.sqrt(max(total - norms2[best], 0.0))
    member = complementary <= tol
    witness = None
    if not member:
        witness = (u, u, u, complex(complementary))
    return ConeVerdict(member=member, max_residual=float(complementary), witness=witness)


@dataclass(frozen=True, eq=False)
class ConePreservationReport:
    matched: int
    mismatched: int
    cases: tuple

    @property
    def ok(self) -> bool:
        return self.mismatched == 0


def _membership_samples(ctx: ConeContext, rng: np.random.Generator, count: int):
    """Labelled sample vectors: members from each block, plus cross-block sums."""
    bases = ctx.block_bases()
    samples = []
    for j, basis in enumerate(bases):
        for b in basis:
            samples.append((f"basis[{j}]", b))
    live = [b for b in bases if b]
    while len(samples) < count:
        j = int(rng.integers(len(live)))
        basis = live[j]
        coeff = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
        samples.append((f"mix[{j}]", sum(c * b for c, b in zip(coeff, basis))))
        if len(live) > 1 and len(samples) < count:
            k = int(rng.integers(len(live) - 1))
            k = k if k < j else k + 1
            other = live[k]
            coeff2 = rng.normal(size=len(other)) + 1j * rng.normal(size=len(other))
            cross = sum(c * b for c, b in zip(coeff, basis)) + sum(
                c * b for c, b in zip(coeff2, other)
            )
            samples.append((f"cross[{j},{k}]", cross))
    return samples[:count]


def cone_preserved(
    sig: Signature,
    desc: MapDescriptor,
    point: SurfacePoint,
    sample_count: int = 24,
    seed: int = 42,
) -> ConePreservationReport:
    """Verdicts must agree between U at P and its pushforward at the image."""
    ctx = ConeContext.build(sig, point)
    image, C = pushforward_matrix(sig, desc, point)
    ctx_img = ConeContext.build(sig, image)
    rng = np.random.default_rng(seed)
    cases = []
    matched = mismatched = 0
    for label, u in _membership_samples(ctx, rng, sample_count):
        before = cone_test_definitional(sig, point, u, ctx=ctx)
        after = cone_test_definitional(sig, image, C @ u, ctx=ctx_img)
        ok = before.member == after.member
        matched += ok
        mismatched += not ok
        cases.append((label, before.member, after.member))
    return ConePreservationReport(
        matched=matched, mismatched=mismatched, cases=tuple(cases)
    )


@dataclass(frozen=True, eq=False)
class BlockRoutingReport:
    sigma: tuple
    max_residual: float
    ew_preserved: bool


def block_routing(
    sig: Signature,
    desc: MapDescriptor,
    point: SurfacePoint,
    tol: float = ROUTING_TOL,
) -> BlockRoutingReport:
    """Route of each cone block under the map.

    Confirms that the quadratic-plus-radial block maps onto itself and that
    each strict tangential block is carried into a single one, returning the
    induced permutation.  Any other routing raises.
    """
    ctx = ConeContext.build(sig, point)
    image, C = pushforward_matrix(sig, desc, point)
    ctx_img = ConeContext.build(sig, image)
    bases_img = ctx_img.block_bases()
    h_img = ctx_img.h

    def block_mass(u):
        out = []
        for basis in bases_img:
            acc = 0.0
            for b in basis:
                acc += abs(levi_pair(h_img, u, b)) ** 2
            out.append(acc)
        return np.array(out)

    worst = 0.0
    # the combined block must return to itself; measure leakage by summing the
    # strict-block masses directly (no catastrophic subtraction)
    for v in ctx.frame.ew_basis:
        pushed = C @ v.hol
        nrm2 = levi_pair(h_img, pushed, pushed).real
        mass = block_mass(pushed)
        leak = np.sqrt(float(np.sum(mass[:-1])) / nrm2)
        if leak > tol:
            strict = int(np.argmax(mass[:-1]))
            if mass[strict] / nrm2 > 1 - tol:
                raise BlockRoutingAmbiguous(
                    f"combined radial block routed into strict block {strict + 1}; "
                    "this routing is excluded on the model"
                )
            raise BlockRoutingAmbiguous(
                f"combined radial block leaks {leak:.2e} across blocks"
            )
        worst = max(worst, leak)
    sigma = []
    for j in range(sig.s - 1):
        carriers = set()
        for v in ctx.frame.W_bases[j]:
            pushed = C @ v.hol
            nrm2 = levi_pair(h_img, pushed, pushed).real
            mass = block_mass(pushed)
            k = int(np.argmax(mass))
            leak = np.sqrt(
                float(np.sum(mass) - mass[k]) / nrm2
            )
            if leak > tol:
                raise BlockRoutingAmbiguous(
                    f"block {j + 1} pushforward spreads over blocks (leak {leak:.2e})"
                )
            worst = max(worst, leak)
            carriers.add(k)
        if len(carriers) != 1:
            raise BlockRoutingAmbiguous(f"block {j + 1} routed to {sorted(carriers)}")
        k = carriers.pop()
        if k == sig.s - 1:
            raise BlockRoutingAmbiguous(
                f"strict block {j + 1} routed into the combined radial block"
            )
        sigma.append(k + 1)
    if sorted(sigma) != list(range(1, sig.s)):
        raise BlockRoutingAmbiguous(f"routing {sigma} is not a permutation")
    return BlockRoutingReport(
        sigma=tuple(sigma), max_residual=float(worst), ew_preserved=True
    )
