"""Curvature: direct differentiation against the block closed forms."""

import numpy as np
import pytest

from conftest import ALL_SIGS, CURVED_SIGS, S1, S2, S3, sig_id
from ellipcr.curvature import (
    chern,
    connection,
    contract4,
    curvature_closed,
    curvature_numeric,
    sectional,
    sectional_closed,
    webster_chern,
)
from ellipcr.errors import ZeroVector
from ellipcr.frame import TangentVector, frame_fields, levi, levi_pair
from ellipcr.sampling import random_hol_vector, random_point
from ellipcr.signature import SurfacePoint

REFERENCE = SurfacePoint(z=np.array([1.0, 0, 0], dtype=complex), t=0.0)


@pytest.mark.parametrize("sig", CURVED_SIGS, ids=sig_id)
def test_closed_matches_numeric(sig, rng):
    for _ in range(25):
        P = random_point(sig, rng)
        cn = curvature_numeric(sig, P)
        cc = curvature_closed(sig, P)
        scale = 1 + np.abs(cc.riem).max()
        assert np.abs(cn.riem - cc.riem).max() <= 1e-8 * scale
        assert np.abs(cn.ricci - cc.ricci).max() <= 1e-8 * (1 + np.abs(cc.ricci).max())
        assert abs(cn.scalar - cc.scalar) <= 1e-8 * (1 + abs(cc.scalar))
        assert np.abs(cn.chern - cc.chern).max() <= 1e-8 * (1 + np.abs(cc.chern).max())


def test_flat_model_everything_vanishes(rng):
    for _ in range(10):
        P = random_point(S1, rng)
        cn = curvature_numeric(S1, P)
        assert np.abs(cn.riem).max() <= 1e-10
        assert np.abs(cn.ricci).max() <= 1e-10
        assert abs(cn.scalar) <= 1e-10
        assert np.abs(cn.chern).max() <= 1e-10


def test_reference_point_values():
    cn = curvature_numeric(S2, REFERENCE)
    assert cn.scalar == pytest.approx(-0.5, abs=1e-12)
    # Ricci block: only the tangential direction of the strict block curves
    assert cn.ricci[1, 1] == pytest.approx(-2.0, abs=1e-12)
    mask = np.ones((3, 3), bool)
    mask[1, 1] = False
    assert np.abs(cn.ricci[mask]).max() <= 1e-12


@pytest.mark.parametrize("sig", CURVED_SIGS, ids=sig_id)
def test_structural_zeros_orthogonal_indices(sig, rng):
    for _ in range(5):
        P = random_point(sig, rng)
        cn = curvature_numeric(sig, P)
        n = sig.total_n
        blk = sig.block_of
        for a in range(n):
            for b in range(n):
                for l in range(n):
                    for m in range(n):
                        if len({blk[a], blk[b], blk[l], blk[m]}) > 1:
                            assert abs(cn.riem[a, b, l, m]) <= 1e-9


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_symmetries(sig, rng):
    for _ in range(10):
        P = random_point(sig, rng)
        R = curvature_numeric(sig, P).riem
        assert np.abs(R - np.einsum("lbam->ablm", R)).max() <= 1e-9
        assert np.abs(R - np.conj(np.transpose(R, (1, 0, 3, 2)))).max() <= 1e-9


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_torsion_vanishes(sig, rng):
    for _ in range(5):
        P = random_point(sig, rng)
        cd = curvature_numeric(sig, P, with_torsion=True)
        assert np.abs(cd.torsion).max() <= 1e-9


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_chern_trace_free(sig, rng):
    for _ in range(10):
        P = random_point(sig, rng)
        S = chern(sig, P)
        G = levi(sig, P).h_inv
        assert np.abs(np.einsum("ab,ablm->lm", G, S)).max() <= 1e-9
        # inherits the curvature symmetries
        assert np.abs(S - np.einsum("lbam->ablm", S)).max() <= 1e-9


def test_ricci_contraction_consistency(rng):
    """Ricci from contracting the 4-tensor equals the direct formula."""
    for sig in CURVED_SIGS:
        P = random_point(sig, rng)
        cn = curvature_numeric(sig, P)
        G = levi(sig, P).h_inv
        contracted = np.einsum("ab,ablm->lm", G, cn.riem)
        assert np.abs(contracted - cn.ricci).max() <= 1e-9 * (
            1 + np.abs(cn.ricci).max()
        )


def test_connection_block_structure(rng):
    P = random_point(S3, rng)
    gamma = connection(S3, P).gamma
    n = S3.total_n
    for l in range(n):
        for a in range(n):
            if S3.orthogonal(l, a):
                assert np.abs(gamma[l, a, :]).max() == 0.0
    # symmetric in the two lower indices (torsion-free in the frame sense)
    assert np.abs(gamma - np.transpose(gamma, (1, 0, 2))).max() <= 1e-12 * (
        1 + np.abs(gamma).max()
    )


def test_chern_radial_diagonal_identity(rng):
    """Unit vectors in the combined block: S(Z, Zbar, Z, Zbar) = 2R/((n+1)(n+2))."""
    for sig in CURVED_SIGS:
        for _ in range(5):
            P = random_point(sig, rng)
            cd = curvature_closed(sig, P)
            fdp = frame_fields(sig, P)
            n = sig.total_n
            coeffs = rng.normal(size=len(fdp.ew_basis)) + 1j * rng.normal(
                size=len(fdp.ew_basis)
            )
            Z = sum(c * b.hol for c, b in zip(coeffs, fdp.ew_basis))
            Z = Z / np.sqrt(levi_pair(fdp.levi.h, Z, Z).real)
            val = contract4(cd.chern, Z, Z, Z, Z)
            expected = 2 * cd.scalar / ((n + 1) * (n + 2))
            assert abs(val - expected) <= 1e-10 * (1 + abs(expected))


def test_chern_mixed_identity(rng):
    """V, W tangential, Z unit in the combined block:
    S(V, Wbar, Z, Zbar) = -(Ric(V, Wbar) - R L(V, Wbar)/(n+1))/(n+2)."""
    for sig in CURVED_SIGS:
        P = random_point(sig, rng)
        cd = curvature_closed(sig, P)
        fdp = frame_fields(sig, P)
        n = sig.total_n
        strict = [v.hol for basis in fdp.W_bases[: sig.s - 1] for v in basis]
        if not strict:
            continue
        Z = fdp.ew_basis[0].hol
        Z = Z / np.sqrt(levi_pair(fdp.levi.h, Z, Z).real)
        for _ in range(5):
            cv = rng.normal(size=len(strict)) + 1j * rng.normal(size=len(strict))
            cw = rng.normal(size=len(strict)) + 1j * rng.normal(size=len(strict))
            V = sum(c * b for c, b in zip(cv, strict))
            W = sum(c * b for c, b in zip(cw, strict))
            val = contract4(cd.chern, V, W, Z, Z)
            ric = np.einsum("am,a,m->", cd.ricci, V, np.conj(W))
            lvw = levi_pair(fdp.levi.h, V, W)
            expected = -(ric - cd.scalar / (n + 1) * lvw) / (n + 2)
            assert abs(val - expected) <= 1e-9 * (1 + abs(expected))


def test_webster_formula_assembly(rng):
    """The Chern field of the curvature data is exactly the trace adjustment."""
    from ellipcr.model import jet

    P = random_point(S2, rng)
    cd = curvature_numeric(S2, P)
    h = 2.0 * jet(S2, P).hess  # same Levi matrix the numeric route used
    S = webster_chern(h, cd.riem, cd.ricci, cd.scalar)
    assert np.array_equal(S, cd.chern)


def test_sectional_reference_value():
    P = SurfacePoint(z=np.array([1.0, 0, 0.7 + 0.3j], dtype=complex), t=0.2)
    fdp = frame_fields(S2, P)
    V = fdp.W_bases[0][0]
    assert sectional(S2, P, V) == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("sig", CURVED_SIGS, ids=sig_id)
def test_sectional_closed_vs_definitional(sig, rng):
    for _ in range(10):
        P = random_point(sig, rng)
        fdp = frame_fields(sig, P)
        strict = [v for basis in fdp.W_bases[: sig.s - 1] for v in basis]
        coeffs = rng.normal(size=len(strict)) + 1j * rng.normal(size=len(strict))
        V = TangentVector.holomorphic(P, sum(c * b.hol for c, b in zip(coeffs, strict)))
        assert sectional(sig, P, V) == pytest.approx(
            sectional_closed(sig, P, V), abs=1e-8, rel=1e-8
        )
        # vanishes on the combined block, nonzero on strict tangential vectors
        Z = fdp.ew_basis[0]
        assert abs(sectional(sig, P, Z)) <= 1e-12
        assert abs(sectional(sig, P, strict[0])) > 0.01


def test_sectional_zero_vector_rejected(rng):
    P = random_point(S2, rng)
    with pytest.raises(ZeroVector):
        sectional(S2, P, TangentVector.holomorphic(P, np.zeros(3)))
    with pytest.raises(ZeroVector):
        sectional(S2, P, TangentVector.characteristic(P, 3))
