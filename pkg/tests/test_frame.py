"""Levi form, radial/tangential frame decomposition, and Lie brackets."""

import numpy as np
import pytest

from conftest import ALL_SIGS, CURVED_SIGS, S1, S2, S3, S4, sig_id
from ellipcr.errors import TypeMismatch, UnsupportedField
from ellipcr.frame import (
    FieldSpec,
    TangentVector,
    closed_bracket,
    frame_fields,
    levi,
    levi_pair,
    lie_bracket,
    q_coefficients,
    q_flat,
)
from ellipcr.model import jet, p_grad
from ellipcr.sampling import random_hol_vector, random_point
from ellipcr.signature import SurfacePoint, block_norms


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_levi_closed_form_against_jets_and_inversion(sig, rng):
    for _ in range(20):
        P = random_point(sig, rng)
        ld = levi(sig, P)
        two_hess = 2.0 * jet(sig, P).hess
        assert np.abs(ld.h - two_hess).max() <= 1e-9 * (1 + np.abs(ld.h).max())
        # independent oracle: straight matrix inversion with the raising
        # convention h^{a b-bar} h_{g b-bar} = delta
        direct = np.conj(np.linalg.inv(ld.h))
        assert np.abs(ld.h_inv - direct).max() <= 1e-10 * (1 + np.abs(direct).max())
        assert np.abs(
            np.einsum("ag,bg->ab", ld.h_inv, ld.h) - np.eye(sig.total_n)
        ).max() <= 1e-10
        # positive definite
        assert np.all(np.linalg.eigvalsh(ld.h) > 0)


def test_levi_reference_values(rng):
    P = SurfacePoint(z=np.array([1.0, 0, 0], dtype=complex), t=0.0)
    assert np.allclose(levi(S2, P).h, np.diag([8.0, 4.0, 2.0]))
    Pf = random_point(S1, rng)
    assert np.allclose(levi(S1, Pf).h, 2.0 * np.eye(2))


def test_levi_block_diagonal(rng):
    for _ in range(10):
        P = random_point(S3, rng)
        h = levi(S3, P).h
        for a in range(S3.total_n):
            for b in range(S3.total_n):
                if S3.orthogonal(a, b):
                    assert h[a, b] == 0.0


def test_projection_coefficients_reference():
    # strict block at z_1 = (1, 0): projection keeps only the second direction
    P = SurfacePoint(z=np.array([1.0, 0, 0], dtype=complex), t=0.0)
    QC = q_coefficients(S2, P.z)
    assert np.allclose(QC[:2, :2], [[0, 0], [0, 1]])
    fd = frame_fields(S2, P)
    (w_basis,) = (fd.W_bases[0],)
    assert len(w_basis) == 1
    # W-basis vector is Z_2 / 2 (Levi norm of Z_2 is 2 there)
    assert np.allclose(w_basis[0].hol, [0, 0.5, 0])


def test_radial_field_reference():
    P = SurfacePoint(z=np.array([1.0, 0, 0], dtype=complex), t=0.0)
    fd = frame_fields(S2, P)
    E1 = fd.E_basis[0]
    assert np.allclose(E1.hol, [0.5, 0, 0])
    ld = levi(S2, P)
    assert levi_pair(ld.h, E1.hol, E1.hol).real == pytest.approx(2.0)


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_radial_pairings(sig, rng):
    """L(Z_a, conj E_j) = 2 m_j |z_j|^{2(m_j-1)} conj(z^a) on block j, else 0;
    L(E_j, conj E_k) = 2 |z_j|^{2 m_j} delta_jk."""
    for _ in range(10):
        P = random_point(sig, rng)
        fd = frame_fields(sig, P)
        h = fd.levi.h
        q = block_norms(sig, P.z)
        live = [j for j, blk in enumerate(sig.blocks) if q[j] > 1e-16]
        for pos, j in enumerate(live):
            Ej = fd.E_basis[pos]
            m = sig.exponents[j]
            for a in range(sig.total_n):
                za = np.zeros(sig.total_n, complex)
                za[a] = 1.0
                val = levi_pair(h, za, Ej.hol)
                if a in sig.blocks[j]:
                    expected = 2 * m * q[j] ** (m - 1) * np.conj(P.z[a])
                else:
                    expected = 0.0
                assert abs(val - expected) <= 1e-12 * (1 + abs(expected))
            for pos2, k in enumerate(live):
                val = levi_pair(h, Ej.hol, fd.E_basis[pos2].hol)
                expected = 2 * q[j] ** m if j == k else 0.0
                assert abs(val - expected) <= 1e-12 * (1 + abs(expected))


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_decomposition_orthogonality_and_dims(sig, rng):
    for _ in range(10):
        P = random_point(sig, rng)
        fd = frame_fields(sig, P)
        h = fd.levi.h
        for j in range(sig.s - 1):
            assert len(fd.W_bases[j]) == sig.n[j] - 1
        groups = [[v.hol for v in basis] for basis in fd.W_bases[: sig.s - 1]]
        groups.append([v.hol for v in fd.ew_basis])
        # all cross-group pairings vanish; within ew the basis is orthonormal
        for gi in range(len(groups)):
            for gj in range(len(groups)):
                for x in groups[gi]:
                    for y in groups[gj]:
                        val = levi_pair(h, x, y)
                        if gi != gj:
                            assert abs(val) <= 1e-10
        total = sum(len(g) for g in groups)
        assert total == sig.total_n  # bases together span the space


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_tangential_fields_annihilate_p(sig, rng):
    from ellipcr.model import p_value

    h = 1e-5
    for _ in range(5):
        P = random_point(sig, rng)
        QC = q_coefficients(sig, P.z)
        scale = 1 + np.abs(p_grad(sig, P.z)).max()
        # contraction against the exact gradient reaches the tight tolerance
        exact = QC @ p_grad(sig, P.z)
        assert np.abs(exact).max() <= 1e-10 * scale
        for a in range(sig.total_n):
            w = QC[a]
            # W_a p by first-order Wirtinger finite differences
            val = 0.0
            for b in range(sig.total_n):
                if w[b] == 0:
                    continue
                e = np.zeros(sig.total_n, complex)
                e[b] = h
                fx = (p_value(sig, P.z + e) - p_value(sig, P.z - e)) / (2 * h)
                fy = (p_value(sig, P.z + 1j * e) - p_value(sig, P.z - 1j * e)) / (2 * h)
                val += w[b] * 0.5 * (fx - 1j * fy)
            assert abs(val) <= 1e-8 * scale


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_q_coefficient_identities(sig, rng):
    """Per block: trace Q = n_j - 1 (when the radial field exists) and
    Q_a^s Q_{s mu-bar} = Q_{a mu-bar}."""
    for _ in range(10):
        P = random_point(sig, rng)
        QC = q_coefficients(sig, P.z)
        h = levi(sig, P).h
        QF = QC @ h
        q = block_norms(sig, P.z)
        for j, blk in enumerate(sig.blocks):
            idx = list(blk)
            if not idx:
                continue
            tr = sum(QC[a, a] for a in idx).real
            expected = len(idx) - (1 if q[j] > 1e-16 else 0)
            assert tr == pytest.approx(expected, abs=1e-12)
        assert np.abs(QC @ QF - QF).max() <= 1e-10 * (1 + np.abs(QF).max())


def test_q_flat_properties(rng):
    for sig in (S2, S3):
        for _ in range(5):
            P = random_point(sig, rng)
            fd = frame_fields(sig, P)
            for ev in fd.E_basis:
                V = random_hol_vector(sig, P, rng)
                assert abs(q_flat(sig, P, ev, V)) <= 1e-10
            for basis in fd.W_bases:
                for v in basis:
                    lv = levi_pair(fd.levi.h, v.hol, v.hol)
                    assert abs(q_flat(sig, P, v, v) - lv) <= 1e-10
            for _ in range(20):
                U = random_hol_vector(sig, P, rng)
                assert q_flat(sig, P, U, U).real >= -1e-12
    with pytest.raises(TypeMismatch):
        P = random_point(S2, rng)
        T = TangentVector.characteristic(P, S2.total_n)
        q_flat(S2, P, T, T)


def test_theta_on_frame_fields(rng):
    """theta kills the holomorphic frame and gives 1 on the characteristic."""
    from ellipcr.frame import _coords_to_vector, _field_coords

    for sig in ALL_SIGS:
        P = random_point(sig, rng)
        for a in range(sig.total_n):
            for kind in ("Z", "Zbar"):
                v = _coords_to_vector(
                    sig, P, _field_coords(sig, FieldSpec(kind, a), P.z, P.t)
                )
                assert abs(v.t_comp) <= 1e-14
        t = _coords_to_vector(sig, P, _field_coords(sig, FieldSpec("T"), P.z, P.t))
        assert t.t_comp == pytest.approx(1.0)


@pytest.mark.parametrize("sig", CURVED_SIGS, ids=sig_id)
def test_brackets_match_closed_forms(sig, rng):
    for _ in range(3):
        P = random_point(sig, rng)
        n = sig.total_n
        pairs = []
        for a in range(n):
            for b in range(n):
                pairs.append((FieldSpec("Z", a), FieldSpec("Zbar", b)))
        for j in range(sig.s):
            for k in range(sig.s):
                pairs.append((FieldSpec("E", j), FieldSpec("Ebar", k)))
        for a in sig.blocks[-1]:
            for j in range(sig.s - 1):
                pairs.append((FieldSpec("E", j), FieldSpec("Zbar", a)))
        for a in range(n):
            pairs.append((FieldSpec("T"), FieldSpec("Z", a)))
            pairs.append((FieldSpec("Z", a), FieldSpec("Z", (a + 1) % n)))
        q = block_norms(sig, P.z)
        for X, Y in pairs:
            if X.kind == "E" and q[X.index] <= 1e-16:
                continue
            if Y.kind in ("E", "Ebar") and q[Y.index] <= 1e-16:
                continue
            expected = closed_bracket(sig, P, X, Y)
            if expected is None:
                continue
            got = lie_bracket(sig, P, X, Y)
            diff = max(
                float(np.abs(got.hol - expected.hol).max()),
                float(np.abs(got.antihol - expected.antihol).max()),
                abs(got.t_comp - expected.t_comp),
            )
            scale = 1 + abs(expected.t_comp)
            assert diff <= 1e-6 * scale, (X, Y, diff)


def test_bracket_quadratic_block_is_flat(rng):
    """[Z_a, Z_b-bar] = -2i delta_ab T inside the quadratic block."""
    P = random_point(S2, rng)
    a = list(S2.blocks[-1])[0]
    br = lie_bracket(S2, P, FieldSpec("Z", a), FieldSpec("Zbar", a))
    assert abs(br.t_comp + 2j) <= 1e-6
    assert np.abs(br.hol).max() <= 1e-6
    cb = closed_bracket(S2, P, FieldSpec("Z", a), FieldSpec("Zbar", a))
    assert cb.t_comp == pytest.approx(-2j)


def test_unsupported_field_errors(rng):
    P = random_point(S2, rng)
    with pytest.raises(UnsupportedField):
        FieldSpec("Q", 0)
    with pytest.raises(UnsupportedField):
        lie_bracket(S2, P, FieldSpec("Z", 99), FieldSpec("T"))


def test_tangent_vector_algebra(rng):
    P = random_point(S2, rng)
    U = random_hol_vector(S2, P, rng)
    V = random_hol_vector(S2, P, rng)
    W = U + 2.0 * V
    assert np.allclose(W.hol, U.hol + 2 * V.hol)
    assert W.is_type10()
    C = U.conjugate()
    assert np.allclose(C.antihol, np.conj(U.hol))
    assert not C.is_type10()
    R = U + U.conjugate()
    assert np.allclose(R.antihol, np.conj(R.hol))
