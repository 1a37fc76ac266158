"""Defining-function jets against an exact-arithmetic finite-difference oracle.

The oracle evaluates p in rational arithmetic (the defining function is a
polynomial with integer coefficients in the real coordinates), applies nested
second-order central differences with a rational step, and only converts to
float at the end.  Exact evaluation removes roundoff, so the oracle error is
pure O(h^2) truncation.
"""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ALL_SIGS, CURVED_SIGS, S1, S2, S3, sig_id
from ellipcr.errors import BranchFailure, InadmissiblePoint
from ellipcr.model import (
    bounded_residual,
    from_ambient,
    height,
    jet,
    p_grad,
    p_value,
    pure_hess,
    to_ambient,
    to_bounded,
)
from ellipcr.sampling import random_point
from ellipcr.signature import Signature, SurfacePoint

FD_STEP = Fraction(1, 10**4)


# --------------------------------------------------------------------------
# exact-rational finite-difference oracle
# --------------------------------------------------------------------------


def _p_exact(sig, x, y):
    total = Fraction(0)
    for j, blk in enumerate(sig.blocks):
        q = Fraction(0)
        for a in blk:
            q += x[a] * x[a] + y[a] * y[a]
        total += q ** int(sig.exponents[j])
    return total


def _cadd(u, v):
    return (u[0] + v[0], u[1] + v[1])


def _csub(u, v):
    return (u[0] - v[0], u[1] - v[1])


def _cscale(u, s):
    return (u[0] * s, u[1] * s)


def _half_minus_i(u, v):
    """(u - i v) / 2 for complex pairs."""
    return ((u[0] + v[1]) / 2, (u[1] - v[0]) / 2)


def _half_plus_i(u, v):
    return ((u[0] - v[1]) / 2, (u[1] + v[0]) / 2)


def _fd_wirtinger(sig, ops, x, y, h=FD_STEP):
    """Nested central differences for a stack of Wirtinger derivatives.

    ``ops`` is a list of (index, conjugate?) applied outermost first; exact
    rational arithmetic throughout.
    """
    if not ops:
        return (_p_exact(sig, x, y), Fraction(0))
    (a, conj), rest = ops[0], ops[1:]

    def bump_x(delta):
        xs = list(x)
        xs[a] += delta
        return _fd_wirtinger(sig, rest, xs, y, h)

    def bump_y(delta):
        ys = list(y)
        ys[a] += delta
        return _fd_wirtinger(sig, rest, x, ys, h)

    dx = _cscale(_csub(bump_x(h), bump_x(-h)), Fraction(1, 2) / h)
    dy = _cscale(_csub(bump_y(h), bump_y(-h)), Fraction(1, 2) / h)
    return _half_plus_i(dx, dy) if conj else _half_minus_i(dx, dy)


def _oracle_value(sig, ops, point):
    x = [Fraction(v) for v in point.z.real]
    y = [Fraction(v) for v in point.z.imag]
    re, im = _fd_wirtinger(sig, ops, x, y)
    return complex(float(re), float(im))


def _rational_point(sig, rng):
    """Admissible point with exactly representable dyadic coordinates."""
    while True:
        num = rng.integers(-24, 25, size=2 * sig.total_n)
        z = (num[: sig.total_n] + 1j * num[sig.total_n :]) / 16.0
        P = SurfacePoint(z=z, t=float(rng.integers(-8, 9)) / 8.0)
        ok = all(
            np.sum(np.abs(z[list(blk)]) ** 2) > 0.2 for blk in sig.blocks[: sig.s - 1]
        )
        if ok:
            return P


def _agree(value, expected, rel=1e-6, absol=1e-9):
    return abs(value - expected) <= max(absol, rel * abs(expected))


@pytest.mark.parametrize("sig", [S2], ids=sig_id)
def test_jet_matches_exact_fd_oracle_everywhere(sig):
    rng = np.random.default_rng(7)
    for _ in range(3):
        P = _rational_point(sig, rng)
        pj = jet(sig, P)
        assert _agree(pj.p, float(_p_exact(sig,
                                           [Fraction(v) for v in P.z.real],
                                           [Fraction(v) for v in P.z.imag])))
        n = sig.total_n
        for a in range(n):
            assert _agree(pj.grad[a], _oracle_value(sig, [(a, False)], P))
            for b in range(n):
                assert _agree(
                    pj.hess[a, b], _oracle_value(sig, [(a, False), (b, True)], P)
                )
                for l in range(n):
                    assert _agree(
                        pj.third[a, b, l],
                        _oracle_value(sig, [(a, False), (b, True), (l, False)], P),
                    )
                    for m in range(n):
                        assert _agree(
                            pj.fourth[a, b, l, m],
                            _oracle_value(
                                sig,
                                [(a, False), (b, True), (l, False), (m, True)],
                                P,
                            ),
                        )


def test_jet_matches_oracle_spot_checks_larger_signature():
    sig = S3
    rng = np.random.default_rng(11)
    P = _rational_point(sig, rng)
    pj = jet(sig, P)
    n = sig.total_n
    for _ in range(25):
        a, b, l, m = rng.integers(0, n, size=4)
        assert _agree(
            pj.fourth[a, b, l, m],
            _oracle_value(sig, [(a, False), (b, True), (l, False), (m, True)], P),
        )
        assert _agree(
            pj.third[a, b, l], _oracle_value(sig, [(a, False), (b, True), (l, False)], P)
        )


def test_flat_model_jet_values():
    sig = Signature.parse("n=1")
    P = SurfacePoint(z=np.array([1.0 + 0j]), t=0.0)
    pj = jet(sig, P)
    assert pj.p == pytest.approx(1.0)
    assert pj.grad[0] == pytest.approx(1.0)  # conj(z) = 1
    assert pj.hess[0, 0] == pytest.approx(1.0)
    assert np.abs(pj.third).max() == 0.0
    assert np.abs(pj.fourth).max() == 0.0


def test_reference_point_jet_values():
    P = SurfacePoint(z=np.array([1.0, 0.0, 0.0], dtype=complex), t=0.0)
    pj = jet(S2, P)
    assert pj.p == pytest.approx(1.0)
    assert pj.hess[0, 0] == pytest.approx(4.0)
    assert pj.hess[1, 1] == pytest.approx(2.0)
    assert pj.hess[2, 2] == pytest.approx(1.0)


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_jet_structure(sig, rng):
    for _ in range(10):
        P = random_point(sig, rng)
        pj = jet(sig, P)
        assert pj.p >= 0
        assert np.abs(pj.hess - pj.hess.conj().T).max() == 0.0
        # symmetric in the two holomorphic slots
        assert np.abs(pj.third - np.transpose(pj.third, (2, 1, 0))).max() \
            <= 1e-15 * (1 + np.abs(pj.third).max())
        # block sparsity: mixed-block entries vanish identically
        for a in range(sig.total_n):
            for b in range(sig.total_n):
                if sig.orthogonal(a, b):
                    assert pj.hess[a, b] == 0.0
                    assert np.abs(pj.third[a, b, :]).max() == 0.0
                    assert np.abs(pj.fourth[a, b, :, :]).max() == 0.0


@given(seed=st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_fourth_jet_hermitian_swap(seed):
    sig = S2
    P = random_point(sig, np.random.default_rng(seed))
    pj = jet(sig, P)
    swapped = np.conj(np.einsum("balm->abml", np.einsum("ablm->balm", pj.fourth)))
    # p_{a b-bar l m-bar} = conj(p_{b a-bar m l-bar})
    direct = np.conj(np.transpose(pj.fourth, (1, 0, 3, 2)))
    assert np.abs(pj.fourth - direct).max() <= 1e-13 * (1 + np.abs(pj.fourth).max())
    assert np.abs(swapped - swapped).max() == 0.0


def test_inadmissible_point_rejected():
    P = SurfacePoint(z=np.array([0.0, 0.0, 0.5 + 0j]), t=0.0)
    with pytest.raises(InadmissiblePoint):
        jet(S2, P)
    tiny = SurfacePoint(z=np.array([1e-9, 0.0, 0.5 + 0j]), t=0.0)
    with pytest.raises(InadmissiblePoint):
        jet(S2, tiny)


def test_to_bounded_flat_origin():
    sig = Signature.parse("n=1")
    P = SurfacePoint(z=np.array([0.0 + 0j]), t=0.0)
    w = to_bounded(sig, P)
    assert np.allclose(w, [0.0, 1.0])
    assert bounded_residual(sig, w) <= 1e-15


def test_to_bounded_reference_point():
    P = SurfacePoint(z=np.array([1.0, 0.0, 0.0], dtype=complex), t=0.0)
    w = to_bounded(S2, P)
    assert bounded_residual(S2, w) <= 1e-10


@pytest.mark.parametrize("sig", ALL_SIGS, ids=sig_id)
def test_to_bounded_random_points(sig, rng):
    for _ in range(100):
        P = random_point(sig, rng)
        assert bounded_residual(sig, to_bounded(sig, P)) <= 1e-10


def test_ambient_round_trip(rng):
    for _ in range(20):
        P = random_point(S3, rng)
        w = to_ambient(S3, P)
        Q = from_ambient(S3, w)
        assert np.abs(Q.z - P.z).max() <= 1e-14
        assert Q.t == pytest.approx(P.t, abs=1e-14)
    off = to_ambient(S3, random_point(S3, rng))
    off[-1] += 1.0j
    with pytest.raises(BranchFailure):
        from_ambient(S3, off)


def test_point_json_round_trip(rng):
    P = random_point(S2, rng)
    Q = SurfacePoint.from_json(P.to_json())
    assert np.array_equal(P.z, Q.z)
    assert P.t == Q.t


def test_signature_parsing():
    sig = Signature.parse("m=2,3;n=2,2,1")
    assert sig.s == 3
    assert sig.m == (2, 3)
    assert sig.n == (2, 2, 1)
    assert sig.total_n == 5
    assert [list(b) for b in sig.blocks] == [[0, 1], [2, 3], [4]]
    assert str(sig) == "m=2,3;n=2,2,1"
    assert Signature.parse("n=2").s == 1
    with pytest.raises(ValueError):
        Signature.parse("m=1;n=2,1")
    with pytest.raises(ValueError):
        Signature.parse("m=2;n=1,1")
    with pytest.raises(ValueError):
        Signature.parse("m=2;n=2")


def test_gradient_and_pure_hessian_helpers(rng):
    P = random_point(S3, rng)
    pj = jet(S3, P)
    assert np.abs(p_grad(S3, P.z) - pj.grad).max() <= 1e-14
    assert p_value(S3, P.z) == pytest.approx(pj.p)
    ph = pure_hess(S3, P.z)
    # holomorphic hessian is symmetric and block-sparse
    assert np.abs(ph - ph.T).max() <= 1e-14
    assert height(S3, P) == pytest.approx(complex(P.t, pj.p))
