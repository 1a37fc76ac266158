"""Scalar jets and the transformation laws of the pseudohermitian invariants."""

import numpy as np
import pytest

from conftest import CURVED_SIGS, S2, S3, S4, sig_id
from ellipcr.lee import (
    check_chern_invariance,
    check_cr_function_identities,
    check_lee,
    cr_affine_function,
    factor_w_annihilation,
    inverse_factor_handle,
    scalar_jet,
    scalar_transport_residual,
)
from ellipcr.maps import (
    Dilation,
    Inversion,
    MapDescriptor,
)
from ellipcr.model import p_value
from ellipcr.sampling import (
    random_point,
    random_psi,
    random_translation,
    random_word,
)

INV = MapDescriptor(word=(Inversion(),))


def test_scalar_jet_constant(rng):
    P = random_point(S2, rng)
    sj = scalar_jet(S2, P, lambda z, t: 1.0)
    assert sj.value == 1.0
    assert np.abs(sj.d_hol).max() <= 1e-11
    assert abs(sj.d_t) <= 1e-11
    assert np.abs(sj.cov2).max() <= 1e-9
    assert abs(sj.laplacian) <= 1e-9


def test_scalar_jet_height_modulus(rng):
    """u = |z^{n+1}|^2 = t^2 + p^2 on the chart: Tu = 2t and flat second
    covariant derivatives."""
    P = random_point(S2, rng)

    def u_fun(z, t):
        return t**2 + p_value(S2, z) ** 2

    sj = scalar_jet(S2, P, u_fun)
    assert sj.value == pytest.approx(P.t**2 + p_value(S2, P.z) ** 2)
    assert sj.d_t == pytest.approx(2 * P.t, abs=1e-9)
    assert np.abs(sj.cov2).max() <= 1e-7


def test_scalar_jet_commutation_identity(rng):
    """u_{,a b-bar} - u_{,b-bar a} = i h_{a b-bar} u_{,0} for random smooth u."""
    from ellipcr.frame import levi_matrix

    for sig in (S2, S4):
        P = random_point(sig, rng)
        coef = rng.normal(size=4)

        def u_fun(z, t, coef=coef, sig=sig):
            return (
                coef[0] * t**2
                + coef[1] * p_value(sig, z) * t
                + coef[2] * float(np.sum(z.real * z.imag))
                + coef[3] * float(np.sum(z.real) ** 2)
            )

        sj = scalar_jet(sig, P, u_fun)
        H = levi_matrix(sig, P.z)
        M = sj.cov2_mixed
        # for real u the reversed ordering is the conjugate transpose, so the
        # commutation defect M - M^dagger must equal i h u_{,0}
        residual = np.abs(M - np.conj(M).T - 1j * H * sj.d_t).max()
        assert residual <= 1e-7 * (1 + np.abs(M).max())


def test_inverse_factor_handle_matches_formula(rng):
    from ellipcr.model import height

    P = random_point(S2, rng)
    u_fun = inverse_factor_handle(S2, INV)
    assert u_fun(P.z, P.t) == pytest.approx(abs(height(S2, P)) ** 2, rel=1e-12)


@pytest.mark.parametrize("sig", CURVED_SIGS, ids=sig_id)
def test_lee_laws_generators(sig, rng):
    P = random_point(sig, rng)
    for desc in (
        MapDescriptor(word=(Dilation(r=1.6),)),
        INV,
        MapDescriptor(word=(random_translation(sig, rng),)),
        MapDescriptor(word=(random_psi(sig, rng),)),
    ):
        rep = check_lee(sig, desc, P)
        assert rep.ok, (str(desc), rep)


def test_lee_law_dilation_reduces_to_ricci_preservation(rng):
    """Constant factor: all derivative corrections vanish and the law says the
    pushforward preserves Ricci."""
    P = random_point(S2, rng)
    desc = MapDescriptor(word=(Dilation(r=2.0),))
    sj = scalar_jet(S2, P, inverse_factor_handle(S2, desc))
    assert sj.value == pytest.approx(0.25)
    assert np.abs(sj.d_hol).max() <= 1e-10
    assert np.abs(sj.cov2).max() <= 1e-8
    rep = check_lee(S2, desc, P)
    assert rep.ricci_residual <= 1e-8 * rep.ricci_scale


def test_lee_law_isometry_has_trivial_factor(rng):
    P = random_point(S3, rng)
    desc = MapDescriptor(word=(random_psi(S3, rng),))
    sj = scalar_jet(S3, P, inverse_factor_handle(S3, desc))
    assert sj.value == pytest.approx(1.0)
    assert np.abs(sj.d_hol).max() <= 1e-10


@pytest.mark.parametrize("sig", CURVED_SIGS, ids=sig_id)
def test_lee_laws_composite_words(sig, rng):
    P = random_point(sig, rng)
    for _ in range(3):
        desc = random_word(sig, rng, int(rng.integers(2, 5)))
        rep = check_lee(sig, desc, P)
        assert rep.ok, (str(desc), rep)
        crep = check_chern_invariance(sig, desc, P)
        assert crep.ok, str(desc)


def test_chern_invariance_identity_and_dilation(rng):
    P = random_point(S2, rng)
    rep = check_chern_invariance(S2, MapDescriptor(word=()), P)
    assert rep.tensor_residual <= 1e-12
    rep = check_chern_invariance(S2, MapDescriptor(word=(Dilation(r=2.0),)), P)
    assert rep.tensor_residual <= 1e-8 * rep.scale
    rep = check_chern_invariance(S2, INV, P)
    assert rep.ok


@pytest.mark.parametrize("sig", [S2, S4], ids=sig_id)
def test_cr_function_identities_random_parameters(sig, rng):
    for _ in range(5):
        P = random_point(sig, rng)
        k = float(rng.uniform(0.5, 2.0))
        ns = sig.n[-1]
        a_s = 0.5 * (rng.normal(size=ns) + 1j * rng.normal(size=ns))
        t0 = float(rng.uniform(-1, 1))
        rep = check_cr_function_identities(sig, P, k, a_s, t0)
        assert rep.cov2_residual <= 1e-7
        assert rep.commutation_residual <= 1e-7
        assert rep.contracted_residual <= 1e-7


def test_cr_function_identities_trivial_case(rng):
    P = random_point(S2, rng)
    rep = check_cr_function_identities(S2, P, 1.0, np.zeros(1, complex), 0.0)
    assert rep.ok


def test_squared_function_is_negative_control(rng):
    """v^2 is CR but fails the flat-second-derivative hypothesis."""
    P = random_point(S2, rng)
    v_fun = cr_affine_function(S2, 1.0, np.zeros(1, complex), 0.0)

    def v2(z, t):
        return v_fun(z, t) ** 2

    sj = scalar_jet(S2, P, v2)
    assert np.abs(sj.cov2).max() > 1e-3


@pytest.mark.parametrize("sig", CURVED_SIGS, ids=sig_id)
def test_factor_annihilated_by_tangential_fields(sig, rng):
    P = random_point(sig, rng)
    for _ in range(3):
        desc = random_word(sig, rng, int(rng.integers(1, 4)))
        assert factor_w_annihilation(sig, desc, P) <= 1e-7


@pytest.mark.parametrize("sig", CURVED_SIGS, ids=sig_id)
def test_scalar_transport(sig, rng):
    P = random_point(sig, rng)
    for _ in range(3):
        desc = random_word(sig, rng, int(rng.integers(1, 4)))
        assert scalar_transport_residual(sig, desc, P) <= 1e-9
