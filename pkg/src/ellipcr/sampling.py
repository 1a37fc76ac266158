"""Seeded random sampling of admissible points, tangent vectors, and map words.

Everything takes an explicit numpy Generator so reports are reproducible;
nothing here touches global random state.
"""

from __future__ import annotations

import numpy as np

from .frame import TangentVector
from .maps import BlockUnitary, Dilation, Inversion, MapDescriptor, Translation
from .signature import Signature, SurfacePoint


def random_point(
    sig: Signature,
    rng: np.random.Generator,
    radius_range: tuple[float, float] = (0.45, 1.35),
    t_range: float = 1.2,
) -> SurfacePoint:
    """Admissible point with every strict block well inside the chart.

    Block radii stay in ``radius_range`` so closed-form coefficients
    |z_j|^{-2 m_j} remain O(1) and inversion never approaches its guard.
    """
    z = np.zeros(sig.total_n, dtype=np.complex128)
    for j, blk in enumerate(sig.blocks):
        idx = list(blk)
        if not idx:
            continue
        raw = rng.normal(size=len(idx)) + 1j * rng.normal(size=len(idx))
        if j < sig.s - 1:
            raw /= np.linalg.norm(raw)
            z[idx] = raw * rng.uniform(*radius_range)
        else:
            z[idx] = 0.5 * raw
    t = rng.uniform(-t_range, t_range)
    return SurfacePoint(z=z, t=float(t))


def random_points(sig: Signature, rng: np.random.Generator, count: int, **kw):
    return [random_point(sig, rng, **kw) for _ in range(count)]


def random_hol_vector(
    sig: Signature, point: SurfacePoint, rng: np.random.Generator
) -> TangentVector:
    v = rng.normal(size=sig.total_n) + 1j * rng.normal(size=sig.total_n)
    return TangentVector.holomorphic(point, v)


def random_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    if k == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    A = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    Q, R = np.linalg.qr(A)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_sigma(sig: Signature, rng: np.random.Generator) -> tuple:
    """Random permutation of 1..s-1 preserving block type (m_j, n_j)."""
    classes: dict = {}
    for j in range(1, sig.s):
        classes.setdefault((sig.m[j - 1], sig.n[j - 1]), []).append(j)
    out = [0] * (sig.s - 1)
    for members in classes.values():
        shuffled = list(members)
        rng.shuffle(shuffled)
        for src, dst in zip(members, shuffled):
            out[src - 1] = dst
    return tuple(out)


def random_psi(sig: Signature, rng: np.random.Generator) -> BlockUnitary:
    sigma = random_sigma(sig, rng)
    B = tuple(random_unitary(sig.n[j - 1], rng) for j in range(1, sig.s))
    ns = sig.n[-1]
    B_s = random_unitary(ns, rng) if ns >= 1 else None
    b_s = 0.5 * (rng.normal(size=ns) + 1j * rng.normal(size=ns))
    t0 = float(rng.uniform(-1.0, 1.0))
    return BlockUnitary(sigma=sigma, B=B, B_s=B_s, b_s=b_s, t0=t0)


def random_translation(sig: Signature, rng: np.random.Generator) -> Translation:
    ns = sig.n[-1]
    a_s = 0.5 * (rng.normal(size=ns) + 1j * rng.normal(size=ns))
    t0 = float(rng.uniform(-1.0, 1.0))
    return Translation(a_s=a_s, t0=t0)


def random_generator(sig: Signature, rng: np.random.Generator, kinds=("inv", "dil", "phi", "psi")):
    kind = kinds[rng.integers(len(kinds))]
    if kind == "inv":
        return Inversion()
    if kind == "dil":
        return Dilation(r=float(rng.uniform(0.4, 2.5)))
    if kind == "phi":
        return random_translation(sig, rng)
    return random_psi(sig, rng)


def random_word(
    sig: Signature,
    rng: np.random.Generator,
    length: int,
    kinds=("inv", "dil", "phi", "psi"),
) -> MapDescriptor:
    return MapDescriptor(
        word=tuple(random_generator(sig, rng, kinds) for _ in range(length))
    )


def random_normal_form_word(
    sig: Signature, rng: np.random.Generator, with_inversion: bool | None = None
) -> MapDescriptor:
    """A word psi . dil . [inv .] phi with random parameters."""
    if with_inversion is None:
        with_inversion = bool(rng.integers(2))
    gens = [random_psi(sig, rng), Dilation(r=float(rng.uniform(0.4, 2.5)))]
    if with_inversion:
        gens.append(Inversion())
    gens.append(random_translation(sig, rng))
    return MapDescriptor(word=tuple(gens))
