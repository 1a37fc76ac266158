"""Hot numeric kernels with a numba lane and a pure-numpy fallback.

Backend selection: environment variable ``ELLIPCR_BACKEND`` set to ``numba``,
``numpy`` or ``auto`` (default).  ``auto`` takes numba when it imports, numpy
otherwise.  Both lanes compute identical quantities; the numba lane is plain
loops (jit-compiled, cached), the numpy lane is vectorized.

Kernels:
  * defining-function jets through fourth order (per-point, called per sample)
  * curvature 4-tensor by direct differentiation of the Levi form
  * curvature 4-tensor from the block closed form
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "backend_name",
    "pjet_core",
    "curvature_numeric_core",
    "curvature_closed_core",
    "numpy_kernels",
    "numba_kernels",
]

_FLAG = os.environ.get("ELLIPCR_BACKEND", "auto").strip().lower()
if _FLAG not in ("auto", "numba", "numpy"):
    raise ValueError(f"ELLIPCR_BACKEND must be auto|numba|numpy, got {_FLAG!r}")


# --------------------------------------------------------------------------
# loop implementations (numba-compilable as written)
# --------------------------------------------------------------------------

def _pjet_loops(z, starts, stops, exps):
    n = z.shape[0]
    zb = np.conj(z)
    p = 0.0
    grad = np.zeros(n, np.complex128)
    hess = np.zeros((n, n), np.complex128)
    third = np.zeros((n, n, n), np.complex128)
    fourth = np.zeros((n, n, n, n), np.complex128)
    for j in range(starts.shape[0]):
        lo, hi = starts[j], stops[j]
        m = exps[j]
        q = 0.0
        for a in range(lo, hi):
            q += z[a].real * z[a].real + z[a].imag * z[a].imag
        # falling-factorial derivative coefficients of q^m; zero before any
        # negative power appears (m is a positive integer)
        f = np.zeros(5)
        c = 1.0
        for k in range(1, 5):
            c *= m - (k - 1)
            if c == 0.0:
                break
            f[k] = c * q ** (m - k)
        p += q ** m
        for a in range(lo, hi):
            grad[a] = f[1] * zb[a]
            # real diagonal and mirrored upper triangle: exact hermiticity
            hess[a, a] = f[2] * (z[a].real * z[a].real + z[a].imag * z[a].imag) + f[1]
            for b in range(a + 1, hi):
                hess[a, b] = f[2] * zb[a] * z[b]
                hess[b, a] = np.conj(hess[a, b])
            for b in range(lo, hi):
                for l in range(lo, hi):
                    v3 = f[3] * zb[a] * z[b] * zb[l]
                    if a == b:
                        v3 += f[2] * zb[l]
                    if l == b:
                        v3 += f[2] * zb[a]
                    third[a, b, l] = v3
                    for mu in range(lo, hi):
                        v4 = f[4] * zb[a] * z[b] * zb[l] * z[mu]
                        if a == mu:
                            v4 += f[3] * z[b] * zb[l]
                        if l == mu:
                            v4 += f[3] * zb[a] * z[b]
                        if a == b:
                            v4 += f[3] * zb[l] * z[mu]
                        if l == b:
                            v4 += f[3] * zb[a] * z[mu]
                        if a == b and l == mu:
                            v4 += f[2]
                        if l == b and a == mu:
                            v4 += f[2]
                        fourth[a, b, l, mu] = v4
    return p, grad, hess, third, fourth


def _curvature_numeric_loops(H, G, D3, D3b, D4):
    n = H.shape[0]
    dG = np.zeros((n, n, n), np.complex128)
    for mu in range(n):
        for sg in range(n):
            for g in range(n):
                acc = 0.0 + 0.0j
                for d in range(n):
                    for e in range(n):
                        acc += G[sg, e] * D3b[mu, d, e] * G[d, g]
                dG[mu, sg, g] = -acc
    R = np.zeros((n, n, n, n), np.complex128)
    for a in range(n):
        for b in range(n):
            for l in range(n):
                for mu in range(n):
                    acc = 0.0 + 0.0j
                    for sg in range(n):
                        inner = 0.0 + 0.0j
                        for g in range(n):
                            inner += dG[mu, sg, g] * D3[l, a, g] + G[sg, g] * D4[l, mu, a, g]
                        acc += inner * H[sg, b]
                    R[a, b, l, mu] = -acc
    return R


def _curvature_closed_loops(QF, coeffs, block_of):
    n = QF.shape[0]
    R = np.zeros((n, n, n, n), np.complex128)
    for a in range(n):
        ja = block_of[a]
        c = coeffs[ja]
        if c == 0.0:
            continue
        for b in range(n):
            if block_of[b] != ja:
                continue
            for l in range(n):
                if block_of[l] != ja:
                    continue
                for mu in range(n):
                    if block_of[mu] != ja:
                        continue
                    R[a, b, l, mu] = c * (QF[l, mu] * QF[a, b] + QF[a, mu] * QF[l, b])
    return R


# --------------------------------------------------------------------------
# vectorized numpy lane
# --------------------------------------------------------------------------

def _pjet_numpy(z, starts, stops, exps):
    n = z.shape[0]
    zb = np.conj(z)
    p = 0.0
    grad = np.zeros(n, np.complex128)
    hess = np.zeros((n, n), np.complex128)
    third = np.zeros((n, n, n), np.complex128)
    fourth = np.zeros((n, n, n, n), np.complex128)
    for j in range(len(starts)):
        sl = slice(starts[j], stops[j])
        m = exps[j]
        w = zb[sl]
        v = z[sl]
        q = float(np.sum(w * v).real)
        f = np.zeros(5)
        c = 1.0
        for k in range(1, 5):
            c *= m - (k - 1)
            if c == 0.0:
                break
            f[k] = c * q ** (m - k)
        p += q ** m
        k = stops[j] - starts[j]
        eye = np.eye(k)
        grad[sl] = f[1] * w
        Hb = f[2] * np.einsum("a,b->ab", w, v) + f[1] * eye
        iu = np.triu_indices(k, 1)
        Hb[iu[1], iu[0]] = np.conj(Hb[iu])  # exact hermiticity by mirroring
        np.fill_diagonal(Hb, Hb.diagonal().real)
        hess[sl, sl] = Hb
        third[sl, sl, sl] = (
            f[3] * np.einsum("a,b,l->abl", w, v, w)
            + f[2] * (np.einsum("ab,l->abl", eye, w) + np.einsum("lb,a->abl", eye, w))
        )
        fourth[sl, sl, sl, sl] = (
            f[4] * np.einsum("a,b,l,m->ablm", w, v, w, v)
            + f[3] * (
                np.einsum("am,b,l->ablm", eye, v, w)
                + np.einsum("lm,a,b->ablm", eye, w, v)
                + np.einsum("ab,l,m->ablm", eye, w, v)
                + np.einsum("lb,a,m->ablm", eye, w, v)
            )
            + f[2] * (
                np.einsum("ab,lm->ablm", eye, eye)
                + np.einsum("lb,am->ablm", eye, eye)
            )
        )
    return p, grad, hess, third, fourth


def _curvature_numeric_numpy(H, G, D3, D3b, D4):
    dG = -np.einsum("se,mde,dg->msg", G, D3b, G)
    return -np.einsum("msg,lag,sb->ablm", dG, D3, H) - np.einsum(
        "sg,lmag,sb->ablm", G, D4, H
    )


def _curvature_closed_numpy(QF, coeffs, block_of):
    n = QF.shape[0]
    R = np.zeros((n, n, n, n), np.complex128)
    for j, c in enumerate(coeffs):
        if c == 0.0:
            continue
        idx = np.nonzero(block_of == j)[0]
        Qb = QF[np.ix_(idx, idx)]
        Rb = c * (
            np.einsum("lm,ab->ablm", Qb, Qb) + np.einsum("am,lb->ablm", Qb, Qb)
        )
        R[np.ix_(idx, idx, idx, idx)] = Rb
    return R


numpy_kernels = {
    "pjet_core": _pjet_numpy,
    "curvature_numeric_core": _curvature_numeric_numpy,
    "curvature_closed_core": _curvature_closed_numpy,
}

numba_kernels: dict | None = None
_BACKEND = "numpy"

if _FLAG in ("auto", "numba"):
    try:
        from numba import njit

        numba_kernels = {
            "pjet_core": njit(cache=True)(_pjet_loops),
            "curvature_numeric_core": njit(cache=True)(_curvature_numeric_loops),
            "curvature_closed_core": njit(cache=True)(_curvature_closed_loops),
        }
        _BACKEND = "numba"
    except ImportError:
        if _FLAG == "numba":
            raise
        numba_kernels = None

_active = numba_kernels if _BACKEND == "numba" else numpy_kernels

pjet_core = _active["pjet_core"]
curvature_numeric_core = _active["curvature_numeric_core"]
curvature_closed_core = _active["curvature_closed_core"]


def backend_name() -> str:
    return _BACKEND
