"""Hot kernels for the singular pair quadrature.

The dominant cost of the package is summing weighted squared differences
of the continuous component over every cell pair of the mesh.  The loops
live here in two interchangeable implementations:

* ``numba``: the plain loops below compiled with ``@njit(cache=True)``;
* ``numpy``: vectorized per-distance broadcasting, no compilation.

Selection happens once at import time through the environment variable
``HYBRIDVAR_BACKEND`` ("numba", "numpy", or "auto"; default "auto" picks
numba when it imports).  Both implementations stay importable through
``implementations()`` so tests and the benchmark can compare them.

All kernels take the flattened per-distance template arrays produced by
``quadrature.build_pair_templates``: ``offsets[d]:offsets[d+1]`` slices the
point data of cell distance d, ``a0/a1`` (``b0/b1``) are local hat values
on the first (second) cell, and ``w`` already carries plain weights,
kernel values, and mesh scaling.  Mirrored pairs are folded in by doubling
every distance d >= 1 term.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

__all__ = [
    "ACTIVE_BACKEND",
    "cc_apply",
    "cc_energy",
    "cc_pairing",
    "implementations",
]

_ENV_VAR = "HYBRIDVAR_BACKEND"


# --- loop sources (compiled by numba, never bound directly) -------------------


def _cc_energy_loops(c, offsets, a0, a1, b0, b1, w):
    m = offsets.shape[0] - 1
    total = 0.0
    for d in range(m):
        s = 0.0
        for e in range(m - d):
            ce = c[e]
            ce1 = c[e + 1]
            cf = c[e + d]
            cf1 = c[e + d + 1]
            acc = 0.0
            for i in range(offsets[d], offsets[d + 1]):
                diff = ce * a0[i] + ce1 * a1[i] - cf * b0[i] - cf1 * b1[i]
                acc += w[i] * diff * diff
            s += acc
        if d == 0:
            total += s
        else:
            total += 2.0 * s
    return total


def _cc_pairing_loops(c, p, offsets, a0, a1, b0, b1, w):
    m = offsets.shape[0] - 1
    total = 0.0
    for d in range(m):
        s = 0.0
        for e in range(m - d):
            ce = c[e]
            ce1 = c[e + 1]
            cf = c[e + d]
            cf1 = c[e + d + 1]
            pe = p[e]
            pe1 = p[e + 1]
            pf = p[e + d]
            pf1 = p[e + d + 1]
            acc = 0.0
            for i in range(offsets[d], offsets[d + 1]):
                du = ce * a0[i] + ce1 * a1[i] - cf * b0[i] - cf1 * b1[i]
                dp = pe * a0[i] + pe1 * a1[i] - pf * b0[i] - pf1 * b1[i]
                acc += w[i] * du * dp
            s += acc
        if d == 0:
            total += s
        else:
            total += 2.0 * s
    return total


def _cc_apply_loops(c, offsets, a0, a1, b0, b1, w, out):
    # shared dofs of identical/adjacent pairs are accumulated through
    # difference rows, which vanish at the kernel singularity; keeping the
    # unfolded one-sided sums would cancel large near-diagonal weights
    m = offsets.shape[0] - 1
    for d in range(m):
        if d == 0:
            for e in range(m):
                ce = c[e]
                ce1 = c[e + 1]
                r0 = 0.0
                r1 = 0.0
                for i in range(offsets[0], offsets[1]):
                    db0 = a0[i] - b0[i]
                    db1 = a1[i] - b1[i]
                    du = w[i] * (ce * db0 + ce1 * db1)
                    r0 += du * db0
                    r1 += du * db1
                out[e] += r0
                out[e + 1] += r1
        elif d == 1:
            for e in range(m - 1):
                ce = c[e]
                ce1 = c[e + 1]
                cf1 = c[e + 2]
                r0 = 0.0
                r1 = 0.0
                r2 = 0.0
                for i in range(offsets[1], offsets[2]):
                    dmid = a1[i] - b0[i]
                    du = w[i] * (ce * a0[i] + ce1 * dmid - cf1 * b1[i])
                    r0 += du * a0[i]
                    r1 += du * dmid
                    r2 += du * b1[i]
                out[e] += 2.0 * r0
                out[e + 1] += 2.0 * r1
                out[e + 2] -= 2.0 * r2
        else:
            for e in range(m - d):
                ce = c[e]
                ce1 = c[e + 1]
                cf = c[e + d]
                cf1 = c[e + d + 1]
                r0 = 0.0
                r1 = 0.0
                r2 = 0.0
                r3 = 0.0
                for i in range(offsets[d], offsets[d + 1]):
                    du = w[i] * (ce * a0[i] + ce1 * a1[i] - cf * b0[i] - cf1 * b1[i])
                    r0 += du * a0[i]
                    r1 += du * a1[i]
                    r2 += du * b0[i]
                    r3 += du * b1[i]
                out[e] += 2.0 * r0
                out[e + 1] += 2.0 * r1
                out[e + d] -= 2.0 * r2
                out[e + d + 1] -= 2.0 * r3
    return out


# --- pure-numpy implementations ------------------------------------------------


def _cc_energy_numpy(c, offsets, a0, a1, b0, b1, w):
    m = offsets.shape[0] - 1
    total = 0.0
    for d in range(m):
        sl = slice(offsets[d], offsets[d + 1])
        diff = (
            np.outer(c[: m - d], a0[sl])
            + np.outer(c[1 : m - d + 1], a1[sl])
            - np.outer(c[d:m], b0[sl])
            - np.outer(c[d + 1 : m + 1], b1[sl])
        )
        s = float(((diff * diff) @ w[sl]).sum())
        total += s if d == 0 else 2.0 * s
    return total


def _cc_pairing_numpy(c, p, offsets, a0, a1, b0, b1, w):
    m = offsets.shape[0] - 1
    total = 0.0
    for d in range(m):
        sl = slice(offsets[d], offsets[d + 1])
        du = (
            np.outer(c[: m - d], a0[sl])
            + np.outer(c[1 : m - d + 1], a1[sl])
            - np.outer(c[d:m], b0[sl])
            - np.outer(c[d + 1 : m + 1], b1[sl])
        )
        dp = (
            np.outer(p[: m - d], a0[sl])
            + np.outer(p[1 : m - d + 1], a1[sl])
            - np.outer(p[d:m], b0[sl])
            - np.outer(p[d + 1 : m + 1], b1[sl])
        )
        s = float(((du * dp) @ w[sl]).sum())
        total += s if d == 0 else 2.0 * s
    return total


def _cc_apply_numpy(c, offsets, a0, a1, b0, b1, w, out):
    # see the loop source: shared dofs go through difference rows
    m = offsets.shape[0] - 1
    for d in range(m):
        sl = slice(offsets[d], offsets[d + 1])
        if d == 0:
            db0 = a0[sl] - b0[sl]
            db1 = a1[sl] - b1[sl]
            du = (np.outer(c[:m], db0) + np.outer(c[1 : m + 1], db1)) * w[sl]
            out[:m] += du @ db0
            out[1 : m + 1] += du @ db1
        elif d == 1:
            dmid = a1[sl] - b0[sl]
            du = (
                np.outer(c[: m - 1], a0[sl])
                + np.outer(c[1:m], dmid)
                - np.outer(c[2 : m + 1], b1[sl])
            ) * w[sl]
            out[: m - 1] += 2.0 * (du @ a0[sl])
            out[1:m] += 2.0 * (du @ dmid)
            out[2 : m + 1] -= 2.0 * (du @ b1[sl])
        else:
            du = (
                np.outer(c[: m - d], a0[sl])
                + np.outer(c[1 : m - d + 1], a1[sl])
                - np.outer(c[d:m], b0[sl])
                - np.outer(c[d + 1 : m + 1], b1[sl])
            ) * w[sl]
            out[: m - d] += 2.0 * (du @ a0[sl])
            out[1 : m - d + 1] += 2.0 * (du @ a1[sl])
            out[d:m] -= 2.0 * (du @ b0[sl])
            out[d + 1 : m + 1] -= 2.0 * (du @ b1[sl])
    return out


_NUMPY_IMPL = {
    "cc_energy": _cc_energy_numpy,
    "cc_pairing": _cc_pairing_numpy,
    "cc_apply": _cc_apply_numpy,
}


def _build_numba_impl():
    from numba import njit

    jit = njit(cache=True)
    return {
        "cc_energy": jit(_cc_energy_loops),
        "cc_pairing": jit(_cc_pairing_loops),
        "cc_apply": jit(_cc_apply_loops),
    }


def _select_backend() -> tuple[str, dict]:
    requested = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if requested not in ("auto", "numba", "numpy"):
        warnings.warn(
            f"{_ENV_VAR}={requested!r} is not one of auto/numba/numpy; using auto",
            stacklevel=2,
        )
        requested = "auto"
    if requested == "numpy":
        return "numpy", _NUMPY_IMPL
    try:
        return "numba", _build_numba_impl()
    except ImportError:
        if requested == "numba":
            raise ImportError("HYBRIDVAR_BACKEND=numba but numba is not importable")
        return "numpy", _NUMPY_IMPL


ACTIVE_BACKEND, _IMPL = _select_backend()


def implementations(name: str) -> dict:
    """Return the named implementation set ("numba" or "numpy")."""
    if name == "numpy":
        return _NUMPY_IMPL
    if name == "numba":
        return _build_numba_impl()
    raise ValueError(f"unknown backend '{name}'")


def cc_energy(c: np.ndarray, tpl) -> float:
    """Quadrature value of the continuous-continuous energy of coefficients c."""
    return float(
        _IMPL["cc_energy"](c, tpl.offsets, tpl.a0, tpl.a1, tpl.b0, tpl.b1, tpl.w)
    )


def cc_pairing(c: np.ndarray, p: np.ndarray, tpl) -> float:
    """Quadrature value of the continuous-continuous bilinear pairing."""
    return float(
        _IMPL["cc_pairing"](c, p, tpl.offsets, tpl.a0, tpl.a1, tpl.b0, tpl.b1, tpl.w)
    )


def cc_apply(c: np.ndarray, tpl) -> np.ndarray:
    """Pair the continuous energy form of c with every hat test function."""
    out = np.zeros(c.size)
    _IMPL["cc_apply"](c, tpl.offsets, tpl.a0, tpl.a1, tpl.b0, tpl.b1, tpl.w, out)
    return out
