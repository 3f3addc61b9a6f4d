"""Numerical hot kernels with two interchangeable backends.

Every kernel exists twice: a pure-NumPy implementation (``*_numpy``) and a
Numba ``@njit`` version (``*_numba``) compiled from the same arithmetic in
the same evaluation order, so the two backends produce identical floating
point results.  The active backend is chosen once at import time:

* ``QAML_BACKEND=numpy``  forces the pure-NumPy path,
* ``QAML_BACKEND=numba``  forces the JIT path (error if numba is missing),
* unset / ``auto``        uses numba when importable, NumPy otherwise.

``benchmarks/bench_kernels.py`` times both paths side by side.

State vectors are dense complex128 arrays over ``2**n`` amplitudes with
qubit 0 stored as the most significant bit of the amplitude index.  Gates
are packed into flat arrays (target bit, control mask, control value,
2x2 matrix) so a whole circuit runs inside one kernel call.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def _backend_choice() -> str:
    choice = os.environ.get("QAML_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if choice == "numba" and not HAVE_NUMBA:
        raise RuntimeError("QAML_BACKEND=numba requested but numba is not importable")
    if choice not in ("numba", "numpy"):
        raise RuntimeError(f"unknown QAML_BACKEND value: {choice!r}")
    return choice


# ---------------------------------------------------------------------------
# circuit evolution
# ---------------------------------------------------------------------------

def run_circuit_numpy(amps, targets, cmasks, cvals, mats):
    """Apply a packed gate sequence to a copy of ``amps`` and return it.

    targets[g] is the target-qubit bit mask, cmasks[g]/cvals[g] encode the
    control condition ``(index & cmask) == cval``, mats[g] is the 2x2 gate.
    """
    out = amps.copy()
    idx = np.arange(out.shape[0])
    for g in range(targets.shape[0]):
        tbit = targets[g]
        sel = ((idx & tbit) == 0) & ((idx & cmasks[g]) == cvals[g])
        i0 = idx[sel]
        i1 = i0 | tbit
        a0 = out[i0]
        a1 = out[i1]
        out[i0] = mats[g, 0, 0] * a0 + mats[g, 0, 1] * a1
        out[i1] = mats[g, 1, 0] * a0 + mats[g, 1, 1] * a1
    return out


def _run_circuit_loop(amps, targets, cmasks, cvals, mats):
    out = amps.copy()
    dim = out.shape[0]
    for g in range(targets.shape[0]):
        tbit = targets[g]
        cmask = cmasks[g]
        cval = cvals[g]
        m00 = mats[g, 0, 0]
        m01 = mats[g, 0, 1]
        m10 = mats[g, 1, 0]
        m11 = mats[g, 1, 1]
        for i in range(dim):
            if (i & tbit) == 0 and (i & cmask) == cval:
                j = i | tbit
                a0 = out[i]
                a1 = out[j]
                out[i] = m00 * a0 + m01 * a1
                out[j] = m10 * a0 + m11 * a1
    return out


# ---------------------------------------------------------------------------
# circuit observables
# ---------------------------------------------------------------------------

def expectation_zz_numpy(amps, bit1, bit2):
    """<Z Z> over the two qubits addressed by the given bit masks."""
    idx = np.arange(amps.shape[0])
    z1 = 1.0 - 2.0 * ((idx & bit1) != 0)
    z2 = 1.0 - 2.0 * ((idx & bit2) != 0)
    probs = amps.real * amps.real + amps.imag * amps.imag
    return float(np.sum(z1 * z2 * probs))


def _expectation_zz_loop(amps, bit1, bit2):
    total = 0.0
    for i in range(amps.shape[0]):
        p = amps[i].real * amps[i].real + amps[i].imag * amps[i].imag
        s1 = -1.0 if (i & bit1) != 0 else 1.0
        s2 = -1.0 if (i & bit2) != 0 else 1.0
        total += s1 * s2 * p
    return total


# ---------------------------------------------------------------------------
# symmetric eigensolver (cyclic Jacobi)
# ---------------------------------------------------------------------------

def jacobi_eigh_numpy(A, tol=1e-12, max_sweeps=100):
    """Diagonalize a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors-as-columns), unsorted.  Convergence:
    off-diagonal Frobenius norm below ``tol`` times the matrix norm, capped
    at ``max_sweeps`` full sweeps.
    """
    A = A.copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A**2) - np.sum(np.diag(A) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * A[:, p] - s * A[:, q]
                rot_q = s * A[:, p] + c * A[:, q]
                A[:, p] = rot_p
                A[:, q] = rot_q
                rot_p = c * A[p, :] - s * A[q, :]
                rot_q = s * A[p, :] + c * A[q, :]
                A[p, :] = rot_p
                A[q, :] = rot_q
                rot_p = c * V[:, p] - s * V[:, q]
                rot_q = s * V[:, p] + c * V[:, q]
                V[:, p] = rot_p
                V[:, q] = rot_q
    return np.diag(A).copy(), V


def _jacobi_eigh_loop(A, tol, max_sweeps):
    A = A.copy()
    n = A.shape[0]
    V = np.eye(n)
    total = 0.0
    diag_sq = 0.0
    for i in range(n):
        for j in range(n):
            total += A[i, j] * A[i, j]
        diag_sq += A[i, i] * A[i, i]
    scale = max(np.sqrt(total), 1e-300)
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += A[i, j] * A[i, j]
        if np.sqrt(off) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * (A[q, q] - A[p, p]) / apq
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    aip = A[i, p]
                    aiq = A[i, q]
                    A[i, p] = c * aip - s * aiq
                    A[i, q] = s * aip + c * aiq
                for i in range(n):
                    api = A[p, i]
                    aqi = A[q, i]
                    A[p, i] = c * api - s * aqi
                    A[q, i] = s * api + c * aqi
                for i in range(n):
                    vip = V[i, p]
                    viq = V[i, q]
                    V[i, p] = c * vip - s * viq
                    V[i, q] = s * vip + c * viq
    evals = np.empty(n)
    for i in range(n):
        evals[i] = A[i, i]
    return evals, V


if HAVE_NUMBA:
    run_circuit_numba = njit(cache=True)(_run_circuit_loop)
    expectation_zz_numba = njit(cache=True)(_expectation_zz_loop)
    jacobi_eigh_numba = njit(cache=True)(_jacobi_eigh_loop)


BACKEND = _backend_choice()

if BACKEND == "numba":
    run_circuit = run_circuit_numba
    expectation_zz_kernel = expectation_zz_numba

    def jacobi_eigh(A, tol=1e-12, max_sweeps=100):
        return jacobi_eigh_numba(np.ascontiguousarray(A, dtype=np.float64), tol, max_sweeps)

else:
    run_circuit = run_circuit_numpy
    expectation_zz_kernel = expectation_zz_numpy

    def jacobi_eigh(A, tol=1e-12, max_sweeps=100):
        return jacobi_eigh_numpy(np.ascontiguousarray(A, dtype=np.float64), tol, max_sweeps)


def active_backend() -> str:
    """Name of the kernel backend selected at import time."""
    return BACKEND
