"""Compiled time-stepping kernels.

The Hamiltonian is stored as CSR over the distinct matrix positions.  Each
position collects contributions from one or more operators; contribution
``p`` adds ``coeff(op) * val[p]`` to slot ``slot[p]``, where the coefficient
is ``z`` (mode 0), ``conj(z)`` (mode 1, the Hermitian-conjugate copy) or
``Re(z)`` (mode 2).  States are ``(k, dim)`` blocks so several columns share
one pass over the matrix.
"""
from __future__ import annotations

import numba as nb
import numpy as np

TAYLOR_TOL2 = 1e-30
TAYLOR_MAX = 60

SCHEME_MIDPOINT = 0
SCHEME_CF4 = 1
SCHEME_JUMP6 = 2
SCHEME_SUZUKI6 = 3


@nb.njit(cache=True)
def _piece(t, t0, t1, ramp):
    """Envelope branch at ``t``: -1 off, 0 flat, 1 rising edge, 2 falling edge."""
    if t < t0 or t >= t1:
        return -1
    if ramp > 0.0:
        if t - t0 < ramp:
            return 1
        if t1 - t < ramp:
            return 2
    return 0


@nb.njit(cache=True)
def _branch(piece, t, t0, t1, ramp, power):
    if piece < 0:
        return 0.0
    f = 1.0
    if piece == 1:
        f = np.sin(0.5 * np.pi * (t - t0) / ramp) ** 2
    elif piece == 2:
        f = np.sin(0.5 * np.pi * (t1 - t) / ramp) ** 2
    if power == 2:
        return f * f
    return f


@nb.njit(cache=True)
def _envelope(t, t0, t1, ramp, power):
    return _branch(_piece(t, t0, t1, ramp), t, t0, t1, ramp, power)


@nb.njit(cache=True)
def channel_values(ch_op, ch_amp, ch_omega, ch_t0, ch_t1, ch_ramp, ch_pow, t, z):
    z[:] = 0.0
    for c in range(ch_op.shape[0]):
        e = _envelope(t, ch_t0[c], ch_t1[c], ch_ramp[c], ch_pow[c])
        if e == 0.0:
            continue
        w = ch_omega[c] * t
        z[ch_op[c]] += ch_amp[c] * e * (np.cos(w) + 1j * np.sin(w))


@nb.njit(cache=True)
def _smooth_values(ch_op, ch_amp, ch_omega, ch_t0, ch_t1, ch_ramp, ch_pow, pieces, t, z):
    """Channel values with each envelope continued analytically from a fixed branch.

    Composed steps sample slightly outside the step, so the branch is fixed
    per interval instead of re-clipped at every node.
    """
    z[:] = 0.0
    for c in range(ch_op.shape[0]):
        e = _branch(pieces[c], t, ch_t0[c], ch_t1[c], ch_ramp[c], ch_pow[c])
        if e == 0.0:
            continue
        w = ch_omega[c] * t
        z[ch_op[c]] += ch_amp[c] * e * (np.cos(w) + 1j * np.sin(w))


@nb.njit(cache=True, fastmath=True)
def _slot_coeffs(val, slot, eop, emode, z, cz):
    cz[:] = 0.0
    for p in range(val.shape[0]):
        zo = z[eop[p]]
        m = emode[p]
        if m == 0:
            cz[slot[p]] += zo * val[p]
        elif m == 1:
            cz[slot[p]] += np.conj(zo) * val[p]
        else:
            cz[slot[p]] += zo.real * val[p]


@nb.njit(cache=True, fastmath=True)
def _expmul(indptr, col, cz, h, x, term, buf):
    """x <- exp(-i h H) x by a Taylor series run to machine precision."""
    k = x.shape[0]
    dim = x.shape[1]
    term[:, :] = x
    m = 1
    while True:
        f = -1j * h / m
        for j in range(k):
            for r in range(dim):
                acc = 0j
                for p in range(indptr[r], indptr[r + 1]):
                    acc += cz[p] * term[j, col[p]]
                buf[j, r] = f * acc
        nrm = 0.0
        for j in range(k):
            for i in range(dim):
                v = buf[j, i]
                term[j, i] = v
                x[j, i] += v
                nrm += v.real * v.real + v.imag * v.imag
        m += 1
        if nrm < TAYLOR_TOL2 or m > TAYLOR_MAX:
            break


@nb.njit(cache=True)
def _cf4_step(indptr, col, val, slot, eop, emode, ch_op, ch_amp, ch_omega, ch_t0, ch_t1, ch_ramp, ch_pow,
              pieces, t, h, x, z1, z2, za, cz, term, buf):
    """Fourth-order commutator-free Magnus step with two Gauss-Legendre nodes."""
    s3 = np.sqrt(3.0)
    c1 = 0.5 - s3 / 6
    c2 = 0.5 + s3 / 6
    a1 = (3 - 2 * s3) / 12
    a2 = (3 + 2 * s3) / 12
    nop = z1.shape[0]
    _smooth_values(ch_op, ch_amp, ch_omega, ch_t0, ch_t1, ch_ramp, ch_pow, pieces, t + c1 * h, z1)
    _smooth_values(ch_op, ch_amp, ch_omega, ch_t0, ch_t1, ch_ramp, ch_pow, pieces, t + c2 * h, z2)
    for o in range(nop):
        za[o] = a2 * z1[o] + a1 * z2[o]
    _slot_coeffs(val, slot, eop, emode, za, cz)
    _expmul(indptr, col, cz, h, x, term, buf)
    for o in range(nop):
        za[o] = a1 * z1[o] + a2 * z2[o]
    _slot_coeffs(val, slot, eop, emode, za, cz)
    _expmul(indptr, col, cz, h, x, term, buf)


def composition_weights(scheme: int) -> np.ndarray:
    """Sub-step fractions of the symmetric compositions that lift CF4 to sixth order."""
    if scheme == SCHEME_JUMP6:
        w1 = 1.0 / (2.0 - 2.0 ** 0.2)
        return np.array([w1, 1.0 - 2.0 * w1, w1])
    if scheme == SCHEME_SUZUKI6:
        p = 1.0 / (4.0 - 4.0 ** 0.2)
        return np.array([p, p, 1.0 - 4.0 * p, p, p])
    return np.array([1.0])


@nb.njit(cache=True)
def evolve_steps(indptr, col, val, slot, eop, emode, nop,
                 ch_op, ch_amp, ch_omega, ch_t0, ch_t1, ch_ramp, ch_pow,
                 t0, h, nsteps, x, scheme, weights):
    """Advance the block ``x`` by ``nsteps`` steps of size ``h`` from ``t0``.

    scheme 0 is the exponential midpoint rule; otherwise each step is a
    sequence of CF4 sub-steps of size ``weights[i] * h``.
    """
    z1 = np.zeros(nop, np.complex128)
    z2 = np.zeros(nop, np.complex128)
    za = np.zeros(nop, np.complex128)
    cz = np.zeros(col.shape[0], np.complex128)
    term = np.empty_like(x)
    buf = np.empty_like(x)
    # all steps lie inside one smooth interval; fix each envelope branch there
    tm = t0 + 0.5 * nsteps * h
    pieces = np.empty(ch_op.shape[0], np.int64)
    for c in range(ch_op.shape[0]):
        pieces[c] = _piece(tm, ch_t0[c], ch_t1[c], ch_ramp[c])
    for n in range(nsteps):
        t = t0 + n * h
        if scheme == SCHEME_MIDPOINT:
            _smooth_values(ch_op, ch_amp, ch_omega, ch_t0, ch_t1, ch_ramp, ch_pow, pieces, t + 0.5 * h, z1)
            _slot_coeffs(val, slot, eop, emode, z1, cz)
            _expmul(indptr, col, cz, h, x, term, buf)
            continue
        s = t
        for w in weights:
            _cf4_step(indptr, col, val, slot, eop, emode, ch_op, ch_amp, ch_omega, ch_t0, ch_t1, ch_ramp,
                      ch_pow, pieces, s, w * h, x, z1, z2, za, cz, term, buf)
            s += w * h
