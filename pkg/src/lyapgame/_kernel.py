"""Compiled slot loop of the drift-plus-penalty engine.

Every arithmetic step mirrors the reference rules in ``dpp`` in the same
order, so the compiled loop and a step-by-step replay agree bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LOG, LINEAR, MIN_CAP = 0, 1, 2


@njit(cache=True)
def _gamma(kind, w, cap_c, V, Z, caps, levels, out):
    N = Z.shape[0]
    if kind == LOG:
        for i in range(N):
            if Z[i] <= 0:
                out[i] = caps[i]
            else:
                x = w[i] * V / Z[i] - 1.0
                out[i] = min(max(x, 0.0), caps[i])
    elif kind == LINEAR:
        for i in range(N):
            out[i] = caps[i] if w[i] * V - Z[i] > 0 else 0.0
    else:
        best = 0.0
        cand = np.empty(N)
        for k in range(levels.shape[0]):
            m = levels[k]
            lo = np.inf
            pen = 0.0
            for i in range(N):
                cand[i] = caps[i] if Z[i] <= 0 else min(m, caps[i])
                lo = min(lo, cand[i])
                pen += Z[i] * cand[i]
            val = V * min(lo, cap_c) - pen
            if k == 0 or val > best:
                best = val
                out[:] = cand


@njit(cache=True)
def _phi(kind, w, cap_c, g):
    if kind == LOG:
        s = 0.0
        for i in range(g.shape[0]):
            s += w[i] * np.log1p(g[i])
        return s
    if kind == LINEAR:
        s = 0.0
        for i in range(g.shape[0]):
            s += w[i] * g[i]
        return s
    return min(g.min(), cap_c)


@njit(cache=True)
def simulate(
    omega, Vs, caps, kind, w, cap_c, levels, table, starts, sizes, seg, jidx, tidx, cells, tcells,
    general, stride, snap_slots,
    alpha, rec_gamma, rec_theta, rec_u, rec_q, rec_ubar, rec_gbar_vec, rec_gbar,
    theta_avg, dev_avg, snap_q, snap_gamma, snap_theta, snap_alpha,
):
    R, T = omega.shape
    N = caps.shape[0]
    K = seg.shape[0]
    A = table.shape[1]
    for r in range(R):
        V = Vs[r]
        Z = np.zeros(N)
        Q = np.zeros(N)
        J = np.zeros(cells)
        usum = np.zeros(N)
        gsum = np.zeros(N)
        phisum = 0.0
        thsum = np.zeros(tcells)
        devsum = np.zeros(cells)
        gamma = np.empty(N)
        theta = np.zeros(N)
        coef = np.empty(N + K)
        Jc = np.empty(K)
        snap = 0
        for t in range(T):
            wv = omega[r, t]
            _gamma(kind, w, cap_c, V, Z, caps, levels, gamma)
            for k in range(K):
                Jc[k] = J[jidx[wv, k]]
            for i in range(N):
                s = 0.0
                for b in range(sizes[i]):
                    s += Jc[starts[i] + b]
                if general:
                    theta[i] = caps[i] if Q[i] < s else 0.0
                    coef[i] = -(Z[i] + Q[i])
                else:
                    coef[i] = -(Z[i] + s)
            for k in range(K):
                coef[N + k] = Jc[k]
            best_a = 0
            best_c = 0.0
            for a in range(A):
                c = 0.0
                for k in range(N + K):
                    c += coef[k] * table[wv, a, k]
                if a == 0 or c < best_c:
                    best_c = c
                    best_a = a
            if snap < snap_slots.shape[0] and snap_slots[snap] == t:
                snap_q[r, snap, :N] = Z
                if general:
                    snap_q[r, snap, N : 2 * N] = Q
                    snap_q[r, snap, 2 * N :] = J
                else:
                    snap_q[r, snap, N:] = J
                snap_gamma[r, snap] = gamma
                snap_theta[r, snap] = theta
                snap_alpha[r, snap] = best_a
                snap += 1
            row = table[wv, best_a]
            for i in range(N):
                u = row[i]
                Z[i] = Z[i] + gamma[i] - u
                if general:
                    Q[i] = max(Q[i] + theta[i] - u, 0.0)
                    thsum[tidx[wv, i]] += theta[i]
                usum[i] += u
                gsum[i] += gamma[i]
            for k in range(K):
                d = row[N + k]
                i = seg[k]
                sub = theta[i] if general else row[i]
                J[jidx[wv, k]] = max(Jc[k] + d - sub, 0.0)
                devsum[jidx[wv, k]] += d
            phisum += _phi(kind, w, cap_c, gamma)
            alpha[r, t] = best_a
            if (t + 1) % stride == 0:
                j = (t + 1) // stride - 1
                rec_gamma[r, j] = gamma
                rec_theta[r, j] = theta
                for i in range(N):
                    rec_u[r, j, i] = row[i]
                    rec_ubar[r, j, i] = usum[i] / (t + 1)
                    rec_gbar_vec[r, j, i] = gsum[i] / (t + 1)
                rec_q[r, j, :N] = Z
                if general:
                    rec_q[r, j, N : 2 * N] = Q
                    rec_q[r, j, 2 * N :] = J
                else:
                    rec_q[r, j, N:] = J
                rec_gbar[r, j] = phisum / (t + 1)
        if T > 0:
            for c in range(tcells):
                theta_avg[r, c] = thsum[c] / T
            for c in range(cells):
                dev_avg[r, c] = devsum[c] / T


def fairness_code(fairness):
    kind = {"weighted-log": LOG, "linear": LINEAR, "min-with-cap": MIN_CAP}[fairness.kind]
    weights = np.asarray(fairness.weights if fairness.weights else (0.0,), dtype=float)
    cap = float(fairness.cap) if fairness.cap is not None else 0.0
    return kind, weights, cap
