"""Numba kernels for the Metropolis-within-Gibbs sweep hot path.

The spectral prior makes every pixel proposal O(K) in the number of
frequencies, so the inner loops are jitted and release the GIL (the
wavefront scheduler runs chunks on threads). Hermitian symmetry of the
real object's spectrum is exploited by iterating one representative per
conjugate pair, halving the per-proposal work; pair bookkeeping lives in
:mod:`bayesdecon.sampler`.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_TINY_MAG2 = 1e-300


@njit(cache=True, nogil=True)
def draw_photon_count(w, mu, gain, offset, rvar, u):
    """Inverse-CDF draw from p(phi) ~ Normal(w; G phi + o, var) Poisson(phi; mu).

    Enumerates an 8-sigma window around both the Poisson and the
    readout-implied count. ``u`` is a uniform variate supplied by the caller.
    """
    if mu <= 0.0:
        return 0.0
    pe = (w - offset) / gain
    hi_c = mu if mu > pe else pe
    lo_c = mu if mu < pe else pe
    half = 8.0 * math.sqrt(hi_c + 1.0) + 8.0
    lo = int(math.floor(lo_c - half))
    if lo < 0:
        lo = 0
    hi = int(math.ceil(hi_c + half))
    n = hi - lo + 1
    logmu = math.log(mu)
    logp = np.empty(n)
    best = -1e300
    for k in range(n):
        p = float(lo + k)
        d = w - gain * p - offset
        lp = -0.5 * d * d / rvar + p * logmu - mu - math.lgamma(p + 1.0)
        logp[k] = lp
        if lp > best:
            best = lp
    if best <= -1e300:
        # Window mass underflowed; fall back to the readout-implied count.
        fb = pe if pe > 0.0 else 0.0
        return float(round(fb))
    total = 0.0
    for k in range(n):
        logp[k] = math.exp(logp[k] - best)
        total += logp[k]
    target = u * total
    acc = 0.0
    for k in range(n):
        acc += logp[k]
        if acc >= target:
            return float(lo + k)
    return float(hi)


@njit(cache=True, nogil=True)
def resample_photons(w, mu, gain, offset, rvar, phi, ir0, ir1, ic0, ic1, u):
    """Refresh latent photon counts for every pixel in the chunk interior."""
    for i in range(ir0, ir1):
        for j in range(ic0, ic1):
            phi[i, j] = draw_photon_count(
                w[i, j], mu[i, j], gain[i, j], offset[i, j], rvar[i, j],
                u[i - ir0, j - ic0],
            )


@njit(cache=True, nogil=True, fastmath=True)
def sweep_pixels(
    obj, mu, phi,
    ir0, ir1, ic0, ic1,
    psf, hp,
    use_prior, s_re, s_im, scal,
    rep_r, rep_c, conj_r, conj_c, w_alpha, w_mag, k_total,
    cos_r, sin_r, cos_c, sin_c,
    eps_arr, u_arr,
    start_flat, max_updates,
):
    """One raster-order pass of multiplicative pixel proposals over a chunk.

    ``scal`` carries [magnitude sum S, weighted log sum L, updates since
    spectrum refresh]. Returns (next_flat_index, n_accepted): when the
    update budget is exhausted the caller refreshes the spectrum and
    re-enters at the returned index, so drift stays bounded. Accepted
    pixels take effect immediately for subsequent proposals.
    """
    img_h, img_w = mu.shape
    ncols = ic1 - ic0
    n_int = (ir1 - ir0) * ncols
    n_rep = rep_r.shape[0]
    n_accept = 0
    flat = start_flat
    while flat < n_int:
        if use_prior == 1 and scal[2] >= max_updates:
            return flat, n_accept
        i = ir0 + flat // ncols
        j = ic0 + flat % ncols
        e = eps_arr[flat]
        rho = obj[i, j]
        rho_new = rho * math.exp(e)
        d = rho_new - rho

        r0 = i - hp
        if r0 < 0:
            r0 = 0
        r1 = i + hp + 1
        if r1 > img_h:
            r1 = img_h
        c0 = j - hp
        if c0 < 0:
            c0 = 0
        c1 = j + hp + 1
        if c1 > img_w:
            c1 = img_w

        # Poisson part of the completed likelihood over the PSF window;
        # the Normal readout terms do not involve mu and cancel.
        dll = 0.0
        ok = True
        for r in range(r0, r1):
            pr = r - i + hp
            for c in range(c0, c1):
                pv = psf[pr, c - j + hp]
                if pv == 0.0:
                    continue
                m_old = mu[r, c]
                m_new = m_old + d * pv
                if m_new <= 0.0:
                    ok = False
                    break
                dll += phi[r, c] * (math.log(m_new) - math.log(m_old)) - d * pv
            if not ok:
                break

        dlp = 0.0
        s_new = 0.0
        l_new = 0.0
        if ok and use_prior == 1:
            for t in range(n_rep):
                kr = rep_r[t]
                kc = rep_c[t]
                a = cos_r[i, kr]
                b = sin_r[i, kr]
                cp = cos_c[j, kc]
                dp = sin_c[j, kc]
                nre = s_re[kr, kc] + d * (a * cp - b * dp)
                nim = s_im[kr, kc] - d * (a * dp + b * cp)
                m2 = nre * nre + nim * nim
                if m2 < _TINY_MAG2:
                    m2 = _TINY_MAG2
                s_new += w_mag[t] * math.sqrt(m2)
                l_new += w_alpha[t] * math.log(m2)
            dlp = (l_new - scal[1]) + (k_total - 1.0) * (
                math.log(s_new) - math.log(scal[0])
            )

        if ok:
            # log(rho_new / rho) = e corrects for the asymmetric proposal.
            log_r = dll + dlp + e
            accept = log_r >= 0.0 or u_arr[flat] < math.exp(log_r)
        else:
            accept = False

        if accept:
            n_accept += 1
            obj[i, j] = rho_new
            for r in range(r0, r1):
                pr = r - i + hp
                for c in range(c0, c1):
                    mu[r, c] += d * psf[pr, c - j + hp]
            if use_prior == 1:
                for t in range(n_rep):
                    kr = rep_r[t]
                    kc = rep_c[t]
                    a = cos_r[i, kr]
                    b = sin_r[i, kr]
                    cp = cos_c[j, kc]
                    dp = sin_c[j, kc]
                    nre = s_re[kr, kc] + d * (a * cp - b * dp)
                    nim = s_im[kr, kc] - d * (a * dp + b * cp)
                    s_re[kr, kc] = nre
                    s_im[kr, kc] = nim
                    kr2 = conj_r[t]
                    kc2 = conj_c[t]
                    if kr2 != kr or kc2 != kc:
                        s_re[kr2, kc2] = nre
                        s_im[kr2, kc2] = -nim
                scal[0] = s_new
                scal[1] = l_new
                scal[2] += 1.0
        flat += 1
    return flat, n_accept
