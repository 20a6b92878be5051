"""Hot numerical loops: mixture sampler sweep, quantile inversion, partition search.

Everything here is written as scalar-loop code over plain ndarrays with an
explicit ``np.random.Generator`` so the same source runs under numba or as
ordinary Python (see :mod:`ssdbayes._jit`).  Random streams are identical on
both paths.  Functions are deliberately free of Python objects; wrappers in
the public modules handle validation and packing.
"""

import math

import numpy as np

from ._jit import jit

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
DENSITY_FLOOR = 1e-300

# observation kind codes shared with data_model
EXACT = 0
LEFT = 1
RIGHT = 2
INTERVAL = 3


@jit
def norm_pdf(x, mu, sigma):
    z = (x - mu) / sigma
    return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


@jit
def norm_cdf(x, mu, sigma):
    z = (x - mu) / (sigma * math.sqrt(2.0))
    return 0.5 * math.erfc(-z)


@jit
def obs_kernel(kind, a, b, mu, sigma):
    """Likelihood contribution of one (possibly censored) observation.

    Exact values use the normal density; censored values use the normal CDF
    evaluated at the observation bounds (a = value or single bound, b = upper
    interval bound).
    """
    if kind == EXACT:
        return norm_pdf(a, mu, sigma)
    if kind == LEFT:
        return norm_cdf(a, mu, sigma)
    if kind == RIGHT:
        return 1.0 - norm_cdf(a, mu, sigma)
    return norm_cdf(b, mu, sigma) - norm_cdf(a, mu, sigma)


@jit
def obs_log_kernel(kind, a, b, mu, sigma):
    # censored contributions are floored before the log; exact ones use the
    # closed-form log-density to stay finite far in the tails
    if kind == EXACT:
        z = (a - mu) / sigma
        return -0.5 * z * z - math.log(sigma) - LOG_SQRT_2PI
    v = obs_kernel(kind, a, b, mu, sigma)
    if v < DENSITY_FLOOR:
        v = DENSITY_FLOOR
    return math.log(v)


# ---------------------------------------------------------------------------
# Tilted-stable Levy tail and Ferguson-Klass jump generation
# ---------------------------------------------------------------------------


@jit
def _upper_gamma_cf(a, z):
    # unregularized Gamma(a, z) by continued fraction (modified Lentz);
    # reliable for z >= 1, works for negative a
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-z + a * math.log(z))


@jit
def _lower_gamma_series(a, z):
    # unregularized lower incomplete gamma by power series; for z < a + 1
    ap = a
    summ = 1.0 / a
    delta = summ
    for _ in range(500):
        ap += 1.0
        delta *= z / ap
        summ += delta
        if abs(delta) < abs(summ) * 1e-17:
            break
    return summ * math.exp(-z + a * math.log(z))


@jit
def stable_tail(x, gam, u):
    """Tail mass M(x) of the exponentially tilted stable Levy intensity.

    M(x) = int_x^inf exp(-u s) * gam / Gamma(1 - gam) * s^(-1 - gam) ds.
    Strictly decreasing in x; closed form x^(-gam)/Gamma(1-gam) when u = 0.
    """
    if x <= 0.0:
        return math.inf
    if u <= 0.0:
        return x ** (-gam) / math.gamma(1.0 - gam)
    z = u * x
    coef = gam * u**gam / math.gamma(1.0 - gam)
    if z >= 1.0:
        return coef * _upper_gamma_cf(-gam, z)
    # small z: Gamma(-gam, z) = (z^-gam e^-z - Gamma(1-gam, z)) / gam
    a = 1.0 - gam
    upper = math.gamma(a) - _lower_gamma_series(a, z)
    g_neg = (math.exp(-z - gam * math.log(z)) - upper) / gam
    return coef * g_neg


@jit
def _invert_tail_bracketed(tau, gam, u, hi0):
    # safeguarded Newton on the convex decreasing tail; hi0 is a known upper
    # bracket for the root (M(hi0) <= tau)
    hi = hi0
    lo = hi
    flo = stable_tail(lo, gam, u) - tau
    for _ in range(2000):
        if flo >= 0.0 or lo < 1e-290:
            break
        lo *= 0.5
        flo = stable_tail(lo, gam, u) - tau
    if flo < 0.0:
        return lo
    x = lo
    fx = flo
    dens_coef = gam / math.gamma(1.0 - gam)
    for _ in range(100):
        deriv = -dens_coef * x ** (-1.0 - gam) * math.exp(-u * x)
        xn = x - fx / deriv
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        fn = stable_tail(xn, gam, u) - tau
        if fn >= 0.0:
            lo = xn
        else:
            hi = xn
        x = xn
        fx = fn
        if abs(fn) <= 1e-12 * tau or hi - lo <= 1e-14 * x:
            break
    return x


@jit
def invert_tail(tau, gam, u):
    """Solve M(x) = tau for x (Ferguson-Klass jump at arrival time tau)."""
    if u <= 0.0:
        return (tau * math.gamma(1.0 - gam)) ** (-1.0 / gam)
    # the untilted inverse bounds the tilted one from above
    hi = (tau * math.gamma(1.0 - gam)) ** (-1.0 / gam)
    return _invert_tail_bracketed(tau, gam, u, hi)


@jit
def ferguson_klass_jumps(gam, u, tol, max_jumps, rng):
    """Jumps of the tilted stable CRM in decreasing order.

    Arrival times are cumulative unit exponentials; generation stops once the
    expected size of the next jump (the tail inverse one expected arrival
    ahead) falls below ``tol`` times the mass accumulated so far, i.e. when
    M(tol * mass) < tau + 1 (the inverse-free form of the same criterion).
    """
    buf = np.empty(max_jumps)
    tau = 0.0
    total = 0.0
    k = 0
    prev = math.inf
    while k < max_jumps:
        tau += rng.exponential(1.0)
        if u <= 0.0:
            j = (tau * math.gamma(1.0 - gam)) ** (-1.0 / gam)
        elif math.isfinite(prev):
            j = _invert_tail_bracketed(tau, gam, u, prev)
        else:
            j = invert_tail(tau, gam, u)
        buf[k] = j
        total += j
        prev = j
        k += 1
        if stable_tail(tol * total, gam, u) < tau + 1.0:
            break
    return buf[:k].copy()


# ---------------------------------------------------------------------------
# Gibbs sweep for the normalized-stable mixture
# ---------------------------------------------------------------------------


@jit
def _cluster_loglik(kind, oa, ob, labels, j, mu, sg):
    acc = 0.0
    for i in range(kind.shape[0]):
        if labels[i] == j:
            acc += obs_log_kernel(kind[i], oa[i], ob[i], mu, sg)
    return acc


@jit
def _accept(loga, rng):
    # draws exactly one uniform either way, keeping the stream fixed
    r = rng.random()
    if loga >= 0.0:
        return True
    return r < math.exp(loga)


@jit
def gibbs_sweep(
    kind,
    oa,
    ob,
    labels,
    mu_occ,
    sig_occ,
    u,
    phi1,
    phi2,
    gam,
    m0,
    lam0,
    a0,
    b0,
    sig_lo,
    sig_hi,
    trunc_tol,
    u_step,
    mu_step,
    sig_step,
    max_jumps,
    rng,
):
    """One sweep of the conditional sampler.

    Order: latent-u Metropolis move on log u; conditional CRM regeneration
    (gamma jumps for occupied atoms, Ferguson-Klass jumps plus base-measure
    parameters for the rest); multinomial reallocation; per-atom (mu, sigma)
    Metropolis updates against the cluster likelihood; conjugate normal-gamma
    update of the location hyperparameters.

    Returns the post-sweep state together with the realized (truncated)
    mixture: atoms ordered occupied-first, weights normalized.
    """
    n = kind.shape[0]
    d = mu_occ.shape[0]

    counts = np.zeros(d, np.int64)
    for i in range(n):
        counts[labels[i]] += 1

    # (i) latent u | number of occupied clusters: p(u) prop u^(d*gam-1) exp(-u^gam)
    v = math.log(u)
    vp = v + u_step * rng.standard_normal()
    loga = d * gam * (vp - v) - (math.exp(gam * vp) - math.exp(gam * v))
    if _accept(loga, rng):
        u = math.exp(vp)

    # (ii) conditional CRM given u: occupied jumps are Gamma(n_j - gam, u),
    # the unallocated part is a fresh tilted-stable draw
    j_occ = np.empty(d)
    for j in range(d):
        j_occ[j] = rng.gamma(counts[j] - gam, 1.0 / u)
    j_new = ferguson_klass_jumps(gam, u, trunc_tol, max_jumps, rng)
    m = j_new.shape[0]
    sd0 = 1.0 / math.sqrt(phi2)
    mu_new = np.empty(m)
    sig_new = np.empty(m)
    for l in range(m):
        mu_new[l] = phi1 + sd0 * rng.standard_normal()
        sig_new[l] = rng.uniform(sig_lo, sig_hi)

    kk = d + m
    jall = np.empty(kk)
    mual = np.empty(kk)
    sgal = np.empty(kk)
    for j in range(d):
        jall[j] = j_occ[j]
        mual[j] = mu_occ[j]
        sgal[j] = sig_occ[j]
    for l in range(m):
        jall[d + l] = j_new[l]
        mual[d + l] = mu_new[l]
        sgal[d + l] = sig_new[l]

    # (iii) reallocate each observation over all atoms
    w = np.empty(kk)
    atom_of = np.empty(n, np.int64)
    for i in range(n):
        tot = 0.0
        for k in range(kk):
            kv = obs_kernel(kind[i], oa[i], ob[i], mual[k], sgal[k])
            if kv < DENSITY_FLOOR:
                kv = DENSITY_FLOOR
            wk = jall[k] * kv
            w[k] = wk
            tot += wk
        r = rng.random() * tot
        acc = 0.0
        pick = kk - 1
        for k in range(kk):
            acc += w[k]
            if r < acc:
                pick = k
                break
        atom_of[i] = pick

    # compact: occupied atoms first, ordered by first appearance in the
    # observation order (labels come out canonical and index the atom arrays),
    # unoccupied atoms after in atom order
    cnt = np.zeros(kk, np.int64)
    for i in range(n):
        cnt[atom_of[i]] += 1
    order = np.empty(kk, np.int64)
    slot_of = np.empty(kk, np.int64)
    for k in range(kk):
        slot_of[k] = -1
    pos = 0
    for i in range(n):
        a = atom_of[i]
        if slot_of[a] == -1:
            slot_of[a] = pos
            order[pos] = a
            pos += 1
    n_occ = pos
    for k in range(kk):
        if cnt[k] == 0:
            slot_of[k] = pos
            order[pos] = k
            pos += 1

    w_out = np.empty(kk)
    mu_out = np.empty(kk)
    sg_out = np.empty(kk)
    for s in range(kk):
        w_out[s] = jall[order[s]]
        mu_out[s] = mual[order[s]]
        sg_out[s] = sgal[order[s]]
    new_labels = np.empty(n, np.int64)
    for i in range(n):
        new_labels[i] = slot_of[atom_of[i]]

    # (iv) Metropolis-within-Gibbs on each occupied atom's (mu, sigma)
    width = sig_hi - sig_lo
    for j in range(n_occ):
        muj = mu_out[j]
        sgj = sg_out[j]
        # location move, scaled by the atom's current sigma
        prop = muj + mu_step * sgj * rng.standard_normal()
        ll_cur = _cluster_loglik(kind, oa, ob, new_labels, j, muj, sgj)
        ll_prop = _cluster_loglik(kind, oa, ob, new_labels, j, prop, sgj)
        loga = ll_prop - ll_cur - 0.5 * phi2 * ((prop - phi1) ** 2 - (muj - phi1) ** 2)
        if _accept(loga, rng):
            muj = prop
            ll_cur = ll_prop
        # scale move on the logit-rescaled bounded support
        g = (sgj - sig_lo) / width
        s = math.log(g) - math.log(1.0 - g)
        sp = s + sig_step * rng.standard_normal()
        gp = 1.0 / (1.0 + math.exp(-sp))
        sg_prop = sig_lo + width * gp
        ll_prop = _cluster_loglik(kind, oa, ob, new_labels, j, muj, sg_prop)
        loga = ll_prop - ll_cur + math.log(gp * (1.0 - gp)) - math.log(g * (1.0 - g))
        if _accept(loga, rng):
            sgj = sg_prop
        mu_out[j] = muj
        sg_out[j] = sgj

    # (v) conjugate normal-gamma update of (phi1, phi2) from occupied locations
    mean = 0.0
    for j in range(n_occ):
        mean += mu_out[j]
    mean /= n_occ
    ss = 0.0
    for j in range(n_occ):
        ss += (mu_out[j] - mean) ** 2
    lam_n = lam0 + n_occ
    m_n = (lam0 * m0 + n_occ * mean) / lam_n
    a_n = a0 + 0.5 * n_occ
    b_n = b0 + 0.5 * (ss + lam0 * n_occ * (mean - m0) ** 2 / lam_n)
    phi2 = rng.gamma(a_n, 1.0 / b_n)
    phi1 = m_n + rng.standard_normal() / math.sqrt(lam_n * phi2)

    # normalize weights and score the realized mixture
    tot = 0.0
    for s in range(kk):
        tot += w_out[s]
    for s in range(kk):
        w_out[s] /= tot
    loglik = 0.0
    for i in range(n):
        fx = 0.0
        for s in range(kk):
            fx += w_out[s] * obs_kernel(kind[i], oa[i], ob[i], mu_out[s], sg_out[s])
        if fx < DENSITY_FLOOR:
            fx = DENSITY_FLOOR
        loglik += math.log(fx)

    return new_labels, w_out, mu_out, sg_out, n_occ, u, phi1, phi2, loglik


# ---------------------------------------------------------------------------
# Posterior predictive evaluation
# ---------------------------------------------------------------------------


@jit
def mixture_cdf(w, mu, sg, x):
    acc = 0.0
    for k in range(w.shape[0]):
        acc += w[k] * norm_cdf(x, mu[k], sg[k])
    return acc


@jit
def mixture_quantile(w, mu, sg, p):
    """Invert the mixture CDF by bisection (monotone, bracketed)."""
    lo = mu[0]
    hi = mu[0]
    smax = sg[0]
    for k in range(mu.shape[0]):
        if mu[k] < lo:
            lo = mu[k]
        if mu[k] > hi:
            hi = mu[k]
        if sg[k] > smax:
            smax = sg[k]
    lo -= 45.0 * smax
    hi += 45.0 * smax
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mixture_cdf(w, mu, sg, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@jit
def draw_quantiles(offsets, w, mu, sg, p):
    t_draws = offsets.shape[0] - 1
    out = np.empty(t_draws)
    for t in range(t_draws):
        i0 = offsets[t]
        i1 = offsets[t + 1]
        out[t] = mixture_quantile(w[i0:i1], mu[i0:i1], sg[i0:i1], p)
    return out


@jit
def mean_density_grid(offsets, w, mu, sg, grid):
    t_draws = offsets.shape[0] - 1
    out = np.zeros(grid.shape[0])
    for t in range(t_draws):
        i0 = offsets[t]
        i1 = offsets[t + 1]
        for g in range(grid.shape[0]):
            acc = 0.0
            for k in range(i0, i1):
                acc += w[k] * norm_pdf(grid[g], mu[k], sg[k])
            out[g] += acc
    for g in range(grid.shape[0]):
        out[g] /= t_draws
    return out


@jit
def draw_cdf_grid(offsets, w, mu, sg, grid):
    """Per-draw CDF values on a grid; rows are draws."""
    t_draws = offsets.shape[0] - 1
    out = np.empty((t_draws, grid.shape[0]))
    for t in range(t_draws):
        i0 = offsets[t]
        i1 = offsets[t + 1]
        for g in range(grid.shape[0]):
            out[t, g] = mixture_cdf(w[i0:i1], mu[i0:i1], sg[i0:i1], grid[g])
    return out


@jit
def density_at_observations(offsets, w, mu, sg, kind, oa, ob):
    """Per-draw mixture likelihood at each observation (censored-aware)."""
    t_draws = offsets.shape[0] - 1
    n = kind.shape[0]
    out = np.empty((t_draws, n))
    for t in range(t_draws):
        i0 = offsets[t]
        i1 = offsets[t + 1]
        for i in range(n):
            acc = 0.0
            for k in range(i0, i1):
                acc += w[k] * obs_kernel(kind[i], oa[i], ob[i], mu[k], sg[k])
            out[t, i] = acc
    return out


# ---------------------------------------------------------------------------
# Partition losses and greedy search
# ---------------------------------------------------------------------------


@jit
def canonical_labels(labels):
    """Relabel clusters by order of first appearance (0, 1, 2, ...)."""
    n = labels.shape[0]
    out = np.empty(n, np.int64)
    maxl = 0
    for i in range(n):
        if labels[i] > maxl:
            maxl = labels[i]
    mapping = np.empty(maxl + 1, np.int64)
    for i in range(maxl + 1):
        mapping[i] = -1
    nxt = 0
    for i in range(n):
        l = labels[i]
        if mapping[l] == -1:
            mapping[l] = nxt
            nxt += 1
        out[i] = mapping[l]
    return out


@jit
def psm_from_draws(draws):
    t_draws, n = draws.shape
    out = np.zeros((n, n))
    for t in range(t_draws):
        for i in range(n):
            for j in range(i + 1, n):
                if draws[t, i] == draws[t, j]:
                    out[i, j] += 1.0
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i + 1, n):
            out[i, j] /= t_draws
            out[j, i] = out[i, j]
    return out


@jit
def vi_pair(a, b, active, ca, cb, cab):
    """VI distance between two labelings restricted to ``active`` items.

    ``ca``, ``cb``, ``cab`` are zeroed integer scratch arrays; they are
    restored to zero before returning so callers can reuse them.
    """
    m = active.shape[0]
    fm = float(m)
    for ii in range(m):
        i = active[ii]
        ca[a[i]] += 1
        cb[b[i]] += 1
        cab[a[i], b[i]] += 1
    mi = 0.0
    for ii in range(m):
        i = active[ii]
        c = cab[a[i], b[i]]
        if c > 0:
            mi += (c / fm) * math.log(c * fm / (float(ca[a[i]]) * float(cb[b[i]])))
            cab[a[i], b[i]] = 0
    h_a = 0.0
    h_b = 0.0
    for ii in range(m):
        i = active[ii]
        if ca[a[i]] > 0:
            p = ca[a[i]] / fm
            h_a -= p * math.log(p)
            ca[a[i]] = 0
        if cb[b[i]] > 0:
            p = cb[b[i]] / fm
            h_b -= p * math.log(p)
            cb[b[i]] = 0
    return h_a + h_b - 2.0 * mi


@jit
def binder_pair(a, b, active, ca, cb, cab):
    """Number of item pairs on which two labelings disagree about co-clustering."""
    m = active.shape[0]
    for ii in range(m):
        i = active[ii]
        ca[a[i]] += 1
        cb[b[i]] += 1
        cab[a[i], b[i]] += 1
    pairs_a = 0.0
    pairs_b = 0.0
    pairs_ab = 0.0
    for ii in range(m):
        i = active[ii]
        c = cab[a[i], b[i]]
        if c > 0:
            pairs_ab += 0.5 * c * (c - 1)
            cab[a[i], b[i]] = 0
    for ii in range(m):
        i = active[ii]
        if ca[a[i]] > 0:
            c = ca[a[i]]
            pairs_a += 0.5 * c * (c - 1)
            ca[a[i]] = 0
        if cb[b[i]] > 0:
            c = cb[b[i]]
            pairs_b += 0.5 * c * (c - 1)
            cb[b[i]] = 0
    return pairs_a + pairs_b - 2.0 * pairs_ab


@jit
def same_partition(a, b, active, map_ab, map_ba):
    # map_ab / map_ba are scratch arrays filled with -1 on entry and on exit
    m = active.shape[0]
    ok = True
    for ii in range(m):
        i = active[ii]
        x = a[i]
        y = b[i]
        if map_ab[x] == -1:
            map_ab[x] = y
        elif map_ab[x] != y:
            ok = False
        if map_ba[y] == -1:
            map_ba[y] = x
        elif map_ba[y] != x:
            ok = False
    for ii in range(m):
        i = active[ii]
        map_ab[a[i]] = -1
        map_ba[b[i]] = -1
    return ok


LOSS_BINDER = 0
LOSS_VI = 1
LOSS_ZERO_ONE = 2


@jit
def expected_loss_kernel(cand, draws, psm, active, loss_code, ca, cb, cab, map_ab, map_ba):
    """Posterior expected loss of a candidate labeling over retained draws.

    Binder uses the closed form from the pairwise similarity matrix; VI is the
    exact average over draws; the 0-1 loss is one minus the fraction of draws
    equal to the candidate (as set partitions).
    """
    t_draws = draws.shape[0]
    m = active.shape[0]
    if loss_code == LOSS_BINDER:
        acc = 0.0
        for ii in range(m):
            i = active[ii]
            for jj in range(ii + 1, m):
                j = active[jj]
                p = psm[i, j]
                if cand[i] == cand[j]:
                    acc += 1.0 - p
                else:
                    acc += p
        return acc
    if loss_code == LOSS_VI:
        acc = 0.0
        for t in range(t_draws):
            acc += vi_pair(cand, draws[t], active, ca, cb, cab)
        return acc / t_draws
    hits = 0
    for t in range(t_draws):
        if same_partition(cand, draws[t], active, map_ab, map_ba):
            hits += 1
    return 1.0 - hits / t_draws


@jit
def _score_into(i, labels, draws, psm, active, loss_code, scores, csize, ca, cb, cab, map_ab, map_ba):
    """Score of assigning item ``i`` to each cluster (plus one fresh slot).

    For Binder the score is the assignment delta; for VI and 0-1 it is the
    absolute expected loss.  Lower is better either way; only comparisons
    within one item's decision are used.  ``labels[i]`` must be set to the
    trial cluster by the caller for VI / 0-1 (absolute losses); for Binder the
    current value of ``labels[i]`` is ignored.
    """
    n = labels.shape[0]
    m = active.shape[0]
    fresh = -1
    for c in range(n):
        if csize[c] == 0:
            fresh = c
            break
    if loss_code == LOSS_BINDER:
        for c in range(n):
            scores[c] = 0.0
        for ii in range(m):
            j = active[ii]
            if j != i:
                scores[labels[j]] += 1.0 - 2.0 * psm[i, j]
        if fresh >= 0:
            scores[fresh] = 0.0
        return fresh
    old = labels[i]
    for c in range(n):
        if csize[c] > 0 or c == fresh:
            labels[i] = c
            scores[c] = expected_loss_kernel(
                labels, draws, psm, active, loss_code, ca, cb, cab, map_ab, map_ba
            )
    labels[i] = old
    return fresh


@jit
def greedy_partition(draws, psm, loss_code, restarts, rng):
    """Greedy minimization of posterior expected loss over partitions.

    Each restart builds a partition by sequential allocation in a random item
    order, then performs full reassignment sweeps (random order, fresh
    singleton always available) until no item moves.  The best partition over
    all restarts and over every draw visited by the chain is returned in
    canonical form together with its expected loss.
    """
    t_draws, n = draws.shape
    ca = np.zeros(n + 1, np.int64)
    cb = np.zeros(n + 1, np.int64)
    cab = np.zeros((n + 1, n + 1), np.int64)
    map_ab = np.empty(n + 1, np.int64)
    map_ba = np.empty(n + 1, np.int64)
    for i in range(n + 1):
        map_ab[i] = -1
        map_ba[i] = -1
    scores = np.empty(n)
    csize = np.zeros(n, np.int64)
    labels = np.empty(n, np.int64)
    full = np.arange(n)
    best_labels = np.empty(n, np.int64)
    best_loss = math.inf

    for _ in range(restarts):
        order = rng.permutation(n)
        for i in range(n):
            labels[i] = -1
            csize[i] = 0
        # sequential build-up
        for pos in range(n):
            i = order[pos]
            active = order[: pos + 1]
            fresh = _score_into(
                i, labels, draws, psm, active, loss_code, scores, csize, ca, cb, cab, map_ab, map_ba
            )
            best_c = -1
            best_s = math.inf
            for c in range(n):
                if csize[c] > 0 or c == fresh:
                    if scores[c] < best_s - 1e-12:
                        best_s = scores[c]
                        best_c = c
            labels[i] = best_c
            csize[best_c] += 1
        # reassignment sweeps; a move counts only when it strictly improves,
        # with a detached singleton's baseline being the fresh slot (same
        # partition regardless of the empty cluster id it lands in)
        changed = True
        while changed:
            changed = False
            sweep = rng.permutation(n)
            for ii in range(n):
                i = sweep[ii]
                old = labels[i]
                csize[old] -= 1
                fresh = _score_into(
                    i, labels, draws, psm, full, loss_code, scores, csize, ca, cb, cab, map_ab, map_ba
                )
                base_c = old if csize[old] > 0 else fresh
                best_c = base_c
                best_s = scores[base_c]
                for c in range(n):
                    if c == base_c:
                        continue
                    if csize[c] > 0 or c == fresh:
                        if scores[c] < best_s - 1e-12:
                            best_s = scores[c]
                            best_c = c
                labels[i] = best_c
                csize[best_c] += 1
                if best_c != base_c:
                    changed = True
        loss = expected_loss_kernel(labels, draws, psm, full, loss_code, ca, cb, cab, map_ab, map_ba)
        if loss < best_loss - 1e-12:
            best_loss = loss
            for i in range(n):
                best_labels[i] = labels[i]

    # never return worse than the best partition the chain itself visited
    for t in range(t_draws):
        loss = expected_loss_kernel(draws[t], draws, psm, full, loss_code, ca, cb, cab, map_ab, map_ba)
        if loss < best_loss - 1e-12:
            best_loss = loss
            for i in range(n):
                best_labels[i] = draws[t, i]

    return canonical_labels(best_labels), best_loss
