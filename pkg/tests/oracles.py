"""Literal formula evaluations in arbitrary precision.

Nothing here imports the package: these are the independent references the
production code is checked against.
"""

import mpmath as mp

mp.mp.dps = 40


def _m(values):
    return [mp.mpf(float(v)) for v in values]


def wmean(x, w):
    return mp.fsum(a * b for a, b in zip(_m(w), _m(x)))


def sumsq(w):
    return mp.fsum(a * a for a in _m(w))


def wvar(x, w):
    x, w = _m(x), _m(w)
    xbar = mp.fsum(a * b for a, b in zip(w, x))
    s2 = mp.fsum(a * a for a in w)
    return mp.fsum(a * (b - xbar) ** 2 for a, b in zip(w, x)) / (1 - s2)


def z_mean(x, wx, y, wy):
    num = wmean(x, wx) - wmean(y, wy)
    return num / mp.sqrt(wvar(x, wx) * sumsq(wx) + wvar(y, wy) * sumsq(wy))


def z_mean_unweighted(x, y):
    n, m = len(x), len(y)
    x, y = _m(x), _m(y)
    mx, my = mp.fsum(x) / n, mp.fsum(y) / m
    vx = mp.fsum((a - mx) ** 2 for a in x) / (n - 1)
    vy = mp.fsum((a - my) ** 2 for a in y) / (m - 1)
    return (mx - my) / mp.sqrt(vx / n + vy / m)


def z_var(x, wx, y, wy):
    num = wvar(x, wx) - wvar(y, wy)
    den = 0
    for v, w in ((x, wx), (y, wy)):
        c = wmean(v, w)
        sq = [(a - c) ** 2 for a in _m(v)]
        s2 = sumsq(w)
        den += s2 / (1 - s2) ** 2 * wvar(sq, w)
    return num / mp.sqrt(den)


def z_bin(x, wx, y, wy):
    px, py = wmean(x, wx), wmean(y, wy)
    return (px - py) / mp.sqrt(sumsq(wx) * px * (1 - px) + sumsq(wy) * py * (1 - py))


def z_two_proportion(x, y):
    n, m = len(x), len(y)
    px, py = mp.mpf(sum(x)) / n, mp.mpf(sum(y)) / m
    return (px - py) / mp.sqrt(px * (1 - px) / n + py * (1 - py) / m)


def midranks(values):
    vals = [float(v) for v in values]
    return [mp.mpf(sum(1 for u in vals if u < v)) + mp.mpf(sum(1 for u in vals if u == v) + 1) / 2 for v in vals]


def z_ord(x, wx, y, wy):
    n, m = len(x), len(y)
    N = n + m
    r = midranks(list(x) + list(y))
    rx, ry = r[:n], r[n:]
    centre = mp.mpf(N + 1) / 2
    var = mp.fsum((a - centre) ** 2 for a in r) / N
    cov = -var / (N - 1)
    num = wmean(rx, wx) - wmean(ry, wy)
    return num / mp.sqrt((sumsq(wx) + sumsq(wy)) * (var - cov))


def wilcoxon_z(x, y):
    """Normal approximation of the rank-sum statistic (no ties), rescaled to
    the difference of mean ranks."""
    n, m = len(x), len(y)
    N = n + m
    r = midranks(list(x) + list(y))
    W = mp.fsum(r[:n])
    mean_w = mp.mpf(n) * (N + 1) / 2
    var_w = mp.mpf(n) * m * (N + 1) / 12
    return (W - mean_w) / mp.sqrt(var_w)


def chi2_nominal(x, wx, y, wy):
    cats = sorted(set(float(v) for v in list(x) + list(y)))
    total = 0
    for k in cats:
        px = mp.fsum(mp.mpf(float(w)) for v, w in zip(x, wx) if float(v) == k)
        py = mp.fsum(mp.mpf(float(w)) for v, w in zip(y, wy) if float(v) == k)
        sx = mp.fsum(mp.mpf(float(w)) ** 2 for v, w in zip(x, wx) if float(v) == k)
        sy = mp.fsum(mp.mpf(float(w)) ** 2 for v, w in zip(y, wy) if float(v) == k)
        total += (px - py) ** 2 / (sx + sy)
    return total, len(cats) - 1


def z_nom(x, wx, y, wy):
    chi2, df = chi2_nominal(x, wx, y, wy)
    p = mp.gammainc(mp.mpf(df) / 2, 0, chi2 / 2, regularized=True)
    return mp.sqrt(2) * mp.erfinv(2 * p - 1), chi2, df


def normal_cdf(x):
    return mp.ncdf(mp.mpf(x))


def chisq_cdf_by_quadrature(x, df):
    k = mp.mpf(df) / 2
    density = lambda t: t ** (k - 1) * mp.e ** (-t / 2) / (2 ** k * mp.gamma(k))
    return mp.quad(density, [0, mp.mpf(x)])
