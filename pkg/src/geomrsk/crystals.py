"""Positive charts on highest-weight geometric crystals (type A matrix model).

Three charts parametrize B(lambda): Lusztig, Kashiwara and twisted-Lusztig.
Realization formulas used here:

    b^T_l(u) = S o iota(e^{-l} [w0bar^{-1} u^T]_+ e^{l}) w0bar e^{l} u
    b^K_l(v) = eta^{w0,e}(v) w0bar v^T [v^T]_0^{-1} e^{l}
    b^L_l    = S o b^T_l o S

with u = x_i(coords), v = x_{-i}(coords).  Coordinate extraction goes through
minor-ratio peeling (Lusztig), corner-minor normalization (Kashiwara), and
S-conjugation (Lusztig chart).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .roots import RootSystem, positive_root_enumeration
from .groups import (NotInBigCell, matrix_dim, wbar_w0, torus_matrix, ldu,
                     gauss_upper, build_x_word, build_x_minus_word,
                     extract_lusztig_coords, extract_kashiwara_coords,
                     kashiwara_iota, schutzenberger, eta_w0_e, inv_small,
                     det_small)
from .paths import gauss_log_diag

CHARTS = ("lusztig", "kashiwara", "twisted")


@dataclass
class CrystalPoint:
    lam: np.ndarray        # highest weight, Cartan-subspace vector
    chart: str
    word: tuple
    coords: np.ndarray     # m strictly positive reals

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.coords = np.asarray(self.coords, dtype=float)
        if self.chart not in CHARTS:
            raise ValueError(f"unknown chart {self.chart!r}")
        if np.any(self.coords <= 0):
            raise ValueError("chart coordinates must be strictly positive")
        self.word = tuple(self.word)

    def to_json(self) -> str:
        return json.dumps({"lambda": list(map(float, self.lam)), "chart": self.chart,
                           "word": list(self.word), "coords": list(map(float, self.coords))})

    @staticmethod
    def from_json(text: str) -> "CrystalPoint":
        d = json.loads(text)
        return CrystalPoint(np.array(d["lambda"]), d["chart"], tuple(d["word"]),
                            np.array(d["coords"]))


def realize(rs: RootSystem, point: CrystalPoint, dtype=np.longdouble) -> np.ndarray:
    lam = point.lam
    w0 = wbar_w0(rs, dtype)
    e_lam = torus_matrix(rs, lam, dtype)
    e_neg = torus_matrix(rs, -lam, dtype)
    if point.chart == "twisted":
        u = build_x_word(rs, point.word, point.coords, dtype)
        z = schutzenberger(rs, kashiwara_iota(e_neg @ gauss_upper(inv_small(w0) @ u.T) @ e_lam))
        return z @ w0 @ e_lam @ u
    if point.chart == "kashiwara":
        v = build_x_minus_word(rs, point.word, point.coords, dtype)
        vT = v.T
        return eta_w0_e(rs, v) @ w0 @ vT @ np.diag(1.0 / np.diag(vT)) @ e_lam
    # lusztig: S-conjugate of the twisted realization, b^L = S o b^T o S
    sword, scoords = _s_word_coords(rs, point.word, point.coords)
    twisted = CrystalPoint(lam, "twisted", sword, scoords)
    return schutzenberger(rs, realize(rs, twisted, dtype))


def _s_word_coords(rs: RootSystem, word, coords):
    """S(x_i1(t1)...x_im(tm)) = x_{im*}(tm)...x_{i1*}(t1)."""
    from .roots import star_involution
    sword = tuple(star_involution(rs, i) for i in reversed(word))
    return sword, np.asarray(coords)[::-1].copy()


def weight(rs: RootSystem, x: np.ndarray) -> np.ndarray:
    """wt(x) = log [x]_0."""
    return np.asarray(gauss_log_diag(rs, x[None])[0], dtype=float)


def highest_weight(rs: RootSystem, x: np.ndarray) -> np.ndarray:
    """hw(x) = log [w0bar^{-1} x]_0."""
    w0 = wbar_w0(rs, x.dtype)
    return np.asarray(gauss_log_diag(rs, (inv_small(w0) @ x)[None])[0], dtype=float)


def rho_twisted(rs: RootSystem, x: np.ndarray, word) -> np.ndarray:
    """Twisted Lusztig coordinates of x (parameters of [w0bar^{-1} x]_+)."""
    w0 = wbar_w0(rs, x.dtype)
    u = gauss_upper(inv_small(w0) @ x)
    return extract_lusztig_coords(rs, u, word)


def rho_kashiwara(rs: RootSystem, x: np.ndarray, word) -> np.ndarray:
    """Kashiwara coordinates of x via corner-minor normalization.

    With u the twisted parameter and w = e^{lam} u e^{-lam}, the Kashiwara
    group element is v = diag(a) w^T where a is pinned by the anti-leading
    corner minors of v being 1 on the totally positive part.
    """
    w0 = wbar_w0(rs, x.dtype)
    L, d, u = ldu(inv_small(w0) @ x)
    lam_diag = d  # e^{hw} embedded in the torus
    W = (lam_diag[:, None] * u * (1.0 / lam_diag)[None, :]).T
    n = W.shape[0]
    prods = []
    for k in range(1, n + 1):
        rows = list(range(n - k, n))
        cols = list(range(k))
        mk = det_small(W[np.ix_(rows, cols)])
        if mk <= 0:
            raise NotInBigCell("anti-corner minor not positive")
        prods.append(1.0 / mk)
    a = np.empty(n, dtype=x.dtype)
    prev = x.dtype.type(1.0)
    for k in range(1, n + 1):
        a[n - k] = prods[k - 1] / prev
        prev = prods[k - 1]
    v = a[:, None] * W
    return extract_kashiwara_coords(rs, v, word)


def rho_lusztig(rs: RootSystem, x: np.ndarray, word) -> np.ndarray:
    """Lusztig coordinates via rho^L = S o rho^T o S."""
    sx = schutzenberger(rs, x)
    sword, _ = _s_word_coords(rs, word, np.ones(len(word)))
    ts = rho_twisted(rs, sx, sword)
    return ts[::-1].copy()


def extract_point(rs: RootSystem, x: np.ndarray, chart: str, word) -> CrystalPoint:
    lam = highest_weight(rs, x)
    if chart == "twisted":
        coords = rho_twisted(rs, x, word)
    elif chart == "kashiwara":
        coords = rho_kashiwara(rs, x, word)
    elif chart == "lusztig":
        coords = rho_lusztig(rs, x, word)
    else:
        raise ValueError(f"unknown chart {chart!r}")
    return CrystalPoint(lam, chart, tuple(word), np.asarray(coords, dtype=float))


def chart_change(rs: RootSystem, point: CrystalPoint, chart: str, word=None) -> CrystalPoint:
    """Realize and re-extract in the target chart/word."""
    word = tuple(word) if word is not None else point.word
    if chart == point.chart and word == point.word:
        return CrystalPoint(point.lam.copy(), point.chart, point.word, point.coords.copy())
    x = realize(rs, point)
    return extract_point(rs, x, chart, word)


def toric_jacobian_logdet(rs: RootSystem, word1, word2, coords,
                          chart: str = "lusztig", step: float = 1e-5) -> float:
    """log|det| of the log-coordinate chart change word1 -> word2; expect 0.

    Central finite differences in log coordinates.  The chart change within
    the Lusztig (resp. Kashiwara) variety does not involve the highest
    weight; it is computed on the parametrizing group element directly.
    """
    coords = np.asarray(coords, dtype=float)
    m = len(coords)

    def change(xi):
        t = np.exp(xi)
        if chart in ("lusztig", "twisted"):
            u = build_x_word(rs, word1, t)
            return np.log(np.asarray(extract_lusztig_coords(rs, u, word2), dtype=float))
        v = build_x_minus_word(rs, word1, t)
        return np.log(np.asarray(extract_kashiwara_coords(rs, v, word2), dtype=float))

    xi0 = np.log(coords)
    J = np.empty((m, m))
    for b in range(m):
        dv = np.zeros(m)
        dv[b] = step
        J[:, b] = (change(xi0 + dv) - change(xi0 - dv)) / (2 * step)
    sign, logdet = np.linalg.slogdet(J)
    if sign == 0:
        raise ArithmeticError("singular chart-change Jacobian")
    return float(logdet)


def weight_from_lusztig(rs: RootSystem, lam, word, coords) -> np.ndarray:
    """wt = w0(lam + sum_j log(t_j) beta_j^vee) for x_i-coordinates t.

    This is the coordinate form of the weight map on the twisted-Lusztig
    chart (the x_i-parametrized one used for integration); it matches
    weight(realize(TwistedLusztig(...))).
    """
    _, coroots = positive_root_enumeration(rs, word)
    v = np.asarray(lam, dtype=float) + sum(np.log(t) * b for t, b in zip(coords, coroots))
    return rs.w0_matrix() @ v
