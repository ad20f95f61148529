"""Whittaker functions by quadrature over the Landau-Ginzburg potential.

psi_mu(lambda) = int exp(<mu, wt> - f(t; lambda)) prod dt_j/t_j over the
x_i-coordinates of the twisted-Lusztig chart, where the toric measure is flat
in xi = log t and <mu, wt> = <w0 mu, lambda> + sum_j <w0 mu, beta_j^vee> xi_j.
Everything is computed in log space (psi underflows float64 deep inside the
negative chamber).  Every value carries a node-doubling certificate; a value
whose certificate fails is refused.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .roots import RootSystem, positive_root_enumeration
from .potentials import (as_system, default_word, monomial_rep, f_grad_hess,
                         minimize_f_B)


class CertificateError(RuntimeError):
    """Node doubling moved the value by more than the allowed tolerance."""


class PoleAtNonpositiveInteger(ArithmeticError):
    """b(mu) has a Gamma pole at a nonpositive-integer pairing."""


class WallError(ArithmeticError):
    """mu lies on a reflection wall (a coroot pairing vanishes)."""


def b_normalizer(rs: RootSystem, mu) -> float:
    """b(mu) = prod over positive roots of Gamma(<beta^vee, mu>)."""
    return float(np.exp(log_b_normalizer(rs, mu)))


def log_b_normalizer(rs: RootSystem, mu) -> float:
    mu = np.asarray(mu, dtype=float)
    total = 0.0
    for beta in rs.positive_roots():
        z = float(rs.inner(rs.coroot(beta), mu))
        if z <= 0 and abs(z - round(z)) < 1e-12:
            raise PoleAtNonpositiveInteger(f"Gamma pole at pairing {z}")
        if z <= 0:
            raise PoleAtNonpositiveInteger(
                f"pairing {z} <= 0: real log-Gamma not defined here")
        total += float(gammaln(z))
    return total


# ---------------------------------------------------------------------------
# quadrature

@dataclass
class QuadratureSpec:
    centers: np.ndarray      # (m,) log-coordinate box centers
    half_widths: np.ndarray  # (m,)
    nodes: int               # per dimension
    rule: str = "tensor-gauss-legendre"
    panels: list = None      # rank-1 override: list of (lo, hi)


def _tilts(rs: RootSystem, mu, word):
    """mu'_j = <w0 mu, beta_j^vee> so that <mu, wt> is affine in xi."""
    _, coroots = positive_root_enumeration(rs, word)
    w0mu = rs.w0_matrix() @ np.asarray(mu, dtype=float)
    return np.array([float(rs.inner(w0mu, b)) for b in coroots])


def _log_const(rs: RootSystem, mu, lam):
    w0mu = rs.w0_matrix() @ np.asarray(mu, dtype=float)
    return float(rs.inner(w0mu, np.asarray(lam, dtype=float)))


def _exponent_terms(rs, lam, logscale):
    """kappa_i, a_i with the exponent written as tilt.xi - sum_i e^{kappa_i + a_i.xi}."""
    from .potentials import monomial_rep_log
    logc, exps = monomial_rep_log(rs, lam)
    return logc + logscale, exps


def _guarded_f(kappa, exps, xi):
    """f, grad, Hessian of sum_i exp(kappa_i + a_i.xi), overflow-safe."""
    L = np.clip(kappa + exps @ xi, -745.0, 700.0)
    w = np.exp(L)
    return w.sum(), exps.T @ w, (exps.T * w) @ exps


def _exponent_mode(rs, lam, tilt, logscale):
    """Minimizer of sum_i e^{kappa_i + a_i.xi} - tilt.xi (convex)."""
    kappa, exps = _exponent_terms(rs, lam, logscale)
    m = exps.shape[1]
    if m == 1:
        # closed form: c1 y - c2 / y = mu with y = e^xi, solved in logs
        k1, k2 = float(kappa[0]), float(kappa[1])
        mu1 = float(tilt[0])
        half = 0.5 * (k1 + k2)
        s = np.hypot(mu1, 2.0 * np.exp(min(half, 350.0)))
        if mu1 > 0:
            logy = np.log(mu1 + s) - np.log(2.0) - k1
        elif mu1 < 0:
            logy = np.log(2.0) + k2 - np.log(s - mu1)
        else:
            logy = 0.5 * (k2 - k1)
        xi = np.array([logy])
        _, _, H = _guarded_f(kappa, exps, xi)
        H = np.maximum(H, abs(mu1) + 1e-12)
        return xi, H
    xi = np.zeros(m)
    # pre-phase: bring the largest term magnitude down via min of logsumexp
    for _ in range(100):
        L = kappa + exps @ xi
        p = np.exp(L - logsumexp(L))
        g = exps.T @ p
        H = (exps.T * p) @ exps - np.outer(g, g) + 1e-9 * np.eye(m)
        if np.max(L) < 30.0 or np.linalg.norm(g) < 1e-12:
            break
        xi = xi + np.linalg.solve(H, -g)
    for _ in range(500):
        f, g, H = _guarded_f(kappa, exps, xi)
        grad = g - tilt
        if np.linalg.norm(grad) < 1e-11 * max(1.0, f):
            break
        step = np.linalg.solve(H + 1e-30 * np.eye(m), -grad)
        norm = np.linalg.norm(step)
        if norm > 50.0:
            step = step * (50.0 / norm)
        s = 1.0
        obj = f - tilt @ xi
        while s > 1e-14:
            f2, _, _ = _guarded_f(kappa, exps, xi + s * step)
            if f2 - tilt @ (xi + s * step) <= obj + 1e-12 * abs(obj) + 1e-300:
                break
            s *= 0.5
        xi = xi + s * step
    _, _, H = _guarded_f(kappa, exps, xi)
    return xi, H


def auto_spec(rs: RootSystem, mu, lam, nodes: int = None, scale: float = None,
              logscale: float = 0.0, margin: float = 12.0) -> QuadratureSpec:
    """Box centered at the exponent mode, width from the Hessian scale plus a
    fixed margin in natural-log units."""
    if scale is not None:
        logscale = float(np.log(scale))
    word = default_word(rs)
    tilt = _tilts(rs, mu, word)
    xi0, H = _exponent_mode(rs, lam, tilt, logscale)
    hdiag = np.clip(np.diag(H), 1e-8, None)
    # Gaussian core plus a flat-units margin that shrinks once the curvature
    # scale is below one log unit (sharply concentrated integrands)
    widths = 15.0 / np.sqrt(hdiag) + margin / np.maximum(1.0, np.sqrt(hdiag))
    if len(tilt) > 1:
        # trim each axis to where the exponent dropped by 50, then inflate
        # until every box corner has dropped too (diagonal tails)
        m = len(tilt)
        kappa, exps = _exponent_terms(rs, lam, logscale)

        def drop(v):
            return float(_node_exponent(kappa, exps, tilt, v[None])[0])

        g0 = drop(xi0)
        lo = np.empty_like(widths)
        hi = np.empty_like(widths)
        for j in range(m):
            for sgn, out in ((1.0, hi), (-1.0, lo)):
                d = 0.5 / np.sqrt(hdiag[j])
                while d < widths[j] and drop(xi0 + sgn * d * np.eye(m)[j]) > g0 - 50.0:
                    d *= 1.3
                out[j] = min(1.3 * d, widths[j])
        import itertools as _it
        corners = np.array(list(_it.product((0, 1), repeat=m)), dtype=float)
        for _ in range(30):
            pts = xi0[None, :] + corners * hi[None, :] - (1 - corners) * lo[None, :]
            vals = _node_exponent(kappa, exps, tilt, pts)
            bad = vals > g0 - 50.0
            if not np.any(bad):
                break
            grow = np.any(corners[bad] > 0.5, axis=0) | np.any(corners[bad] < 0.5, axis=0)
            hi = np.minimum(hi * np.where(grow, 1.25, 1.0), widths)
            lo = np.minimum(lo * np.where(grow, 1.25, 1.0), widths)
            if np.all(hi >= widths) and np.all(lo >= widths):
                break
        xi0 = xi0 + 0.5 * (hi - lo)
        widths = 0.5 * (hi + lo)
    if nodes is None:
        nodes = {1: 96, 2: 64, 3: 48, 4: 28}[len(tilt)]
    return QuadratureSpec(centers=xi0, half_widths=widths, nodes=nodes)


def _node_exponent(kappa, exps, tilt, xi):
    with np.errstate(over="ignore"):
        f = np.exp(np.clip(kappa[None, :] + xi @ exps.T, None, 709.0)).sum(axis=-1)
    return xi @ tilt - f


def _tensor_log_integral(rs, lam, tilt, logscale, spec, nodes):
    kappa, exps = _exponent_terms(rs, lam, logscale)
    xi, lw = _node_grid(spec, nodes)
    return float(logsumexp(_node_exponent(kappa, exps, tilt, xi) + lw))


def _rank1_panels(rs, lam, tilt, logscale):
    """Adaptive panels for the rank-1 exponent.

    Feature locations: the exponent mode (with its Hessian scale) and the two
    exponential walls; panels are narrow near features and wide on the
    pure-exponential plateau in between.
    """
    kappa, exps = _exponent_terms(rs, lam, logscale)
    xi0, H = _exponent_mode(rs, lam, tilt, logscale)
    mode = float(xi0[0])
    sigma = float(1.0 / np.sqrt(max(H[0, 0], 1e-12)))
    mu1 = float(tilt[0])
    lvl = np.log(abs(mu1) + 1.0)
    right = lvl - kappa[0]     # e^{kappa_0 + xi} reaches |mu|+1
    left = kappa[1] - lvl      # e^{kappa_1 - xi} reaches |mu|+1
    sigma = min(sigma, 0.5 * abs(right - left) + 20.0)
    feats = (mode, left, right)
    pad = min(1.0, 100.0 * sigma)
    core_lo = mode - 12.0 * sigma - pad
    core_hi = mode + 12.0 * sigma + pad
    lo = min(min(feats) - 40.0, core_lo)
    hi = max(max(feats) + 40.0, core_hi)
    w_mode = min(8.0, 4.0 * sigma)
    w_mid = max(4.0, min(40.0, 30.0 / max(1.0, abs(mu1))))
    cuts = {lo, hi, core_lo, core_hi}
    for f in feats:
        cuts.update((f - 60.0, f + 60.0))
    cuts = sorted(c for c in cuts if lo <= c <= hi)
    panels = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < 1e-12:
            continue
        mid = 0.5 * (a + b)
        if core_lo <= mid <= core_hi:
            w = w_mode
        elif min(abs(mid - f) for f in feats) < 60.0:
            w = 8.0
        else:
            w = w_mid
        k = max(1, int(np.ceil((b - a) / w)))
        edges = np.linspace(a, b, k + 1)
        panels.extend(zip(edges[:-1], edges[1:]))
    return panels


def _rank1_log_integral(rs, lam, tilt, logscale, panels, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    kappa, exps = _exponent_terms(rs, lam, logscale)
    vals = []
    for lo, hi in panels:
        c = 0.5 * (hi + lo)
        hw = 0.5 * (hi - lo)
        xi = (c + hw * x)[:, None]
        expo = _node_exponent(kappa, exps, tilt, xi)
        vals.append(logsumexp(expo + np.log(w * hw)))
    return float(logsumexp(np.array(vals)))


@dataclass
class PsiValue:
    log_psi: float
    certificate: float
    spec: QuadratureSpec

    @property
    def value(self) -> float:
        return float(np.exp(self.log_psi))


def log_whittaker_psi(rs_or_label, mu, lam, spec: QuadratureSpec = None,
                      rtol: float = 1e-9, logscale: float = 0.0) -> PsiValue:
    """log psi_mu(lambda) with a node-doubling convergence certificate."""
    rs = as_system(rs_or_label)
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    word = default_word(rs)
    tilt = _tilts(rs, mu, word)
    if spec is None:
        spec = auto_spec(rs, mu, lam, logscale=logscale)
    const = _log_const(rs, mu, lam)
    if rs.rank == 1:
        if spec.panels is None:
            spec.panels = _rank1_panels(rs, lam, tilt, logscale)
        coarse = _rank1_log_integral(rs, lam, tilt, logscale, spec.panels, spec.nodes)
        fine = _rank1_log_integral(rs, lam, tilt, logscale, spec.panels, 2 * spec.nodes)
        cert = abs(fine - coarse)
    else:
        n = spec.nodes
        coarse = _tensor_log_integral(rs, lam, tilt, logscale, spec, n)
        while True:
            fine = _tensor_log_integral(rs, lam, tilt, logscale, spec, 2 * n)
            cert = abs(fine - coarse)
            if cert <= rtol or 2 * n >= 8 * spec.nodes:
                break
            coarse, n = fine, 2 * n
    if not np.isfinite(fine) or cert > rtol:
        raise CertificateError(
            f"node doubling moved log psi by {cert:.2e} > {rtol:.1e}")
    return PsiValue(log_psi=const + fine, certificate=cert, spec=spec)


def whittaker_psi(rs_or_label, mu, lam, spec: QuadratureSpec = None,
                  rtol: float = 1e-9) -> float:
    return log_whittaker_psi(rs_or_label, mu, lam, spec, rtol).value


def _node_grid(spec: QuadratureSpec, nodes: int = None):
    n = nodes or spec.nodes
    m = len(spec.centers)
    x, w = np.polynomial.legendre.leggauss(n)
    axes = [spec.centers[j] + spec.half_widths[j] * x for j in range(m)]
    logw = [np.log(w * spec.half_widths[j]) for j in range(m)]
    grids = np.meshgrid(*axes, indexing="ij")
    xi = np.stack([g.reshape(-1) for g in grids], axis=-1)
    lw = logw[0]
    for j in range(1, m):
        lw = (lw[..., None] + logw[j]).reshape(-1)
    return xi, lw


def quadrature_expectation(rs_or_label, mu, lam, func, spec: QuadratureSpec = None,
                           logscale: float = 0.0, nodes: int = None):
    """(E[func(xi)], log psi) under the canonical density on log-coordinates.

    func maps node log-coordinates (N, m) to (N,) or (N, k).
    """
    rs = as_system(rs_or_label)
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    word = default_word(rs)
    tilt = _tilts(rs, mu, word)
    if spec is None:
        spec = auto_spec(rs, mu, lam, logscale=logscale)
    xi, lw = _node_grid(spec, nodes)
    kappa, exps = _exponent_terms(rs, lam, logscale)
    expo = _node_exponent(kappa, exps, tilt, xi)
    logZ = float(logsumexp(expo + lw))
    dens = np.exp(expo + lw - logZ)
    vals = np.asarray(func(xi))
    return dens @ vals, logZ + _log_const(rs, mu, lam)


# ---------------------------------------------------------------------------
# oracles and derived quantities

def log_macdonald_psi_a1(mu: float, lam: float) -> float:
    """Rank-1 oracle log(2 K_mu(2 e^{-lam})), via scipy for moderate
    arguments and the two-sided small-argument series otherwise."""
    from scipy.special import kve
    z = 2.0 * np.exp(-lam)
    if z > 1e-6:
        val = kve(mu, z)
        return float(np.log(2.0) + np.log(val) - z)
    return log_psi_a1_small_z(mu, np.log(2.0) - lam)


def log_psi_a1_small_z(mu: float, logz: float) -> float:
    """log(2 K_mu(z)) for very small z: Gamma(mu)(z/2)^{-mu} + Gamma(-mu)(z/2)^{mu}."""
    if mu == 0:
        raise WallError("small-z series needs mu != 0")
    amu = abs(mu)
    logz2 = logz - np.log(2.0)
    t1 = gammaln(amu) - amu * logz2
    # Gamma(-a) = -pi / (a sin(pi a) Gamma(a)): negative for 0 < a < 1
    ga = gammaln(amu)
    log_gneg = np.log(np.pi) - np.log(amu) - np.log(abs(np.sin(np.pi * amu))) - ga
    sgn = -1.0 if (np.sin(np.pi * amu) > 0) else 1.0
    t2 = log_gneg + amu * logz2
    hi = max(t1, t2)
    return float(hi + np.log(np.exp(t1 - hi) + sgn * np.exp(t2 - hi)))


def toda_residual(rs_or_label, mu, lam, fd_step: float = 1e-3,
                  rtol: float = 1e-9, spec: QuadratureSpec = None) -> float:
    """Relative residual of the quantum Toda eigenequation by central
    differences on a shared-quadrature stencil.

    (1/2) Delta psi - sum_a (1/2)<a,a> e^{-a(x)} psi = (1/2)<mu,mu> psi
    """
    rs = as_system(rs_or_label)
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if spec is None:
        spec = auto_spec(rs, mu, lam, margin=14.0)
    base = log_whittaker_psi(rs, mu, lam, spec, rtol).log_psi
    lap = 0.0
    for k in range(rs.rank):
        d = rs.frame[:, k]
        lp = log_whittaker_psi(rs, mu, lam + fd_step * d, spec, rtol).log_psi
        lm = log_whittaker_psi(rs, mu, lam - fd_step * d, spec, rtol).log_psi
        lap += (np.exp(lp - base) + np.exp(lm - base) - 2.0) / fd_step ** 2
    pot = sum(0.5 * rs.root_norms[i - 1] * np.exp(-rs.root_action(i, lam))
              for i in range(1, rs.rank + 1))
    eig = 0.5 * float(rs.inner(mu, mu))
    return float(abs(0.5 * lap - pot - eig))


def dh_histogram(rs_or_label, lam, bins: int = 40, mu=None, nodes: int = None,
                 mu_cover=()):
    """Quadrature-weighted histogram of wt over the crystal.

    Returns (edges per axis, histogram, node_weights, node_wt) where the node
    data allow exact moment checks; total mass is psi_mu(lam) (mu = 0 by
    default).  mu_cover lists extra spectral parameters whose tilted mass the
    box must also cover (for Laplace-transform checks on the node data).
    """
    rs = as_system(rs_or_label)
    lam = np.asarray(lam, dtype=float)
    mu = np.zeros(rs.dim) if mu is None else np.asarray(mu, dtype=float)
    word = default_word(rs)
    _, coroots = positive_root_enumeration(rs, word)
    B = np.stack(coroots)  # (m, dim)
    w0 = rs.w0_matrix()

    def wt_of(xi):
        return (lam[None, :] + xi @ B) @ w0.T

    specs = [auto_spec(rs, m2, lam) for m2 in [mu] + list(mu_cover)]
    lo = np.min([s.centers - s.half_widths for s in specs], axis=0)
    hi = np.max([s.centers + s.half_widths for s in specs], axis=0)
    base = specs[0]
    grow = float(np.max((hi - lo) / (2 * base.half_widths)))
    res = float(np.max(hi - lo)) / 10.0  # keep node spacing below ~0.1 log unit
    spec = QuadratureSpec(centers=0.5 * (lo + hi), half_widths=0.5 * (hi - lo),
                          nodes=int(np.ceil(base.nodes * max(1.0, grow, res))))
    xi, lw = _node_grid(spec, nodes)
    kappa, exps = _exponent_terms(rs, lam, 0.0)
    tilt = _tilts(rs, mu, word)
    expo = _node_exponent(kappa, exps, tilt, xi)
    weights = np.exp(expo + lw + _log_const(rs, mu, lam))
    kvals = wt_of(xi)
    frame_coords = kvals @ rs.frame * rs.gram_scale
    hist, edges = np.histogramdd(frame_coords, bins=bins, weights=weights)
    return edges, hist, weights, kvals


def dh_laplace_transform(node_weights, node_wt, rs: RootSystem, mu) -> float:
    """int e^{<mu,k>} DH(dk) from node-level data; equals psi_mu(lam)."""
    mu = np.asarray(mu, dtype=float)
    return float(np.sum(node_weights * np.exp(rs.gram_scale * (node_wt @ mu))))


def psi_h_rescaled(rs_or_label, h: float, mu, lam, rtol: float = 1e-9) -> float:
    """psi_{h,mu}(lam) = h^m psi_{h mu}((lam - 4 h log h rho^vee)/h)."""
    rs = as_system(rs_or_label)
    m = rs.num_positive_roots()
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    arg = (lam - 4.0 * h * np.log(h) * rs.weyl_covector) / h
    lp = log_whittaker_psi(rs, h * mu, arg, rtol=rtol).log_psi
    return float(np.exp(m * np.log(h) + lp))


def h_mu(rs_or_label, mu, lam) -> float:
    """Asymptotic Schur function: alternating sum over the Weyl group divided
    by the product of coroot pairings."""
    rs = as_system(rs_or_label)
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    den = 1.0
    for beta in rs.positive_roots():
        z = float(rs.inner(rs.coroot(beta), mu))
        if abs(z) < 1e-12:
            raise WallError("mu lies on a wall: denominator vanishes")
        den *= z
    num = 0.0
    for w, l in rs.weyl_elements():
        num += (-1.0) ** l * np.exp(float(rs.inner(mu, w @ lam)))
    return float(num / den)


def concentration_demo(rs_or_label, zeta, mu, M_list, nodes: int = None):
    """Mean distance of the coordinate vector to the minimizer under the
    reweighted density e^{<mu,wt> - e^M f}; decreasing in M."""
    rs = as_system(rs_or_label)
    zeta = np.asarray(zeta, dtype=float)
    mstar = minimize_f_B(rs, zeta).coords
    rows = []
    for M in M_list:
        spec = auto_spec(rs, mu, zeta, logscale=float(M), nodes=nodes)

        def moments(xi):
            d = np.linalg.norm(np.exp(xi) - mstar[None, :], axis=-1)
            return np.stack([d, d * d], axis=-1)

        (mean_d, mean_d2), _ = quadrature_expectation(rs, mu, zeta, moments,
                                                      spec=spec, logscale=float(M))
        rows.append({"M": float(M), "mean_dist": float(mean_d),
                     "var_dist": float(mean_d2 - mean_d ** 2)})
    return rows
