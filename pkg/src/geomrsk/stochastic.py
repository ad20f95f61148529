"""Monte Carlo laboratory: Brownian paths, the Whittaker diffusion (two
constructions), spectral samplers, conditional-law and intertwining checks.

All randomness flows from SimulationConfig.seed through a Philox stream;
identical configurations reproduce bitwise.  Matrix flows run in float64 here
(entries stay within range at desk horizons); extended precision belongs to
the deterministic layer.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import stats
from scipy.special import kve, logsumexp

from .roots import RootSystem, positive_root_enumeration
from .groups import matrix_dim, wbar_w0, inv_small
from .paths import (pitman_w_batched, segment_exponentials, _leading_log_minors,
                    tropical_pitman_alpha, refine_grid)
from .potentials import as_system, default_word, monomial_rep, f_grad_hess
from .whittaker import (auto_spec, _tilts, _exponent_terms, _node_exponent,
                        quadrature_expectation, log_whittaker_psi)


@dataclass
class SimulationConfig:
    dt: float = 1e-3
    horizon: float = 1.0
    n_paths: int = 10000
    seed: int = 0
    drift: np.ndarray = None

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed))


@dataclass
class StatReport:
    name: str
    statistic: float
    pvalue: float
    n: int
    seed: int
    effect: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.pvalue > 0.01

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=float)


# ---------------------------------------------------------------------------
# Brownian motion on the Cartan subspace

def sample_bm(rs: RootSystem, config: SimulationConfig, rng=None):
    """(times, values) with values (n_paths, K+1, dim); increments are
    standard in the Killing-orthonormal frame plus drift * dt."""
    rng = rng or config.rng()
    K = int(round(config.horizon / config.dt))
    times = np.linspace(0.0, config.horizon, K + 1)
    z = rng.standard_normal((config.n_paths, K, rs.rank))
    steps = (z * np.sqrt(config.dt)) @ rs.frame.T
    if config.drift is not None:
        steps = steps + np.asarray(config.drift, dtype=float)[None, None, :] * config.dt
    vals = np.concatenate([np.zeros((config.n_paths, 1, rs.dim)), np.cumsum(steps, axis=1)],
                          axis=1)
    return times, vals


def frame_coords(rs: RootSystem, values):
    """Coordinates in the orthonormal frame (variance T per coordinate)."""
    return rs.gram_scale * (values @ rs.frame)


# ---------------------------------------------------------------------------
# the Whittaker diffusion: Doob-transform SDE

def a1_doob_drift(mu_abs: float):
    """d/dlam log 2K_mu(2e^{-lam}) through exponentially scaled Bessels."""

    def drift(lam):
        z = 2.0 * np.exp(-np.asarray(lam, dtype=float))
        num = kve(mu_abs - 1.0, z) + kve(mu_abs + 1.0, z)
        return z * num / (2.0 * kve(mu_abs, z))

    return drift


class DriftGrid:
    """grad log psi_mu on a frame-coordinate grid with linear interpolation."""

    def __init__(self, rs: RootSystem, mu, lo, hi, spacing=0.25, nodes=24):
        from scipy.interpolate import RegularGridInterpolator
        self.rs = rs
        mu = np.asarray(mu, dtype=float)
        axes = [np.arange(lo[k], hi[k] + spacing / 2, spacing) for k in range(rs.rank)]
        shape = tuple(len(a) for a in axes)
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, rs.rank)
        word = default_word(rs)
        tilt = _tilts(rs, mu, word)
        logpsi = np.empty(grid.shape[0])
        for idx, y in enumerate(grid):
            lam = rs.frame @ y
            spec = auto_spec(rs, mu, lam, nodes=nodes)
            kappa, exps = _exponent_terms(rs, lam, 0.0)
            xi, lw = _node_grid_local(spec, nodes)
            logpsi[idx] = logsumexp(_node_exponent(kappa, exps, tilt, xi) + lw) \
                + float(rs.inner(rs.w0_matrix() @ mu, lam))
        field_vals = logpsi.reshape(shape)
        grads = np.gradient(field_vals, *[a for a in axes], edge_order=2)
        if rs.rank == 1:
            grads = [grads]
        self._interp = [RegularGridInterpolator(axes, g, bounds_error=True)
                        for g in grads]
        self.axes = axes

    def __call__(self, y):
        """Drift in frame coordinates at frame points y (..., rank)."""
        return np.stack([f(y) for f in self._interp], axis=-1)


def _node_grid_local(spec, nodes):
    from .whittaker import _node_grid
    return _node_grid(spec, nodes)


def whittaker_sde(rs_or_label, mu, start, config: SimulationConfig, t_eval,
                  drift_fn=None, grid: DriftGrid = None, max_drift_step=0.2):
    """Euler-Maruyama for dL = grad log psi_mu(L) dt + dW, in frame
    coordinates, with a global adaptive substep in the stiff entrance region.

    Returns frame-coordinate samples at each requested time, (T, P, rank).
    """
    rs = as_system(rs_or_label)
    mu = np.asarray(mu, dtype=float)
    rng = config.rng()
    P = config.n_paths
    y = np.tile(rs.gram_scale * (np.asarray(start, dtype=float) @ rs.frame), (P, 1))
    if drift_fn is None:
        if rs.rank == 1 and grid is None:
            base = a1_doob_drift(abs(float(mu[0])))

            def drift_fn(yy):
                lam = yy  # frame coordinate equals the Cartan coordinate (A1)
                return base(lam[..., 0])[..., None]
        else:
            drift_fn = grid

    t_eval = list(t_eval)
    out = np.empty((len(t_eval), P, rs.rank))
    t = 0.0
    k_eval = 0
    while k_eval < len(t_eval):
        b = np.asarray(drift_fn(y))
        bmax = float(np.max(np.abs(b))) or 1.0
        dt = min(config.dt, max_drift_step / bmax, t_eval[k_eval] - t)
        dt = max(dt, 1e-9)
        z = rng.standard_normal((P, rs.rank))
        y = y + b * dt + np.sqrt(dt) * z
        t += dt
        if t >= t_eval[k_eval] - 1e-12:
            out[k_eval] = y
            k_eval += 1
    return out


def whittaker_via_pitman(rs: RootSystem, mu, config: SimulationConfig, t_eval,
                         refine: int = 1):
    """Highest-weight process samples via the geometric Pitman transform of
    Brownian motion; frame coordinates at the requested times, (T, P, rank)."""
    cfg = SimulationConfig(config.dt, config.horizon, config.n_paths, config.seed,
                           np.asarray(mu, dtype=float))
    times, vals = sample_bm(rs, cfg)
    word = next(rs.iter_reduced_words_w0())
    tt, vv = pitman_w_batched(rs, times, vals, word, refine=refine)
    out = []
    for te in t_eval:
        idx = int(np.argmin(np.abs(tt - te)))
        out.append(frame_coords(rs, vv[:, idx, :]))
    return np.stack(out, axis=0)


# ---------------------------------------------------------------------------
# spectral samplers

def gamma_shape_parameters(rs: RootSystem, mu, word) -> np.ndarray:
    _, coroots = positive_root_enumeration(rs, word)
    mu = np.asarray(mu, dtype=float)
    return np.array([float(rs.inner(b, mu)) for b in coroots])


def sample_gamma_mu_coords(rs: RootSystem, mu, word, n: int, rng) -> np.ndarray:
    """Independent standard-gamma coordinates of shapes <beta_j^vee, mu>."""
    shapes = gamma_shape_parameters(rs, mu, word)
    if np.any(shapes <= 0):
        raise ValueError("mu must pair positively with every positive coroot")
    return rng.gamma(shape=shapes, size=(n, len(shapes)))


def build_x_word_batch(rs: RootSystem, word, coords) -> np.ndarray:
    """x_word(coords) for a batch (n, m) of coordinates, float64."""
    n = matrix_dim(rs)
    P = coords.shape[0]
    out = np.tile(np.eye(n), (P, 1, 1))
    for j, i in enumerate(word):
        fac = np.tile(np.eye(n), (P, 1, 1))
        fac[:, i - 1, i] = coords[:, j]
        out = out @ fac
    return out


def chi_lower_batch(rs: RootSystem, nstack: np.ndarray) -> np.ndarray:
    """chi^- per simple slot summed, for a batch of unit lower elements."""
    return sum(nstack[..., i, i - 1] for i in range(1, rs.rank + 1))


def theta_batch(rs: RootSystem, ustack: np.ndarray) -> np.ndarray:
    """[u wbar0]_- for a float64 batch (LDU without pivoting, generic)."""
    w0 = np.asarray(wbar_w0(rs, np.float64))
    g = ustack @ w0
    n = g.shape[-1]
    a = g.copy()
    L = np.tile(np.eye(n), g.shape[:-2] + (1, 1))
    for k in range(n):
        L[..., k + 1:, k] = a[..., k + 1:, k] / a[..., k:k + 1, k]
        a[..., k + 1:, k:] -= L[..., k + 1:, k:k + 1] * a[..., k:k + 1, k:]
    return L


def sample_gamma_mu_lambda_coords(rs: RootSystem, mu, lam, word, n: int, rng,
                                  batch: int = 4096):
    """Gamma_mu(lambda) by rejection: accept Gamma_mu draws with probability
    exp(-chi^-(e^lam Theta(Gamma_mu) e^{-lam}))."""
    lam = np.asarray(lam, dtype=float)
    emb = np.exp(_torus_embed_vec(rs, lam))
    out = []
    got = 0
    while got < n:
        co = sample_gamma_mu_coords(rs, mu, word, batch, rng)
        u = build_x_word_batch(rs, word, co)
        th = theta_batch(rs, u)
        conj = emb[None, :, None] * th * (1.0 / emb)[None, None, :]
        acc_p = np.exp(-chi_lower_batch(rs, conj))
        keep = rng.random(batch) < acc_p
        out.append(co[keep])
        got += int(keep.sum())
    return np.concatenate(out, axis=0)[:n]


def _torus_embed_vec(rs, v):
    from .groups import torus_embed
    return np.asarray(torus_embed(rs, np.asarray(v, dtype=float)), dtype=float)


def sample_canonical(rs_or_label, mu, lam, n: int, seed: int = 0, word=None,
                     burn_in: int = 1000, thin: int = 10, chains: int = 64,
                     logscale: float = 0.0):
    """Random-walk Metropolis in log twisted-Lusztig coordinates targeting
    e^{<mu, wt> - f}; the base measure is flat there.

    Returns (samples (n, m) of log-coordinates, acceptance rate).
    """
    rs = as_system(rs_or_label)
    word = tuple(word) if word else default_word(rs)
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    tilt = _tilts(rs, mu, word)
    kappa, exps = _exponent_terms(rs, lam, logscale)
    rng = np.random.Generator(np.random.Philox(seed))
    m = len(word)
    spec = auto_spec(rs, mu, lam, logscale=logscale)
    xi = np.tile(spec.centers, (chains, 1))

    def logdens(x):
        return _node_exponent(kappa, exps, tilt, x)

    cur = logdens(xi)
    sigma = 0.8
    acc_hist = []
    keep = []
    need = int(np.ceil(n / chains))
    total_steps = burn_in + need * thin
    for step in range(total_steps):
        prop = xi + sigma * rng.standard_normal((chains, m))
        new = logdens(prop)
        accept = np.log(rng.random(chains)) < (new - cur)
        xi = np.where(accept[:, None], prop, xi)
        cur = np.where(accept, new, cur)
        rate = float(np.mean(accept))
        acc_hist.append(rate)
        if step < burn_in and step % 25 == 24:
            recent = float(np.mean(acc_hist[-25:]))
            if recent < 0.3:
                sigma *= 0.8
            elif recent > 0.5:
                sigma *= 1.25
        if step >= burn_in and (step - burn_in) % thin == thin - 1:
            keep.append(xi.copy())
    rate = float(np.mean(acc_hist[burn_in:]))
    if not 0.05 <= rate <= 0.95:
        raise RuntimeError(f"canonical sampler acceptance {rate:.2f} out of range")
    samples = np.concatenate(keep, axis=0)[:n]
    return samples, rate


def weight_of_log_coords(rs: RootSystem, lam, word, xi) -> np.ndarray:
    """wt = w0(lam + sum_j xi_j beta_j^vee), batched over xi (..., m)."""
    _, coroots = positive_root_enumeration(rs, word)
    B = np.stack(coroots)
    return (np.asarray(lam, dtype=float)[None, :] + xi @ B) @ rs.w0_matrix().T


# ---------------------------------------------------------------------------
# flows for Monte Carlo batches

def flow_B_batch(rs: RootSystem, times, values, knot_indices):
    """B at selected knots for a float64 batch; (T, P, n, n)."""
    facs = segment_exponentials(rs, times, values, np.float64)
    n = matrix_dim(rs)
    P = values.shape[0]
    B = np.tile(np.eye(n), (P, 1, 1))
    want = {int(k): j for j, k in enumerate(knot_indices)}
    out = np.empty((len(knot_indices), P, n, n))
    if 0 in want:
        out[want[0]] = B
    for k in range(facs.shape[1]):
        B = B @ facs[:, k]
        if (k + 1) in want:
            out[want[k + 1]] = B
    return out


def gauss_log_diag_batch(rs: RootSystem, g: np.ndarray) -> np.ndarray:
    lm = _leading_log_minors(g)
    zeros = np.zeros(lm.shape[:-1] + (1,), dtype=lm.dtype)
    dl = np.diff(np.concatenate([zeros, lm], axis=-1), axis=-1)
    return dl[..., :1] if rs.rank == 1 else dl


def twisted_chi_batch(rs: RootSystem, g: np.ndarray) -> np.ndarray:
    """chi of [wbar0^{-1} g]_+ for a batch; SL2/SL3 minor-ratio closed forms."""
    w0inv = np.asarray(inv_small(wbar_w0(rs, np.float64)))
    a = w0inv[None] @ g
    n = a.shape[-1]
    if n == 2:
        return a[..., 0, 1] / a[..., 0, 0]
    if n == 3:
        D2 = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
        u12 = a[..., 0, 1] / a[..., 0, 0]
        u23 = (a[..., 0, 0] * a[..., 1, 2] - a[..., 0, 2] * a[..., 1, 0]) / D2
        return u12 + u23
    raise ValueError("batch chi implemented for SL2/SL3")


def transform_Tg_batch(rs: RootSystem, times, values, gstack, knot_indices):
    """T_g X at selected knots for per-path g; frame coords (T, P, rank)."""
    Bs = flow_B_batch(rs, times, values, knot_indices)
    out = []
    for Bt in Bs:
        td = gauss_log_diag_batch(rs, gstack @ Bt)
        out.append(rs.gram_scale * (td @ rs.frame))
    return np.stack(out, axis=0)


# ---------------------------------------------------------------------------
# statistical test suites

def ks_report(name, a, b, seed, extra=None) -> StatReport:
    res = stats.ks_2samp(np.asarray(a), np.asarray(b))
    eff = float(res.statistic)
    return StatReport(name=name, statistic=eff, pvalue=float(res.pvalue),
                      n=min(len(a), len(b)), seed=seed, effect=eff,
                      extra=extra or {})


def ks_uniform_report(name, u, seed, extra=None) -> StatReport:
    res = stats.kstest(np.asarray(u), "uniform")
    return StatReport(name=name, statistic=float(res.statistic),
                      pvalue=float(res.pvalue), n=len(u), seed=seed,
                      effect=float(res.statistic), extra=extra or {})


def matsumoto_yor_test(rs_or_label, mu, config: SimulationConfig, t_star=1.0,
                       entrance_M=4.0, grid: DriftGrid = None,
                       refine: int = 1) -> list[StatReport]:
    """Two-sample KS between the Pitman-transform marginal and the Doob-SDE
    marginal started near the entrance point, per frame coordinate."""
    rs = as_system(rs_or_label)
    mu = np.asarray(mu, dtype=float)
    pit = whittaker_via_pitman(rs, mu, config, [t_star], refine=refine)[0]
    start = -2.0 * entrance_M * rs.weyl_covector
    cfg2 = SimulationConfig(config.dt, config.horizon, config.n_paths,
                            config.seed + 1, None)
    sde = whittaker_sde(rs, mu, start, cfg2, [t_star], grid=grid)[0]
    reports = []
    for k in range(rs.rank):
        reports.append(ks_report(
            f"matsumoto-yor[{rs.label}{rs.rank}] coord {k}", pit[:, k], sde[:, k],
            config.seed, {"t": t_star, "entrance_M": entrance_M}))
    return reports


def drift_equivariance_test(rs_or_label, mu, config: SimulationConfig,
                            t_star=1.0, refine: int = 1) -> list[StatReport]:
    """Lambda marginals for drift mu and w0 mu agree (Weyl invariance)."""
    rs = as_system(rs_or_label)
    mu = np.asarray(mu, dtype=float)
    a = whittaker_via_pitman(rs, mu, config, [t_star], refine=refine)[0]
    b = whittaker_via_pitman(rs, rs.w0_matrix() @ mu,
                             SimulationConfig(config.dt, config.horizon,
                                              config.n_paths, config.seed + 7),
                             [t_star], refine=refine)[0]
    return [ks_report(f"drift-equivariance coord {k}", a[:, k], b[:, k], config.seed)
            for k in range(rs.rank)]


def conditional_law_test(rs_or_label, mu, config: SimulationConfig, t_star=1.0,
                         lam_star=None, min_bin: int = 2000,
                         mcmc_n: int = 20000) -> list[StatReport]:
    """Thin-bin conditional law of chi(twisted part of B_t) against the
    canonical sampler at the bin centroid."""
    rs = as_system(rs_or_label)
    mu = np.asarray(mu, dtype=float)
    cfg = SimulationConfig(config.dt, config.horizon, config.n_paths, config.seed, mu)
    times, vals = sample_bm(rs, cfg)
    idx_half = int(round(0.5 * t_star / config.dt))
    idx_full = int(round(t_star / config.dt))
    Bs = flow_B_batch(rs, times, vals, [idx_half, idx_full])
    reports = []
    w0inv = np.asarray(inv_small(wbar_w0(rs, np.float64)))
    for tag, Bt in (("t/2", Bs[0]), ("t", Bs[1])):
        hw = gauss_log_diag_batch(rs, w0inv[None] @ Bt)
        lam_frame = rs.gram_scale * (hw @ rs.frame)
        if lam_star is None:
            center = np.median(lam_frame, axis=0)
        else:
            center = rs.gram_scale * (np.asarray(lam_star, dtype=float) @ rs.frame)
        w = 0.02
        while True:
            sel = np.all(np.abs(lam_frame - center[None, :]) < w, axis=-1)
            if sel.sum() >= min_bin or w > 4.0:
                break
            w *= 1.3
        chi_sim = twisted_chi_batch(rs, Bt[sel])
        lam_centroid_frame = lam_frame[sel].mean(axis=0)
        lam_centroid = rs.frame @ lam_centroid_frame
        xi_ref, _ = sample_canonical(rs, mu, lam_centroid, mcmc_n,
                                     seed=config.seed + 13)
        chi_ref = np.exp(xi_ref).sum(axis=1)
        reports.append(ks_report(
            f"conditional-law[{rs.label}{rs.rank}] {tag}", chi_sim, chi_ref,
            config.seed, {"bin_halfwidth": w, "n_bin": int(sel.sum()),
                          "lam_centroid_frame": list(map(float, lam_centroid_frame))}))
    return reports


def conditional_representation_test(rs_or_label, mu, x0, config: SimulationConfig,
                                    t_eval=(0.5, 1.0), grid: DriftGrid = None
                                    ) -> list[StatReport]:
    """x0 + T_g(W^{(w0 mu)}) with g ~ Gamma_mu(x0) against the Doob SDE
    started at x0, in marginal law at the requested times."""
    rs = as_system(rs_or_label)
    mu = np.asarray(mu, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    word = default_word(rs)
    rng = np.random.Generator(np.random.Philox(config.seed + 3))
    co = sample_gamma_mu_lambda_coords(rs, mu, x0, word, config.n_paths, rng)
    g = build_x_word_batch(rs, word, co)
    cfg = SimulationConfig(config.dt, config.horizon, config.n_paths, config.seed,
                           rs.w0_matrix() @ mu)
    times, vals = sample_bm(rs, cfg)
    idxs = [int(round(t / config.dt)) for t in t_eval]
    tx = transform_Tg_batch(rs, times, vals, g, idxs)
    x0f = rs.gram_scale * (x0 @ rs.frame)
    cfg2 = SimulationConfig(config.dt, config.horizon, config.n_paths,
                            config.seed + 5, None)
    sde = whittaker_sde(rs, mu, x0, cfg2, list(t_eval), grid=grid)
    reports = []
    for j, t in enumerate(t_eval):
        for k in range(rs.rank):
            reports.append(ks_report(
                f"conditional-representation[{rs.label}{rs.rank}] t={t} coord {k}",
                tx[j][:, k] + x0f[k], sde[j][:, k], config.seed))
    return reports


def intertwining_mc(rs_or_label, mu, lam0, t_star, config: SimulationConfig,
                    grid: DriftGrid = None, n_sigma: float = 3.0):
    """Both routes of the intertwining K P_t = Q_t K for three test functions.

    Returns a list of dicts with both estimates and their combined MC sigma.
    """
    rs = as_system(rs_or_label)
    mu = np.asarray(mu, dtype=float)
    lam0 = np.asarray(lam0, dtype=float)
    word = default_word(rs)
    n = config.n_paths
    rng = np.random.Generator(np.random.Philox(config.seed + 21))

    theta = 0.3 * np.ones(rs.rank)

    def phis(kf):
        # kf: frame coordinates (n, rank)
        return np.stack([
            kf[:, 0],
            np.exp(np.clip(kf @ theta, None, 50.0)),
            np.exp(-0.5 * np.sum(kf ** 2, axis=1)),
        ], axis=-1)

    # left route: canonical sample at lam0, then a BM step
    xi, _ = sample_canonical(rs, mu, lam0, n, seed=config.seed + 11)
    k0 = weight_of_log_coords(rs, lam0, word, xi)
    kf0 = rs.gram_scale * (k0 @ rs.frame)
    muf = rs.gram_scale * (mu @ rs.frame)
    kft = kf0 + np.sqrt(t_star) * rng.standard_normal((n, rs.rank)) + muf * t_star
    left_vals = phis(kft)
    left = left_vals.mean(axis=0)
    left_sig = left_vals.std(axis=0) / np.sqrt(n)

    # right route: Whittaker SDE step, then the canonical wt average
    cfg2 = SimulationConfig(config.dt, config.horizon, n, config.seed + 22, None)
    lamt = whittaker_sde(rs, mu, lam0, cfg2, [t_star], grid=grid)[0]
    kphi = _k_hat_interpolator(rs, mu, lamt, phis, word)
    right_vals = kphi
    right = right_vals.mean(axis=0)
    right_sig = right_vals.std(axis=0) / np.sqrt(n)

    out = []
    for j, name in enumerate(("coordinate", "exp-linear", "bump")):
        sig = float(np.hypot(left_sig[j], right_sig[j]))
        out.append({"phi": name, "left": float(left[j]), "right": float(right[j]),
                    "sigma": sig, "n_sigma": n_sigma,
                    "ok": bool(abs(left[j] - right[j]) <= n_sigma * sig)})
    return out


def _k_hat_interpolator(rs, mu, lam_frame_pts, phis, word):
    """K-hat phi at many frame points by smooth interpolation of quadrature
    values on a covering grid."""
    from scipy.interpolate import RegularGridInterpolator, CubicSpline
    lo = lam_frame_pts.min(axis=0) - 0.3
    hi = lam_frame_pts.max(axis=0) + 0.3
    spacing = 0.2
    axes = [np.arange(lo[k], hi[k] + spacing, spacing) for k in range(rs.rank)]
    shape = tuple(len(a) for a in axes)
    gridpts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, rs.rank)
    vals = []
    for y in gridpts:
        lam = rs.frame @ y

        def func(xi):
            k = weight_of_log_coords(rs, lam, word, xi)
            return phis(rs.gram_scale * (k @ rs.frame))

        ev, _ = quadrature_expectation(rs, mu, lam, func, nodes=32)
        vals.append(ev)
    vals = np.asarray(vals).reshape(shape + (-1,))
    if rs.rank == 1:
        out = np.stack([CubicSpline(axes[0], vals[:, j])(lam_frame_pts[:, 0])
                        for j in range(vals.shape[-1])], axis=-1)
        return out
    interps = [RegularGridInterpolator(axes, vals[..., j], method="linear")
               for j in range(vals.shape[-1])]
    return np.stack([f(lam_frame_pts) for f in interps], axis=-1)


def _future_killing_bound(rs, x, mu, horizon):
    """E of the remaining killing integral from position x over a horizon:
    sum_a w_a e^{-a(x)} int_0^H e^{s(<a,a>/2 - a(mu))} ds, per path."""
    halfn = rs.half_norms()
    out = np.zeros(x.shape[0])
    for i in range(1, rs.rank + 1):
        e = rs.gram_scale * (x @ rs.simple_roots[i - 1])
        rate = float(rs.inner(rs.simple_roots[i - 1], mu)) - halfn[i - 1]
        if rate > 1e-9:
            factor = (1.0 - np.exp(-rate * horizon)) / rate
        else:
            factor = horizon * np.exp(-rate * horizon)
        out += halfn[i - 1] * np.exp(-e) * factor
    return out


def survival_probability(rs_or_label, mu, lam, config: SimulationConfig,
                         t_max=14.0, block=2.0, stop_tol=1e-9):
    """Feynman-Kac value E[exp(-sum_a (<a,a>/2) int e^{-a(W^mu + lam)})] by
    blocks with early stopping; returns (estimate, mc_sigma, tail_bound).

    |E e^{-A-B} - E e^{-A}| <= E[B] bounds both the per-path stopping error
    and the horizon truncation, using the chamber drift of W^(mu).
    """
    rs = as_system(rs_or_label)
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    rng = config.rng()
    P = config.n_paths
    dt = config.dt
    x = np.tile(lam, (P, 1))
    acc = np.zeros(P)
    alive = np.ones(P, dtype=bool)
    t = 0.0
    halfn = rs.half_norms()
    tail_bound = 0.0
    simple = [rs.simple_roots[i - 1] for i in range(rs.rank)]
    f_prev = None
    while t < t_max and alive.any():
        K = int(round(block / dt))
        xa = x[alive]
        f_prev = np.stack([halfn[i] * np.exp(-rs.gram_scale * (xa @ simple[i]))
                           for i in range(rs.rank)], axis=0)
        acc_a = np.zeros(xa.shape[0])
        for _ in range(K):
            z = rng.standard_normal((xa.shape[0], rs.rank))
            xa = xa + (z * np.sqrt(dt)) @ rs.frame.T + mu[None, :] * dt
            f_new = np.stack([halfn[i] * np.exp(-rs.gram_scale * (xa @ simple[i]))
                              for i in range(rs.rank)], axis=0)
            acc_a += 0.5 * dt * (f_prev + f_new).sum(axis=0)
            f_prev = f_new
        acc[alive] += acc_a
        x[alive] = xa
        t += block
        rest = _future_killing_bound(rs, xa, mu, t_max - t)
        stop = rest < stop_tol
        tail_bound += float(np.sum(rest[stop])) / P
        idx = np.where(alive)[0]
        alive[idx[stop]] = False
    if alive.any():
        tail_bound += float(np.sum(_future_killing_bound(rs, x[alive], mu, np.inf))) / P
    vals = np.exp(-acc)
    return float(vals.mean()), float(vals.std() / np.sqrt(P)), tail_bound


def tropical_limit_suite(rs_or_label, config: SimulationConfig,
                         h_list=(1.0, 0.5, 0.1, 0.01), n_seeds: int = 100,
                         t_min: float = 0.05):
    """(a) pathwise h-convergence of the deformed transform to the tropical
    one; (b) chamber membership; (c) rank-1 conditioned string uniformity."""
    rs = as_system(rs_or_label)
    word = next(rs.iter_reduced_words_w0())
    K = int(round(config.horizon / config.dt))
    times = np.linspace(0, config.horizon, K + 1)
    monotone = 0
    final_sups = []
    min_alpha = np.inf
    for s in range(n_seeds):
        cfg = SimulationConfig(config.dt, config.horizon, 1, config.seed + s, None)
        _, vals = sample_bm(rs, cfg)
        v = vals[0]
        tt, tv = times, v
        for i in word:
            tt, tv = tropical_pitman_alpha(rs, tt, tv, i)
        for i in range(1, rs.rank + 1):
            e = rs.gram_scale * (tv @ rs.simple_roots[i - 1])
            min_alpha = min(min_alpha, float(e.min()))
        sups = []
        for h in h_list:
            th, vh = pitman_w_batched(rs, times, v[None], word, h=h)
            mask = th >= t_min
            d = np.max(np.abs(vh[0][mask] - tv[len(times) - len(th):][mask]))
            sups.append(float(d))
        if all(x > y for x, y in zip(sups[:-1], sups[1:])):
            monotone += 1
        final_sups.append(sups[-1])
    return {"monotone_fraction": monotone / n_seeds,
            "final_sup_max": float(np.max(final_sups)),
            "chamber_min_alpha": min_alpha,
            "h_list": list(h_list)}


def string_uniform_test(config: SimulationConfig) -> StatReport:
    """Rank-1 h -> 0 string coordinate: c = -inf alpha(W) over [0,T] given the
    transform endpoint is uniform on [0, alpha(endpoint)]."""
    from .roots import build_root_system
    rs = build_root_system("A", 1)
    times, vals = sample_bm(rs, config)
    w = vals[:, :, 0]
    c = -2.0 * np.minimum(0.0, w.min(axis=1))
    lam_end = w[:, -1] - 2.0 * np.minimum(0.0, w.min(axis=1))
    keep = lam_end > 1e-6
    u = c[keep] / (2.0 * lam_end[keep])
    return ks_uniform_report("rank-1 string uniformity", u, config.seed,
                             {"n": int(keep.sum())})
