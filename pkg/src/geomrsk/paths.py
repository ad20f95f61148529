"""Path-level machinery: the left-invariant flow, Pitman transforms, and
coordinate extraction from paths.

Paths are piecewise linear on their own grid; transforms never resample.
Exponential functionals are accumulated in log space (log-sum-exp trapezoid)
because e^{-alpha(pi)} spans hundreds of orders of magnitude on long paths.
A transformed path starts at the first positive knot: the value at t0 is not
defined.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .roots import RootSystem
from .groups import (NotInBigCell, matrix_dim, wbar, wbar_w0, ldu, torus_restrict,
                     word_is_reduced, build_x_word, gauss_lower, one_param_upper)
from .roots import NotReducedWord

_BIN_MAGIC = b"GRSKPATH"


@dataclass
class PathSample:
    times: np.ndarray   # strictly increasing, t0 = 0 for crystal paths
    values: np.ndarray  # (K+1, dim)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values))
        if self.values.shape[0] != self.times.shape[0]:
            raise ValueError("times/values length mismatch")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("path values must be finite")

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time," + ",".join(f"x{k + 1}" for k in range(self.dim)) + "\n")
        for t, row in zip(self.times, self.values):
            buf.write(f"{t!r}," + ",".join(repr(float(x)) for x in row) + "\n")
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str) -> "PathSample":
        lines = [l for l in text.strip().splitlines() if l]
        data = np.array([[float(x) for x in l.split(",")] for l in lines[1:]])
        return PathSample(data[:, 0], data[:, 1:])

    def to_binary(self) -> bytes:
        head = _BIN_MAGIC + struct.pack("<IIQ", 1, self.dim, len(self.times))
        body = self.times.astype("<f8").tobytes() + \
            self.values.astype("<f8").tobytes()
        return head + body

    @staticmethod
    def from_binary(blob: bytes) -> "PathSample":
        if blob[:8] != _BIN_MAGIC:
            raise ValueError("bad magic")
        ver, dim, k = struct.unpack("<IIQ", blob[8:24])
        if ver != 1:
            raise ValueError("unsupported version")
        times = np.frombuffer(blob, dtype="<f8", count=k, offset=24)
        vals = np.frombuffer(blob, dtype="<f8", count=k * dim, offset=24 + 8 * k)
        return PathSample(times.copy(), vals.reshape(k, dim).copy())


# ---------------------------------------------------------------------------
# the flow B_t

def _lower_shift(rs: RootSystem, dtype) -> np.ndarray:
    """sum_alpha (<alpha,alpha>/2) f_alpha in the matrix model."""
    n = matrix_dim(rs)
    C = np.zeros((n, n), dtype=dtype)
    for i, w in enumerate(rs.half_norms(), start=1):
        C[i, i - 1] = w
    return C


def _diag_embed(rs: RootSystem, v: np.ndarray) -> np.ndarray:
    if rs.rank == 1:
        return np.stack([v[..., 0], -v[..., 0]], axis=-1)
    return v


def _expm_stack(M: np.ndarray) -> np.ndarray:
    """exp of a stack of small matrices, scaling-and-squaring Taylor."""
    norm = np.max(np.abs(M), axis=(-2, -1), keepdims=False)
    top = float(np.max(norm)) if norm.size else 0.0
    s = max(0, int(np.ceil(np.log2(max(top, 1e-30) / 0.25))))
    A = M / (2 ** s)
    n = M.shape[-1]
    out = np.zeros_like(A)
    out[..., range(n), range(n)] = 1
    term = out.copy()
    for k in range(1, 16):
        term = term @ A / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def segment_exponentials(rs: RootSystem, times, values, dtype=np.longdouble):
    """Per-segment exact flow factors exp(dt (diag(slope) + sum w_a f_a))."""
    times = np.asarray(times, dtype=dtype)
    values = np.asarray(values, dtype=dtype)
    dt = np.diff(times)
    slope = np.diff(values, axis=-2) / dt[..., None]
    d = _diag_embed(rs, slope)
    n = matrix_dim(rs)
    M = np.zeros(d.shape[:-1] + (n, n), dtype=dtype)
    M[..., range(n), range(n)] = d
    M += _lower_shift(rs, dtype)
    return _expm_stack(M * dt[..., None, None])


def flow_B(rs: RootSystem, path: PathSample, dtype=np.longdouble):
    """Run the flow along a piecewise-linear path; returns per-knot data.

    The update per linear segment is exact (the generator is constant there),
    which is the Wong-Zakai reading for Brownian input.
    """
    facs = segment_exponentials(rs, path.times, path.values, dtype)
    n = matrix_dim(rs)
    K = len(path.times)
    group = np.empty((K, n, n), dtype=dtype)
    group[0] = np.eye(n, dtype=dtype)
    for k in range(K - 1):
        group[k + 1] = group[k] @ facs[k]
        if not np.all(np.isfinite(group[k + 1])):
            raise OverflowError("flow overflowed extended precision")
    torus = np.asarray(path.values, dtype=dtype)
    expd = np.exp(_diag_embed(rs, torus))
    n_part = group / expd[:, None, :]
    return FlowResult(times=path.times.copy(), group_path=group,
                      n_part=n_part, torus_part=torus)


@dataclass
class FlowResult:
    times: np.ndarray
    group_path: np.ndarray  # (K, n, n)
    n_part: np.ndarray
    torus_part: np.ndarray

    def residual(self, rs: RootSystem) -> float:
        expd = np.exp(_diag_embed(rs, self.torus_part))
        rec = self.n_part * expd[:, None, :]
        scale = np.max(np.abs(self.group_path))
        return float(np.max(np.abs(rec - self.group_path)) / scale)


def flow_B_at(rs: RootSystem, times, values, knot_indices, dtype=np.float64):
    """Batched flow; returns B at selected knots only (Monte Carlo helper).

    values has shape (..., K+1, dim); output (len(knot_indices), ..., n, n).
    """
    facs = segment_exponentials(rs, times, values, dtype)
    n = matrix_dim(rs)
    lead = facs.shape[:-3]
    B = np.zeros(lead + (n, n), dtype=dtype)
    B[..., range(n), range(n)] = 1
    want = {int(k): j for j, k in enumerate(knot_indices)}
    out = np.empty((len(knot_indices),) + lead + (n, n), dtype=dtype)
    if 0 in want:
        out[want[0]] = B
    for k in range(facs.shape[-3]):
        B = B @ facs[..., k, :, :]
        if (k + 1) in want:
            out[want[k + 1]] = B
    return out


def flow_cocycle_residual(rs: RootSystem, path: PathSample, split_index: int,
                          dtype=np.longdouble) -> float:
    """|| B_T(X) - B_t(X) B_{T-t}(X_{t+.} - X_t) || at a grid knot t."""
    full = flow_B(rs, path, dtype).group_path[-1]
    t1 = PathSample(path.times[:split_index + 1], path.values[:split_index + 1])
    shift = PathSample(path.times[split_index:] - path.times[split_index],
                       path.values[split_index:] - path.values[split_index])
    lhs = flow_B(rs, t1, dtype).group_path[-1] @ flow_B(rs, shift, dtype).group_path[-1]
    return float(np.max(np.abs(full - lhs)) / np.max(np.abs(full)))


# ---------------------------------------------------------------------------
# principal minors of matrix stacks (for [.]_0 along flows)

def _leading_log_minors(g: np.ndarray) -> np.ndarray:
    """log of leading principal minors D_1..D_n for a stack of matrices."""
    n = g.shape[-1]
    if n == 2:
        D1 = g[..., 0, 0]
        D2 = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        Ds = [D1, D2]
    elif n == 3:
        D1 = g[..., 0, 0]
        D2 = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        D3 = (g[..., 0, 0] * (g[..., 1, 1] * g[..., 2, 2] - g[..., 1, 2] * g[..., 2, 1])
              - g[..., 0, 1] * (g[..., 1, 0] * g[..., 2, 2] - g[..., 1, 2] * g[..., 2, 0])
              + g[..., 0, 2] * (g[..., 1, 0] * g[..., 2, 1] - g[..., 1, 1] * g[..., 2, 0]))
        Ds = [D1, D2, D3]
    else:
        flat = g.reshape((-1,) + g.shape[-2:])
        out = np.empty((flat.shape[0], n), dtype=g.dtype)
        for j, m in enumerate(flat):
            _, d, _ = ldu(m)
            if np.any(d <= 0):
                raise NotInBigCell("nonpositive leading minor along the path")
            out[j] = np.cumsum(np.log(d))
        return out.reshape(g.shape[:-2] + (n,))
    D = np.stack(Ds, axis=-1)
    if np.any(D <= 0):
        raise NotInBigCell("nonpositive leading minor along the path")
    return np.log(D)


def gauss_log_diag(rs: RootSystem, g: np.ndarray) -> np.ndarray:
    """log [g]_0 as a Cartan-subspace vector, batched over leading axes."""
    lm = _leading_log_minors(g)
    zeros = np.zeros(lm.shape[:-1] + (1,), dtype=lm.dtype)
    dl = np.diff(np.concatenate([zeros, lm], axis=-1), axis=-1)
    if rs.rank == 1:
        return dl[..., :1]
    return dl


# ---------------------------------------------------------------------------
# Pitman transforms

def _alpha_covector_add(values, acc, coroot):
    """values + acc * coroot restricted to the nonzero coroot components."""
    out = np.array(values, copy=True)
    for k in range(out.shape[-1]):
        c = coroot[k]
        if c != 0:
            out[..., k] = out[..., k] + acc * c
    return out


def _log_phi1(d):
    """log((e^d - 1)/d), stable for all real d (phi1(0) = 1)."""
    d = np.asarray(d)
    out = np.empty(d.shape, dtype=float)
    small = np.abs(d) < 1e-8
    out[small] = d[small] / 2
    pos = d >= 30
    out[pos] = d[pos] - np.log(d[pos])
    neg = d <= -30
    out[neg] = -np.log(-d[neg])
    mid = ~(small | pos | neg)
    dm = d[mid]
    out[mid] = np.where(dm > 0, np.log(np.expm1(np.abs(dm)) / np.abs(dm)),
                        np.log(-np.expm1(-np.abs(dm)) / np.abs(dm)))
    return out


def _log_trapezoid_accumulate(times, f):
    """log of cumulative integral of e^{f}, f log-linear per segment.

    The segment rule int e^f = dt e^{f_k} phi1(f_{k+1} - f_k) is exact when f
    is affine on the segment, which it is at the first Pitman level on a
    piecewise-linear path; higher levels only pay for the curvature of the
    smooth log-correction layers.
    """
    dt = np.diff(times)
    seg = f[..., :-1] + _log_phi1(f[..., 1:] - f[..., :-1]) + np.log(dt)
    return np.logaddexp.accumulate(seg, axis=-1)


def pitman_alpha_batched(rs: RootSystem, times, values, i: int, h: float = 1.0):
    """(h T_alpha h^{-1}) applied to values (..., K+1, dim); drops knot 0."""
    a = rs.simple_roots[i - 1]
    w = rs.half_norms()[i - 1]
    f = -rs.gram_scale * (values @ a) / h
    acc = h * (_log_trapezoid_accumulate(times, f + np.log(w)))
    return times[1:], _alpha_covector_add(values[..., 1:, :], acc, rs.simple_coroot(i))


def pitman_alpha(rs: RootSystem, path: PathSample, i: int) -> PathSample:
    """T_alpha pi(t) = pi(t) + log(int_0^t e^{-alpha(pi)} <a,a>/2 ds) alpha^vee."""
    t, v = pitman_alpha_batched(rs, path.times, path.values, i)
    return PathSample(t, v)


def refine_grid(times, values, r: int):
    """Insert r-1 equispaced knots per segment (exact on piecewise-linear)."""
    if r == 1:
        return times, values
    K = len(times) - 1
    frac = np.arange(r) / r
    tf = (times[:-1, None] + np.diff(times)[:, None] * frac[None, :]).reshape(-1)
    tf = np.concatenate([tf, times[-1:]])
    dv = np.diff(values, axis=-2)
    vf = values[..., :-1, None, :] + dv[..., :, None, :] * frac[None, :, None]
    vf = vf.reshape(values.shape[:-2] + (K * r,) + values.shape[-1:])
    vf = np.concatenate([vf, values[..., -1:, :]], axis=-2)
    return tf, vf


def pitman_w_batched(rs: RootSystem, times, values, word, h: float = 1.0,
                     refine: int = 1):
    """Composition along the word, leftmost letter applied first.

    refine > 1 subdivides each segment exactly before transforming and
    returns values on the original knots (from the first positive one);
    the composed functionals of the same piecewise-linear path are then
    resolved to a fraction of the grid error.
    """
    if refine == 1:
        t, v = times, values
        for i in word:
            t, v = pitman_alpha_batched(rs, t, v, i, h)
        return t, v
    tf, vf = refine_grid(times, values, refine)
    dropped = 0
    for i in word:
        tf, vf = pitman_alpha_batched(rs, tf, vf, i, h)
        dropped += 1
    K = len(times) - 1
    idx = np.arange(1, K + 1) * refine - dropped
    return times[1:], vf[..., idx, :]


def pitman_w(rs: RootSystem, path: PathSample, word, refine: int = 1) -> PathSample:
    if len(word) == 0:
        return PathSample(path.times.copy(), path.values.copy())
    if not word_is_reduced(rs, word):
        raise NotReducedWord(f"{tuple(word)} is not reduced")
    t, v = pitman_w_batched(rs, path.times, path.values, word, refine=refine)
    return PathSample(t, v)


def pitman_w_group(rs: RootSystem, path: PathSample, word,
                   dtype=np.longdouble) -> PathSample:
    """T_w pi(t) = log [ wbar^{-1} B_t(pi) ]_0 (skips the t = 0 knot)."""
    if len(word) == 0:
        return PathSample(path.times.copy(), path.values.copy())
    res = flow_B(rs, path, dtype)
    winv = np.linalg.inv(wbar(rs, word, np.float64)).astype(dtype)
    g = winv[None] @ res.group_path[1:]
    try:
        vals = gauss_log_diag(rs, g)
    except NotInBigCell as exc:
        raise NotInBigCell(f"{exc}; first failing time <= {path.times[-1]}")
    return PathSample(path.times[1:], np.asarray(vals, dtype=float))


def tropical_pitman_alpha(rs: RootSystem, times, values, i: int):
    """P_alpha pi(t) = pi(t) - inf_{s<=t} alpha(pi(s)) alpha^vee."""
    a = rs.simple_roots[i - 1]
    run_min = np.minimum.accumulate(rs.gram_scale * (values @ a), axis=-1)
    return times, _alpha_covector_add(values, -run_min, rs.simple_coroot(i))


def tropical_pitman(rs: RootSystem, path: PathSample, word) -> PathSample:
    if not word_is_reduced(rs, word):
        raise NotReducedWord(f"{tuple(word)} is not reduced")
    t, v = path.times, path.values
    for i in word:
        t, v = tropical_pitman_alpha(rs, t, v, i)
    return PathSample(t, v)


def h_pitman(rs: RootSystem, path: PathSample, word, h: float) -> PathSample:
    """h T_w(h^{-1} pi): converges to the tropical transform as h -> 0."""
    if h <= 0:
        raise ValueError("h must be positive; use tropical_pitman for h = 0")
    if not word_is_reduced(rs, word):
        raise NotReducedWord(f"{tuple(word)} is not reduced")
    t, v = pitman_w_batched(rs, path.times, path.values, word, h)
    return PathSample(t, v)


def transform_Tg(rs: RootSystem, path: PathSample, g: np.ndarray,
                 dtype=np.longdouble) -> PathSample:
    """T_g X(t) = log [ g B_t(X) ]_0."""
    res = flow_B(rs, path, dtype)
    mats = np.asarray(g, dtype=dtype)[None] @ res.group_path
    vals = gauss_log_diag(rs, mats)
    return PathSample(path.times.copy(), np.asarray(vals, dtype=float))


# ---------------------------------------------------------------------------
# coordinates from paths

def _alpha_of(rs, values, i):
    return rs.gram_scale * (values @ rs.simple_roots[i - 1])


def _log_segments(rs, times, values, i):
    """log of per-segment integrals of (<a,a>/2) e^{-alpha(pi)} (log-linear rule).

    Segments with one infinite endpoint (lowered paths vanish linearly at the
    horizon) fall back to the trapezoid value with a zero endpoint.
    """
    e = _alpha_of(rs, values, i)
    f = np.where(np.isfinite(e), -e, -np.inf)
    dt = np.diff(times)
    f0, f1 = f[..., :-1], f[..., 1:]
    fin0, fin1 = np.isfinite(f0), np.isfinite(f1)
    both = fin0 & fin1
    delta = np.where(both, f1 - f0, 0.0)
    seg = np.where(both, np.where(both, f0, 0.0) + _log_phi1(delta),
                   np.where(fin0, f0, f1) + np.log(0.5))
    seg = np.where(fin0 | fin1, seg, -np.inf)
    return seg + np.log(dt) + np.log(rs.half_norms()[i - 1])


def _weighted_integral(rs, times, values, i):
    """int_0^T (<a,a>/2) e^{-alpha(pi)}; tolerates +inf alpha values."""
    return float(np.exp(logsumexp(_log_segments(rs, times, values, i))))


def lower_to_infinity(rs: RootSystem, times, values, i: int):
    """Crystal lowering e^{-infty}_alpha: pi + log(tail/total integral) a^vee."""
    seg = _log_segments(rs, times, values, i)
    tail = np.concatenate([np.logaddexp.accumulate(seg[::-1])[::-1], [-np.inf]])
    lg = tail - tail[0]
    return times, _alpha_covector_add(values, lg, rs.simple_coroot(i))


def lusztig_coords_from_path(rs: RootSystem, path: PathSample, word,
                             method: str = "recursion", refine: int = 1) -> np.ndarray:
    """Lusztig coordinates of a path.

    method="recursion": t_j = 1 / int (w e^{-alpha_{i_j}(eta_{j-1})}) with
    eta_j the successive crystal lowerings of the path (converges at rate
    O(dt log dt) because the lowered paths vanish at the horizon).
    method="flow": extract rho^L of the flow endpoint B_T(pi), which is exact
    for the piecewise-linear path and satisfies N_T(pi) = [x_i(t) wbar0]_- to
    machine precision.
    """
    if not word_is_reduced(rs, word):
        raise NotReducedWord(f"{tuple(word)} is not reduced")
    if method == "flow":
        from .crystals import rho_lusztig
        B_T = flow_B(rs, path).group_path[-1]
        return np.asarray(rho_lusztig(rs, B_T, tuple(word)), dtype=float)
    t, v = refine_grid(path.times, path.values.astype(float), refine)
    out = []
    for k, i in enumerate(word):
        out.append(1.0 / _weighted_integral(rs, t, v, i))
        if k + 1 < len(word):
            t, v = lower_to_infinity(rs, t, v, i)
    return np.array(out)


def string_coords_h_from_path(rs: RootSystem, path: PathSample, word,
                              h: float) -> np.ndarray:
    """Deformed string coordinates c_k = h log int exp(-alpha_{i_k}(.)/h) along
    the partially transformed path; h = 0 gives the running-infimum version."""
    if not word_is_reduced(rs, word):
        raise NotReducedWord(f"{tuple(word)} is not reduced")
    t, v = path.times, path.values
    out = []
    for k, i in enumerate(word):
        e = _alpha_of(rs, v, i)
        if h == 0.0:
            out.append(-float(e.min()))
            if k + 1 < len(word):
                t, v = tropical_pitman_alpha(rs, t, v, i)
        else:
            dt = np.diff(t)
            seg = np.logaddexp(-e[..., :-1] / h, -e[..., 1:] / h) + np.log(dt / 2.0)
            out.append(h * float(logsumexp(seg)))
            if k + 1 < len(word):
                t, v = pitman_alpha_batched(rs, t, v, i, h)
    return np.array(out)


def realize_path_group_element(rs: RootSystem, path: PathSample, word,
                               dtype=np.longdouble):
    """N_T(pi) and its re-injection [x_i(t) wbar0]_- from path coordinates."""
    coords = lusztig_coords_from_path(rs, path, word)
    u = build_x_word(rs, word, coords, dtype)
    n_round = gauss_lower(u @ wbar_w0(rs, dtype))
    n_direct = flow_B(rs, path, dtype).n_part[-1]
    return coords, n_direct, n_round
