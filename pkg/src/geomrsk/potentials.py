"""The Landau-Ginzburg superpotential on highest-weight crystals.

In the x_i-coordinates t of the twisted-Lusztig chart the superpotential is
the positive Laurent polynomial

    f(t; lam) = sum_j t_j + sum_alpha e^{-alpha(lam)} L_alpha(t)

with L_alpha the character of the twist.  The tables below carry the
closed-form monomials for A1, A2, B2, C2 with the words fixed in the rank-2
displays (w0 = s1 s2 s1 s2).  The B2 entry is the one consistent with the
displayed B2 twist (and with the zero-weight property of the minimizer);
see the twisted character identity chi_2(eta(u)) = 1/t2 + t1/(t2 t3) +
t1/(t3 t4), which an so5 matrix model confirms.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .roots import RootSystem, build_root_system, positive_root_enumeration
from .groups import (matrix_dim, wbar_w0, torus_matrix, char_upper, twist_eta_w0,
                     generalized_minor, inv_small, build_x_word)

# monomials of L_alpha as (coefficient, exponent vector) with t^e convention
CLOSED_FORMS = {
    "A1": {"word": (1,), "L": {1: [(1, (-1,))]}},
    "A2": {"word": (1, 2, 1),
           "L": {1: [(1, (-1, 0, 0))],
                 2: [(1, (0, -1, 0)), (1, (1, -1, -1))]}},
    "B2": {"word": (1, 2, 1, 2),
           "L": {1: [(1, (-1, 0, 0, 0))],
                 2: [(1, (0, -1, 0, 0)), (1, (1, -1, -1, 0)), (1, (1, 0, -1, -1))]}},
    "C2": {"word": (1, 2, 1, 2),
           "L": {1: [(1, (-1, 0, 0, 0))],
                 2: [(1, (0, -1, 0, 0)), (2, (1, -1, -1, 0)),
                     (1, (2, -1, -2, 0)), (1, (2, 0, -2, -1))]}},
}


def system_key(rs: RootSystem) -> str:
    key = f"{rs.label}{rs.rank}"
    if key not in CLOSED_FORMS:
        raise ValueError(f"no closed-form superpotential table for {key}")
    return key


def default_word(rs: RootSystem):
    return CLOSED_FORMS[system_key(rs)]["word"]


def as_system(rs_or_label) -> RootSystem:
    if isinstance(rs_or_label, RootSystem):
        return rs_or_label
    label = rs_or_label
    return build_root_system(label[0], int(label[1:]))


def monomial_rep_log(rs: RootSystem, lam):
    """(log coefficients, exponent matrix) of f(.; lam) in t.

    The log form keeps the e^{-alpha(lam)} walls representable at highest
    weights far outside the float range of the coefficients themselves.
    """
    key = system_key(rs)
    table = CLOSED_FORMS[key]
    m = len(table["word"])
    logc = [0.0] * m
    exps = [tuple(int(a == j) for a in range(m)) for j in range(m)]
    lam = np.asarray(lam, dtype=float)
    for i, monos in table["L"].items():
        la = -float(rs.root_action(i, lam))
        for c, e in monos:
            logc.append(np.log(c) + la)
            exps.append(e)
    return np.array(logc), np.array(exps, dtype=float)


def monomial_rep(rs: RootSystem, lam):
    """Full monomial list (coefs, exponent matrix) of f(.; lam) in t."""
    logc, exps = monomial_rep_log(rs, lam)
    return np.exp(logc), exps


def f_B_closed(rs_or_label, lam, t) -> np.ndarray:
    """Closed-form superpotential; t has shape (..., m), strictly positive."""
    rs = as_system(rs_or_label)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("coordinates must be strictly positive")
    coefs, exps = monomial_rep(rs, lam)
    xi = np.log(t)
    return np.einsum("i,...i->...", coefs, np.exp(xi @ exps.T))


def log_f_terms(rs: RootSystem, lam, xi):
    """Exponents log(c_i) + <a_i, xi> of every monomial (for log-space sums)."""
    coefs, exps = monomial_rep(rs, lam)
    return np.log(coefs) + xi @ exps.T


def f_grad_hess(rs: RootSystem, lam, xi):
    """f, grad, Hessian of f(e^xi; lam) in logarithmic coordinates."""
    coefs, exps = monomial_rep(rs, lam)
    w = coefs * np.exp(exps @ xi)
    f = w.sum()
    g = exps.T @ w
    H = (exps.T * w) @ exps
    return f, g, H


def f_B_semi_explicit(rs: RootSystem, lam, u: np.ndarray) -> float:
    """chi(e^{-lam} eta_{w0}(u) e^{lam}) + chi(u) through the matrix model."""
    eta = twist_eta_w0(rs, u)
    e_neg = torus_matrix(rs, -np.asarray(lam), u.dtype)
    e_pos = torus_matrix(rs, np.asarray(lam), u.dtype)
    _, c1 = char_upper(rs, np.asarray(e_neg @ eta @ e_pos))
    _, c2 = char_upper(rs, u)
    return float(c1 + c2)


def f_B_minor_based(rs: RootSystem, lam, u: np.ndarray) -> float:
    """Generalized-minor form: sum_a e^{-a(lam)} D_{s_a w_a, w0 w_a}/D_{w_a, w0 w_a}
    + D_{w_a, s_a w_a}."""
    w0_word = next(rs.iter_reduced_words_w0())
    total = 0.0
    for i in range(1, rs.rank + 1):
        q = float(np.exp(-rs.root_action(i, np.asarray(lam))))
        num = generalized_minor(rs, u, (i,), w0_word, i)
        den = generalized_minor(rs, u, (), w0_word, i)
        diag = generalized_minor(rs, u, (), (i,), i)
        total += q * float(num / den) + float(diag)
    return total


def f_B_from_path(rs: RootSystem, lam, path, word) -> float:
    """Path-model form: sum t_j + sum_a e^{-a(lam)} chi^-_a(N_T(pi))."""
    from .paths import lusztig_coords_from_path, _weighted_integral
    coords = lusztig_coords_from_path(rs, path, word)
    total = float(np.sum(coords))
    for i in range(1, rs.rank + 1):
        q = float(np.exp(-rs.root_action(i, np.asarray(lam))))
        total += q * _weighted_integral(rs, path.times, path.values, i)
    return total


@dataclass
class MinimizeResult:
    coords: np.ndarray
    value: float
    grad_norm: float
    weight: np.ndarray
    weight_norm: float
    iterations: int


class ConvergenceError(RuntimeError):
    pass


def minimize_f_B(rs_or_label, lam, tol: float = 1e-12, max_iter: int = 200) -> MinimizeResult:
    """Damped Newton descent in logarithmic coordinates.

    The objective is strictly convex in log coordinates, so the iteration is
    globally convergent with backtracking.
    """
    rs = as_system(rs_or_label)
    lam = np.asarray(lam, dtype=float)
    word = default_word(rs)
    m = len(word)
    xi = np.zeros(m)
    f, g, H = f_grad_hess(rs, lam, xi)
    for it in range(max_iter):
        if np.linalg.norm(g) <= tol:
            break
        step = np.linalg.solve(H, -g)
        slope = float(g @ step)
        s = 1.0
        while s > 1e-14:
            f2, _, _ = f_grad_hess(rs, lam, xi + s * step)
            if np.isfinite(f2) and f2 <= f + 1e-4 * s * slope + 8 * np.finfo(float).eps * abs(f):
                break
            s *= 0.5
        else:
            raise ConvergenceError("line search stalled")
        xi = xi + s * step
        f, g, H = f_grad_hess(rs, lam, xi)
    else:
        raise ConvergenceError("Newton did not reach tolerance in max_iter")
    wt = weight_of_coords(rs, lam, word, np.exp(xi))
    return MinimizeResult(coords=np.exp(xi), value=f, grad_norm=float(np.linalg.norm(g)),
                          weight=wt, weight_norm=float(np.sqrt(rs.inner(wt, wt))),
                          iterations=it)


def weight_of_coords(rs: RootSystem, lam, word, coords) -> np.ndarray:
    _, coroots = positive_root_enumeration(rs, word)
    v = np.asarray(lam, dtype=float) + sum(np.log(t) * b for t, b in zip(coords, coroots))
    return rs.w0_matrix() @ v


def find_exponents(rs_or_label, cap: int = 20):
    """Constructive search for the integrability exponents n_j.

    Collects the exponent vectors a_i of L(t) = chi(twist) written as
    sum c_i / t^{a_i}, then enumerates small natural combinations until one
    lands in the strictly positive orthant; n_j = v_j / sum(v).
    """
    rs = as_system(rs_or_label)
    table = CLOSED_FORMS[system_key(rs)]
    vecs = []
    for monos in table["L"].values():
        for _, e in monos:
            vecs.append(tuple(-x for x in e))
    vecs = sorted(set(vecs))
    m = len(table["word"])
    best = None
    for total in range(1, cap + 1):
        for combo in itertools.combinations_with_replacement(range(len(vecs)), total):
            v = np.zeros(m, dtype=int)
            for idx in combo:
                v += np.array(vecs[idx], dtype=int)
            if np.all(v >= 1):
                best = v
                break
        if best is not None:
            break
    else:
        raise ArithmeticError(f"no positive lattice combination within cap {cap}")
    M = int(best.sum())
    return best / M, [np.array(v) for v in vecs]


def estimate_bound(rs_or_label, lam, t):
    """Both sides of f >= sum t_j + e^{-max_a a(lam)} / prod t_j^{n_j}."""
    rs = as_system(rs_or_label)
    t = np.asarray(t, dtype=float)
    n, _ = find_exponents(rs)
    lam = np.asarray(lam, dtype=float)
    mx = max(float(rs.root_action(i, lam)) for i in range(1, rs.rank + 1))
    lhs = f_B_closed(rs, lam, t)
    rhs = t.sum(axis=-1) + np.exp(-mx) / np.prod(t ** n, axis=-1)
    return lhs, rhs


# ---------------------------------------------------------------------------
# deformed superpotential in string coordinates

def string_box_matrix(rs: RootSystem, word) -> np.ndarray:
    """P[j, k] = alpha_{i_j}(alpha_{i_k}^vee) for the box part of the polytope."""
    m = len(word)
    P = np.zeros((m, m))
    for j in range(m):
        for k in range(m):
            P[j, k] = rs.cartan_matrix[word[k] - 1, word[j] - 1]
    return P


def _string_cone_log_terms(rs: RootSystem, word, c, h):
    """-h log of chi_alpha o eta^{w0,e} o x_{-i}(e^{-c/h}) per simple root."""
    from . import tropical as trop
    c = np.asarray(c, dtype=float)
    if rs.label == "A" and rs.rank == 2:
        word_prime = (1, 2, 1)
        comps = trop.symbolic_chart_composite(tuple(word), word_prime)
        env = {f"c{j + 1}": c[..., j] for j in range(3)}
        vals = [trop.eval_semifield(e, env, h) for e in comps]
        out = {}
        for i in range(1, rs.rank + 1):
            terms = [vals[j] for j in range(3) if word_prime[j] == i]
            acc = terms[0]
            for v in terms[1:]:
                lo = np.minimum(acc, v)
                acc = lo - h * np.log1p(np.exp(-np.abs(acc - v) / h))
            out[i] = acc
        return out
    if rs.rank == 1:
        return {1: c[..., 0]}
    raise ValueError("string-coordinate potential implemented for A1/A2")


def f_B_string_h(rs: RootSystem, lam, c, word, h: float):
    """Deformed superpotential f^{K,i}_{B,h,lam}(c); c of shape (..., m).

    Two groups of terms, each weighted by 2 h^2 / <alpha, alpha>: the string
    cone part through eta^{w0,e} and the highest-weight box part.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    c = np.asarray(c, dtype=float)
    lam = np.asarray(lam, dtype=float)
    word = tuple(word)
    m = len(word)
    norms = rs.root_norms
    cone_logs = _string_cone_log_terms(rs, word, c, h)
    total = np.zeros(c.shape[:-1])
    for i in range(1, rs.rank + 1):
        wgt = 2.0 * h * h / norms[i - 1]
        with np.errstate(over="ignore"):
            total = total + wgt * np.exp(-np.asarray(cone_logs[i]) / h)
    P = string_box_matrix(rs, word)
    for j in range(m):
        slack = float(rs.root_action(word[j], lam)) - c[..., j] \
            - sum(c[..., k] * P[j, k] for k in range(j + 1, m))
        wgt = 2.0 * h * h / norms[word[j] - 1]
        with np.errstate(over="ignore"):
            total = total + wgt * np.exp(-slack / h)
    return total


def string_polytope_indicator(rs: RootSystem, lam, word):
    """The h -> 0 limit set: string cone intersected with the weight box."""
    from . import tropical as trop
    word = tuple(word)
    if rs.label == "A" and rs.rank == 2:
        cone = trop.string_cone_predicate(word)
    elif rs.rank == 1:
        def cone(c, tol=0.0):
            return np.asarray(c)[..., 0] >= -tol
    else:
        raise ValueError("implemented for A1/A2")
    P = string_box_matrix(rs, word)
    lam = np.asarray(lam, dtype=float)
    m = len(word)

    def member(c, tol=0.0):
        c = np.asarray(c, dtype=float)
        ok = np.asarray(cone(c, tol))
        for j in range(m):
            slack = float(rs.root_action(word[j], lam)) - c[..., j] \
                - sum(c[..., k] * P[j, k] for k in range(j + 1, m))
            ok = ok & (slack >= -tol)
        return ok

    return member


@dataclass
class SuperpotentialForm:
    """Facade selecting one evaluation route of the same superpotential."""
    rs: RootSystem
    lam: np.ndarray
    form: str          # closed | semi_explicit | minor | path
    word: tuple = None

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.word = tuple(self.word) if self.word else default_word(self.rs)

    def value(self, arg) -> float:
        if self.form == "closed":
            return float(f_B_closed(self.rs, self.lam, arg))
        if self.form == "semi_explicit":
            u = arg if isinstance(arg, np.ndarray) and arg.ndim == 2 else \
                build_x_word(self.rs, self.word, arg)
            return f_B_semi_explicit(self.rs, self.lam, u)
        if self.form == "minor":
            u = arg if isinstance(arg, np.ndarray) and arg.ndim == 2 else \
                build_x_word(self.rs, self.word, arg)
            return f_B_minor_based(self.rs, self.lam, u)
        if self.form == "path":
            return f_B_from_path(self.rs, self.lam, arg, self.word)
        raise ValueError(f"unknown form {self.form!r}")
