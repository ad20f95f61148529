"""Concrete matrix arithmetic for the SL_n realization of type-A systems.

Elements are plain (n, n) numpy arrays; extended precision (np.longdouble) is
the default for constructors because iterated-integral entries span many
orders of magnitude.  Determinants, inverses and Gauss decompositions are
implemented directly so they stay in the input dtype (LAPACK would silently
downcast longdouble).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .roots import RootSystem, NotReducedWord


class NotInBigCell(ArithmeticError):
    """Gauss decomposition requested outside the open cell B B+."""


PIVOT_RTOL = 1e-13


def matrix_dim(rs: RootSystem) -> int:
    if rs.label != "A":
        raise ValueError("matrix model only exists for type A")
    return 2 if rs.rank == 1 else rs.rank + 1


def elementary(n: int, i: int, j: int, dtype=np.longdouble) -> np.ndarray:
    m = np.zeros((n, n), dtype=dtype)
    m[i - 1, j - 1] = 1
    return m


def e_gen(rs: RootSystem, i: int, dtype=np.longdouble) -> np.ndarray:
    return elementary(matrix_dim(rs), i, i + 1, dtype)


def f_gen(rs: RootSystem, i: int, dtype=np.longdouble) -> np.ndarray:
    return elementary(matrix_dim(rs), i + 1, i, dtype)


def one_param_upper(rs: RootSystem, i: int, t, dtype=np.longdouble) -> np.ndarray:
    """x_i(t) = Id + t E_{i,i+1}."""
    if not 1 <= i <= rs.rank:
        raise ValueError(f"index {i} out of range")
    m = np.eye(matrix_dim(rs), dtype=dtype)
    m[i - 1, i] = t
    return m


def one_param_lower(rs: RootSystem, i: int, t, dtype=np.longdouble) -> np.ndarray:
    """y_i(t) = Id + t E_{i+1,i}."""
    if not 1 <= i <= rs.rank:
        raise ValueError(f"index {i} out of range")
    m = np.eye(matrix_dim(rs), dtype=dtype)
    m[i, i - 1] = t
    return m


def x_minus(rs: RootSystem, i: int, c, dtype=np.longdouble) -> np.ndarray:
    """x_{-i}(c) = y_i(c) c^{-h_i}."""
    n = matrix_dim(rs)
    d = np.ones(n, dtype=dtype)
    d[i - 1] = 1.0 / c
    d[i] = c
    return one_param_lower(rs, i, c, dtype) * d[None, :]


def torus_matrix(rs: RootSystem, v, dtype=np.longdouble) -> np.ndarray:
    """exp(v) for v in the Cartan subspace (A1 embeds x as diag(x, -x))."""
    return np.diag(np.exp(torus_embed(rs, v)).astype(dtype))


def torus_embed(rs: RootSystem, v) -> np.ndarray:
    v = np.asarray(v)
    if rs.rank == 1:
        return np.array([v[0], -v[0]], dtype=v.dtype if v.dtype.kind == "f" else float)
    return v


def torus_restrict(rs: RootSystem, d_log) -> np.ndarray:
    """Inverse of torus_embed on trace-zero log-diagonals."""
    d_log = np.asarray(d_log)
    if rs.rank == 1:
        return d_log[:1].copy()
    return d_log.copy()


def det_small(g: np.ndarray):
    """Determinant by elimination with partial pivoting, dtype preserving."""
    a = np.array(g, copy=True)
    n = a.shape[0]
    det = a.dtype.type(1)
    for k in range(n):
        p = int(np.argmax(np.abs(a[k:, k]))) + k
        if a[p, k] == 0:
            return a.dtype.type(0)
        if p != k:
            a[[p, k]] = a[[k, p]]
            det = -det
        det = det * a[k, k]
        a[k + 1:, k:] -= np.outer(a[k + 1:, k] / a[k, k], a[k, k:])
    return det


def inv_small(g: np.ndarray) -> np.ndarray:
    a = np.array(g, copy=True)
    n = a.shape[0]
    aug = np.concatenate([a, np.eye(n, dtype=a.dtype)], axis=1)
    for k in range(n):
        p = int(np.argmax(np.abs(aug[k:, k]))) + k
        if aug[p, k] == 0:
            raise np.linalg.LinAlgError("singular matrix")
        if p != k:
            aug[[p, k]] = aug[[k, p]]
        aug[k] = aug[k] / aug[k, k]
        for r in range(n):
            if r != k:
                aug[r] -= aug[r, k] * aug[k]
    return aug[:, n:]


def check_unimodular(g: np.ndarray, tol: float = 1e-10) -> None:
    if abs(float(det_small(g)) - 1.0) > tol:
        raise ValueError("matrix is not unimodular within tolerance")


@dataclass
class GaussTriple:
    lower: np.ndarray      # unit lower triangular, in N
    torus_log: np.ndarray  # Cartan-subspace vector, log of the torus part
    upper: np.ndarray      # unit upper triangular, in U

    def reconstruct(self, rs: RootSystem) -> np.ndarray:
        return self.lower @ torus_matrix(rs, self.torus_log, self.lower.dtype) @ self.upper


def ldu(g: np.ndarray):
    """Raw LDU factorization (L unit lower, d diagonal, U unit upper).

    Raises NotInBigCell when a leading principal minor vanishes relative to
    the matrix scale.
    """
    a = np.array(g, copy=True)
    n = a.shape[0]
    scale = float(np.max(np.abs(a))) or 1.0
    L = np.eye(n, dtype=a.dtype)
    U = np.eye(n, dtype=a.dtype)
    d = np.zeros(n, dtype=a.dtype)
    for k in range(n):
        d[k] = a[k, k]
        if abs(float(d[k])) <= PIVOT_RTOL * scale:
            raise NotInBigCell(f"leading principal minor {k + 1} vanishes")
        L[k + 1:, k] = a[k + 1:, k] / d[k]
        U[k, k + 1:] = a[k, k + 1:] / d[k]
        a[k + 1:, k + 1:] -= np.outer(a[k + 1:, k], a[k, k + 1:]) / d[k]
    return L, d, U


def gauss_decompose(rs: RootSystem, g: np.ndarray) -> GaussTriple:
    """g = [g]_- [g]_0 [g]_+ with the torus part as a Cartan-space log."""
    L, d, U = ldu(g)
    if np.any(d <= 0):
        raise NotInBigCell("torus part not positive; no real logarithm")
    return GaussTriple(L, torus_restrict(rs, np.log(d)), U)


def gauss_lower(g: np.ndarray) -> np.ndarray:
    return ldu(g)[0]


def gauss_upper(g: np.ndarray) -> np.ndarray:
    return ldu(g)[2]


def sbar(rs: RootSystem, i: int, dtype=np.longdouble) -> np.ndarray:
    """exp(-e_i) exp(f_i) exp(-e_i): the 2x2 block [[0,-1],[1,0]] at slot i."""
    m = np.eye(matrix_dim(rs), dtype=dtype)
    m[i - 1, i - 1] = 0
    m[i, i] = 0
    m[i - 1, i] = -1
    m[i, i - 1] = 1
    return m


def wbar(rs: RootSystem, word, dtype=np.longdouble) -> np.ndarray:
    """Representative of a Weyl element along a reduced word."""
    if not word_is_reduced(rs, word):
        raise NotReducedWord(f"{tuple(word)} is not reduced")
    m = np.eye(matrix_dim(rs), dtype=dtype)
    for i in word:
        m = m @ sbar(rs, i, dtype)
    return m


def word_is_reduced(rs: RootSystem, word) -> bool:
    mat = np.eye(rs.dim)
    for i in word:
        if not 1 <= i <= rs.rank:
            return False
        if not rs._is_positive(mat @ rs.simple_roots[i - 1]):
            return False
        mat = mat @ rs.simple_reflection_matrix(i)
    return True


def wbar_w0(rs: RootSystem, dtype=np.longdouble) -> np.ndarray:
    word = next(rs.iter_reduced_words_w0())
    return wbar(rs, word, dtype)


def transpose(g: np.ndarray) -> np.ndarray:
    return g.T.copy()


def _sign_diag(n: int, dtype) -> np.ndarray:
    return np.diag(np.array([(-1) ** k for k in range(n)], dtype=dtype))


def kashiwara_iota(g: np.ndarray) -> np.ndarray:
    """Positive-inverse antimorphism: fixes x_i(t), y_i(t), inverts the torus."""
    D = _sign_diag(g.shape[0], g.dtype)
    return D @ inv_small(g) @ D


def schutzenberger(rs: RootSystem, g: np.ndarray) -> np.ndarray:
    """S(g) = wbar0 (g^{-1})^{iota T} wbar0^{-1}."""
    w0 = wbar_w0(rs, g.dtype)
    D = _sign_diag(g.shape[0], g.dtype)
    return w0 @ (D @ g.T @ D) @ inv_small(w0)


def word_to_permutation(rs: RootSystem, word) -> list[int]:
    """The permutation of {1..n} given by a type-A word (one-line, w(k))."""
    n = matrix_dim(rs)
    p = list(range(1, n + 1))
    for i in reversed(list(word)):
        p[i - 1], p[i] = p[i], p[i - 1]
    return p


def generalized_minor(rs: RootSystem, g: np.ndarray, u_word, v_word, i: int):
    """Delta_{u omega_i, v omega_i}(g): minor on rows u{1..i}, cols v{1..i}."""
    n = matrix_dim(rs)
    if not 1 <= i <= n - 1:
        raise ValueError("fundamental-weight index out of range")
    pu = word_to_permutation(rs, u_word)
    pv = word_to_permutation(rs, v_word)
    rows = sorted(pu[k] - 1 for k in range(i))
    cols = sorted(pv[k] - 1 for k in range(i))
    return det_small(g[np.ix_(rows, cols)])


def _check_unipotent(g: np.ndarray, lower: bool) -> None:
    n = g.shape[0]
    tri = np.tril(g, -1) if not lower else np.triu(g, 1)
    if np.max(np.abs(tri)) > 1e-12 * max(1.0, float(np.max(np.abs(g)))) or \
            np.max(np.abs(np.diag(g) - 1)) > 1e-12:
        raise ValueError("matrix is not unipotent of the expected shape")


def char_upper(rs: RootSystem, u: np.ndarray):
    """chi_alpha(u) per simple slot (superdiagonal entries) and their sum."""
    _check_unipotent(u, lower=False)
    per = np.array([u[i - 1, i] for i in range(1, rs.rank + 1)])
    return per, per.sum()


def char_lower(rs: RootSystem, nmat: np.ndarray):
    """chi^-_alpha(n) per simple slot (subdiagonal entries) and their sum."""
    _check_unipotent(nmat, lower=True)
    per = np.array([nmat[i, i - 1] for i in range(1, rs.rank + 1)])
    return per, per.sum()


def twist_eta_w0(rs: RootSystem, u: np.ndarray) -> np.ndarray:
    """eta_{w0}(u) = [wbar0^{-1} u^T]_+."""
    w0 = wbar_w0(rs, u.dtype)
    return gauss_upper(inv_small(w0) @ u.T)


def eta_w0_e(rs: RootSystem, v: np.ndarray) -> np.ndarray:
    """eta^{w0,e}(v) = [(wbar0 v^T)^{-1}]_+."""
    w0 = wbar_w0(rs, v.dtype)
    return gauss_upper(inv_small(w0 @ v.T))


def theta_map(rs: RootSystem, g: np.ndarray) -> np.ndarray:
    """Theta(g) = [g wbar0]_-, the unipotent analogue of inversion."""
    return gauss_lower(g @ wbar_w0(rs, g.dtype))


def conjugation_contraction_check(rs: RootSystem, nmat: np.ndarray, direction,
                                  s_grid=None) -> np.ndarray:
    """Norms of e^{s x} n e^{-s x} - Id along a chamber ray."""
    if s_grid is None:
        s_grid = np.linspace(0.0, 10.0, 21)
    if not rs.in_chamber(direction):
        raise ValueError("direction must lie in the open Weyl chamber")
    out = np.empty(len(s_grid))
    ident = np.eye(nmat.shape[0], dtype=nmat.dtype)
    for k, s in enumerate(s_grid):
        a = np.exp(torus_embed(rs, s * np.asarray(direction)))
        m = (a[:, None] * nmat) * (1.0 / a)[None, :]
        out[k] = float(np.max(np.abs(m - ident)))
    return out


# -- positive-coordinate extraction -------------------------------------------

def build_x_word(rs: RootSystem, word, coords, dtype=np.longdouble) -> np.ndarray:
    """x_{i_1}(t_1) ... x_{i_m}(t_m)."""
    m = np.eye(matrix_dim(rs), dtype=dtype)
    for i, t in zip(word, coords):
        m = m @ one_param_upper(rs, i, t, dtype)
    return m


def build_x_minus_word(rs: RootSystem, word, coords, dtype=np.longdouble) -> np.ndarray:
    """x_{-i_1}(c_1) ... x_{-i_m}(c_m)."""
    m = np.eye(matrix_dim(rs), dtype=dtype)
    for i, c in zip(word, coords):
        m = m @ x_minus(rs, i, c, dtype)
    return m


def _minor(g, rows, cols):
    return det_small(g[np.ix_([r - 1 for r in rows], [c - 1 for c in cols])])


def extract_lusztig_coords(rs: RootSystem, u: np.ndarray, word) -> np.ndarray:
    """Factorization parameters of u = x_{i_1}(t_1)...x_{i_m}(t_m).

    Peels from the left; t_k is the ratio of the minors
    Delta_{omega_i, w_k omega_i} / Delta_{s_i omega_i, w_k omega_i} of the
    partially peeled element, with w_k the suffix s_{i_k}...s_{i_m}.
    """
    if not word_is_reduced(rs, word):
        raise NotReducedWord(f"{tuple(word)} is not reduced")
    u = np.array(u, copy=True)
    n = matrix_dim(rs)
    ts = []
    for k in range(len(word)):
        i = word[k]
        suffix = word[k:]
        p = word_to_permutation(rs, suffix)
        wset = sorted(p[j] for j in range(i))
        top = list(range(1, i + 1))
        s_top = sorted(top[:-1] + [i + 1])
        t = _minor(u, top, wset) / _minor(u, s_top, wset)
        ts.append(t)
        u = one_param_upper(rs, i, -t, u.dtype) @ u
    return np.array(ts)


def extract_kashiwara_coords(rs: RootSystem, v: np.ndarray, word) -> np.ndarray:
    """Factorization parameters of v = x_{-i_1}(c_1)...x_{-i_m}(c_m).

    v^T equals (prod_j c_j^{-h_{i_j}}) x_{i_m}(t'_m)...x_{i_1}(t'_1) with a
    triangular monomial relation between t' and c.
    """
    a = np.diag(v).copy()
    ubar = (1.0 / a)[:, None] * v.T
    rword = tuple(reversed(tuple(word)))
    tp = extract_lusztig_coords(rs, ubar, rword)[::-1]
    cart = rs.cartan_matrix
    cs = np.zeros(len(word), dtype=v.dtype)
    for k in range(len(word)):
        prod = v.dtype.type(1.0)
        for j in range(k):
            prod = prod * cs[j] ** (-cart[word[k] - 1, word[j] - 1])
        cs[k] = tp[k] * prod
    return cs


def random_positive_upper(rs: RootSystem, rng, word=None, lo=0.2, hi=3.0,
                          dtype=np.longdouble) -> np.ndarray:
    """A random totally positive element of U^{w0} (test helper)."""
    if word is None:
        word = next(rs.iter_reduced_words_w0())
    coords = rng.uniform(lo, hi, size=len(word))
    return build_x_word(rs, word, coords, dtype)


# -- serialization -------------------------------------------------------------

def group_to_json(g: np.ndarray) -> str:
    entries = [np.format_float_scientific(x, precision=25) for x in np.ravel(g)]
    return json.dumps({"n": g.shape[0], "entries": entries})


def group_from_json(text: str, dtype=np.longdouble) -> np.ndarray:
    doc = json.loads(text)
    n = doc["n"]
    vals = np.array([dtype(s) for s in doc["entries"]], dtype=dtype)
    return vals.reshape(n, n)
