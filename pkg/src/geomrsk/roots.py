"""Finite root-system data and Weyl-group combinatorics.

Supported types: A_{n-1} for 2 <= n <= 5 (rank n-1), B2 and C2.  Conventions:
simply-laced roots have squared norm 2, the single A1 root is alpha = 2 with
squared norm 4, and the rank-2 non-simply-laced systems carry one long root of
squared norm 4 and one short root of squared norm 2 (B2: alpha_1 long,
C2: alpha_1 short).  The inner product on the Cartan subspace is
``gram_scale * dot``; every realization below has rational coordinates.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class UnsupportedRootSystem(ValueError):
    """Requested type/rank outside the supported table."""


class NotReducedWord(ValueError):
    """A word that is not a reduced expression for the expected element."""


def _helmert_frame(n: int) -> np.ndarray:
    """Orthonormal basis (columns) of the sum-zero hyperplane in R^n."""
    frame = np.zeros((n, n - 1))
    for k in range(1, n):
        v = np.zeros(n)
        v[:k] = 1.0
        v[k] = -k
        frame[:, k - 1] = v / np.sqrt(k * (k + 1))
    return frame


@dataclass(frozen=True, eq=False)
class RootSystem:
    label: str
    rank: int
    dim: int
    simple_roots: np.ndarray        # (rank, dim)
    gram_scale: float               # <x, y> = gram_scale * x.y
    cartan_matrix: np.ndarray       # a[i, j] = alpha_j(alpha_i^vee), int
    frame: np.ndarray               # (dim, rank) orthonormal basis of the Cartan subspace
    _w0: np.ndarray = field(repr=False, default=None)

    # -- inner product machinery -------------------------------------------------
    def inner(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.gram_scale * (x * y).sum(axis=-1)

    def root_action(self, i: int, v):
        """alpha_i(v) as a linear functional (Killing identification)."""
        return self.inner(self.simple_roots[i - 1], v)

    def pairing(self, beta, v):
        """beta(v) for an arbitrary root vector beta."""
        return self.inner(np.asarray(beta), v)

    def coroot(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        return 2.0 * beta / self.inner(beta, beta)

    def simple_coroot(self, i: int) -> np.ndarray:
        return self.coroot(self.simple_roots[i - 1])

    @property
    def simple_coroots(self) -> np.ndarray:
        return np.stack([self.simple_coroot(i) for i in range(1, self.rank + 1)])

    @property
    def root_norms(self) -> np.ndarray:
        """<alpha_i, alpha_i> for each simple root."""
        return np.array([self.inner(a, a) for a in self.simple_roots])

    def half_norms(self) -> np.ndarray:
        """The flow weights <alpha,alpha>/2 per simple root."""
        return self.root_norms / 2.0

    # -- roots and reflections ---------------------------------------------------
    def reflect(self, beta, v):
        """s_beta(v) = v - beta(v) beta^vee."""
        v = np.asarray(v, dtype=float)
        return v - np.multiply.outer(self.pairing(beta, v), self.coroot(beta)).reshape(v.shape)

    def simple_reflection_matrix(self, i: int) -> np.ndarray:
        return np.column_stack(
            [self.reflect(self.simple_roots[i - 1], e) for e in np.eye(self.dim)]
        )

    def word_matrix(self, word) -> np.ndarray:
        """Matrix of s_{i_1} ... s_{i_l} acting on the Cartan subspace."""
        m = np.eye(self.dim)
        for i in word:
            m = m @ self.simple_reflection_matrix(i)
        return m

    def positive_roots(self) -> list[np.ndarray]:
        """All positive roots, as vectors, simple roots first."""
        seen = {tuple(np.round(r, 9)) for r in self.simple_roots}
        roots = [r.astype(float) for r in self.simple_roots]
        frontier = list(roots)
        while frontier:
            new = []
            for beta in frontier:
                for i in range(1, self.rank + 1):
                    cand = self.reflect(self.simple_roots[i - 1], beta)
                    key = tuple(np.round(cand, 9))
                    if key not in seen:
                        seen.add(key)
                        new.append(cand)
            roots.extend(new)
            frontier = new
        pos = [r for r in roots if self._simple_coords(r).min() > -1e-9]
        pos.sort(key=lambda r: (round(self._simple_coords(r).sum(), 6), tuple(np.round(r, 9))))
        return pos

    def _simple_coords(self, v) -> np.ndarray:
        A = self.simple_roots.T  # (dim, rank)
        sol, *_ = np.linalg.lstsq(A, np.asarray(v, dtype=float), rcond=None)
        return sol

    def num_positive_roots(self) -> int:
        return len(self.positive_roots())

    @property
    def weyl_covector(self) -> np.ndarray:
        """rho^vee = half the sum of positive coroots."""
        return 0.5 * sum(self.coroot(b) for b in self.positive_roots())

    def w0_matrix(self) -> np.ndarray:
        if self._w0 is not None:
            return self._w0
        word = next(self.iter_reduced_words_w0())
        m = self.word_matrix(word)
        object.__setattr__(self, "_w0", m)
        return m

    def in_chamber(self, v, slack: float = 0.0) -> bool:
        return all(self.root_action(i, v) > -slack for i in range(1, self.rank + 1))

    # -- reduced words -----------------------------------------------------------
    def _is_positive(self, v) -> bool:
        c = self._simple_coords(v)
        return c.min() > -1e-9 and c.max() > 1e-9

    def iter_reduced_words_w0(self):
        """DFS over words whose every prefix is reduced, up to length |Phi+|."""
        m = self.num_positive_roots()

        def rec(word, mat):
            if len(word) == m:
                yield tuple(word)
                return
            for i in range(1, self.rank + 1):
                # l(w s_i) = l(w) + 1 iff w(alpha_i) stays positive
                if self._is_positive(mat @ self.simple_roots[i - 1]):
                    word.append(i)
                    yield from rec(word, mat @ self.simple_reflection_matrix(i))
                    word.pop()

        yield from rec([], np.eye(self.dim))

    def weyl_elements(self):
        """All (matrix, length) pairs of the Weyl group (rank <= 4 sizes)."""
        ident = np.eye(self.dim)
        elems = {self._mat_key(ident): (ident, 0)}
        frontier = [(ident, 0)]
        while frontier:
            new = []
            for mat, l in frontier:
                for i in range(1, self.rank + 1):
                    nm = mat @ self.simple_reflection_matrix(i)
                    key = self._mat_key(nm)
                    if key not in elems:
                        nl = l + 1 if self._is_positive(mat @ self.simple_roots[i - 1]) else l - 1
                        elems[key] = (nm, nl)
                        new.append((nm, nl))
            frontier = new
        return list(elems.values())

    @staticmethod
    def _mat_key(m):
        return tuple(np.round(np.asarray(m), 9).flatten())

    # -- serialization -----------------------------------------------------------
    def to_json(self) -> str:
        def frac(x):
            return str(Fraction(x))

        doc = {
            "type_label": self.label,
            "rank": self.rank,
            "dim": self.dim,
            "gram_scale": frac(self.gram_scale),
            "simple_roots": [[frac(x) for x in r] for r in self.simple_roots],
            "cartan_matrix": [[int(x) for x in row] for row in self.cartan_matrix],
            "root_norms": [frac(x) for x in self.root_norms],
            "weyl_covector": [frac(x) for x in self.weyl_covector],
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "RootSystem":
        doc = json.loads(text)
        rs = build_root_system(doc["type_label"], doc["rank"])
        expect = [[str(Fraction(x)) for x in r] for r in rs.simple_roots]
        if expect != doc["simple_roots"]:
            raise ValueError("serialized realization does not match the builtin table")
        return rs


def build_root_system(label: str, rank: int) -> RootSystem:
    """Construct the supported root systems; reject anything else."""
    if label == "A" and rank == 1:
        simples = np.array([[2.0]])
        gram = 1.0
        dim = 1
        frame = np.array([[1.0]])
    elif label == "A" and 2 <= rank <= 4:
        n = rank + 1
        dim = n
        simples = np.zeros((rank, n))
        for i in range(rank):
            simples[i, i] = 1.0
            simples[i, i + 1] = -1.0
        gram = 1.0
        frame = _helmert_frame(n)
    elif label == "B" and rank == 2:
        simples = np.array([[1.0, -1.0], [0.0, 1.0]])  # alpha1 long, alpha2 short
        gram = 2.0
        dim = 2
        frame = np.eye(2) / np.sqrt(2.0)
    elif label == "C" and rank == 2:
        simples = np.array([[1.0, -1.0], [0.0, 2.0]])  # alpha1 short, alpha2 long
        gram = 1.0
        dim = 2
        frame = np.eye(2)
    else:
        raise UnsupportedRootSystem(
            f"unsupported root system {label}{rank}: allowed are A1..A4, B2, C2"
        )

    def inner(x, y):
        return gram * float(np.dot(x, y))

    cartan = np.zeros((rank, rank), dtype=int)
    for i in range(rank):
        for j in range(rank):
            a = 2.0 * inner(simples[i], simples[j]) / inner(simples[i], simples[i])
            cartan[i, j] = int(round(a))

    rs = RootSystem(label=label, rank=rank, dim=dim, simple_roots=simples,
                    gram_scale=gram, cartan_matrix=cartan, frame=frame)

    assert all(cartan[i, i] == 2 for i in range(rank))
    assert all(cartan[i, j] <= 0 for i in range(rank) for j in range(rank) if i != j)
    return rs


def reduced_words_w0(rs: RootSystem) -> list[tuple[int, ...]]:
    """Exhaustive list of reduced words for the longest element (rank <= 4)."""
    if rs.rank > 4:
        raise UnsupportedRootSystem("exhaustive enumeration capped at rank 4")
    return sorted(rs.iter_reduced_words_w0())


def is_reduced_word_w0(rs: RootSystem, word) -> bool:
    if len(word) != rs.num_positive_roots():
        return False
    mat = np.eye(rs.dim)
    for i in word:
        if not rs._is_positive(mat @ rs.simple_roots[i - 1]):
            return False
        mat = mat @ rs.simple_reflection_matrix(i)
    return True


def positive_root_enumeration(rs: RootSystem, word):
    """beta_j = s_{i_1} ... s_{i_{j-1}} alpha_{i_j} and the matching coroots."""
    if not is_reduced_word_w0(rs, word):
        raise NotReducedWord(f"{word} is not a reduced word for w0")
    betas = []
    mat = np.eye(rs.dim)
    for i in word:
        betas.append(mat @ rs.simple_roots[i - 1])
        mat = mat @ rs.simple_reflection_matrix(i)
    coroots = [rs.coroot(b) for b in betas]
    return betas, coroots


def apply_reflection(rs: RootSystem, beta, lam):
    return rs.reflect(beta, lam)


def star_involution(rs: RootSystem, i: int) -> int:
    """i* with alpha_{i*} = -w0 alpha_i."""
    target = -(rs.w0_matrix() @ rs.simple_roots[i - 1])
    for j in range(1, rs.rank + 1):
        if np.allclose(target, rs.simple_roots[j - 1], atol=1e-9):
            return j
    raise AssertionError("star involution did not land on a simple root")
