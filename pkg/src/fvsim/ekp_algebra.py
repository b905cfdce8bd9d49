"""The symmetric-polynomial algebra generated by the power sums
q_m(x) = sum_i x_i^{m+1}, the diffusion generator B acting on it, and the
up-down Chinese restaurant chain whose stationary law is the
Pitman-Yor / two-parameter CRP partition distribution.

B is evaluated two independent ways: apply_B_direct uses the product rule
with the closed forms B q_m = (m+1)(m-a) q_{m-1} - (m+1)(m+t) q_m and the
carre-du-champ 2*Gamma(q_m, q_l) = 2(m+1)(l+1)(q_{m+l} - q_m q_l); and
apply_B_partition sums the finite-dimensional operator A_r over set
partitions and distinct index tuples, which returns 2 B q.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

import numpy as np

from .core_types import RankedVector
from .pd_sampling import check_params
from .rng import as_generator


@dataclass(frozen=True)
class SymPoly:
    """Linear combination of products of power sums.

    terms maps a sorted tuple of positive-integer indices (m_1,...,m_k) to
    its real coefficient; the empty tuple is the constant 1.
    """

    terms: tuple

    def __init__(self, terms=()):
        if isinstance(terms, dict):
            items = terms.items()
        else:
            items = terms
        canon: dict[tuple, float] = {}
        for m, coeff in items:
            key = tuple(sorted(int(v) for v in m))
            if any(v < 1 for v in key):
                raise ValueError("power-sum indices must be >= 1")
            canon[key] = canon.get(key, 0.0) + float(coeff)
        cleaned = tuple(sorted((k, v) for k, v in canon.items() if v != 0.0))
        object.__setattr__(self, "terms", cleaned)

    @classmethod
    def q(cls, *m) -> "SymPoly":
        return cls([(tuple(m), 1.0)])

    @classmethod
    def constant(cls, c: float) -> "SymPoly":
        return cls([((), c)])

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = SymPoly.constant(other)
        return SymPoly(list(self.terms) + list(other.terms))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return SymPoly([(m, c * other) for m, c in self.terms])
        out = []
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                out.append((m1 + m2, c1 * c2))
        return SymPoly(out)

    __rmul__ = __mul__

    def __str__(self) -> str:
        if not self.terms:
            return "0.0"
        pieces = []
        for m, c in self.terms:
            if m:
                body = "".join(f"q[{v}]" for v in m)
                piece = f"{abs(c)}*{body}"
            else:
                piece = f"{abs(c)}"
            pieces.append(("- " if c < 0 else "+ ") + piece)
        text = " ".join(pieces)
        return text[2:] if text.startswith("+ ") else "-" + text[2:]


_TERM_RE = re.compile(
    r"^\s*([0-9.]+(?:[eE][+-]?[0-9]+)?)?\s*\*?\s*((?:\s*q\[\d+\])*)\s*$")


def parse_sympoly(text: str) -> SymPoly:
    """Parse the text format "2.0*q[1]q[2] - 1.0*q[3]"."""
    s = text.strip()
    if not s:
        raise ValueError("empty polynomial")
    # split on +/- signs, except inside a scientific-notation exponent
    parts = re.split(r"(?<![eE])([+-])", s)
    signed = []
    if parts[0].strip():
        signed.append(("+", parts[0]))
    for i in range(1, len(parts), 2):
        signed.append((parts[i], parts[i + 1]))
    terms = []
    for sign, body in signed:
        match = _TERM_RE.match(body)
        if not match or not body.strip():
            raise ValueError(f"cannot parse term {body!r}")
        coeff_s, factors = match.group(1), match.group(2)
        if not coeff_s and not factors:
            raise ValueError(f"cannot parse term {body!r}")
        coeff = float(coeff_s) if coeff_s else 1.0
        if sign == "-":
            coeff = -coeff
        m = tuple(int(v) for v in re.findall(r"q\[(\d+)\]", factors))
        terms.append((m, coeff))
    if not terms:
        raise ValueError(f"cannot parse polynomial {text!r}")
    return SymPoly(terms)


def format_sympoly(q: SymPoly) -> str:
    return str(q)


def power_sum(x, m: int) -> float:
    """q_m(x) = sum_i x_i^{m+1}; q_0 is the total mass."""
    if isinstance(x, RankedVector):
        x = x.entries
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.sum(x ** (m + 1)))


def eval_sympoly(q: SymPoly, x) -> float:
    total = 0.0
    for m, c in q.terms:
        val = c
        for mj in m:
            val *= power_sum(x, mj)
        total += val
    return total


def apply_B_direct(q: SymPoly, alpha: float, theta: float, x) -> float:
    """B q(x) via the product rule on power sums.

    On finitely supported x the derivative sums of the generator restrict
    to the active coordinates: every partial derivative of an element of
    the algebra carries a factor x_i^m with m >= 1 (exponents are >= 2),
    so coordinates at zero contribute nothing.
    """
    check_params(alpha, theta)

    def b_on_q(m: int) -> float:
        # B q_m = (m+1)(m - alpha) q_{m-1} - (m+1)(m + theta) q_m
        return ((m + 1) * (m - alpha) * power_sum(x, m - 1)
                - (m + 1) * (m + theta) * power_sum(x, m))

    total = 0.0
    for m, c in q.terms:
        k = len(m)
        q_vals = [power_sum(x, mj) for mj in m]

        def rest(skip):
            val = 1.0
            for idx in range(k):
                if idx not in skip:
                    val *= q_vals[idx]
            return val

        term = 0.0
        for j in range(k):
            term += b_on_q(m[j]) * rest({j})
        for j in range(k):
            for l in range(j + 1, k):
                gamma2 = 2.0 * (m[j] + 1) * (m[l] + 1) * (
                    power_sum(x, m[j] + m[l]) - q_vals[j] * q_vals[l])
                term += gamma2 * rest({j, l})
        total += c * term
    return total


def _set_partitions(k: int):
    """All partitions of {0,...,k-1} as lists of index lists."""
    if k == 0:
        yield []
        return
    for rest_part in _set_partitions(k - 1):
        # element k-1 joins an existing block or opens its own
        for i in range(len(rest_part)):
            yield rest_part[:i] + [rest_part[i] + [k - 1]] + rest_part[i + 1:]
        yield rest_part + [[k - 1]]


def _a_r_monomial(e: np.ndarray, w: np.ndarray, alpha: float,
                  theta: float) -> float:
    """A_r applied to the monomial prod w_l^{e_l}:
    sum_l 2 e_l (e_l - 1 - alpha) w^{e - u_l} - 2 E (E - 1 + theta) w^e."""
    E = float(e.sum())
    f_val = float(np.prod(w ** e))
    total = -2.0 * E * (E - 1.0 + theta) * f_val
    for l in range(e.size):
        reduced = float(np.prod(np.delete(w, l) ** np.delete(e, l)))
        total += 2.0 * e[l] * (e[l] - 1.0 - alpha) * reduced \
            * w[l] ** (e[l] - 1)
    return total


def apply_B_partition(q: SymPoly, alpha: float, theta: float, x,
                      max_tuples: int = 2_000_000) -> float:
    """2 B q(x) via set partitions and distinct-index sums.

    q must be a single product term.  Each partition A of the factor index
    set merges factors into exponents m^A_l + 1 = sum_{j in A_l} (m_j + 1),
    and the finite-dimensional operator A_r is applied to the resulting
    monomial over every tuple of distinct support indices.
    """
    check_params(alpha, theta)
    if len(q.terms) != 1:
        raise ValueError("apply_B_partition expects a single product term")
    m, coeff = q.terms[0]
    k = len(m)
    if k == 0:
        return 0.0
    if k > 6:
        raise ValueError("partition sum limited to products of <= 6 factors")
    if isinstance(x, RankedVector):
        x = x.entries
    x = np.asarray(x, dtype=float)
    support = x[x > 0.0]
    n = support.size
    total = 0.0
    for part in _set_partitions(k):
        r = len(part)
        if n ** r > max_tuples:
            raise ValueError("support too large for the distinct-tuple sum")
        e = np.array([sum(m[j] + 1 for j in block) for block in part],
                     dtype=float)
        for h in itertools.permutations(range(n), r):
            w = support[list(h)]
            total += _a_r_monomial(e, w, alpha, theta)
    return coeff * total


def stationary_moment(m: int, alpha: float, theta: float) -> float:
    """E[q_m] under the stationary law: prod_{j=1}^m (j - alpha)/(j + theta)."""
    check_params(alpha, theta)
    if m < 1:
        raise ValueError("m must be >= 1")
    val = 1.0
    for j in range(1, m + 1):
        val *= (j - alpha) / (j + theta)
    return val


def crp_partition(n: int, alpha: float, theta: float, rng) -> np.ndarray:
    """Block sizes of a two-parameter CRP seating of n customers."""
    check_params(alpha, theta)
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    sizes = [1]
    for i in range(1, n):
        k = len(sizes)
        u = gen.uniform() * (i + theta)
        acc = 0.0
        placed = False
        for j in range(k):
            acc += sizes[j] - alpha
            if u < acc:
                sizes[j] += 1
                placed = True
                break
        if not placed:
            sizes.append(1)
    return np.sort(np.array(sizes, dtype=np.int64))[::-1]


def crp_updown_step(sizes, alpha: float, theta: float, rng) -> np.ndarray:
    """One composite up-down move; the customer count is conserved."""
    check_params(alpha, theta)
    sizes = np.asarray(sizes, dtype=np.int64)
    n = int(sizes.sum())
    if n < 1:
        raise ValueError("need at least one customer")
    gen = as_generator(rng)
    k = sizes.size
    # up-move: seat customer n+1
    u = gen.uniform() * (n + theta)
    cum = np.cumsum(sizes - alpha)
    j = int(np.searchsorted(cum, u, side="right"))
    work = sizes.copy()
    if j < k:
        work[j] += 1
    else:
        work = np.append(work, 1)
    # down-move: remove a uniform customer among the n+1
    pick = gen.integers(n + 1)
    cum2 = np.cumsum(work)
    j2 = int(np.searchsorted(cum2, pick, side="right"))
    work[j2] -= 1
    if work[j2] == 0:
        work = np.delete(work, j2)
    return work


def updown_matrix_n2(alpha: float, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact composite-step transition matrix of the n=2 chain on the
    states ((2), (1,1)), and its stationary distribution."""
    check_params(alpha, theta)
    # from (2): up joins the pair w.p. (2-alpha)/(2+theta) -> (3) -> down
    # always returns (2); else new block -> (2,1) -> down gives (1,1) w.p.
    # 2/3 (remove from the pair) and (2) w.p. 1/3
    p_new_from2 = (theta + alpha) / (2.0 + theta)
    p_2_to_11 = p_new_from2 * (2.0 / 3.0)
    # from (1,1): join either singleton w.p. 2(1-alpha)/(2+theta) -> (2,1)
    # -> (2) w.p. 1/3; new block -> (1,1,1) -> always (1,1)
    p_join_from11 = 2.0 * (1.0 - alpha) / (2.0 + theta)
    p_11_to_2 = p_join_from11 * (1.0 / 3.0)
    P = np.array([[1.0 - p_2_to_11, p_2_to_11],
                  [p_11_to_2, 1.0 - p_11_to_2]])
    z = p_11_to_2 + p_2_to_11
    pi = np.array([p_11_to_2 / z, p_2_to_11 / z])
    return P, pi
