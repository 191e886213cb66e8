"""Pointwise sparse domination by the stopping-cube recursion, on the box.

Each node Q is a dyadic square (cell box).  Inside Q three level sets of
f 1_{3Q} are marked: the L^s maximal function, the sharp maximal function of
T, and |T(f 1_{3Q})| itself, compared with <f>_{3Q,s}.  Maximal dyadic
subsquares P with |P n Omega| > |P|/8 are selected and the recursion
continues on them.  The global thresholds (c for the two maximal sets, A for
|T|) are powers of two raised until every node's sets are small enough;
the run is then repeated with the final values, so they are frozen for the
whole family.

Averages <f>_{3Q,s} are taken over the full square 3Q with f extended by
zero outside the box; the reported family uses S = 3Q clipped to the box,
whose averages are at least as large.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .maximal import hl_maximal, sharp_maximal_region

Box = tuple[int, int, int, int]      # (r0, r1, c0, c1), half-open cell ranges

EXCEPTIONAL_FRACTION = 1.0 / 32.0    # |Omega n Q| <= |Q| / 32 in total
SELECT_FRACTION = 1.0 / 8.0          # P selected when |P n Omega| > |P| / 8


class CalibrationError(RuntimeError):
    """Thresholds could not be calibrated within the allowed number of doublings."""


class SparsenessError(ValueError):
    """Witness sets overlap or leave their cubes."""


@dataclass
class SparseFamily:
    n: int
    cubes: list[Box]                    # the stopping squares Q
    witnesses: list[np.ndarray]         # flat cell indices of E(Q), subsets of Q
    p: float
    thresholds: dict = field(default_factory=dict)
    constant: float = float("nan")
    halving: list[float] = field(default_factory=list)   # sum |P_j| / |Q| per node
    depth: list[int] = field(default_factory=list)
    seed: int | None = None
    extras: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return 1 << self.n

    def expanded(self) -> list[Box]:
        """3Q clipped to the box, for every stopping square."""
        return [expand(Q, self.N) for Q in self.cubes]

    def ownership(self) -> np.ndarray:
        return ownership_map(self.N, self.witnesses)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p": self.p,
            "cubes": [list(map(int, q)) for q in self.cubes],
            "depth": self.depth,
            "witness_owner": self.ownership().tolist(),
            "epsilon": verify_sparseness(self),
            "epsilon_expanded": verify_sparseness(self, expanded=True),
            "constant": self.constant,
            "thresholds": self.thresholds,
            "max_halving": max(self.halving, default=0.0),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def expand(Q: Box, N: int) -> Box:
    r0, r1, c0, c1 = Q
    h, w = r1 - r0, c1 - c0
    return max(0, r0 - h), min(N, r1 + h), max(0, c0 - w), min(N, c1 + w)


def box_mask(Q: Box, N: int) -> np.ndarray:
    m = np.zeros((N, N), dtype=bool)
    m[Q[0]:Q[1], Q[2]:Q[3]] = True
    return m


def _area(Q: Box) -> int:
    return (Q[1] - Q[0]) * (Q[3] - Q[2])


def ownership_map(N: int, witnesses: list[np.ndarray]) -> np.ndarray:
    """Cell -> index of the witness set owning it (-1 if none); overlap is an error."""
    owner = np.full(N * N, -1, dtype=np.int64)
    for i, w in enumerate(witnesses):
        if np.any(owner[w] >= 0):
            raise SparsenessError(f"witness set {i} overlaps an earlier one")
        owner[w] = i
    return owner.reshape(N, N)


def verify_sparseness(S: SparseFamily, expanded: bool = False) -> float:
    """min |E(S)| / |S| after certifying that witnesses are disjoint subsets of their cubes."""
    N = S.N
    ownership_map(N, S.witnesses)
    cubes = S.expanded() if expanded else S.cubes
    eps = 1.0
    for Q, E in zip(cubes, S.witnesses):
        if not box_mask(Q, N).reshape(-1)[E].all():
            raise SparsenessError(f"witness set leaves its cube {Q}")
        eps = min(eps, len(E) / _area(Q))
    return eps


def sparse_form_eval(cubes: list[Box], f, p: float, N: int | None = None) -> np.ndarray:
    """sum_S <|f|^p>_S^(1/p) 1_S over the given cell boxes."""
    v = np.abs(np.asarray(f, dtype=np.float64))
    N = N or v.shape[-1]
    out = np.zeros((N, N))
    S = np.zeros((N + 1, N + 1))
    S[1:, 1:] = (v ** p).cumsum(0).cumsum(1)
    for r0, r1, c0, c1 in cubes:
        tot = S[r1, c1] - S[r0, c1] - S[r1, c0] + S[r0, c0]
        out[r0:r1, c0:c1] += (max(tot, 0.0) / ((r1 - r0) * (c1 - c0))) ** (1.0 / p)
    return out


def weighted_sparse_eval(cubes: list[Box], values: list[np.ndarray | float], N: int) -> np.ndarray:
    """sum_S v_S 1_S with v_S a scalar or a full-grid array restricted to S."""
    out = np.zeros((N, N))
    for (r0, r1, c0, c1), v in zip(cubes, values):
        if np.ndim(v) == 0:
            out[r0:r1, c0:c1] += v
        else:
            out[r0:r1, c0:c1] += v[r0:r1, c0:c1]
    return out


# ---------------------------------------------------------------- construction


def _hl_sides(N: int) -> list[int]:
    sides = set()
    i = 1
    while i <= N:
        sides.add(i)
        if 3 * i <= 3 * N:
            sides.add(3 * i)
        i *= 2
    return sorted(s for s in sides if s <= 3 * N)


def _required(ratio: np.ndarray, allowed: int) -> float:
    """Smallest power of two t with #{ratio > t} <= allowed (at least 1)."""
    flat = np.sort(ratio.reshape(-1))[::-1]
    if allowed >= flat.size:
        return 1.0
    v = flat[allowed]
    if v <= 1.0:
        return 1.0
    return float(2.0 ** np.ceil(np.log2(v)))


def _select(omega: np.ndarray, side: int) -> list[tuple[int, int, int]]:
    """Maximal dyadic strict subsquares (r, c, s) of the node with |P n Omega| > |P|/8."""
    out: list[tuple[int, int, int]] = []
    taken = np.zeros_like(omega, dtype=bool)
    s = side // 2
    while s >= 1:
        m = side // s
        cnt = omega.reshape(m, s, m, s).sum(axis=(1, 3))
        hit = cnt > SELECT_FRACTION * s * s
        for a, b in zip(*np.nonzero(hit)):
            if not taken[a * s, b * s]:
                out.append((int(a) * s, int(b) * s, s))
                taken[a * s:(a + 1) * s, b * s:(b + 1) * s] = True
        s //= 2
    return out


class _Restart(Exception):
    pass


def _avg(v: np.ndarray, side: int, s: float) -> float:
    return float((np.sum(np.abs(v) ** s) / (3 * side) ** 2) ** (1.0 / s))


def _level_ratios(T, F: np.ndarray, Q: Box, E: Box, side: int, s: float, avg: np.ndarray):
    """Ratios of the three level-set quantities to the node averages, on Q.

    F holds one or more full-grid inputs (k, N, N), already restricted to 3Q.
    """
    r0, r1, c0, c1 = Q
    e0, e1, f0, f1 = E
    sub = F[:, e0:e1, f0:f1]
    sides = [x for x in _hl_sides(F.shape[-1]) if x <= 3 * side]
    ms = np.stack([hl_maximal(np.abs(g) ** s, sides) ** (1.0 / s) for g in sub])
    ms = ms[:, r0 - e0:r1 - e0, c0 - f0:c1 - f0]
    sharp = sharp_maximal_region(T, F, target=Q, support=E, max_side=side)
    tq = np.stack([np.abs(T.apply_block(g, (slice(e0, e1), slice(f0, f1)),
                                        (slice(r0, r1), slice(c0, c1)))) for g in sub])
    a = avg[:, None, None]
    safe = np.where(a > 0, a, 1.0)
    z = lambda x: np.where(a > 0, x / safe, np.where(x > 1e-13, np.inf, 0.0))
    return z(ms), z(sharp), z(tq)


def _build(T, inputs, s: float, c: float, A: float, root: Box, n_sets: int):
    """One pass of the recursion with fixed thresholds; raises _Restart with new values."""
    N = T.N
    cubes, wits, halving, depth, betas, avgs = [], [], [], [], [], []
    need_c, need_A = c, A
    stack = [(root, 0)]
    while stack:
        Q, d = stack.pop(0)
        side = Q[1] - Q[0]
        E = expand(Q, N)
        mask = box_mask(E, N)
        F, beta = inputs(mask, E)
        avg = np.array([_avg(g[mask], side, s) for g in F])
        if not np.any(avg > 0):
            continue
        ratios = _level_ratios(T, F, Q, E, side, s, avg)
        allowed = int(np.floor(EXCEPTIONAL_FRACTION * side * side / n_sets))
        rc = max(_required(r, allowed) for r in (*ratios[0], *ratios[1]))
        rA = max(_required(r, allowed) for r in ratios[2])
        need_c, need_A = max(need_c, rc), max(need_A, rA)
        if need_c > c or need_A > A:
            raise _Restart(need_c, need_A)
        omega = np.zeros((side, side), dtype=bool)
        for r in (*ratios[0], *ratios[1]):
            omega |= r > c
        for r in ratios[2]:
            omega |= r > A
        chosen = _select(omega, side)
        own = np.ones((side, side), dtype=bool)
        for a, b, w in chosen:
            own[a:a + w, b:b + w] = False
        rr, cc = np.nonzero(own)
        cubes.append(Q)
        wits.append(((rr + Q[0]) * N + (cc + Q[2])).astype(np.int64))
        halving.append(sum(w * w for _, _, w in chosen) / (side * side))
        depth.append(d)
        betas.append(beta)
        avgs.append(avg)
        for a, b, w in sorted(chosen):
            stack.append(((Q[0] + a, Q[0] + a + w, Q[2] + b, Q[2] + b + w), d + 1))
    return cubes, wits, halving, depth, betas, avgs


def _calibrate(T, inputs, s, root, n_sets: int, max_rounds: int = 80):
    c = A = 1.0
    for _ in range(max_rounds):
        try:
            return c, A, _build(T, inputs, s, c, A, root, n_sets)
        except _Restart as e:
            c, A = e.args
    raise CalibrationError("thresholds did not settle")


def _root(N: int, root: Box | None) -> Box:
    root = root or (0, N, 0, N)
    side = root[1] - root[0]
    if side != root[3] - root[2] or side & (side - 1):
        raise ValueError("root must be a dyadic square")
    return root


def sparse_dominate(T, f, p: float, root: Box | None = None, seed: int | None = None) -> SparseFamily:
    """Stopping family S with |T f| <= C sum_S <f>_{S,p} 1_S, C = (3 + c) A."""
    v = np.asarray(f, dtype=np.float64)
    N = T.N
    root = _root(N, root)
    if np.any(v[~box_mask(root, N)] != 0):
        raise ValueError("f must be supported in the root square")

    def inputs(mask, E):
        return np.where(mask, v, 0.0)[None], None

    c, A, (cubes, wits, halving, depth, _, _) = _calibrate(T, inputs, p, root, 3)
    return SparseFamily(T.n, cubes, wits, p, {"c": c, "A": A}, (3.0 + c) * A,
                        halving, depth, seed)


def domination_ratio(T, f, family: SparseFamily) -> float:
    """max over cells of |T f| / (C sum_S <f>_{S,p} 1_S); <= 1 means dominated."""
    lhs = np.abs(T.apply(f))
    rhs = family.constant * sparse_form_eval(family.expanded(), f, family.p, family.N)
    return _max_ratio(lhs, rhs)


def _max_ratio(lhs: np.ndarray, rhs: np.ndarray, tiny: float = 1e-12) -> float:
    scale = max(float(np.abs(lhs).max()), 1.0)
    bad = (rhs <= tiny * scale) & (lhs > tiny * scale)
    if np.any(bad):
        return float("inf")
    ok = rhs > tiny * scale
    return float((lhs[ok] / rhs[ok]).max()) if np.any(ok) else 0.0


@dataclass
class CommutatorSparse:
    family: SparseFamily
    sum_product: np.ndarray       # sum_S <(b - beta_S) f>_{S,p} 1_S
    sum_oscillation: np.ndarray   # sum_S |b - beta_S| <f>_{S,p} 1_S

    @property
    def total(self) -> np.ndarray:
        return self.sum_product + self.sum_oscillation


def commutator_sparse(T, b, f, p: float, root: Box | None = None,
                      seed: int | None = None) -> CommutatorSparse:
    """Sparse bound for [b, T] f built from six level sets per node.

    beta_S is the mean of b over 3Q clipped to the box; the level sets are the
    three of f 1_{3Q} and the three of (b - beta) f 1_{3Q}.
    """
    bv = np.asarray(b, dtype=np.float64)
    v = np.asarray(f, dtype=np.float64)
    N = T.N
    root = _root(N, root)
    if np.any(v[~box_mask(root, N)] != 0):
        raise ValueError("f must be supported in the root square")

    def inputs(mask, E):
        beta = float(bv[mask].mean())
        return np.stack([np.where(mask, v, 0.0), np.where(mask, (bv - beta) * v, 0.0)]), beta

    c, A, (cubes, wits, halving, depth, betas, _) = _calibrate(T, inputs, p, root, 6)
    fam = SparseFamily(T.n, cubes, wits, p, {"c": c, "A": A}, (3.0 + c) * A, halving, depth, seed)
    S = fam.expanded()
    s1 = np.zeros((N, N))
    s2 = np.zeros((N, N))
    for Sq, beta in zip(S, betas):
        r0, r1, c0, c1 = Sq
        area = (r1 - r0) * (c1 - c0)
        prod = np.abs((bv - beta) * v)[r0:r1, c0:c1]
        s1[r0:r1, c0:c1] += (np.sum(prod ** p) / area) ** (1.0 / p)
        fa = (np.sum(np.abs(v[r0:r1, c0:c1]) ** p) / area) ** (1.0 / p)
        s2[r0:r1, c0:c1] += np.abs(bv - beta)[r0:r1, c0:c1] * fa
    fam.extras["betas"] = betas
    return CommutatorSparse(fam, s1, s2)


def commutator_domination_ratio(T, b, f, cs: CommutatorSparse) -> float:
    bv, v = np.asarray(b, dtype=np.float64), np.asarray(f, dtype=np.float64)
    lhs = np.abs(bv * T.apply(v) - T.apply(bv * v))
    return _max_ratio(lhs, cs.family.constant * cs.total)
