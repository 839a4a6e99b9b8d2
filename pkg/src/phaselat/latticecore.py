"""Generic lattices and closest-vector solvers.

A lattice is given by a generator matrix whose columns are the basis vectors.
Every solver works in the coordinate frame of the thin QR factorisation, so
rank-deficient embeddings (``n > d``) are handled the same way as square
bases once the target has been projected onto the column space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DEFAULT_NODE_BUDGET",
    "GenericLattice",
    "NearestPointResult",
    "RectangularRegion",
    "BudgetExceeded",
    "rectangular_region",
    "lll_reduce",
    "nearest_point_exact",
    "nearest_point_babai",
    "nearest_point_kbest",
    "brute_force_nearest",
    "babai_box_bound",
]

DEFAULT_NODE_BUDGET = 10**8
RANK_TOL = 1e-10
_TIE_TOL = 1e-12
BRUTE_FORCE_MAX_POINTS = 21**6


def _round_half_up(x):
    return math.floor(x + 0.5)


@dataclass(frozen=True, eq=False)
class GenericLattice:
    """Lattice generated by the columns of ``basis`` (shape ``n x d``).

    The QR factorisation is computed eagerly with a positive diagonal on
    ``R`` and cached; instances are immutable and can be shared between
    threads.
    """

    basis: np.ndarray
    Q: np.ndarray = field(init=False, repr=False)
    R: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        B = np.array(self.basis, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        n, d = B.shape
        if d < 1 or n < d:
            raise ValueError(f"basis must be n x d with n >= d >= 1, got {B.shape}")
        if not np.all(np.isfinite(B)):
            raise ValueError("basis must be finite")
        sv = np.linalg.svd(B, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0]:
            raise ValueError("basis is rank deficient")
        Q, R = np.linalg.qr(B)
        sign = np.where(np.diag(R) < 0, -1.0, 1.0)
        Q = Q * sign
        R = R * sign[:, None]
        for a in (B, Q, R):
            a.setflags(write=False)
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    def coordinates(self, target) -> np.ndarray:
        """Target expressed in the ``R`` frame (``Q' t``), checking it lies
        in the column space."""
        t = np.asarray(target, dtype=float).reshape(-1)
        if t.size != self.n:
            raise ValueError(f"target has length {t.size}, lattice lives in R^{self.n}")
        y = self.Q.T @ t
        if self.n > self.d:
            resid = np.linalg.norm(t - self.Q @ y)
            if resid > 1e-9 * max(1.0, np.linalg.norm(t)):
                raise ValueError("target is not in the column space of the basis")
        return y


@dataclass(frozen=True)
class NearestPointResult:
    integer_coords: np.ndarray
    lattice_vector: np.ndarray
    distance_sq: float
    exact: bool
    nodes: int = 0


class BudgetExceeded(RuntimeError):
    """Enumeration hit its node budget; ``best`` holds the best point found."""

    def __init__(self, best: NearestPointResult, budget: int):
        super().__init__(f"enumeration exceeded node budget of {budget}")
        self.best = best
        self.budget = budget


def _result(lattice, target, u, exact, nodes=0):
    u = np.asarray(u, dtype=np.int64)
    v = lattice.basis @ u.astype(float)
    t = np.asarray(target, dtype=float).reshape(-1)
    diff = t - v
    return NearestPointResult(u, v, float(diff @ diff), exact, nodes)


def _babai_coords(R, y):
    d = R.shape[0]
    u = [0] * d
    for k in range(d - 1, -1, -1):
        s = y[k]
        for j in range(k + 1, d):
            s -= R[k, j] * u[j]
        u[k] = _round_half_up(s / R[k, k])
    return u


def _dist_sq_R(R, y, u):
    r = y - R @ np.asarray(u, dtype=float)
    return float(r @ r)


def nearest_point_babai(lattice: GenericLattice, target) -> NearestPointResult:
    """Nearest-plane approximation against the QR factorisation."""
    y = lattice.coordinates(target)
    return _result(lattice, target, _babai_coords(lattice.R, y), exact=False)


def _lex_less(a, b):
    for x, z in zip(a, b):
        if x != z:
            return x < z
    return False


def _schnorr_euchner(R, y, u0, d0, budget):
    # Depth-first enumeration, closest child first.  Returns
    # (best_u, best_dist, nodes, completed).
    d = R.shape[0]
    Rl = R.tolist()
    yl = list(map(float, y))
    diag = [Rl[k][k] for k in range(d)]
    best_u = list(u0)
    best_d = d0
    tol = _TIE_TOL * (1.0 + d0)

    u = [0] * d
    c = [0.0] * d
    step = [0] * d
    pd = [0.0] * (d + 1)
    nodes = 0

    def centre(k):
        s = yl[k]
        row = Rl[k]
        for j in range(k + 1, d):
            s -= row[j] * u[j]
        return s / diag[k]

    k = d - 1
    c[k] = centre(k)
    u[k] = _round_half_up(c[k])
    step[k] = 1 if c[k] >= u[k] else -1
    while True:
        nodes += 1
        if nodes > budget:
            return best_u, best_d, nodes, False
        diff = (c[k] - u[k]) * diag[k]
        nd = pd[k + 1] + diff * diff
        if nd <= best_d + tol:
            if k == 0:
                if nd < best_d - tol or _lex_less(u, best_u):
                    best_u = list(u)
                    best_d = min(best_d, nd) if nd >= best_d - tol else nd
                    tol = _TIE_TOL * (1.0 + best_d)
                # next sibling at this level
                u[0] += step[0]
                step[0] = -step[0] - (1 if step[0] > 0 else -1)
            else:
                pd[k] = nd
                k -= 1
                c[k] = centre(k)
                u[k] = _round_half_up(c[k])
                step[k] = 1 if c[k] >= u[k] else -1
        else:
            k += 1
            if k == d:
                return best_u, best_d, nodes, True
            u[k] += step[k]
            step[k] = -step[k] - (1 if step[k] > 0 else -1)


def nearest_point_exact(lattice: GenericLattice, target, node_budget: int = DEFAULT_NODE_BUDGET) -> NearestPointResult:
    """Closest lattice point by sphere-decoder enumeration.

    The search starts from the Babai radius and visits children in
    Schnorr-Euchner order.  Ties in distance go to the lexicographically
    smallest integer vector.

    Raises
    ------
    BudgetExceeded
        If more than ``node_budget`` nodes are visited; the best point found
        so far is attached.
    """
    y = lattice.coordinates(target)
    R = lattice.R
    u0 = _babai_coords(R, y)
    d0 = _dist_sq_R(R, y, u0)
    u, _, nodes, done = _schnorr_euchner(R, y, u0, d0, node_budget)
    res = _result(lattice, target, u, exact=done, nodes=nodes)
    if not done:
        raise BudgetExceeded(res, node_budget)
    return res


def nearest_point_kbest(lattice: GenericLattice, target, k: int) -> NearestPointResult:
    """Breadth-first search keeping the ``k`` best partial candidates per layer.

    Candidates are ranked by partial squared distance, then by the assigned
    coordinates in lexicographic order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    y = lattice.coordinates(target)
    R = lattice.R
    d = R.shape[0]
    coords = np.zeros((1, 0), dtype=np.int64)  # assigned levels lvl..d-1
    pdist = np.zeros(1)
    for lvl in range(d - 1, -1, -1):
        rkk = R[lvl, lvl]
        s = y[lvl] - coords.astype(float) @ R[lvl, lvl + 1 :]
        ctr = s / rkk
        npar = ctr.size
        # Upper bound on the k-th best child distance, then every child
        # under that bound is generated for every parent.
        first = np.floor(ctr + 0.5)
        if npar >= k:
            d1 = pdist + (rkk * (ctr - first)) ** 2
            bound = np.partition(d1, k - 1)[k - 1]
        else:
            q = -(-k // npar)
            bound = np.max(pdist + (rkk * (q / 2.0 + 0.5)) ** 2)
        bound = _tighten(bound, np.min(pdist + (rkk * (ctr - first)) ** 2), pdist, ctr, rkk, k)
        bound += _TIE_TOL * (1.0 + bound)
        lo, hi = _child_range(bound, pdist, ctr, rkk)
        cnt = np.maximum(hi - lo + 1, 0)
        parent = np.repeat(np.arange(npar), cnt)
        offs = np.arange(parent.size) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        val = lo[parent] + offs
        nd = pdist[parent] + (rkk * (ctr[parent] - val)) ** 2
        new_coords = np.column_stack([val, coords[parent]])
        keys = [new_coords[:, j] for j in range(new_coords.shape[1] - 1, -1, -1)]
        order = np.lexsort(keys + [nd])[:k]
        coords = new_coords[order]
        pdist = nd[order]
    return _result(lattice, target, coords[0], exact=False)


def _child_range(bound, pdist, ctr, rkk):
    half = np.sqrt(np.maximum(bound - pdist, 0.0)) / rkk
    return np.ceil(ctr - half).astype(np.int64), np.floor(ctr + half).astype(np.int64)


def _tighten(hi, lo, pdist, ctr, rkk, k, iters=60):
    # bisect the child-distance threshold down until it admits at most ~2k
    # children; every threshold used keeps at least k of them
    for _ in range(iters):
        a, b = _child_range(hi, pdist, ctr, rkk)
        if np.maximum(b - a + 1, 0).sum() <= 2 * k or hi - lo <= _TIE_TOL * (1.0 + hi):
            break
        mid = 0.5 * (lo + hi)
        a, b = _child_range(mid, pdist, ctr, rkk)
        if np.maximum(b - a + 1, 0).sum() >= k:
            hi = mid
        else:
            lo = mid
    return hi


def babai_box_bound(lattice: GenericLattice, target) -> int:
    """Coordinate radius around the Babai point that contains every closest
    point: ``|u*_i - u_b,i| <= ||row_i(R^-1)|| * 2 * sqrt(babai distance)``."""
    y = lattice.coordinates(target)
    ub = _babai_coords(lattice.R, y)
    db = _dist_sq_R(lattice.R, y, ub)
    Rinv = np.linalg.inv(lattice.R)
    rows = np.linalg.norm(Rinv, axis=1)
    return int(math.floor(np.max(rows) * 2.0 * math.sqrt(db) + 1e-9))


def brute_force_nearest(lattice: GenericLattice, target, coord_bound: int) -> NearestPointResult:
    """Exhaustive search of the box ``babai +- coord_bound``.

    Limited to ``d <= 8`` and at most ``21**6`` candidate points.
    """
    d = lattice.d
    if d > 8:
        raise ValueError("brute force limited to d <= 8")
    if coord_bound < 0 or (2 * coord_bound + 1) ** d > BRUTE_FORCE_MAX_POINTS:
        raise ValueError(f"box of {2 * coord_bound + 1}^{d} points exceeds the limit of {BRUTE_FORCE_MAX_POINTS}")
    y = lattice.coordinates(target)
    R = lattice.R
    ub = np.array(_babai_coords(R, y), dtype=np.int64)
    span = np.arange(-coord_bound, coord_bound + 1, dtype=np.int64)
    best_u, best_d = None, math.inf
    # chunk over the first coordinate to bound memory
    rest = np.array(list(itertools.product(span, repeat=d - 1)), dtype=np.int64).reshape(span.size ** (d - 1), d - 1)
    for a in span:
        U = np.column_stack([np.full(rest.shape[0], a), rest]) + ub
        r = y[None, :] - U.astype(float) @ R.T
        dist = np.einsum("ij,ij->i", r, r)
        m = dist.min()
        tol = _TIE_TOL * (1.0 + min(m, best_d))
        if m < best_d - tol:
            cand = U[dist <= m + tol]
            best_u, best_d = min(map(tuple, cand)), m
        elif m <= best_d + tol:
            cand = U[dist <= best_d + tol]
            best_u = min([best_u] + list(map(tuple, cand)))
            best_d = min(best_d, m)
    return _result(lattice, target, best_u, exact=True)


def lll_reduce(lattice, delta: float = 0.75):
    """LLL-reduce the basis columns.

    ``lattice`` is a ``GenericLattice`` or a raw basis matrix; the latter may
    be too ill-conditioned for ``GenericLattice`` as long as it has full
    column rank.  Returns ``(reduced, U)`` where ``U`` is unimodular and
    ``reduced.basis == basis @ U``.
    """
    if not 0.25 < delta < 1:
        raise ValueError("delta must lie in (1/4, 1)")
    if isinstance(lattice, GenericLattice):
        B0 = lattice.basis
    else:
        B0 = np.array(lattice, dtype=float)
        if B0.ndim != 2 or not np.all(np.isfinite(B0)) or np.linalg.matrix_rank(B0) < B0.shape[1]:
            raise ValueError("basis must be a finite matrix of full column rank")
    B = B0.copy()
    d = B.shape[1]
    U = np.eye(d, dtype=np.int64)
    R = np.linalg.qr(B, mode="r")
    k = 1
    while k < d:
        for j in range(k - 1, -1, -1):
            q = _round_half_up(R[j, k] / R[j, j])
            if q:
                B[:, k] -= q * B[:, j]
                U[:, k] -= q * U[:, j]
                R[:, k] -= q * R[:, j]
        if delta * R[k - 1, k - 1] ** 2 > R[k, k] ** 2 + R[k - 1, k] ** 2:
            B[:, [k - 1, k]] = B[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            R = np.linalg.qr(B, mode="r")
            k = max(k - 1, 1)
        else:
            k += 1
    return GenericLattice(B0 @ U.astype(float)), U


@dataclass(frozen=True, eq=False)
class RectangularRegion:
    """The prism ``Q * prod_k [-r_kk/2, r_kk/2)``, a set of coset
    representatives for a full-rank lattice."""

    lattice: GenericLattice
    half_widths: np.ndarray

    @property
    def Q(self) -> np.ndarray:
        return self.lattice.Q

    def contains(self, x) -> bool:
        y = self.Q.T @ np.asarray(x, dtype=float)
        return bool(np.all(y >= -self.half_widths) and np.all(y < self.half_widths))

    def reduce(self, x):
        """Return ``(z, u)`` with ``z`` in the prism and ``x - z == B u``."""
        x = np.asarray(x, dtype=float)
        R = self.lattice.R
        y = self.Q.T @ x
        d = R.shape[0]
        u = np.zeros(d, dtype=np.int64)
        for k in range(d - 1, -1, -1):
            s = y[k] - R[k, k + 1 :] @ u[k + 1 :].astype(float)
            u[k] = _round_half_up(s / R[k, k])
        z = x - self.lattice.basis @ u.astype(float)
        return z, u


def rectangular_region(lattice: GenericLattice) -> RectangularRegion:
    if lattice.n != lattice.d:
        raise ValueError("rectangular region needs a full-rank square basis")
    hw = np.diag(lattice.R) / 2.0
    hw.setflags(write=False)
    return RectangularRegion(lattice, hw)
