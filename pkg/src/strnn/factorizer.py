"""Factorize an adjacency matrix into per-layer binary masks.

A network with H hidden layers needs H+1 masks M^1 (h_1 x d), ...,
M^{H+1} (d x h_H) whose product (applied right-to-left) has exactly the
zero/nonzero pattern of the adjacency A; the integer entries of the product
count the masked connection paths between each output/input pair.  Three
factorization schemes are provided (greedy, exact search, unique-row tiling)
plus the classic random-degree masks, with two path-count objectives.
"""

import itertools

import numpy as np

from . import adjacency
from .errors import (
    BudgetExceededError,
    InfeasibleError,
    InsufficientWidthError,
    InvalidDimError,
    ShapeMismatchError,
)

MAX_CONNECTIONS = "max_connections"
CONNECTIONS_MINUS_VARIANCE = "connections_minus_variance"
OBJECTIVES = (MAX_CONNECTIONS, CONNECTIONS_MINUS_VARIANCE)

EXACT_MAX_CELLS = 42
EXACT_MAX_WIDTH = 8


def mask_product(masks):
    """Multiply a mask list (input-to-output order) into one integer matrix."""
    if not masks:
        raise InvalidDimError("mask list is empty")
    P = np.asarray(masks[0], dtype=np.int64)
    for M in masks[1:]:
        M = np.asarray(M, dtype=np.int64)
        if M.shape[1] != P.shape[0]:
            raise ShapeMismatchError(f"cannot chain {M.shape} after {P.shape}")
        P = M @ P
    return P


def check_sparsity_equal(product, A):
    """True iff the product's nonzero pattern equals A's exactly."""
    product = np.asarray(product)
    A = np.asarray(A)
    if product.shape != A.shape:
        raise ShapeMismatchError(f"shapes {product.shape} and {A.shape} differ")
    return bool(((product > 0) == (A > 0)).all())


def objective_value(product, objective=MAX_CONNECTIONS):
    """Score a mask product: total path count, optionally minus the population
    variance over all entries."""
    product = np.asarray(product, dtype=np.float64)
    if objective == MAX_CONNECTIONS:
        return float(product.sum())
    if objective == CONNECTIONS_MINUS_VARIANCE:
        return float(product.sum() - np.var(product))
    raise InvalidDimError(f"unknown objective {objective!r}; known: {OBJECTIVES}")


def greedy_factor_layer(A, h):
    """Single-layer greedy factorization A ~ M_V @ M_W with h hidden units.

    M_W's rows cycle through the nonzero rows of A (in order of appearance,
    with multiplicity) until all h rows are filled.  M_V starts as all-ones
    and zeroes entry (i, r) whenever unit r reads an input that row i of A
    forbids, which is the maximal M_V for the chosen M_W.  Runs in vectorized
    matrix time, so large instances (d = h = 2000) complete in well under a
    second.

    Returns (M_V, M_W) with shapes (d1, h) and (h, d2).  Raises
    InsufficientWidthError when the first h cycled rows do not include every
    distinct nonzero row pattern (always satisfiable for h >= d1).
    """
    A = np.asarray(A, dtype=np.int64)
    if A.ndim != 2:
        raise InvalidDimError("A must be 2-D")
    if h < 1:
        raise InvalidDimError("h must be >= 1")
    d1, d2 = A.shape
    nz = np.flatnonzero(A.any(axis=1))
    if len(nz) == 0:
        return np.zeros((d1, h), dtype=np.int64), np.zeros((h, d2), dtype=np.int64)
    M_W = A[nz[np.arange(h) % len(nz)]]
    if h < len(nz):
        n_distinct = len(np.unique(A[nz], axis=0))
        if h < n_distinct or len(np.unique(M_W, axis=0)) < n_distinct:
            raise InsufficientWidthError(
                f"h={h} units cannot carry all {n_distinct} distinct nonzero rows")
    # Unit r may feed output i only if r's inputs are a subset of row i's.
    # Float32 keeps the big matmul in fast BLAS; counts stay exact (< 2^24).
    conflict = M_W.astype(np.float32) @ (1 - A).astype(np.float32).T
    M_V = (conflict.T == 0).astype(np.int64)
    return M_V, M_W


def within_exact_budget(d1, d2, h):
    """True when the exact search budget admits this layer instance."""
    return d1 * d2 <= EXACT_MAX_CELLS and h <= EXACT_MAX_WIDTH


def _intersection_closure(supports):
    closure = set(supports)
    frontier = set(supports)
    while frontier:
        new = set()
        for a in frontier:
            for b in supports:
                c = a & b
                if c and c not in closure:
                    new.add(c)
        closure |= new
        frontier = new
    return closure


def exact_factor_layer(A, h, objective=MAX_CONNECTIONS):
    """Optimal single-layer factorization by branch-and-bound over unit input sets.

    Each hidden unit is assigned an input pattern; its output pattern is then
    forced maximal (every output row whose support covers the inputs).  For the
    path-count objective the search may restrict candidate patterns to the
    intersection closure of A's row supports without losing optimality:
    widening a pattern to the intersection of the rows it feeds never shrinks
    its input count, its output count, or the set of edges it covers.  The
    variance-penalized objective gets no such reduction and enumerates all
    subsets of row supports.

    The returned objective value is always >= the greedy layer's on the same
    instance (the greedy configuration is one point of the search space and
    seeds the incumbent).  Raises BudgetExceededError beyond
    d1 * d2 <= 42, h <= 8 (or when variance-mode enumeration explodes) and
    InfeasibleError when no h-unit assignment covers every edge of A.
    """
    A = np.asarray(A, dtype=np.int64)
    if A.ndim != 2:
        raise InvalidDimError("A must be 2-D")
    if h < 1:
        raise InvalidDimError("h must be >= 1")
    d1, d2 = A.shape
    if not within_exact_budget(d1, d2, h):
        raise BudgetExceededError(
            f"exact search limited to d1*d2 <= {EXACT_MAX_CELLS} and h <= {EXACT_MAX_WIDTH}; "
            f"got {d1}x{d2}, h={h}")
    if objective not in OBJECTIVES:
        raise InvalidDimError(f"unknown objective {objective!r}")
    if not A.any():
        return np.zeros((d1, h), dtype=np.int64), np.zeros((h, d2), dtype=np.int64)

    row_supports = [frozenset(np.flatnonzero(row)) for row in A]
    distinct = {s for s in row_supports if s}
    if objective == MAX_CONNECTIONS:
        candidates = _intersection_closure(distinct)
    else:
        if sum(2 ** len(s) for s in distinct) > 4096:
            raise BudgetExceededError("variance-mode exact enumeration too large")
        candidates = set()
        for s in distinct:
            items = sorted(s)
            for r in range(1, len(items) + 1):
                candidates.update(frozenset(c) for c in itertools.combinations(items, r))

    edges = [(i, j) for i in range(d1) for j in range(d2) if A[i, j]]
    edge_bit = {e: 1 << n for n, e in enumerate(edges)}
    all_edges = (1 << len(edges)) - 1

    cand = []
    for w in candidates:
        cover = [i for i in range(d1) if w <= row_supports[i]]
        if not cover:
            continue
        bits = 0
        for i in cover:
            for j in w:
                bits |= edge_bit[(i, j)]
        cand.append((len(w) * len(cover), tuple(sorted(w)), cover, bits))
    cand.sort(key=lambda c: (-c[0], c[1]))
    if objective == CONNECTIONS_MINUS_VARIANCE:
        # A unit may also sit idle (empty input pattern, contributing nothing);
        # trading a duplicated unit for an idle one can reduce the variance
        # penalty.  Idle units are pointless under pure connection counting.
        cand.append((0, (), list(range(d1)), 0))
    n_cand = len(cand)
    f = [c[0] for c in cand]
    covered = [c[3] for c in cand]
    # Suffix union of coverable edges, for infeasibility pruning.
    suffix = [0] * (n_cand + 1)
    for q in range(n_cand - 1, -1, -1):
        suffix[q] = suffix[q + 1] | covered[q]

    def leaf_value(counts):
        P = np.zeros((d1, d2), dtype=np.int64)
        for q, c in counts:
            _, w, cover, _ = cand[q]
            P[np.ix_(cover, list(w))] += c
        return objective_value(P, objective)

    best = {"value": -np.inf, "counts": None}

    def consider(counts):
        val = leaf_value(counts)
        if val > best["value"]:
            best["value"] = val
            best["counts"] = list(counts)

    # Seed the incumbent with the greedy solution when it is width-feasible.
    try:
        gV, gW = greedy_factor_layer(A, h)
    except InsufficientWidthError:
        pass
    else:
        seed_counts = {}
        ok = True
        for r in range(h):
            w = frozenset(np.flatnonzero(gW[r]))
            q = next((n for n, c in enumerate(cand) if frozenset(c[1]) == w), None)
            if q is None:
                ok = False
                break
            seed_counts[q] = seed_counts.get(q, 0) + 1
        if ok:
            consider(sorted(seed_counts.items()))

    stack = []

    def dfs(p, slots, sum_value, uncovered):
        if slots == 0:
            if uncovered == 0:
                consider(stack)
            return
        if uncovered & ~suffix[p]:
            return
        for q in range(p, n_cand):
            # Candidates are value-sorted, so both the additive bound and the
            # suffix coverage only shrink with q; the first failure ends the loop.
            # The bound is valid for the variance objective too (variance >= 0).
            if sum_value + slots * f[q] <= best["value"]:
                break
            if uncovered & ~suffix[q]:
                break
            stack.append((q, 1))
            dfs(q, slots - 1, sum_value + f[q], uncovered & ~covered[q])
            stack.pop()

    dfs(0, h, 0, all_edges)

    if best["counts"] is None:
        raise InfeasibleError(f"no {h}-unit assignment covers every edge of A")

    rows = []
    cover_cols = []
    for q, c in best["counts"]:
        _, w, cover, _ = cand[q]
        w_vec = np.zeros(d2, dtype=np.int64)
        w_vec[list(w)] = 1
        v_vec = np.zeros(d1, dtype=np.int64)
        v_vec[cover] = 1
        for _ in range(c):
            rows.append(w_vec)
            cover_cols.append(v_vec)
    M_W = np.stack(rows)
    M_V = np.stack(cover_cols, axis=1)
    return M_V, M_W


def zuko_factor(A, hidden):
    """Unique-row tiling factorization for the full mask stack.

    Deduplicates A's rows, computes the row-support containment relation
    P[i, j] = (support(row_j) <= support(row_i)), and tiles the units of every
    hidden layer cyclically over the reachable (nonzero) unique rows; the
    final mask re-expands to the original row order.  With no hidden widths
    the single mask is A itself.
    """
    A = adjacency.validate(A)
    d = A.shape[0]
    u_rows, inverse = np.unique(A, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    n_deps = u_rows.sum(axis=1)
    reachable = np.flatnonzero(n_deps > 0)
    widths = list(hidden) + [d]
    if len(reachable) == 0:
        dims = [d] + list(hidden) + [d]
        return [np.zeros((dims[k + 1], dims[k]), dtype=np.int64) for k in range(len(dims) - 1)]
    P = (u_rows @ u_rows.T) == n_deps[None, :]
    masks = []
    indices = None
    for layer, width in enumerate(widths):
        M = u_rows if layer == 0 else P[:, indices].astype(np.int64)
        if layer < len(hidden):
            indices = reachable[np.arange(width) % len(reachable)]
            M = M[indices]
        else:
            M = M[inverse]
        masks.append(np.asarray(M, dtype=np.int64))
    return masks


def made_masks(d, hidden, rng, natural_ordering=False):
    """Random-degree mask stack: degrees m^0 a permutation of 1..d (or the
    identity), hidden degrees uniform on {min(previous), ..., d-1}, hidden
    mask entries m^l_i >= m^{l-1}_j and a strict > for the output mask.

    The product is lower-triangular with respect to the m^0 ordering but can
    carry extra zeros below the diagonal when sampled degrees starve some
    connection (for d=4, h=2 the all-ones hidden degree vector appears with
    probability 1/9).
    """
    if d < 1:
        raise InvalidDimError("d must be >= 1")
    if d == 1 and hidden:
        raise InvalidDimError("random-degree masks need d >= 2 with hidden layers")
    rng = np.random.default_rng(rng)
    m0 = np.arange(1, d + 1)
    if not natural_ordering:
        m0 = rng.permutation(m0)
    degrees = [m0]
    for width in hidden:
        if width < 1:
            raise InvalidDimError("hidden widths must be >= 1")
        lo = int(degrees[-1].min())
        degrees.append(rng.integers(lo, d, size=width))
    masks = []
    for lvl in range(1, len(degrees)):
        masks.append((degrees[lvl][:, None] >= degrees[lvl - 1][None, :]).astype(np.int64))
    masks.append((m0[:, None] > degrees[-1][None, :]).astype(np.int64))
    return masks


def factor_multilayer(A, hidden, method="greedy", objective=MAX_CONNECTIONS):
    """Factor A into len(hidden)+1 masks using the chosen scheme.

    greedy/exact split recursively: each step factors the current left matrix
    C ~ C' @ M, emits M as the next mask (input side first), and continues on
    C'; the last left factor is the final mask.  zuko delegates to
    zuko_factor.  Layer errors (InsufficientWidthError, BudgetExceededError,
    InfeasibleError) propagate.
    """
    A = adjacency.validate(A)
    if method == "zuko":
        return zuko_factor(A, hidden)
    if method not in ("greedy", "exact"):
        raise InvalidDimError(f"unknown method {method!r}")
    if not hidden:
        return [A.copy()]
    masks = []
    cur = A
    for width in hidden:
        if method == "greedy":
            M_V, M_W = greedy_factor_layer(cur, width)
        else:
            M_V, M_W = exact_factor_layer(cur, width, objective)
        masks.append(M_W)
        cur = M_V
    masks.append(cur)
    return masks
