"""Error-correcting codes for the FER harness.

* :class:`BoundedDistanceCode` stands in for a t-error-correcting BCH code:
  a frame decodes iff it holds at most ``t`` bit errors.
* :class:`QcLdpcCode` is a quasi-cyclic LDPC code described by a table of
  circulant shifts (-1 marks an all-zero block); :func:`peg_construct_qc`
  builds one greedily, circulant by circulant, avoiding short cycles.
* :func:`sp_decode` is a sum-product (tanh rule) belief-propagation decoder.

A circulant with shift ``s`` has its row ``r`` connected to column
``(r + s) mod Z`` of its block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from . import gf2

LLR_MAX = 30.0
MSG_CLIP = 25.0


@dataclass(frozen=True)
class BoundedDistanceCode:
    n: int
    k: int
    t: int

    def __post_init__(self):
        if not (0 < self.k < self.n) or self.t < 0:
            raise ValueError(f"invalid bounded-distance code (n={self.n}, k={self.k}, t={self.t})")


BCH_8191 = BoundedDistanceCode(n=8191, k=7683, t=39)


def bd_decode(error_count, code: BoundedDistanceCode):
    """True where the frame's error count is within the correction radius."""
    k = np.asarray(error_count)
    if np.any(k < 0):
        raise ValueError("error count must be nonnegative")
    ok = k <= code.t
    return bool(ok) if ok.ndim == 0 else ok


@dataclass(frozen=True, eq=False)
class ParityCheckCode:
    """Binary linear code given by a sparse parity-check matrix."""

    H: sparse.csr_matrix = field(repr=False)

    def __post_init__(self):
        H = sparse.csr_matrix(self.H, dtype=np.uint8)
        H.data[:] = 1
        H.eliminate_zeros()
        H.sort_indices()
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @cached_property
    def k_effective(self) -> int:
        return self.n - rank2(self)

    @cached_property
    def _graph(self) -> "_TannerGraph":
        return _TannerGraph(self.H)

    @cached_property
    def _encoder(self) -> "_SystematicEncoder":
        return _SystematicEncoder(self.H.toarray())

    def syndrome(self, words) -> np.ndarray:
        w = np.atleast_2d(np.asarray(words, dtype=np.int64))
        return (self.H @ w.T).T % 2

    def is_codeword(self, words) -> np.ndarray:
        return ~np.any(self.syndrome(words), axis=1)

    def encode(self, info) -> np.ndarray:
        """Codewords for rows of ``info`` (k_effective bits each)."""
        return self._encoder.encode(info)

    def random_codewords(self, count: int, rng: np.random.Generator) -> np.ndarray:
        info = rng.integers(0, 2, size=(count, self._encoder.k), dtype=np.uint8)
        return self.encode(info)

    def to_alist(self) -> str:
        return write_alist(self.H)


@dataclass(frozen=True, eq=False)
class QcLdpcCode(ParityCheckCode):
    circulant_size: int = 0
    shift_table: np.ndarray = field(default=None, repr=False)
    dv: int = 0
    dc: int = 0

    @classmethod
    def from_shifts(cls, shift_table, circulant_size: int, dv: int | None = None,
                    dc: int | None = None) -> "QcLdpcCode":
        table = np.array(shift_table, dtype=np.int64)
        z = int(circulant_size)
        if table.ndim != 2 or np.any(table < -1) or np.any(table >= z):
            raise ValueError("shift table entries must lie in {-1} U [0, Z)")
        table.setflags(write=False)
        col_w = (table >= 0).sum(axis=0)
        row_w = (table >= 0).sum(axis=1)
        dv = int(col_w.max()) if dv is None else dv
        dc = int(row_w.max()) if dc is None else dc
        return cls(H=expand_shifts(table, z), circulant_size=z, shift_table=table, dv=dv, dc=dc)

    @property
    def design_rate(self) -> float:
        return 1.0 - self.m / self.n

    def to_json(self) -> dict:
        return {
            "Z": self.circulant_size,
            "shift_table": self.shift_table.tolist(),
            "dv": self.dv,
            "dc": self.dc,
        }

    @classmethod
    def from_json(cls, doc) -> "QcLdpcCode":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        return cls.from_shifts(doc["shift_table"], doc["Z"], doc.get("dv"), doc.get("dc"))


def expand_shifts(table, z: int) -> sparse.csr_matrix:
    table = np.asarray(table)
    rows, cols = [], []
    r = np.arange(z)
    for (bi, bj), s in np.ndenumerate(table):
        if s >= 0:
            rows.append(bi * z + r)
            cols.append(bj * z + (r + s) % z)
    shape = (table.shape[0] * z, table.shape[1] * z)
    if not rows:
        return sparse.csr_matrix(shape, dtype=np.uint8)
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    return sparse.csr_matrix((np.ones(rows.size, dtype=np.uint8), (rows, cols)), shape=shape)


def _as_matrix(code_or_h):
    H = code_or_h.H if isinstance(code_or_h, ParityCheckCode) else code_or_h
    return sparse.csr_matrix(H)


def rank2(code_or_h) -> int:
    """Rank of the parity-check matrix over GF(2)."""
    return gf2.rank(_as_matrix(code_or_h).toarray())


def girth(code_or_h) -> int:
    """Length of the shortest cycle in the Tanner graph (``math.inf`` if acyclic).

    Runs a breadth-first search from variable nodes; for a QC code one root
    per column block suffices because cyclically shifting every block is a
    graph automorphism.
    """
    H = _as_matrix(code_or_h)
    m, n = H.shape
    if isinstance(code_or_h, QcLdpcCode):
        roots = range(0, n, code_or_h.circulant_size)
    else:
        roots = range(n)
    # nodes: variables 0..n-1, checks n..n+m-1
    H = H.tocsr()
    Hc = H.tocsc()
    var_ptr, var_adj = Hc.indptr, Hc.indices + n
    chk_ptr, chk_adj = H.indptr, H.indices
    indptr = np.concatenate([var_ptr, chk_ptr[1:] + var_ptr[-1]])
    adj = np.concatenate([var_adj, chk_adj])
    deg = np.diff(indptr)

    best = math.inf
    for root in roots:
        best = min(best, _shortest_cycle_from(root, indptr, adj, deg, n + m, best))
    return best


def _shortest_cycle_from(root, indptr, adj, deg, n_nodes, bound) -> float:
    dist = np.full(n_nodes, -1, dtype=np.int64)
    parent = np.full(n_nodes, -1, dtype=np.int64)
    dist[root] = 0
    frontier = np.array([root])
    level = 0
    best = bound
    while frontier.size and 2 * (level + 1) < best:
        counts = deg[frontier]
        src = np.repeat(frontier, counts)
        starts = np.repeat(indptr[frontier], counts)
        offs = np.arange(src.size) - np.repeat(np.cumsum(counts) - counts, counts)
        dst = adj[starts + offs]
        keep = dst != parent[src]
        src, dst = src[keep], dst[keep]
        seen = dist[dst] >= 0
        if np.any(seen):
            best = min(best, int(np.min(dist[src[seen]] + dist[dst[seen]] + 1)))
        fresh_dst, fresh_src = dst[~seen], src[~seen]
        uniq, first, hits = np.unique(fresh_dst, return_index=True, return_counts=True)
        if np.any(hits > 1):
            # two frontier nodes reach the same new node
            best = min(best, 2 * (level + 1))
        dist[uniq] = level + 1
        parent[uniq] = fresh_src[first]
        frontier = uniq
        level += 1
    return best


class _TannerGraph:
    """Edge-indexed view of H for message passing (edges sorted by check)."""

    def __init__(self, H: sparse.csr_matrix):
        H = H.tocsr()
        self.n = H.shape[1]
        row_deg = np.diff(H.indptr)
        self.edge_var = H.indices.astype(np.int64)
        self.edge_chk = np.repeat(np.arange(H.shape[0]), row_deg)
        self.n_edges = self.edge_var.size
        # checks with no edges are always satisfied and carry no messages
        live = np.flatnonzero(row_deg > 0)
        self.chk_starts = H.indptr[live]
        self.chk_live_index = np.full(H.shape[0], -1)
        self.chk_live_index[live] = np.arange(live.size)
        self.edge_live_chk = self.chk_live_index[self.edge_chk]
        self.var_sum = sparse.csr_matrix(
            (np.ones(self.n_edges), (self.edge_var, np.arange(self.n_edges))),
            shape=(self.n, self.n_edges),
        )

    def check_sums(self, x: np.ndarray) -> np.ndarray:
        return np.add.reduceat(x, self.chk_starts, axis=1)

    def var_sums(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.var_sum @ x.T).T

    def syndrome_ok(self, hard: np.ndarray) -> np.ndarray:
        if self.n_edges == 0:
            return np.ones(hard.shape[0], dtype=bool)
        par = self.check_sums(hard[:, self.edge_var].astype(np.int64)) % 2
        return ~np.any(par, axis=1)


class _SystematicEncoder:
    """c[pivots] = R[:, free] @ c[free] from the reduced row-echelon form of H."""

    def __init__(self, H: np.ndarray):
        R, pivots = gf2.rref(H)
        n = H.shape[1]
        pivset = set(pivots)
        self.n = n
        self.pivots = np.array(pivots, dtype=np.int64)
        self.free = np.array([c for c in range(n) if c not in pivset], dtype=np.int64)
        self.k = self.free.size
        self.parity_map = R[:, self.free].astype(np.float32)

    def encode(self, info) -> np.ndarray:
        u = np.atleast_2d(np.asarray(info, dtype=np.uint8))
        if u.shape[1] != self.k:
            raise ValueError(f"expected {self.k} information bits, got {u.shape[1]}")
        c = np.zeros((u.shape[0], self.n), dtype=np.uint8)
        c[:, self.free] = u
        # float32 sums are exact up to 2**24 terms
        c[:, self.pivots] = (u.astype(np.float32) @ self.parity_map.T).astype(np.int64) % 2
        return c


@dataclass(frozen=True)
class DecodeOutcome:
    success: bool
    iterations: int
    word: np.ndarray = field(repr=False)


def _safe_log_ratio(num: float, den: float) -> float:
    if num <= 0 and den <= 0:
        return 0.0
    if num <= 0:
        return -LLR_MAX
    if den <= 0:
        return LLR_MAX
    return float(np.clip(math.log(num) - math.log(den), -LLR_MAX, LLR_MAX))


def channel_llr(received, params, mode: str = "asymmetric") -> np.ndarray:
    """log P(y | x=0) / P(y | x=1) for hard reads through a BAC.

    ``mode="symmetric"`` uses the BSC with crossover (p + q) / 2 instead.
    Infinite values saturate at +/-LLR_MAX.
    """
    y = np.asarray(received)
    p, q = float(params.p), float(params.q)
    if mode == "symmetric":
        p = q = 0.5 * (p + q)
    elif mode != "asymmetric":
        raise ValueError(f"unknown LLR mode {mode!r}")
    if not (0 <= p <= 1 and 0 <= q <= 1):
        raise ValueError("crossover probabilities must lie in [0, 1]")
    l0 = _safe_log_ratio(1 - p, q)
    l1 = _safe_log_ratio(p, 1 - q)
    out = np.where(y == 0, l0, l1)
    return float(out) if out.ndim == 0 else out


def sp_decode_batch(llrs, code: ParityCheckCode, max_iter: int = 50, early_stop: bool = True):
    """Sum-product decoding of a batch (one frame per row).

    Returns ``(words, success, iterations)``. With ``early_stop`` a frame
    stops as soon as its hard decision satisfies every check; otherwise all
    ``max_iter`` iterations run and the final decision is judged.
    """
    L = np.atleast_2d(np.asarray(llrs, dtype=float))
    g = code._graph
    if L.shape[1] != g.n:
        raise ValueError(f"expected {g.n} LLRs per frame, got {L.shape[1]}")
    L = np.clip(L, -LLR_MAX, LLR_MAX)
    B = L.shape[0]
    words = (L < 0).astype(np.uint8)
    success = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=np.int64)

    active = np.arange(B)
    if early_stop:
        done = g.syndrome_ok(words)
        success[done] = True
        active = active[~done]
    if g.n_edges == 0:
        success[:] = True
        return words, success, iters

    La = L[active]
    v2c = La[:, g.edge_var]
    for it in range(1, max_iter + 1):
        if active.size == 0:
            break
        t = np.tanh(0.5 * v2c)
        mag = np.log(np.maximum(np.abs(t), 1e-300))
        neg = (t < 0).astype(np.int64)
        ext = g.check_sums(mag)[:, g.edge_live_chk] - mag
        flips = (g.check_sums(neg)[:, g.edge_live_chk] - neg) & 1
        prod = np.where(flips == 1, -1.0, 1.0) * np.exp(ext)
        c2v = 2.0 * np.arctanh(np.clip(prod, -1 + 1e-15, 1 - 1e-15))
        np.clip(c2v, -MSG_CLIP, MSG_CLIP, out=c2v)
        total = La + g.var_sums(c2v)
        hard = (total < 0).astype(np.uint8)
        words[active] = hard
        iters[active] = it
        ok = g.syndrome_ok(hard)
        if early_stop:
            success[active[ok]] = True
            keep = ~ok
            active, La, total, c2v = active[keep], La[keep], total[keep], c2v[keep]
        elif it == max_iter:
            success[active] = ok
        v2c = total[:, g.edge_var] - c2v
    return words, success, iters


def sp_decode(llrs, code: ParityCheckCode, max_iter: int = 50, early_stop: bool = True) -> DecodeOutcome:
    words, success, iters = sp_decode_batch(np.asarray(llrs)[None, :], code, max_iter, early_stop)
    return DecodeOutcome(bool(success[0]), int(iters[0]), words[0])


@dataclass(frozen=True)
class LdpcDecoder:
    """Sum-product decoder configuration used by the FER harness.

    ``llr_mode`` selects BSC-symmetric LLRs (all-zero codeword plus channel
    error vector) or asymmetric BAC LLRs (random encoded codewords).
    """

    code: ParityCheckCode
    max_iter: int = 50
    llr_mode: str = "symmetric"
    early_stop: bool = True

    def __post_init__(self):
        if self.llr_mode not in ("symmetric", "asymmetric"):
            raise ValueError(f"unknown LLR mode {self.llr_mode!r}")

    @property
    def n(self) -> int:
        return self.code.n


def _four_cycle_counts(S, i, j, z):
    """For each candidate shift at (i, j): number of 4-cycles it would close."""
    counts = np.zeros(z, dtype=np.int64)
    placed = S >= 0
    for i1 in range(S.shape[0]):
        if i1 == i or not placed[i1, j]:
            continue
        cols = np.flatnonzero(placed[i1] & placed[i])
        cols = cols[cols != j]
        if cols.size:
            counts += np.bincount((S[i1, j] - S[i1, cols] + S[i, cols]) % z, minlength=z)
    return counts


def _check_depths(S, i, j, z):
    """Tanner-graph distance from variable j*Z to each check of block row i.

    Unreachable checks get a large sentinel so they rank as deepest.
    """
    H = expand_shifts(S, z)
    m, n = H.shape
    graph = sparse.bmat([[None, H.T], [H, None]], format="csr")
    dist = csgraph.shortest_path(graph, unweighted=True, indices=j * z)
    d = dist[n + i * z: n + (i + 1) * z]
    return np.where(np.isinf(d), np.iinfo(np.int32).max, d).astype(np.int64)


def peg_construct_qc(Z: int = 128, dv: int = 4, dc: int = 64, n: int = 8192,
                     seed: int = 0) -> QcLdpcCode:
    """Progressive-edge-growth construction of a regular QC-LDPC code.

    Columns are filled one circulant at a time. Each column takes ``dv``
    block rows, least-loaded first. The column's first circulant is free
    (every check of a block row has the same degree) and its shift is drawn
    from ``seed``. Each later circulant takes the shift whose check is
    deepest in the tree grown from the column's first variable node,
    excluding shifts that would close a 4-cycle; ties go to the lowest
    shift. Blocks not chosen stay zero.
    """
    if Z < 1 or dv < 1 or dc < 1 or n % Z:
        raise ValueError(f"infeasible profile: n={n} must be a multiple of Z={Z}")
    cols = n // Z
    rows = -(-dv * cols // dc)
    if dv > rows or rows * Z > n:
        raise ValueError(f"infeasible degree profile dv={dv}, dc={dc}, n={n}, Z={Z}")
    rng = np.random.default_rng(seed)
    S = np.full((rows, cols), -1, dtype=np.int64)
    load = np.zeros(rows, dtype=np.int64)
    shifts = np.arange(Z)
    for j in range(cols):
        # random tie-break among equally loaded block rows
        chosen = np.lexsort((rng.permutation(rows), load))[:dv]
        load[chosen] += 1
        first, *rest = sorted(chosen)
        S[first, j] = rng.integers(Z)
        for i in rest:
            c4 = _four_cycle_counts(S, i, j, Z)
            # variable j*Z meets check row r of block i when (r + s) % Z == 0
            depth = _check_depths(S, i, j, Z)[(-shifts) % Z]
            S[i, j] = np.lexsort((shifts, -depth, c4))[0]
    return QcLdpcCode.from_shifts(S, Z, dv=dv, dc=dc)


def write_alist(H) -> str:
    """MacKay alist text for a binary parity-check matrix."""
    H = sparse.csr_matrix(H)
    m, n = H.shape
    Hc = H.tocsc()
    col_lists = [Hc.indices[Hc.indptr[j]:Hc.indptr[j + 1]] + 1 for j in range(n)]
    row_lists = [H.indices[H.indptr[i]:H.indptr[i + 1]] + 1 for i in range(m)]
    col_w = [len(c) for c in col_lists]
    row_w = [len(r) for r in row_lists]
    max_c, max_r = max(col_w, default=0), max(row_w, default=0)

    def pad(vals, width):
        return " ".join(str(v) for v in list(vals) + [0] * (width - len(vals)))

    lines = [f"{n} {m}", f"{max_c} {max_r}", " ".join(map(str, col_w)), " ".join(map(str, row_w))]
    lines += [pad(c, max_c) for c in col_lists]
    lines += [pad(r, max_r) for r in row_lists]
    return "\n".join(lines) + "\n"


def read_alist(text: str) -> sparse.csr_matrix:
    tokens = [int(t) for t in text.split()]
    n, m = tokens[0], tokens[1]
    max_c, _ = tokens[2], tokens[3]
    pos = 4
    col_w = tokens[pos:pos + n]
    pos += n + m
    rows, cols = [], []
    for j in range(n):
        entries = tokens[pos:pos + max_c]
        pos += max_c
        for v in entries[: col_w[j]]:
            rows.append(v - 1)
            cols.append(j)
    return sparse.csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(m, n))
