"""Transition kernel of the queue-length/background chain.

The full state is (x, j): four queue lengths plus a background index
j = (arrival phase 1, arrival phase 3, server state 1, server state 2).
Rates out of (x, j) depend on x only through its occupancy signature
sig(x) = (min(x_l, 2))_l, so the kernel is a finite family of S0 x S0
blocks indexed by signature and displacement z in {-1,0,1}^4:

    z = (1,0,0,0)   class-1 arrival        D1 (x) I (x) U1[a*b] (x) I
    z = (0,0,1,0)   class-3 arrival        I (x) D3 (x) I (x) U2[a*b]
    z = (-1,1,0,0)  class-1 completion     I (x) I (x) T1[c b] (x) U2[a b*]
    z = (0,-1,0,0)  class-2 departure      I (x) I (x) I (x) (1-p) T2[a c]
    z = (0,-1,1,0)  class-2 feedback       I (x) I (x) I (x) p T2[a c] U2[a* b']
    z = (0,0,-1,1)  class-3 completion     I (x) I (x) U1[a b*] (x) T2[c b]
    z = (0,0,0,-1)  class-4 departure      I (x) I (x) T1[a c] (x) I
    z = 0           background moves       C1 (+) C3 (+) T1[a b] (+) T2[a b]

where (+) is the Kronecker sum, the completion symbol c is 1* when the
departing queue holds exactly one customer and 2* otherwise, and the
U regimes are taken just before the triggering arrival (for feedback,
the class-2 count just after the completion).  Station-1 matrices are
indexed by (x1, x4) and station-2 matrices by (x3, x2).

Uniformization divides by nu >= max exit rate and adds the identity to
the diagonal block, giving a discrete kernel with the same stationary
behavior per face.
"""

from __future__ import annotations

import threading
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from .errors import NuTooSmall, SkipFreeViolation
from .service_disciplines import NetworkModel

SUBSET_ALL = frozenset((1, 2, 3, 4))

# safety margin on the uniformization rate; keeps the discrete chain
# aperiodic (strictly positive diagonal) on every face
NU_MARGIN = 1.05


def boundary_face(x):
    """Set of coordinates with at least one customer."""
    if len(x) != 4:
        raise SkipFreeViolation(f"state must have 4 coordinates, got {len(x)}")
    return frozenset(i + 1 for i, v in enumerate(x) if v > 0)


def regime_signature(x):
    """Occupancy signature: each count collapsed to 0, 1 or 2 (meaning >= 2)."""
    return tuple(min(int(v), 2) for v in x)


def _sym(c):
    return "0" if c == 0 else "+"


def _kron4(a, b, c, d):
    return reduce(np.kron, (a, b, c, d))


def _kronsum4(mats):
    dims = [m.shape[0] for m in mats]
    total = int(np.prod(dims))
    out = np.zeros((total, total))
    for i, m in enumerate(mats):
        left = int(np.prod(dims[:i])) if i > 0 else 1
        right = int(np.prod(dims[i + 1:])) if i + 1 < len(mats) else 1
        out += _kron4(np.eye(left), m, np.eye(right), np.eye(1))
    return out


class BlockKernel:
    """Signature-indexed transition blocks for one model.

    Blocks are built lazily and cached; the cache is lock-protected so
    worker threads can share one kernel.
    """

    def __init__(self, model: NetworkModel, nu: float | None = None):
        self.model = model
        self.dims = (model.map1.dim, model.map3.dim, model.msp1.n, model.msp2.n)
        self.S0 = int(np.prod(self.dims))
        max_exit = max_exit_rate(model)
        if nu is None:
            nu = NU_MARGIN * max_exit if max_exit > 0 else 1.0
        if max_exit > 0 and nu < max_exit * (1 - 1e-12):
            raise NuTooSmall(f"nu={nu} is below the maximum exit rate {max_exit}")
        self.nu = float(nu)
        self._q_cache = {}
        self._p_cache = {}
        self._lock = threading.Lock()

    # -- continuous-time blocks ------------------------------------------

    def q_blocks(self, sig):
        sig = tuple(int(v) for v in sig)
        with self._lock:
            hit = self._q_cache.get(sig)
        if hit is not None:
            return hit
        blocks = self._build_q(sig)
        with self._lock:
            self._q_cache[sig] = blocks
        return blocks

    def _build_q(self, sig):
        m = self.model
        a1, a3, m1, m2 = self.dims
        Ia1, Ia3, Im1, Im2 = np.eye(a1), np.eye(a3), np.eye(m1), np.eye(m2)
        t1, u1 = m.msp1.t, m.msp1.u
        t2, u2 = m.msp2.t, m.msp2.u
        g1, g2, g3, g4 = (_sym(c) for c in sig)
        p = m.p
        blocks = {}
        blocks[(1, 0, 0, 0)] = _kron4(m.map1.D, Ia3, u1[f"{g1}*{g4}"], Im2)
        blocks[(0, 0, 1, 0)] = _kron4(Ia1, m.map3.D, Im1, u2[f"{g3}*{g2}"])
        if sig[0] >= 1:
            c = "1*" if sig[0] == 1 else "2*"
            blocks[(-1, 1, 0, 0)] = _kron4(Ia1, Ia3, t1[f"{c}{g4}"], u2[f"{g3}{g2}*"])
        if sig[1] >= 1:
            c = "1*" if sig[1] == 1 else "2*"
            T2c = t2[f"{g3}{c}"]
            blocks[(0, -1, 0, 0)] = _kron4(Ia1, Ia3, Im1, (1.0 - p) * T2c)
            g2post = "0" if sig[1] == 1 else "+"
            blocks[(0, -1, 1, 0)] = _kron4(Ia1, Ia3, Im1, p * (T2c @ u2[f"{g3}*{g2post}"]))
        if sig[2] >= 1:
            c = "1*" if sig[2] == 1 else "2*"
            blocks[(0, 0, -1, 1)] = _kron4(Ia1, Ia3, u1[f"{g1}{g4}*"], t2[f"{c}{g2}"])
        if sig[3] >= 1:
            c = "1*" if sig[3] == 1 else "2*"
            blocks[(0, 0, 0, -1)] = _kron4(Ia1, Ia3, t1[f"{g1}{c}"], Im2)
        blocks[(0, 0, 0, 0)] = _kronsum4(
            [m.map1.C, m.map3.C, t1[f"{g1}{g4}"], t2[f"{g3}{g2}"]]
        )
        return blocks

    # -- uniformized blocks ----------------------------------------------

    def p_blocks(self, sig):
        sig = tuple(int(v) for v in sig)
        with self._lock:
            hit = self._p_cache.get(sig)
        if hit is not None:
            return hit
        q = self.q_blocks(sig)
        blocks = {}
        for z, B in q.items():
            if z == (0, 0, 0, 0):
                blocks[z] = np.eye(self.S0) + B / self.nu
            else:
                blocks[z] = B / self.nu
        with self._lock:
            self._p_cache[sig] = blocks
        return blocks

    def unravel_background(self, j):
        return tuple(int(v) for v in np.unravel_index(j, self.dims))

    def ravel_background(self, parts):
        return int(np.ravel_multi_index(parts, self.dims))


def max_exit_rate(model: NetworkModel) -> float:
    """Largest total exit rate over all states and signatures.

    The diagonal of the no-move block is the sum of the four local
    diagonals, so the maximum factorizes over regime pairs.
    """
    best1 = max(
        float(np.max(-np.diag(model.msp1.t[k]))) for k in ("00", "+0", "0+", "++")
    )
    best2 = max(
        float(np.max(-np.diag(model.msp2.t[k]))) for k in ("00", "+0", "0+", "++")
    )
    bestC1 = float(np.max(-np.diag(model.map1.C)))
    bestC3 = float(np.max(-np.diag(model.map3.C)))
    return bestC1 + bestC3 + best1 + best2


def uniformization_constant(model: NetworkModel) -> float:
    return NU_MARGIN * max_exit_rate(model)


def uniformize(model: NetworkModel, nu: float | None = None) -> BlockKernel:
    """Build a kernel; validates nu against the maximum exit rate."""
    return BlockKernel(model, nu)


def generator_block(model: NetworkModel, x, xp):
    """Continuous-time rate block for the move x -> xp.

    Raises SkipFreeViolation when some coordinate changes by more than
    one.  Moves within distance one that match no event still return a
    zero block.
    """
    x = tuple(int(v) for v in x)
    xp = tuple(int(v) for v in xp)
    if len(x) != 4 or len(xp) != 4:
        raise SkipFreeViolation("states must have 4 coordinates")
    if any(v < 0 for v in x + xp):
        raise SkipFreeViolation("queue lengths must be nonnegative")
    z = tuple(b - a for a, b in zip(x, xp))
    if max(abs(v) for v in z) > 1:
        raise SkipFreeViolation(f"move {z} changes a coordinate by more than one")
    kernel = BlockKernel(model)
    blocks = kernel.q_blocks(regime_signature(x))
    hit = blocks.get(z)
    if hit is None:
        return np.zeros((kernel.S0, kernel.S0))
    return hit


# -- lattice assembly --------------------------------------------------------
#
# STRATEGY: a truncated chain on {0..L-1}^d x S0 is a sum of Kronecker
# products, one per (signature, displacement): a 0/1 lattice matrix that
# maps each cell of the signature to its displaced cell, kron'ed with
# the S0 x S0 block.  Out-of-box moves either fold onto the boundary
# (reflecting truncation, used by the stationary solver) or are dropped
# (used for reachability probes and debug exports).

def _signature_ranges(sig_component, L):
    if sig_component == 0:
        return np.array([0])
    if sig_component == 1:
        return np.array([1]) if L > 1 else np.array([], dtype=int)
    return np.arange(2, L)


def assemble_lattice(block_fn, d, L, S0, fold=True):
    """Sparse matrix of the truncated chain.

    block_fn(sig_free) -> dict mapping z_free (d-tuple) to an S0 x S0
    block.  State order: lattice cell (C order) major, background minor.
    """
    if d == 0:
        blocks = block_fn(())
        return sp.csr_matrix(sum(blocks.values()))
    shape = (L,) * d
    ncells = L ** d
    rows, cols, data = [], [], []
    for sig in np.ndindex(*(3,) * d):
        axes = [_signature_ranges(c, L) for c in sig]
        if any(a.size == 0 for a in axes):
            continue
        grids = np.meshgrid(*axes, indexing="ij")
        cells = np.ravel_multi_index([g.ravel() for g in grids], shape)
        if cells.size == 0:
            continue
        for z, B in block_fn(tuple(sig)).items():
            tgt_coords = [g.ravel() + dz for g, dz in zip(grids, z)]
            if fold:
                tgt_coords = [np.clip(tc, 0, L - 1) for tc in tgt_coords]
                src = cells
            else:
                ok = np.ones(cells.size, dtype=bool)
                for tc in tgt_coords:
                    ok &= (tc >= 0) & (tc <= L - 1)
                if not ok.any():
                    continue
                tgt_coords = [tc[ok] for tc in tgt_coords]
                src = cells[ok]
            tgt = np.ravel_multi_index(tgt_coords, shape)
            lattice = sp.coo_matrix(
                (np.ones(src.size), (src, tgt)), shape=(ncells, ncells)
            )
            part = sp.kron(lattice, sp.csr_matrix(B), format="coo")
            rows.append(part.row)
            cols.append(part.col)
            data.append(part.data)
    if not rows:
        return sp.csr_matrix((ncells * S0, ncells * S0))
    total = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(ncells * S0, ncells * S0),
    )
    total.sum_duplicates()
    return total.tocsr()


# -- reachability ------------------------------------------------------------

CONFIRMED = "ConfirmedSemiIrreducible"
UNKNOWN = "Unknown"


def check_semi_irreducible(model: NetworkModel, probe_state=None, radius=3):
    """BFS probe for semi-irreducibility.

    Checks that the probe state is reachable from every state of the
    box {0..radius}^4 x S0.  Paths are searched inside a larger box of
    side 4*radius + 1: draining a box state needs no arrivals and the
    total count never grows without one, so no coordinate can exceed
    4*radius along such a path (+1 slack for one in-flight customer
    while walking the arrival phase).  Any path found is a genuine path
    of the chain, so success is a proof; failure only returns Unknown,
    because paths may still need more room.
    """
    kernel = BlockKernel(model)
    S0 = kernel.S0
    if probe_state is None:
        probe = (0, 0, 0, 0), 0
    else:
        x, j = probe_state
        if isinstance(j, tuple):
            j = kernel.ravel_background(j)
        probe = tuple(int(v) for v in x), int(j)
    L = radius + 1
    if any(v >= L for v in probe[0]):
        return UNKNOWN
    Lout = 4 * radius + 2

    def block_fn(sig):
        return kernel.q_blocks(sig)

    Q = assemble_lattice(block_fn, 4, Lout, S0, fold=False)
    # adjacency on positive rates, diagonal ignored
    Q = Q.tocoo()
    mask = (Q.data > 1e-14) & (Q.row != Q.col)
    adj = sp.csr_matrix(
        (np.ones(mask.sum()), (Q.row[mask], Q.col[mask])), shape=Q.shape
    )
    target = np.ravel_multi_index(probe[0], (Lout,) * 4) * S0 + probe[1]
    order = breadth_first_order(
        adj.T.tocsr(), target, directed=True, return_predecessors=False
    )
    seen = np.zeros(Q.shape[0], dtype=bool)
    seen[order] = True
    grids = np.meshgrid(*(np.arange(L),) * 4, indexing="ij")
    inner = np.ravel_multi_index([g.ravel() for g in grids], (Lout,) * 4)
    states = (inner[:, None] * S0 + np.arange(S0)).ravel()
    if seen[states].all():
        return CONFIRMED
    return UNKNOWN


def write_generator_triplets(model: NetworkModel, radius, path):
    """Debug export: the generator restricted to {0..radius}^4, one
    "row col rate" line per nonzero, row-major order."""
    kernel = BlockKernel(model)
    L = radius + 1
    Q = assemble_lattice(lambda s: kernel.q_blocks(s), 4, L, kernel.S0, fold=False)
    Q = Q.tocoo()
    order = np.lexsort((Q.col, Q.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# truncated generator, box {L}^4 x {kernel.S0}, nu={float(kernel.nu)!r}\n")
        for k in order:
            if abs(Q.data[k]) <= 1e-14:
                continue
            fh.write(f"{Q.row[k]} {Q.col[k]} {float(Q.data[k])!r}\n")
