"""Induced chains on the boundary faces and their drift tables.

Saturating a subset A of queues pins those coordinates in the interior
occupancy regime; what remains is a Markov chain on the free
coordinates plus the background.  Its stationary distribution yields
the long-run output rate of every queue and hence the drift vector
Delta q^A: input rate minus output rate, per unit time.

Numeric tables solve the induced chains on a reflecting truncation of
the free lattice (out-of-box moves folded onto the boundary), doubling
the truncation level until the distribution has provably negligible
boundary mass.  Closed-form tables cover the priority disciplines and
the symmetric (1,K)-limited case.
"""

from __future__ import annotations

import warnings
from functools import reduce

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    AssumptionViolated,
    ClosedFormUnavailable,
    EmptySubset,
    NotConverged,
    UnsupportedSubset,
)
from .generator import BlockKernel, SUBSET_ALL, assemble_lattice, uniformize
from .primitives import map_arrival_rate
from .service_disciplines import NetworkModel

# the five saturated subsets whose induced chains are positive recurrent
# under the drift sign conditions, in canonical order
CANONICAL_SUBSETS = (
    SUBSET_ALL,
    frozenset((1, 2, 3)),
    frozenset((1, 3, 4)),
    frozenset((1, 4)),
    frozenset((2, 3)),
)

# (subset, queue, required sign) for the ratio criterion to apply
SIGN_CONDITIONS = (
    (SUBSET_ALL, 1, +1),
    (SUBSET_ALL, 2, -1),
    (SUBSET_ALL, 3, +1),
    (SUBSET_ALL, 4, -1),
    (frozenset((1, 2, 3)), 1, -1),
    (frozenset((1, 2, 3)), 2, +1),
    (frozenset((1, 2, 3)), 3, +1),
    (frozenset((1, 3, 4)), 1, +1),
    (frozenset((1, 3, 4)), 3, -1),
    (frozenset((1, 3, 4)), 4, +1),
    (frozenset((1, 4)), 1, +1),
    (frozenset((1, 4)), 4, -1),
    (frozenset((2, 3)), 2, -1),
    (frozenset((2, 3)), 3, +1),
)

RESIDUAL_TOL = 1e-8
TAIL_TOL = 1e-6
SIGN_MARGIN = 1e-9
CROSS_CHECK_TOL = 1e-4


def subset_name(A):
    return "N" if A == SUBSET_ALL else "".join(str(i) for i in sorted(A))


def _sym(c):
    return "0" if c == 0 else "+"


class InducedChain:
    """Reduced kernel over the free coordinates of a saturated subset."""

    def __init__(self, kernel: BlockKernel, A):
        A = frozenset(int(i) for i in A)
        if not A:
            raise EmptySubset("the saturated subset must be nonempty")
        if not A <= SUBSET_ALL:
            raise UnsupportedSubset(f"subset {sorted(A)} is not within {{1,2,3,4}}")
        self.kernel = kernel
        self.A = A
        self.free = tuple(sorted(SUBSET_ALL - A))
        self._p_cache = {}
        self._q_cache = {}

    def full_signature(self, sig_free):
        sig = [2, 2, 2, 2]
        for pos, coord in enumerate(self.free):
            sig[coord - 1] = sig_free[pos]
        return tuple(sig)

    def _reduce(self, blocks):
        out = {}
        for z, B in blocks.items():
            zf = tuple(z[c - 1] for c in self.free)
            if zf in out:
                out[zf] = out[zf] + B
            else:
                out[zf] = B.copy()
        return out

    def p_blocks(self, sig_free):
        sig_free = tuple(int(v) for v in sig_free)
        hit = self._p_cache.get(sig_free)
        if hit is None:
            hit = self._reduce(self.kernel.p_blocks(self.full_signature(sig_free)))
            self._p_cache[sig_free] = hit
        return hit

    def q_blocks(self, sig_free):
        sig_free = tuple(int(v) for v in sig_free)
        hit = self._q_cache.get(sig_free)
        if hit is None:
            hit = self._reduce(self.kernel.q_blocks(self.full_signature(sig_free)))
            self._q_cache[sig_free] = hit
        return hit


def build_induced_chain(kernel: BlockKernel, A) -> InducedChain:
    return InducedChain(kernel, A)


class InducedChainSolution:
    """Stationary distribution of a truncated induced chain."""

    __slots__ = (
        "A", "free", "levels", "dist", "residual", "tail_mass",
        "converged", "history", "note",
    )

    def __init__(self, A, free, levels, dist, residual, tail_mass, converged,
                 history, note):
        self.A = A
        self.free = free
        self.levels = levels
        self.dist = dist
        self.residual = residual
        self.tail_mass = tail_mass
        self.converged = converged
        self.history = history
        self.note = note

    def group_masses(self):
        """Probability mass per free-coordinate signature, as a vector
        over background states."""
        d = len(self.free)
        S0 = self.dist.shape[-1]
        if d == 0:
            return {(): self.dist.reshape(S0)}
        L = self.dist.shape[0]
        out = {}
        for sig in np.ndindex(*(3,) * d):
            slices = []
            empty = False
            for c in sig:
                if c == 0:
                    slices.append(slice(0, 1))
                elif c == 1:
                    if L < 2:
                        empty = True
                        break
                    slices.append(slice(1, 2))
                else:
                    if L < 3:
                        empty = True
                        break
                    slices.append(slice(2, L))
            if empty:
                continue
            block = self.dist[tuple(slices)]
            out[tuple(sig)] = block.reshape(-1, S0).sum(axis=0)
        return out


def _stationary_of(P):
    """Stationary row vector of a finite stochastic matrix.

    Direct sparse solve of the balance equations with one equation
    replaced by normalization; falls back to power iteration when the
    solve misbehaves (multiple closed classes, conditioning).
    """
    n = P.shape[0]
    pi = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            if n <= 400:
                A = (P.toarray() if sp.issparse(P) else np.asarray(P)).T - np.eye(n)
                A[0, :] = 1.0
                b = np.zeros(n)
                b[0] = 1.0
                pi = np.linalg.solve(A, b)
            else:
                A = (P.T - sp.identity(n, format="csr")).tocsr()
                ones_row = sp.csr_matrix(np.ones((1, n)))
                A = sp.vstack([ones_row, A[1:, :]], format="csc")
                b = np.zeros(n)
                b[0] = 1.0
                # preconditioned iterative solve first: direct LU fill-in
                # is prohibitive on the lattice-times-background graphs
                try:
                    ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=20)
                    M = spla.LinearOperator((n, n), ilu.solve)
                    pi, info = spla.gmres(A, b, M=M, rtol=1e-13, atol=0.0,
                                          maxiter=300, restart=80)
                    if info != 0:
                        pi = None
                except Exception:
                    pi = None
                if pi is None:
                    pi = spla.spsolve(A, b)
    except Exception:
        pi = None
    if pi is not None:
        bad = (not np.all(np.isfinite(pi))) or pi.min() < -1e-8 or pi.sum() <= 0
        if not bad:
            pi = np.clip(pi, 0.0, None)
            pi /= pi.sum()
            if np.max(np.abs(pi @ P - pi)) <= 1e-9:
                return pi
    # power iteration: P has strictly positive diagonal, so this converges
    pi = np.full(n, 1.0 / n)
    for _ in range(200000):
        nxt = pi @ P
        nxt = np.asarray(nxt).ravel()
        s = nxt.sum()
        if s <= 0:
            break
        nxt /= s
        delta = np.max(np.abs(nxt - pi))
        pi = nxt
        if delta <= 1e-14:
            break
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def solve_stationary(chain: InducedChain, levels=32, cap=512,
                     max_states=3_000_000) -> InducedChainSolution:
    """Stationary distribution with reflecting truncation.

    Starts at `levels` per free coordinate and doubles until the
    residual of the untruncated balance equations on interior states
    is below 1e-8 and the boundary mass is below 1e-6, the cap is hit,
    the state budget is exhausted, or the boundary mass stops decaying
    (the signature of a transient chain).
    """
    d = len(chain.free)
    S0 = chain.kernel.S0

    if d == 0:
        P = assemble_lattice(chain.p_blocks, 0, 1, S0, fold=True)
        pi = _stationary_of(P)
        residual = float(np.max(np.abs(pi @ P - pi)))
        dist = pi.reshape((S0,))
        return InducedChainSolution(
            chain.A, chain.free, 0, dist, residual, 0.0,
            residual <= RESIDUAL_TOL, [(0, residual, 0.0)], "",
        )

    L = int(levels)
    history = []
    prev_tail = None
    note = ""
    while True:
        if L ** d * S0 > max_states:
            note = f"state budget exceeded at level {L}"
            L //= 2
            break
        P = assemble_lattice(chain.p_blocks, d, L, S0, fold=True)
        pi = _stationary_of(P)
        resid_vec = np.abs(pi @ P - pi)
        grid = resid_vec.reshape((L,) * d + (S0,))
        interior = grid[(slice(0, L - 1),) * d]
        residual = float(interior.max()) if interior.size else float(resid_vec.max())
        dist = pi.reshape((L,) * d + (S0,))
        on_boundary = np.zeros((L,) * d, dtype=bool)
        for axis in range(d):
            idx = [slice(None)] * d
            idx[axis] = L - 1
            on_boundary[tuple(idx)] = True
        tail = float(dist[on_boundary].sum())
        history.append((L, residual, tail))
        if residual <= RESIDUAL_TOL and tail <= TAIL_TOL:
            return InducedChainSolution(
                chain.A, chain.free, L, dist, residual, tail, True, history, "",
            )
        if prev_tail is not None and tail > 0.9 * prev_tail:
            note = "boundary mass is not decaying; chain is likely transient"
            break
        if L >= cap:
            note = f"truncation cap {cap} reached"
            break
        prev_tail = tail
        L *= 2
    return InducedChainSolution(
        chain.A, chain.free, history[-1][0] if history else L,
        dist if history else None,
        history[-1][1] if history else np.inf,
        history[-1][2] if history else np.inf,
        False, history, note,
    )


def _lift(dims, idx, w):
    parts = [np.ones(k) for k in dims]
    parts[idx] = w
    return reduce(np.kron, parts)


def output_rates(model: NetworkModel, chain: InducedChain,
                 sol: InducedChainSolution) -> np.ndarray:
    """Long-run completion rate of each queue (events per unit time).

    Weighs the continuous-time completion matrices of the regime each
    face point sits in by the stationary mass there.  The saturated
    coordinates count as interior (>= 2).
    """
    if not sol.converged:
        raise NotConverged(
            f"induced chain {subset_name(chain.A)} did not converge: {sol.note or sol.history}"
        )
    t1, t2 = model.msp1.t, model.msp2.t
    dims = chain.kernel.dims
    mu = np.zeros(4)
    for sig_free, pi in sol.group_masses().items():
        full = chain.full_signature(sig_free)
        c1, c2, c3, c4 = full
        if c1 >= 1:
            key = ("1*" if c1 == 1 else "2*") + _sym(c4)
            mu[0] += pi @ _lift(dims, 2, t1[key].sum(axis=1))
        if c2 >= 1:
            key = _sym(c3) + ("1*" if c2 == 1 else "2*")
            mu[1] += pi @ _lift(dims, 3, t2[key].sum(axis=1))
        if c3 >= 1:
            key = ("1*" if c3 == 1 else "2*") + _sym(c2)
            mu[2] += pi @ _lift(dims, 3, t2[key].sum(axis=1))
        if c4 >= 1:
            key = _sym(c1) + ("1*" if c4 == 1 else "2*")
            mu[3] += pi @ _lift(dims, 2, t1[key].sum(axis=1))
    return mu


def input_rates(model: NetworkModel, mu_bar) -> np.ndarray:
    """Effective input rates given the output rates: exogenous streams
    plus internal transfers (Q1 -> Q2, feedback into Q3, Q3 -> Q4)."""
    lam1 = map_arrival_rate(model.map1)
    lam3 = map_arrival_rate(model.map3)
    return np.array([lam1, mu_bar[0], lam3 + model.p * mu_bar[1], mu_bar[2]])


def mean_displacement(chain: InducedChain, sol: InducedChainSolution) -> np.ndarray:
    """Per-step mean displacement of the uniformized chain, all four
    coordinates (saturated ones use the full, unreduced moves)."""
    a = np.zeros(4)
    for sig_free, pi in sol.group_masses().items():
        full = chain.full_signature(sig_free)
        for z, B in chain.kernel.p_blocks(full).items():
            if z == (0, 0, 0, 0):
                continue
            w = float(pi @ B.sum(axis=1))
            for i in range(4):
                a[i] += z[i] * w
    return a


# --- drift tables -----------------------------------------------------------

class DriftEntry:
    __slots__ = ("subset", "input_rates", "output_rates", "drifts",
                 "provenance", "diagnostics")

    def __init__(self, subset, input_rates, output_rates, drifts, provenance,
                 diagnostics=None):
        self.subset = subset
        self.input_rates = None if input_rates is None else np.asarray(input_rates, float)
        self.output_rates = None if output_rates is None else np.asarray(output_rates, float)
        self.drifts = None if drifts is None else np.asarray(drifts, float)
        self.provenance = provenance
        self.diagnostics = diagnostics or {}

    def to_json_dict(self):
        return {
            "subset": sorted(self.subset),
            "inputRates": None if self.input_rates is None else list(self.input_rates),
            "outputRates": None if self.output_rates is None else list(self.output_rates),
            "drifts": None if self.drifts is None else list(self.drifts),
            "provenance": self.provenance,
            "diagnostics": _json_safe(self.diagnostics),
        }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


class DriftTable:
    """Drift vectors for the canonical saturated subsets.

    Holds a closed-form table, a numeric table, or both; `primary`
    names the one downstream classification reads (closed form when
    available)."""

    def __init__(self, mode, lam1, lam3, p, service_rates, closed, numeric,
                 cross_check, notes, nu):
        self.mode = mode
        self.lam1 = lam1
        self.lam3 = lam3
        self.p = p
        self.service_rates = service_rates
        self.closed = closed
        self.numeric = numeric
        self.cross_check = cross_check
        self.notes = notes
        self.nu = nu

    @property
    def primary(self):
        return self.closed if self.closed is not None else self.numeric

    def entry(self, A) -> DriftEntry:
        A = frozenset(A)
        table = self.primary
        if table is None or A not in table:
            raise UnsupportedSubset(f"no drift entry for subset {subset_name(A)}")
        return table[A]

    def drifts(self, A) -> np.ndarray:
        e = self.entry(A)
        if e.drifts is None:
            raise NotConverged(
                f"drift for subset {subset_name(A)} is unavailable: "
                f"{e.diagnostics.get('note', 'no converged solution')}"
            )
        return e.drifts

    def direction(self, A) -> np.ndarray:
        """Drift vector with the stable (off-subset) coordinates zeroed,
        suitable for exact geometric constructions."""
        A = frozenset(A)
        d = self.drifts(A).copy()
        for i in range(4):
            if (i + 1) not in A:
                d[i] = 0.0
        return d

    def to_json_dict(self):
        def table_json(table):
            if table is None:
                return None
            return [table[A].to_json_dict() for A in CANONICAL_SUBSETS if A in table]

        return {
            "mode": self.mode,
            "lambda1": self.lam1,
            "lambda3": self.lam3,
            "p": self.p,
            "serviceRates": list(self.service_rates),
            "nu": self.nu,
            "closed": table_json(self.closed),
            "numeric": table_json(self.numeric),
            "crossCheck": _json_safe(self.cross_check),
            "notes": list(self.notes),
        }


def _priority_closed(lam1, lam3, p, mu):
    mu1, mu2, mu3, mu4 = mu
    out = {
        SUBSET_ALL: (0.0, mu2, 0.0, mu4),
        frozenset((1, 2, 3)): (mu1, mu2, 0.0, 0.0),
        frozenset((1, 3, 4)): (0.0, 0.0, mu3, mu4),
        frozenset((1, 4)): (0.0, 0.0, lam3, mu4),
        frozenset((2, 3)): (lam1, mu2, 0.0, 0.0),
    }
    entries = {}
    for A, rates in out.items():
        rates = np.array(rates)
        inp = np.array([lam1, rates[0], lam3 + p * rates[1], rates[2]])
        entries[A] = DriftEntry(A, inp, rates, inp - rates, "ClosedForm")
    return entries


def _limited_closed(lam1, lam3, p, mu, K):
    mu1, mu2 = mu[0], mu[1]
    D = 1.0 / mu1 + K / mu2
    g = 1.0 / D
    gK = K / D
    m_active = (1.0 + (K - 1) * mu1 / mu2) / D
    out = {
        SUBSET_ALL: (g, gK, g, gK),
        frozenset((1, 2, 3)): (m_active, gK, g, g),
        frozenset((1, 3, 4)): (g, g, m_active, gK),
        frozenset((1, 4)): (g, g, lam3, gK),
        frozenset((2, 3)): (lam1, gK, g, g),
    }
    entries = {}
    for A, rates in out.items():
        rates = np.array(rates)
        inp = np.array([lam1, rates[0], lam3 + p * rates[1], rates[2]])
        entries[A] = DriftEntry(A, inp, rates, inp - rates, "ClosedForm")
    return entries


def closed_form_table(model: NetworkModel, lam1=None, lam3=None):
    """Closed-form drift entries, or raise when outside their scope."""
    if lam1 is None:
        lam1 = map_arrival_rate(model.map1)
    if lam3 is None:
        lam3 = map_arrival_rate(model.map3)
    mu = model.service_rates
    rho = (
        lam1 / mu[0],
        lam1 / mu[1],
        (model.p * lam1 + lam3) / mu[2],
        (model.p * lam1 + lam3) / mu[3],
    )
    if not (rho[0] + rho[3] < 1.0 and rho[1] + rho[2] < 1.0):
        raise AssumptionViolated(
            f"nominal condition fails: station loads are {rho[0] + rho[3]:.6g} "
            f"and {rho[1] + rho[2]:.6g}"
        )
    if model.discipline in ("non_preemptive", "preemptive_resume"):
        if not (mu[0] > mu[1] and mu[2] > mu[3]):
            raise AssumptionViolated(
                "closed form needs mu1 > mu2 and mu3 > mu4 "
                f"(got mu={tuple(round(v, 6) for v in mu)})"
            )
        return _priority_closed(lam1, lam3, model.p, mu)
    if model.discipline == "limited":
        scale = max(abs(lam1), abs(lam3), *mu)
        symmetric = (
            abs(lam1 - lam3) <= 1e-9 * scale
            and abs(mu[0] - mu[2]) <= 1e-9 * scale
            and abs(mu[1] - mu[3]) <= 1e-9 * scale
            and model.p == 0.0
        )
        if not symmetric:
            raise AssumptionViolated(
                "limited closed form needs the symmetric case: "
                "lambda1 = lambda3, mu1 = mu3, mu2 = mu4, p = 0"
            )
        if not mu[0] > mu[1]:
            raise AssumptionViolated("limited closed form needs mu1 > mu2")
        rho1, rho2 = lam1 / mu[0], lam1 / mu[1]
        kstar = max(1.0, (1.0 - rho1) / rho2, rho1 / (1.0 - rho2))
        if not model.K > kstar:
            raise AssumptionViolated(
                f"visit budget K={model.K} must exceed K*={kstar:.6g}"
            )
        return _limited_closed(lam1, lam3, model.p, mu, model.K)
    raise ClosedFormUnavailable(
        f"no closed-form drift table for discipline {model.discipline!r}"
    )


def numeric_table(model: NetworkModel, levels=32, cap=512,
                  max_states=3_000_000, kernel=None):
    """Numeric drift entries for the canonical subsets."""
    if kernel is None:
        kernel = uniformize(model)
    entries = {}
    for A in CANONICAL_SUBSETS:
        chain = build_induced_chain(kernel, A)
        sol = solve_stationary(chain, levels=levels, cap=cap, max_states=max_states)
        diag = {
            "levels": sol.levels,
            "residual": sol.residual,
            "tailMass": sol.tail_mass,
            "converged": sol.converged,
            "history": sol.history,
        }
        if sol.note:
            diag["note"] = sol.note
        if not sol.converged:
            entries[A] = DriftEntry(A, None, None, None, "Numeric", diag)
            continue
        mu_bar = output_rates(model, chain, sol)
        inp = input_rates(model, mu_bar)
        drifts = inp - mu_bar
        off = [abs(drifts[i - 1]) for i in range(1, 5) if i not in A]
        diag["offSubsetDriftMax"] = max(off) if off else 0.0
        entries[A] = DriftEntry(A, inp, mu_bar, drifts, "Numeric", diag)
    return entries, kernel.nu


def drift_table(model: NetworkModel, mode="both", levels=32, cap=512,
                max_states=3_000_000) -> DriftTable:
    """Assemble the drift table in the requested mode.

    "both" computes closed and numeric tables and cross-checks them at
    1e-4 relative per entry; classification downstream reads the closed
    table when present.  A closed form that is out of scope degrades
    "both" to numeric-only with a note instead of failing.
    """
    if mode not in ("closed", "numeric", "both"):
        raise ValueError(f"unknown drift table mode {mode!r}")
    lam1 = map_arrival_rate(model.map1)
    lam3 = map_arrival_rate(model.map3)
    notes = []
    closed = None
    if mode in ("closed", "both"):
        try:
            closed = closed_form_table(model, lam1, lam3)
        except (ClosedFormUnavailable, AssumptionViolated) as exc:
            if mode == "closed":
                raise
            notes.append(f"closed form unavailable: {exc}")
    numeric = None
    nu = None
    if mode in ("numeric", "both"):
        numeric, nu = numeric_table(model, levels=levels, cap=cap,
                                    max_states=max_states)
    cross = None
    if closed is not None and numeric is not None:
        cross = {"tolerance": CROSS_CHECK_TOL, "subsets": {}, "ok": True}
        worst = 0.0
        for A in CANONICAL_SUBSETS:
            num = numeric.get(A)
            if num is None or num.drifts is None:
                cross["subsets"][subset_name(A)] = None
                cross["ok"] = False
                continue
            clo = closed[A]
            rel = max(
                abs(num.drifts[i - 1] - clo.drifts[i - 1])
                / max(abs(clo.drifts[i - 1]), 1e-8)
                for i in sorted(A)
            )
            cross["subsets"][subset_name(A)] = rel
            worst = max(worst, rel)
            if rel > CROSS_CHECK_TOL:
                cross["ok"] = False
        cross["worst"] = worst
    return DriftTable(mode, lam1, lam3, model.p, model.service_rates,
                      closed, numeric, cross, notes, nu)


def check_sign_conditions(table: DriftTable):
    """Evaluate the fourteen drift sign conditions on the primary table.

    A condition within 1e-9 of zero is reported as marginal and counts
    as failed; the ratio criterion is not trusted that close to a
    degenerate configuration."""
    results = []
    all_hold = True
    for A, queue, sign in SIGN_CONDITIONS:
        item = {
            "subset": subset_name(A),
            "queue": queue,
            "required": ">0" if sign > 0 else "<0",
        }
        try:
            value = float(table.drifts(A)[queue - 1])
        except (UnsupportedSubset, NotConverged) as exc:
            item.update(value=None, ok=False, marginal=False, note=str(exc))
            all_hold = False
            results.append(item)
            continue
        marginal = abs(value) <= SIGN_MARGIN
        ok = (not marginal) and (value > 0) == (sign > 0)
        item.update(value=value, ok=bool(ok), marginal=bool(marginal))
        if not ok:
            all_hold = False
        results.append(item)
    return {"allHold": all_hold, "conditions": results}
