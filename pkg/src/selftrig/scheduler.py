"""Runtime side of the trigger: precomputed tables and the dwell-time scan.

The online controller only ever evaluates quadratic forms. For each grid
index ``n`` the table stores ``Q_n = L_n' P L_n - exp(-2 lam n delta) P``
where ``L_n`` is the exact held-input transition over ``n delta``;
``x' Q_n x <= 0`` certifies the enforced decay at that grid point. The next
execution is scheduled ``max(tau_min, n_k delta)`` ahead, with ``n_k`` the
longest prefix of grid points that all pass the test.

Two evaluators are provided. ``next_update`` works on the full matrices.
``next_update_packed`` evaluates the same forms as dot products against
packed monomial vectors (upper-triangular coefficients with doubled
off-diagonals against ``z = (x_i x_j)_{i<=j}``), which is how a constrained
platform would run it; it carries an exact multiply-add counter and only
stores the forms for ``n_min..n_max`` since the prefix below ``n_min``
cannot change the schedule for any design with ``tau_min`` below the
minimum inter-execution time.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigError, DimensionError, NumericError


class TriggerTables:
    """Precomputed transition matrices and decay-test forms on the grid."""

    def __init__(self, delta, tau_min, n_min, n_max, transitions, forms, packed):
        self.delta = float(delta)
        self.tau_min = float(tau_min)
        self.n_min = int(n_min)
        self.n_max = int(n_max)
        self.transitions = transitions    # (n_max+1, m, m), L_0 = I
        self.forms = forms                # (n_max+1, m, m), Q_0 = 0
        self.packed = packed              # (n_max - n_min + 1, m(m+1)/2) or None

    @property
    def m(self):
        return self.forms.shape[1]

    def to_jsonable(self):
        """Plain-data view for embedding in a design report."""
        out = {
            "delta": self.delta,
            "tau_min": self.tau_min,
            "n_min": self.n_min,
            "n_max": self.n_max,
            "transitions": [L.tolist() for L in self.transitions],
            "forms": [Q.tolist() for Q in self.forms],
        }
        if self.packed is not None:
            out["packed"] = [v.tolist() for v in self.packed]
        return out

    @classmethod
    def from_jsonable(cls, data):
        """Rebuild tables from the plain-data view of a design report."""
        try:
            transitions = np.asarray(data["transitions"], dtype=float)
            forms = np.asarray(data["forms"], dtype=float)
            packed = (np.asarray(data["packed"], dtype=float)
                      if "packed" in data else None)
            return cls(data["delta"], data["tau_min"], data["n_min"],
                       data["n_max"], transitions, forms, packed)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed trigger tables: {exc}") from exc


def _pack_form(Q):
    """Upper-triangular coefficients with off-diagonals doubled, row-major."""
    m = Q.shape[0]
    out = np.empty(m * (m + 1) // 2)
    k = 0
    for i in range(m):
        out[k] = Q[i, i]
        k += 1
        for j in range(i + 1, m):
            out[k] = 2.0 * Q[i, j]
            k += 1
    return out


def _monomials(x):
    """Monomial vector z = (x_i x_j)_{i<=j} in the same packing order."""
    m = x.shape[0]
    out = np.empty(m * (m + 1) // 2)
    k = 0
    for i in range(m):
        for j in range(i, m):
            out[k] = x[i] * x[j]
            k += 1
    return out


def build_tables(sys, cert, trig, packed=True):
    """Precompute the trigger tables for a designed configuration.

    Each transition is taken from one exponential of the input-augmented
    matrix ``[[A, I], [0, 0]]`` over ``n delta``, whose top row blocks give
    ``exp(A n delta)`` and the input integral; no recurrence is involved, so
    the table entries carry no accumulated error.
    """
    m = sys.m
    A = sys.A
    BK = sys.B @ sys.K
    P = cert.P
    aug = np.block([[A, np.eye(m)], [np.zeros((m, 2 * m))]])
    transitions = np.empty((trig.n_max + 1, m, m))
    forms = np.empty((trig.n_max + 1, m, m))
    transitions[0] = np.eye(m)
    forms[0] = np.zeros((m, m))
    for n in range(1, trig.n_max + 1):
        E = linalg.expm(aug, n * trig.delta)
        L = E[:m, :m] + E[:m, m:] @ BK
        Q = L.T @ P @ L - math.exp(-2.0 * cert.lam * n * trig.delta) * P
        transitions[n] = L
        forms[n] = 0.5 * (Q + Q.T)
    packed_vecs = None
    if packed:
        packed_vecs = np.stack([_pack_form(forms[n])
                                for n in range(trig.n_min, trig.n_max + 1)])
    return TriggerTables(trig.delta, trig.tau_min, trig.n_min, trig.n_max,
                         transitions, forms, packed_vecs)


def trigger_value(x, n, tables):
    """Decay-test value ``x' Q_n x`` at grid index ``n``."""
    if not 0 <= n <= tables.n_max:
        raise IndexError(f"grid index {n} outside [0, {tables.n_max}]")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != tables.m:
        raise DimensionError(f"state has length {x.shape[0]}, expected {tables.m}")
    return float(x @ tables.forms[n] @ x)


@dataclass
class TriggerDecision:
    """Outcome of one online scheduling decision.

    ``op_count`` is the modeled multiply-add cost of the evaluation path
    that produced the decision (comparisons included for the packed path).
    """

    n: int
    tau: float
    evaluations: int
    op_count: int


def next_update(x, tables, skip_low=False):
    """Schedule the next execution by scanning the full-matrix forms.

    Scans ``n = 1..n_max`` and stops at the first failed test; the schedule
    is ``max(tau_min, n_k delta)``. With ``skip_low`` the scan starts at
    ``n_min + 1``, which cannot change the outcome when the design
    guarantees the prefix (it always does when ``tau_min`` is at most the
    minimum inter-execution time) but is kept off by default so every
    logged decision is fully audited.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != tables.m:
        raise DimensionError(f"state has length {x.shape[0]}, expected {tables.m}")
    if not np.all(np.isfinite(x)):
        raise NumericError("state has non-finite entries")
    m = tables.m
    work = m * m + m
    start = tables.n_min + 1 if skip_low else 1
    n_k = tables.n_max
    evaluations = 0
    for n in range(start, tables.n_max + 1):
        evaluations += 1
        if float(x @ tables.forms[n] @ x) > 0.0:
            n_k = n - 1
            break
    return TriggerDecision(
        n=n_k,
        tau=max(tables.tau_min, n_k * tables.delta),
        evaluations=evaluations,
        op_count=evaluations * work,
    )


def next_update_packed(x, tables, zero_shortcut=True):
    """Schedule the next execution from the packed coefficient vectors.

    Builds the monomial vector once (``m(m+1)/2`` multiplies) and evaluates
    the stored forms for ``n_min+1 .. n_max`` as length-``m(m+1)/2`` dot
    products (one multiply and one add per coefficient) plus one comparison
    each, which the counter tallies exactly; a full scan therefore costs
    ``q + (2q+1) m(m+1)/2`` operations with ``q = n_max - n_min``. Decisions
    are identical to :func:`next_update` whenever the design guarantees the
    prefix below ``n_min``.
    """
    if tables.packed is None:
        raise ConfigError("tables were built without packed coefficient vectors")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != tables.m:
        raise DimensionError(f"state has length {x.shape[0]}, expected {tables.m}")
    if not np.all(np.isfinite(x)):
        raise NumericError("state has non-finite entries")
    if zero_shortcut and not np.any(x):
        return TriggerDecision(n=tables.n_max, tau=max(tables.tau_min, tables.n_max * tables.delta),
                               evaluations=0, op_count=0)
    L = tables.m * (tables.m + 1) // 2
    z = _monomials(x)
    op_count = L
    n_k = tables.n_max
    evaluations = 0
    for n in range(tables.n_min + 1, tables.n_max + 1):
        evaluations += 1
        op_count += 2 * L + 1
        if float(tables.packed[n - tables.n_min] @ z) > 0.0:
            n_k = n - 1
            break
    return TriggerDecision(
        n=n_k,
        tau=max(tables.tau_min, n_k * tables.delta),
        evaluations=evaluations,
        op_count=op_count,
    )
