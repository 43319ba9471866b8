"""Sparse truncated Fourier-Taylor series on T^d x R^d x R^(2*d0).

A series is a finite sum  sum_{k,j,q} c_{kjq} e^{i<k,x>} y^j z^q  with
x in T^d (angles), y in R^d (actions) and z = (u, v) in R^(2*d0) (one
position/momentum pair per resonant direction).  Coefficients live in a
sparse map keyed by the integer multi-index (k, j, q); absent keys are
exact zeros.  Series values are immutable: every operation is a pure
function returning a new series, so values can be shared freely.

The canonical bracket convention used throughout is

    {f, g} = sum_i (df/dy_i dg/dx_i - df/dx_i dg/dy_i)
           + sum_j (df/du_j dg/dv_j - df/dv_j dg/du_j)

which makes {<w,y>, e^{i<k,x>}} = i<k,w> e^{i<k,x>}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryMismatchError, InvariantError

PRUNE_EPS = 1e-15
LIE_ORDER_CAP = 32


@dataclass(frozen=True)
class PhaseGeometry:
    """Dimension bookkeeping: d angle/action pairs, d0 resonant pairs."""

    d: int
    d0: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("need at least one angle/action pair (d >= 1)")
        if self.d0 < 0:
            raise ValueError("d0 must be non-negative")

    @property
    def l(self) -> int:
        return self.d + self.d0

    @property
    def zdim(self) -> int:
        return 2 * self.d0


def knorm(k) -> int:
    """Sup-norm of a Fourier multi-index; the |k| used by all cutoffs."""
    return max((abs(int(c)) for c in k), default=0)


def _degree(j, q) -> int:
    return sum(j) + sum(q)


class TruncationLog:
    """Running record of coefficient mass dropped by truncation/pruning."""

    def __init__(self):
        self.records = []

    def add(self, op: str, dropped_mass: float, dropped_terms: int):
        if dropped_terms:
            self.records.append((op, dropped_mass, dropped_terms))

    def total_dropped(self) -> float:
        return sum(r[1] for r in self.records)

    def drain(self):
        out, self.records = self.records, []
        return out


#: Module-wide log; operations report dropped mass here, never silently.
TRUNCATION_LOG = TruncationLog()


class FourierTaylorSeries:
    """Immutable sparse series; see module docstring for the monomial shape.

    Parameters
    ----------
    geometry : PhaseGeometry
    kmax : int
        Capacity bound on the Fourier radius, sup-norm on k.
    degmax : int
        Capacity bound on the total polynomial degree |j| + |q|.
    coeffs : mapping from (k, j, q) tuples to complex, optional
    """

    __slots__ = ("geometry", "kmax", "degmax", "_coeffs")

    def __init__(self, geometry: PhaseGeometry, kmax: int, degmax: int,
                 coeffs=None, *, prune: bool = True, _label: str = "init"):
        object.__setattr__(self, "geometry", geometry)
        object.__setattr__(self, "kmax", int(kmax))
        object.__setattr__(self, "degmax", int(degmax))
        store = {}
        dropped = 0.0
        ndropped = 0
        for (k, j, q), c in (coeffs or {}).items():
            k = tuple(int(v) for v in k)
            j = tuple(int(v) for v in j)
            q = tuple(int(v) for v in q)
            self._check_key(k, j, q)
            c = complex(c)
            if prune and abs(c) <= PRUNE_EPS:
                if c != 0:
                    dropped += abs(c)
                    ndropped += 1
                continue
            if c != 0:
                store[(k, j, q)] = c
        if ndropped:
            TRUNCATION_LOG.add(f"prune:{_label}", dropped, ndropped)
        object.__setattr__(self, "_coeffs", store)

    def __setattr__(self, name, value):
        raise AttributeError("FourierTaylorSeries is immutable")

    def _check_key(self, k, j, q):
        g = self.geometry
        if len(k) != g.d or len(j) != g.d or len(q) != g.zdim:
            raise ValueError(f"index dims {len(k)},{len(j)},{len(q)} do not "
                             f"match geometry d={g.d}, 2*d0={g.zdim}")
        if knorm(k) > self.kmax:
            raise ValueError(f"mode {k} exceeds kmax={self.kmax}")
        if any(v < 0 for v in j) or any(v < 0 for v in q):
            raise ValueError("polynomial powers must be non-negative")
        if _degree(j, q) > self.degmax:
            raise ValueError(f"degree {_degree(j, q)} exceeds degmax={self.degmax}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, geometry: PhaseGeometry, kmax: int = 0, degmax: int = 0):
        return cls(geometry, kmax, degmax, {})

    @classmethod
    def from_terms(cls, geometry: PhaseGeometry, terms, kmax=None, degmax=None):
        """Build from an iterable of ((k, j, q), coeff); bounds inferred if omitted."""
        items = [((tuple(k), tuple(j), tuple(q)), complex(c))
                 for (k, j, q), c in terms]
        if kmax is None:
            kmax = max((knorm(k) for (k, _, _), _ in items), default=0)
        if degmax is None:
            degmax = max((_degree(j, q) for (_, j, q), _ in items), default=0)
        agg = {}
        for key, c in items:
            agg[key] = agg.get(key, 0j) + c
        return cls(geometry, kmax, degmax, agg)

    @classmethod
    def constant(cls, geometry: PhaseGeometry, value):
        zk = (0,) * geometry.d
        zq = (0,) * geometry.zdim
        return cls(geometry, 0, 0, {(zk, zk, zq): complex(value)})

    @classmethod
    def linear_y(cls, geometry: PhaseGeometry, omega):
        """<omega, y> as a series."""
        omega = np.asarray(omega, dtype=float)
        zk = (0,) * geometry.d
        zq = (0,) * geometry.zdim
        terms = {}
        for i, w in enumerate(omega):
            j = tuple(1 if a == i else 0 for a in range(geometry.d))
            terms[(zk, j, zq)] = complex(w)
        return cls(geometry, 0, 1, terms)

    @classmethod
    def linear_z(cls, geometry: PhaseGeometry, b):
        """<b, z> as a series."""
        b = np.asarray(b, dtype=float)
        zk = (0,) * geometry.d
        zj = (0,) * geometry.d
        terms = {}
        for a, v in enumerate(b):
            q = tuple(1 if c == a else 0 for c in range(geometry.zdim))
            terms[(zk, zj, q)] = complex(v)
        return cls(geometry, 0, 1, terms)

    @classmethod
    def quadratic_z(cls, geometry: PhaseGeometry, Q, prefactor=1.0):
        """prefactor * <z, Q z> for a symmetric matrix Q."""
        Q = np.asarray(Q, dtype=float)
        n = geometry.zdim
        zk = (0,) * geometry.d
        zj = (0,) * geometry.d
        terms = {}
        for a in range(n):
            for b in range(a, n):
                c = Q[a, b] if a == b else Q[a, b] + Q[b, a]
                if c == 0.0:
                    continue
                q = [0] * n
                q[a] += 1
                q[b] += 1
                terms[(zk, zj, tuple(q))] = complex(prefactor * c)
        return cls(geometry, 0, 2, terms)

    @classmethod
    def fourier_mode(cls, geometry: PhaseGeometry, k, coeff=1.0):
        zk = (0,) * geometry.d
        zq = (0,) * geometry.zdim
        return cls(geometry, knorm(k), 0, {(tuple(k), zk, zq): complex(coeff)})

    # -- basic access -------------------------------------------------------

    def coeff(self, k, j=None, q=None) -> complex:
        g = self.geometry
        j = (0,) * g.d if j is None else tuple(j)
        q = (0,) * g.zdim if q is None else tuple(q)
        return self._coeffs.get((tuple(k), j, q), 0j)

    def terms(self):
        return self._coeffs.items()

    def __len__(self):
        return len(self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    def norm_l1(self) -> float:
        return sum(abs(c) for c in self._coeffs.values())

    def is_real(self, tol: float = 1e-12) -> bool:
        """True iff c_{-k,j,q} = conj(c_{k,j,q}) for every stored index."""
        for (k, j, q), c in self._coeffs.items():
            mk = tuple(-v for v in k)
            if abs(self._coeffs.get((mk, j, q), 0j) - c.conjugate()) > tol:
                return False
        return True

    def __repr__(self):
        g = self.geometry
        return (f"FourierTaylorSeries(d={g.d}, d0={g.d0}, kmax={self.kmax}, "
                f"degmax={self.degmax}, terms={len(self._coeffs)})")

    def __eq__(self, other):
        if not isinstance(other, FourierTaylorSeries):
            return NotImplemented
        return self.geometry == other.geometry and self._coeffs == other._coeffs

    def __hash__(self):
        return hash((self.geometry, frozenset(self._coeffs.items())))

    # -- arithmetic ---------------------------------------------------------

    def _require_same_geometry(self, other):
        if self.geometry != other.geometry:
            raise GeometryMismatchError(
                f"geometry mismatch: {self.geometry} vs {other.geometry}")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = FourierTaylorSeries.constant(self.geometry, other)
        self._require_same_geometry(other)
        out = dict(self._coeffs)
        for key, c in other._coeffs.items():
            out[key] = out.get(key, 0j) + c
        return FourierTaylorSeries(self.geometry, max(self.kmax, other.kmax),
                                   max(self.degmax, other.degmax), out,
                                   _label="add")

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            other = FourierTaylorSeries.constant(self.geometry, other)
        return self.__add__(other.scale(-1.0))

    def scale(self, c):
        c = complex(c)
        if c == 0:
            return FourierTaylorSeries.zero(self.geometry)
        out = {key: v * c for key, v in self._coeffs.items()}
        return FourierTaylorSeries(self.geometry, self.kmax, self.degmax, out,
                                   _label="scale")

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        self._require_same_geometry(other)
        out = {}
        for (k1, j1, q1), c1 in self._coeffs.items():
            for (k2, j2, q2), c2 in other._coeffs.items():
                key = (tuple(a + b for a, b in zip(k1, k2)),
                       tuple(a + b for a, b in zip(j1, j2)),
                       tuple(a + b for a, b in zip(q1, q2)))
                out[key] = out.get(key, 0j) + c1 * c2
        return FourierTaylorSeries(self.geometry, self.kmax + other.kmax,
                                   self.degmax + other.degmax, out,
                                   _label="mul")

    __rmul__ = __mul__

    def conjugate(self):
        out = {(tuple(-v for v in k), j, q): c.conjugate()
               for (k, j, q), c in self._coeffs.items()}
        return FourierTaylorSeries(self.geometry, self.kmax, self.degmax, out)

    # -- calculus -----------------------------------------------------------

    def diff_x(self, i: int):
        out = {}
        for (k, j, q), c in self._coeffs.items():
            if k[i]:
                out[(k, j, q)] = out.get((k, j, q), 0j) + 1j * k[i] * c
        return FourierTaylorSeries(self.geometry, self.kmax, self.degmax, out,
                                   prune=False)

    def diff_y(self, i: int):
        out = {}
        for (k, j, q), c in self._coeffs.items():
            if j[i]:
                j2 = list(j)
                j2[i] -= 1
                key = (k, tuple(j2), q)
                out[key] = out.get(key, 0j) + j[i] * c
        return FourierTaylorSeries(self.geometry, self.kmax,
                                   max(0, self.degmax - 1), out, prune=False)

    def diff_z(self, a: int):
        out = {}
        for (k, j, q), c in self._coeffs.items():
            if q[a]:
                q2 = list(q)
                q2[a] -= 1
                key = (k, j, tuple(q2))
                out[key] = out.get(key, 0j) + q[a] * c
        return FourierTaylorSeries(self.geometry, self.kmax,
                                   max(0, self.degmax - 1), out, prune=False)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, x=None, y=None, z=None) -> complex:
        g = self.geometry
        x = np.zeros(g.d) if x is None else np.asarray(x, dtype=float)
        y = np.zeros(g.d) if y is None else np.asarray(y, dtype=float)
        z = np.zeros(g.zdim) if z is None else np.asarray(z, dtype=float)
        total = 0j
        for (k, j, q), c in self._coeffs.items():
            v = c * np.exp(1j * float(np.dot(k, x)))
            for i, p in enumerate(j):
                if p:
                    v *= y[i] ** p
            for a, p in enumerate(q):
                if p:
                    v *= z[a] ** p
            total += v
        return total

    # -- structural helpers -------------------------------------------------

    def partition(self, pred):
        """Split into (kept, rest) by a predicate on (k, j, q); exact, no pruning."""
        kept, rest = {}, {}
        for key, c in self._coeffs.items():
            (kept if pred(*key) else rest)[key] = c
        mk = FourierTaylorSeries(self.geometry, self.kmax, self.degmax, kept,
                                 prune=False)
        mr = FourierTaylorSeries(self.geometry, self.kmax, self.degmax, rest,
                                 prune=False)
        return mk, mr


class GeneratingSeries(FourierTaylorSeries):
    """A series restricted to the generator ansatz: modes 0 < |k| <= Kplus
    carrying constant, linear-y, linear-z and quadratic-z parts, plus a
    single k = 0 linear-z term."""

    __slots__ = ()

    def __init__(self, geometry, kmax, degmax, coeffs=None, **kw):
        super().__init__(geometry, kmax, degmax, coeffs, **kw)
        for (k, j, q), _ in self.terms():
            if knorm(k) == 0:
                if sum(j) != 0 or sum(q) != 1:
                    raise InvariantError(
                        f"generator ansatz violated at k=0: j={j}, q={q}")
            elif (sum(j), sum(q)) not in ((0, 0), (1, 0), (0, 1), (0, 2)):
                raise InvariantError(
                    f"generator ansatz violated at k={k}: j={j}, q={q}")

    @classmethod
    def wrap(cls, s: FourierTaylorSeries) -> "GeneratingSeries":
        return cls(s.geometry, s.kmax, s.degmax, dict(s.terms()), prune=False)


# -- ansatz predicates -------------------------------------------------------

def ansatz_shape(j, q) -> bool:
    """Monomial shapes the low-mode cutoff keeps: constant, linear-y,
    linear-z, quadratic-z."""
    return (sum(j), sum(q)) in ((0, 0), (1, 0), (0, 1), (0, 2))


_ansatz_shape = ansatz_shape


def flat_remainder_part(k, j, q) -> bool:
    """Angle-free monomials outside the ansatz: the flat remainder channel."""
    return knorm(k) == 0 and not ansatz_shape(j, q)


def cutoff(P: FourierTaylorSeries, Kplus: int):
    """Split P = R + tail where R keeps the low-mode ansatz part.

    R holds exactly the modes |k| <= Kplus whose monomial is constant,
    linear in y, linear in z, or quadratic in z; tail is everything else.
    The decomposition is exact: R + tail reproduces P coefficient for
    coefficient.
    """
    if Kplus < 1:
        raise ValueError("Kplus must be >= 1")
    return P.partition(lambda k, j, q: knorm(k) <= Kplus and _ansatz_shape(j, q))


def average_over_angles(P: FourierTaylorSeries) -> FourierTaylorSeries:
    """Projection onto the k = 0 Fourier modes."""
    kept, _ = P.partition(lambda k, j, q: knorm(k) == 0)
    return kept


def truncate(P: FourierTaylorSeries, kmax: int, degmax: int,
             label: str = "truncate") -> FourierTaylorSeries:
    """Drop modes beyond (kmax, degmax); dropped mass goes to TRUNCATION_LOG."""
    kept, rest = P.partition(
        lambda k, j, q: knorm(k) <= kmax and _degree(j, q) <= degmax)
    if not rest.is_zero():
        TRUNCATION_LOG.add(label, rest.norm_l1(), len(rest))
    return FourierTaylorSeries(kept.geometry, min(P.kmax, kmax),
                               min(P.degmax, degmax), dict(kept.terms()),
                               prune=False)


# -- Poisson bracket ---------------------------------------------------------

def poisson_bracket(f: FourierTaylorSeries,
                    g: FourierTaylorSeries) -> FourierTaylorSeries:
    """Canonical bracket of two series under the module convention.

    The result is exact for the two polynomials; its capacity bounds are
    (kmax_f + kmax_g, degmax_f + degmax_g - 1), the -1 because at most one
    action/resonant derivative is taken per term while an angle derivative
    keeps the degree.
    """
    f._require_same_geometry(g)
    geo = f.geometry
    d, zdim, d0 = geo.d, geo.zdim, geo.d0
    out = {}

    def acc(k, j, q, c):
        if c != 0:
            key = (k, j, q)
            out[key] = out.get(key, 0j) + c

    for (k1, j1, q1), c1 in f.terms():
        for (k2, j2, q2), c2 in g.terms():
            c12 = c1 * c2
            ks = tuple(a + b for a, b in zip(k1, k2))
            # sum_i f_{y_i} g_{x_i} - f_{x_i} g_{y_i}
            for i in range(d):
                if j1[i] and k2[i]:
                    j = list(j1)
                    j[i] -= 1
                    acc(ks, tuple(a + b for a, b in zip(j, j2)),
                        tuple(a + b for a, b in zip(q1, q2)),
                        c12 * j1[i] * 1j * k2[i])
                if k1[i] and j2[i]:
                    j = list(j2)
                    j[i] -= 1
                    acc(ks, tuple(a + b for a, b in zip(j1, j)),
                        tuple(a + b for a, b in zip(q1, q2)),
                        -c12 * 1j * k1[i] * j2[i])
            # sum_a f_{u_a} g_{v_a} - f_{v_a} g_{u_a}
            for a in range(d0):
                ua, va = a, d0 + a
                if q1[ua] and q2[va]:
                    qa = list(q1)
                    qb = list(q2)
                    qa[ua] -= 1
                    qb[va] -= 1
                    acc(ks, tuple(x + y for x, y in zip(j1, j2)),
                        tuple(x + y for x, y in zip(qa, qb)),
                        c12 * q1[ua] * q2[va])
                if q1[va] and q2[ua]:
                    qa = list(q1)
                    qb = list(q2)
                    qa[va] -= 1
                    qb[ua] -= 1
                    acc(ks, tuple(x + y for x, y in zip(j1, j2)),
                        tuple(x + y for x, y in zip(qa, qb)),
                        -c12 * q1[va] * q2[ua])

    return FourierTaylorSeries(geo, f.kmax + g.kmax,
                               max(0, f.degmax + g.degmax - 1), out,
                               _label="bracket")


def lie_transform(H: FourierTaylorSeries, F: FourierTaylorSeries,
                  epsilon: float, order: int, *, order_cap: int = LIE_ORDER_CAP,
                  kmax: int | None = None,
                  degmax: int | None = None) -> FourierTaylorSeries:
    """Lie-series image sum_{m<=order} (eps^m / m!) ad_F^m(H), ad_F(H) = {H, F}.

    Optional (kmax, degmax) truncate each nested bracket to a working
    context; dropped mass is logged.  order = 0 returns H unchanged.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    if order > order_cap:
        raise ValueError(f"lie order {order} exceeds hard cap {order_cap}")
    result = H
    term = H
    if epsilon == 0.0 or order == 0:
        return H
    for m in range(1, order + 1):
        term = poisson_bracket(term, F).scale(epsilon / m)
        if kmax is not None or degmax is not None:
            term = truncate(term, kmax if kmax is not None else term.kmax,
                            degmax if degmax is not None else term.degmax,
                            label="lie_transform")
        result = result + term
        if term.is_zero():
            break
    return result


def lie_transform_auto(H, F, epsilon=1.0, *, tol=1e-16,
                       order_cap=LIE_ORDER_CAP, kmax=None, degmax=None):
    """Lie series iterated until the next term's l1 mass falls below
    tol * (1 + |H|_l1); returns (series, order used)."""
    result = H
    term = H
    scale = 1.0 + H.norm_l1()
    if epsilon == 0.0:
        return H, 0
    for m in range(1, order_cap + 1):
        term = poisson_bracket(term, F).scale(epsilon / m)
        if kmax is not None or degmax is not None:
            term = truncate(term, kmax if kmax is not None else term.kmax,
                            degmax if degmax is not None else term.degmax,
                            label="lie_transform_auto")
        result = result + term
        if term.norm_l1() <= tol * scale:
            return result, m
    raise InvariantError(f"Lie series did not settle within {order_cap} orders")


# -- serialization -----------------------------------------------------------

def to_text(s: FourierTaylorSeries) -> str:
    """Line-oriented text form; floats printed with repr for exact round-trip."""
    g = s.geometry
    lines = [f"# d d0 kmax degmax", f"{g.d} {g.d0} {s.kmax} {s.degmax}"]
    for (k, j, q), c in sorted(s.terms()):
        k_part = " ".join(str(v) for v in k)
        j_part = " ".join(str(v) for v in j)
        q_part = " ".join(str(v) for v in q) if q else "-"
        lines.append(f"{k_part} | {j_part} | {q_part} | {c.real!r} {c.imag!r}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> FourierTaylorSeries:
    lines = [ln for ln in text.splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("empty series text")
    head = lines[0].split()
    d, d0, kmax, degmax = (int(v) for v in head)
    geo = PhaseGeometry(d, d0)
    coeffs = {}
    for ln in lines[1:]:
        k_part, j_part, q_part, c_part = (p.strip() for p in ln.split("|"))
        k = tuple(int(v) for v in k_part.split())
        j = tuple(int(v) for v in j_part.split())
        q = () if q_part == "-" else tuple(int(v) for v in q_part.split())
        re_s, im_s = c_part.split()
        coeffs[(k, j, q)] = complex(float(re_s), float(im_s))
    return FourierTaylorSeries(geo, kmax, degmax, coeffs, prune=False)
