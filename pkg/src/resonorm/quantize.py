"""Semiclassical spectrum prediction from an accumulated normal form.

The predicted eigenvalue attached to torus quantum numbers n_y (integers,
Maslov-shifted by theta/4) and resonant oscillator numbers (n_u, n_v) is

    E = eps_p(h, eps) + h * sum_j omega_j (n_y_j + theta_j / 4) + E_res

with two selectable conventions for the resonant part:

* "component":   E_res = (eps/2) * (sum_j lam_j (n_u_j + 1/2)
                                    + sum_j lamt_j (n_v_j + 1/2))
* "oscillator":  E_res = eps * h * sum_j sqrt(lam_j lamt_j) (n_u_j + 1/2),
                 n_v pinned to zero.

The second matches the spectrum of the literal Weyl quantization of
(eps/2)(lam u^2 + lamt v^2), where u, v are a conjugate pair; the model
operator module adjudicates between them, and the cross-check suite runs
under "oscillator" for that reason.  lam_j / lamt_j are the ascending
eigenvalues of the two diagonal blocks of the accumulated resonant matrix.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kam import NormalFormState

RESONANT_SCALINGS = ("component", "oscillator")


@dataclass(frozen=True)
class QuantumNumbers:
    """Torus numbers may be negative; oscillator numbers are >= 0."""

    n_y: tuple
    n_u: tuple = ()
    n_v: tuple = ()

    def __post_init__(self):
        if any(v < 0 for v in self.n_u) or any(v < 0 for v in self.n_v):
            raise ValueError("resonant quantum numbers must be non-negative")


@dataclass
class SpectrumPrediction:
    entries: list                  # [(QuantumNumbers, energy)], ascending
    h: float
    epsilon: float
    maslov: tuple
    lambdas_u: np.ndarray
    lambdas_v: np.ndarray
    remainder: float
    scaling: str
    base_shift: float              # eps_p(h, eps)
    off_block_mass: float = 0.0

    def energies(self) -> np.ndarray:
        return np.array([e for _, e in self.entries])

    def cluster_ids(self) -> np.ndarray:
        """Entries grouped by their torus quantum numbers."""
        seen = {}
        out = []
        for qn, _ in self.entries:
            out.append(seen.setdefault(qn.n_y, len(seen)))
        return np.array(out, dtype=int)


def resonant_lambdas(M: np.ndarray, d0: int, *, offblock_tol: float = 1e-9):
    """Ascending eigenvalues of the two diagonal blocks of M.

    M must be symmetric; the mass of its off-diagonal blocks is returned so
    callers can judge how separable the resonant directions still are.
    """
    if d0 == 0:
        return np.zeros(0), np.zeros(0), 0.0
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, M.T, atol=offblock_tol * max(1.0, np.abs(M).max())):
        raise ConfigError("resonant matrix must be symmetric")
    U = M[:d0, :d0]
    V = M[d0:, d0:]
    off = float(np.abs(M[:d0, d0:]).max()) if d0 else 0.0
    lam_u = np.linalg.eigvalsh(U)
    lam_v = np.linalg.eigvalsh(V)
    return lam_u, lam_v, off


def remainder_bound(h: float, epsilon: float, alpha: float, cC=(1.0, 1.0), *,
                    exponent_sign: int = -1) -> float:
    """C * |eps| * exp(-c * h^(sign/(alpha-1))).

    The default sign -1 makes the bound vanish as h -> 0, matching the
    optimal-truncation estimate; sign +1 is the literal reading of the
    spectral error term and is exposed for comparison.
    """
    if alpha <= 1:
        raise ConfigError("alpha must exceed 1")
    if h <= 0:
        raise ConfigError("h must be positive")
    if epsilon == 0.0:
        return 0.0
    c, C = cC
    expo = exponent_sign / (alpha - 1.0)
    return C * abs(epsilon) * math.exp(-c * h ** expo)


def predict_spectrum(state: NormalFormState, h: float, epsilon: float | None,
                     maslov, window, *, scaling: str = "oscillator",
                     n_res_max: int = 8, max_entries: int = 200_000,
                     cC=(1.0, 1.0)) -> SpectrumPrediction:
    """Enumerate all predicted eigenvalues inside the window [lo, hi].

    The torus quantum numbers run over the integer box that can reach the
    window given the frequency signs; every accumulated eps-series is
    evaluated at the run's epsilon unless an override is given.
    """
    if scaling not in RESONANT_SCALINGS:
        raise ConfigError(f"unknown resonant scaling {scaling!r}")
    eps = state.epsilon if epsilon is None else epsilon
    geo = state.geometry
    d, d0 = geo.d, geo.d0
    maslov = tuple(int(v) for v in maslov)
    if len(maslov) != d:
        raise ConfigError("Maslov index length must match the torus dimension")
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ConfigError("window must be a non-empty interval")

    omega = state.omega_p(eps)
    if np.any(omega == 0.0):
        raise ConfigError("zero frequency component: unbounded enumeration")
    base = state.epsilon_series(eps)
    lam_u, lam_v, off = resonant_lambdas(state.M_p(eps), d0)

    # resonant level offsets within a cluster
    if d0 == 0:
        res_levels = [((), (), 0.0)]
    elif scaling == "component":
        res_levels = []
        for nu in itertools.product(range(n_res_max + 1), repeat=d0):
            for nv in itertools.product(range(n_res_max + 1), repeat=d0):
                e = 0.5 * eps * (sum(lam_u[j] * (nu[j] + 0.5) for j in range(d0))
                                 + sum(lam_v[j] * (nv[j] + 0.5) for j in range(d0)))
                res_levels.append((nu, nv, e))
    else:
        freq = np.sqrt(np.maximum(lam_u * lam_v, 0.0))
        if np.any(lam_u * lam_v < 0):
            raise ConfigError("mixed-signature resonant blocks have no "
                              "oscillator spectrum")
        res_levels = []
        for nu in itertools.product(range(n_res_max + 1), repeat=d0):
            e = eps * h * sum(freq[j] * (nu[j] + 0.5) for j in range(d0))
            res_levels.append((nu, (0,) * d0, e))
    res_levels.sort(key=lambda t: t[2])
    res_min = res_levels[0][2]
    res_max_off = res_levels[-1][2]

    # per-axis integer ranges able to reach the window
    margin = abs(base) + abs(res_min) + abs(res_max_off) + h * sum(
        abs(w) * (abs(m) / 4.0 + 1.0) for w, m in zip(omega, maslov))
    scale = max(hi - lo, h * float(np.min(np.abs(omega))))
    ranges = []
    for wj in omega:
        reach = (max(abs(lo), abs(hi)) + margin) / (h * abs(wj))
        n_hi = int(math.ceil(reach)) + 1
        ranges.append(range(-n_hi, n_hi + 1))
    total = math.prod(len(r) for r in ranges) * len(res_levels)
    if total > 50_000_000:
        raise ConfigError(f"enumeration too large ({total} candidates); "
                          "narrow the window")

    entries = []
    for ny in itertools.product(*ranges):
        e_tor = base + h * sum(omega[j] * (ny[j] + maslov[j] / 4.0)
                               for j in range(d))
        if e_tor + res_min > hi or e_tor + res_max_off < lo:
            continue
        for nu, nv, er in res_levels:
            e = e_tor + er
            if lo <= e <= hi:
                entries.append((QuantumNumbers(tuple(ny), nu, nv), e))
                if len(entries) > max_entries:
                    raise ConfigError("window produced too many levels")
    entries.sort(key=lambda t: t[1])
    return SpectrumPrediction(
        entries=entries, h=h, epsilon=eps, maslov=maslov,
        lambdas_u=lam_u, lambdas_v=lam_v,
        remainder=remainder_bound(h, eps, _alpha_guess(state), cC),
        scaling=scaling, base_shift=base, off_block_mass=off)


def _alpha_guess(state) -> float:
    # the Gevrey index is a property of the divisor function, not the state;
    # the remainder bound only needs a representative value
    return 2.0


# ---------------------------------------------------------------------------
# optimal truncation order
# ---------------------------------------------------------------------------

def optimal_n_brute(C: float, delta: float, alpha: float,
                    n_max: int = 200) -> int:
    """argmin over 1 <= n <= n_max of C^(n+1) n!^(alpha-1) delta^n,
    evaluated in logs."""
    best_n, best_v = 1, math.inf
    for n in range(1, n_max + 1):
        v = (n + 1) * math.log(C) + (alpha - 1.0) * math.lgamma(n + 1) \
            + n * math.log(delta)
        if v < best_v:
            best_n, best_v = n, v
    return best_n


def optimal_n_stirling(C: float, delta: float, alpha: float) -> float:
    """Stationary point of the same expression under Stirling's formula:
    n* = (C * delta)^(-1/(alpha-1))."""
    return (C * delta) ** (-1.0 / (alpha - 1.0))


# ---------------------------------------------------------------------------
# action index set
# ---------------------------------------------------------------------------

def action_index_set(egamma_points, h: float, L: float, maslov):
    """All m in Z^d with dist(E_gamma, h*(m + maslov/4)) <= L*h.

    E_gamma is a finite sample cloud of admissible actions; the search box
    is its bounding box inflated by L*h.  Returns (sorted list of tuples,
    empty_flag)."""
    pts = np.atleast_2d(np.asarray(egamma_points, dtype=float))
    if pts.size == 0:
        return [], True
    if h <= 0 or L < 0:
        raise ConfigError("need h > 0 and L >= 0")
    d = pts.shape[1]
    theta = np.asarray(maslov, dtype=float)
    lo = np.floor((pts.min(axis=0) - L * h) / h - theta / 4.0).astype(int) - 1
    hi = np.ceil((pts.max(axis=0) + L * h) / h - theta / 4.0).astype(int) + 1
    out = []
    for m in itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi))):
        I_m = h * (np.array(m, dtype=float) + theta / 4.0)
        dist = np.min(np.linalg.norm(pts - I_m, axis=1))
        if dist <= L * h + 1e-15:
            out.append(tuple(int(v) for v in m))
    return sorted(out), False
