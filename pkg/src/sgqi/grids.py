"""Anisotropic level sets, sample grids, and cardinality accounting.

A level set is a finite downward-closed family of level vectors k >= 0.
Every family used here is a sublevel set {k: phi(k) <= xi} of a monotone
functional phi(k) = sum_i b_i k_i + c * max_i k_i, with (b, c) determined
by the smoothness parameters, the (p, theta, q) class, and for the energy
variant the relation between theta and tau* = min(tau, 1).

Budgets follow the with-multiplicity count n = sum_k prod_i (2^{k_i}+1);
the number of distinct grid points is reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import bspline

_TOL = 1e-9


def _inv(x: float) -> float:
    return 0.0 if math.isinf(x) else 1.0 / x


def trade_exponent(p: float, q: float) -> float:
    """(1/p - 1/q)_+ with the convention 1/inf = 0."""
    return max(0.0, _inv(p) - _inv(q))


def classify_triple(p: float, theta: float, q: float) -> str:
    """Class tag of the integrability triple.

    The three regimes p >= q, p < q < infinity, p < q = infinity are read
    as mutually exclusive; within each, class A holds below the stated
    theta threshold and class B above it.
    """
    for v in (p, theta, q):
        if not (v > 0):
            raise ValueError("triple entries must be positive")
    if p >= q:
        return "A" if theta <= min(q, 1.0) else "B"
    if math.isinf(q):
        return "A" if theta <= 1.0 else "B"
    return "A" if theta <= q else "B"


def theta_le_taustar(theta: float, tau: float) -> bool:
    return theta <= min(tau, 1.0)


@dataclass(frozen=True)
class SmoothnessSpec:
    """Smoothness/integrability parameters of a target function class.

    kind "mixed" uses the per-coordinate vector a (nondecreasing, with
    a_1 strictly smallest); kind "hybrid" uses (alpha, beta), optionally
    with the energy exponent gamma.  epsilon overrides the default
    class-B perturbation (half of its legal upper bound).
    """

    d: int
    r: int
    p: float
    theta: float
    q: float
    kind: str
    a: tuple = None
    alpha: float = None
    beta: float = None
    gamma: float = None
    epsilon: float = None

    def __post_init__(self):
        if self.a is not None:
            object.__setattr__(self, "a", tuple(float(v) for v in self.a))

    def validate(self, strict: bool = True) -> None:
        """Check parameter conditions.

        strict=True enforces the inequalities the convergence rates
        need (strict against 1/p and r); strict=False accepts boundary
        parameters, enough for constructing the level sets themselves.
        """
        if self.d < 1:
            raise ValueError("dimension must be at least 1")
        bspline._check_order(self.r)
        for name in ("p", "theta", "q"):
            v = getattr(self, name)
            if not (v > 0):
                raise ValueError(f"{name} must be in (0, inf]")
        ip = _inv(self.p)

        def below(x, y):
            return x < y if strict else x <= y

        if self.kind == "mixed":
            if self.a is None or len(self.a) != self.d:
                raise ValueError("mixed kind needs a d-vector a")
            a = self.a
            if not (below(ip, a[0]) and below(a[0], self.r)):
                raise ValueError("need 1/p < a_1 < r")
            if self.d >= 2:
                if not (a[0] < a[1]):
                    raise ValueError("need a_1 < a_2")
                for i in range(1, self.d - 1):
                    if not (a[i] <= a[i + 1]):
                        raise ValueError("a must be nondecreasing")
                if not below(a[-1], self.r):
                    raise ValueError("need a_d < r")
        elif self.kind == "hybrid":
            if self.alpha is None or self.beta is None:
                raise ValueError("hybrid kind needs alpha and beta")
            al, be = self.alpha, self.beta
            if self.gamma is None and be == 0:
                raise ValueError("hybrid beta must be nonzero")
            lo, hi = min(al, al + be), max(al, al + be)
            if not (below(ip, lo) and below(hi, self.r)):
                raise ValueError("need 1/p < min(alpha, alpha+beta) and "
                                 "max(alpha, alpha+beta) < r")
            if self.gamma is not None:
                g = self.gamma
                if not g > 0:
                    raise ValueError("gamma must be positive")
                if be == g:
                    raise ValueError("beta must differ from gamma")
                need = (g - be) / self.d if be > g else g - be
                if not al > need:
                    raise ValueError("alpha too small for the energy grid")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.epsilon is not None and not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")

    def triple_class(self) -> str:
        return classify_triple(self.p, self.theta, self.q)


@dataclass(frozen=True)
class LevelSet:
    """Finite downward-closed set of level vectors with its defining xi."""

    d: int
    levels: tuple
    xi: float
    family: str
    phi: tuple = ()

    @cached_property
    def _index(self):
        return frozenset(self.levels)

    def __contains__(self, k) -> bool:
        return tuple(k) in self._index

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def budget(self) -> int:
        """Sample count with multiplicity: sum over levels of
        prod_i (2^{k_i} + 1)."""
        total = 0
        for k in self.levels:
            m = 1
            for ki in k:
                m *= (1 << ki) + 1
            total += m
        return total

    def distinct_points(self) -> int:
        """Number of distinct grid points of the union grid.

        Counts reduced dyadic profiles: a point with exact per-dimension
        levels l contributes iff l is in the (downward closed) set, and
        there are 2 numerators at level 0 and 2^{l-1} odd ones at l >= 1.
        """
        total = 0
        for k in self.levels:
            m = 1
            for ki in k:
                m *= 2 if ki == 0 else 1 << (ki - 1)
            total += m
        return total

    def max_level(self) -> tuple:
        return tuple(max(k[i] for k in self.levels) for i in range(self.d))

    def is_downward_closed(self) -> bool:
        for k in self.levels:
            for i in range(self.d):
                if k[i] > 0:
                    below = k[:i] + (k[i] - 1,) + k[i + 1 :]
                    if below not in self._index:
                        return False
        return True

    def issubset(self, other: "LevelSet") -> bool:
        return self._index <= other._index

    def to_text(self) -> str:
        """Line-based text form, one `k_1 ... k_d` per line, sorted."""
        return "\n".join(" ".join(str(v) for v in k)
                         for k in sorted(self.levels)) + "\n"


def _enumerate(d: int, b: tuple, cinf: float, xi: float):
    """All k >= 0 with sum b_i k_i + cinf*max(k) <= xi, by depth-first
    search; requires b_i >= 0 and b_i + cinf > 0 (monotone, finite)."""
    for bi in b:
        if bi < 0 or bi + cinf <= 0:
            raise ValueError("level-set functional is not monotone "
                             "increasing for these parameters")
    levels = []
    phis = []
    k = [0] * d
    bound = xi + _TOL * max(1.0, abs(xi))

    def rec(i, lin, mx):
        if i == d:
            levels.append(tuple(k))
            phis.append(lin + cinf * mx)
            return
        v = 0
        while True:
            nl = lin + b[i] * v
            nm = max(mx, v)
            if nl + cinf * nm > bound:
                break
            k[i] = v
            rec(i + 1, nl, nm)
            v += 1
        k[i] = 0

    if xi >= 0:
        rec(0, 0.0, 0)
    order = sorted(range(len(levels)), key=lambda i: levels[i])
    return [levels[i] for i in order], [phis[i] for i in order]


def _build(xi, d, b, cinf, family) -> LevelSet:
    levels, phis = _enumerate(d, tuple(b), float(cinf), float(xi))
    return LevelSet(d=d, levels=tuple(levels), xi=float(xi),
                    family=family, phi=tuple(phis))


def _pick_epsilon(spec: SmoothnessSpec, upper: float) -> float:
    if upper <= 0:
        raise ValueError("epsilon violates class-B constraint: "
                         "no legal interval for these parameters")
    eps = spec.epsilon if spec.epsilon is not None else 0.5 * upper
    if not (0.0 < eps < upper):
        raise ValueError("epsilon violates class-B constraint: legal "
                         f"interval is (0, {upper!r})")
    return eps


def delta_hybrid(xi: float, spec: SmoothnessSpec, cls: str | None = None) -> LevelSet:
    """Level set for hybrid smoothness (alpha, beta), class A or B."""
    spec.validate(strict=False)
    if spec.kind != "hybrid":
        raise ValueError("spec kind must be hybrid")
    if cls is None:
        cls = spec.triple_class()
    tr = trade_exponent(spec.p, spec.q)
    al, be = spec.alpha - tr, spec.beta
    if cls == "A":
        b = (al,) * spec.d
        cinf = be
    else:
        eps = _pick_epsilon(spec, min(al, abs(be)))
        if be > 0:
            b = (al + eps / spec.d,) * spec.d
            cinf = be - eps
        else:
            b = (al - eps,) * spec.d
            cinf = be + eps
    return _build(xi, spec.d, b, cinf, f"hybrid-{cls}")


def delta_mixed(xi: float, spec: SmoothnessSpec, cls: str | None = None) -> LevelSet:
    """Level set for mixed smoothness vector a, class A or B.

    In d = 1 there is nothing to perturb and both classes coincide.
    """
    spec.validate(strict=False)
    if spec.kind != "mixed":
        raise ValueError("spec kind must be mixed")
    if cls is None:
        cls = spec.triple_class()
    tr = trade_exponent(spec.p, spec.q)
    a = spec.a
    if cls == "A" or spec.d == 1:
        b = tuple(ai - tr for ai in a)
    else:
        eps = _pick_epsilon(spec, a[1] - a[0])
        b = (a[0] - tr,) + tuple(ai - eps - tr for ai in a[1:])
    return _build(xi, spec.d, b, 0.0, f"mixed-{cls}")


def delta_energy(xi: float, spec: SmoothnessSpec,
                 theta_le_taustar: bool) -> LevelSet:
    """Level set for recovery measured in the energy norm with exponent
    gamma; the boolean selects the sharp (theta <= tau*) variant or the
    epsilon-perturbed one."""
    spec.validate(strict=False)
    if spec.kind != "hybrid" or spec.gamma is None:
        raise ValueError("spec must be hybrid with gamma for energy grids")
    tr = trade_exponent(spec.p, spec.q)
    al = spec.alpha - tr
    be, g = spec.beta, spec.gamma
    if theta_le_taustar:
        b = (al,) * spec.d
        cinf = be - g
        fam = "energy"
    else:
        eps = _pick_epsilon(spec, min(al, abs(g - be)))
        if be > g:
            b = (al + eps / spec.d,) * spec.d
            cinf = (be - g) - eps
        else:
            b = (al - eps,) * spec.d
            cinf = (be - g) + eps
        fam = "energy-eps"
    return _build(xi, spec.d, b, cinf, fam)


def comparison_sets(xi: float, lam: float, kind: str, d: int) -> LevelSet:
    """Reference full-grid box {lam*|k|_inf <= xi} or Smolyak simplex
    {lam*|k|_1 <= xi}."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if kind == "fullgrid":
        return _build(xi, d, (0.0,) * d, lam, "fullgrid")
    if kind == "smolyak":
        return _build(xi, d, (lam,) * d, 0.0, "smolyak")
    raise ValueError(f"unknown comparison kind {kind!r}")


def delta_for_family(xi: float, spec: SmoothnessSpec, family: str,
                     cls: str | None = None,
                     theta_le_taustar_flag: bool | None = None) -> LevelSet:
    if family == "hybrid":
        return delta_hybrid(xi, spec, cls)
    if family == "mixed":
        return delta_mixed(xi, spec, cls)
    if family == "energy":
        if theta_le_taustar_flag is None:
            raise ValueError("energy family needs the theta/tau* flag")
        return delta_energy(xi, spec, theta_le_taustar_flag)
    raise ValueError(f"unknown family {family!r}")


def nu_exponent(spec: SmoothnessSpec, family: str,
                integration: bool = False) -> float:
    """The exponent nu with budget ~ 2^{xi/nu} and error ~ n^{-nu}.

    With integration=True the trade-off term becomes (1/p - 1)_+, the
    cubature version of the same exponent.
    """
    spec.validate(strict=False)
    tr = trade_exponent(spec.p, 1.0 if integration else spec.q)
    if family == "mixed":
        return spec.a[0] - tr
    if family == "hybrid":
        if spec.beta > 0:
            return spec.alpha + spec.beta / spec.d - tr
        return spec.alpha + spec.beta - tr
    if family == "energy":
        g, be = spec.gamma, spec.beta
        if be > g:
            return spec.alpha - (g - be) / spec.d - tr
        return spec.alpha - (g - be) - tr
    raise ValueError(f"unknown family {family!r}")


def xi_for_budget(n: int, make_delta) -> float:
    """Largest xi on the breakpoint lattice of the family's functional
    with budget(make_delta(xi)) <= n.

    The budget is a nondecreasing step function of xi jumping exactly at
    the functional values phi(k), so it suffices to search those.
    """
    if make_delta(0.0).budget() > n:
        raise ValueError("budget below minimal grid")
    hi = 1.0
    while make_delta(hi).budget() <= n:
        hi *= 2.0
    cands = sorted({round(v, 9) for v in make_delta(hi).phi})
    lo_i, hi_i = 0, len(cands) - 1
    best = 0.0
    while lo_i <= hi_i:
        mid = (lo_i + hi_i) // 2
        if make_delta(cands[mid]).budget() <= n:
            best = cands[mid]
            lo_i = mid + 1
        else:
            hi_i = mid - 1
    return float(best)


# ---------------------------------------------------------------------------
# dyadic point bookkeeping shared by recovery and cubature


def reduce_dyadic(j: int, k: int) -> tuple:
    """Lowest-terms pair (num, exp) of the dyadic rational j/2^k."""
    if j == 0:
        return (0, 0)
    e = k
    while j % 2 == 0 and e > 0:
        j //= 2
        e -= 1
    return (j, e)


def reduce_dyadic_arrays(j: np.ndarray, k: int):
    """Vectorized reduce_dyadic for j in [0, 2^k]."""
    j = np.asarray(j, dtype=np.int64)
    num = j.copy()
    exp = np.full_like(j, k)
    nz = num != 0
    if k > 0 and nz.any():
        low = num[nz] & -num[nz]
        tz = np.frexp(low.astype(np.float64))[1] - 1
        num[nz] >>= tz
        exp[nz] -= tz
    exp[~nz] = 0
    return num, exp


def level_point_keys(k: tuple) -> list:
    """Keys of all grid points of the full level-k lattice, in C order of
    the index tensor.  A key is the flattened tuple of per-dimension
    (num, exp) reduced pairs, an exact identity for the point."""
    per_dim = []
    for ki in k:
        j = np.arange((1 << ki) + 1, dtype=np.int64)
        num, exp = reduce_dyadic_arrays(j, ki)
        per_dim.append(np.stack([num, exp], axis=1))
    d = len(k)
    shape = [(1 << ki) + 1 for ki in k]
    total = int(np.prod(shape))
    cols = np.empty((total, 2 * d), dtype=np.int64)
    for i in range(d):
        reps_inner = int(np.prod(shape[i + 1 :])) if i + 1 < d else 1
        reps_outer = total // (shape[i] * reps_inner)
        block = np.repeat(per_dim[i], reps_inner, axis=0)
        tiled = np.tile(block, (reps_outer, 1))
        cols[:, 2 * i : 2 * i + 2] = tiled
    return list(map(tuple, cols.tolist()))


def key_to_coords(key: tuple) -> tuple:
    """Coordinates of a point key as floats (exact: dyadic rationals)."""
    d = len(key) // 2
    return tuple(key[2 * i] * math.ldexp(1.0, -key[2 * i + 1])
                 for i in range(d))


@dataclass
class SampleGrid:
    """The sample grid of a level set: (k, s) pairs with s in the full
    lattice I^d(k), the with-multiplicity budget, and the distinct-point
    count.  Pairs are materialized lazily (they can be large)."""

    delta: LevelSet
    budget: int
    distinct_points: int
    _pairs: list = field(default=None, repr=False)

    @property
    def pairs(self) -> list:
        if self._pairs is None:
            out = []
            for k in self.delta.levels:
                ranges = [range((1 << ki) + 1) for ki in k]
                idx = np.indices([len(r) for r in ranges]).reshape(len(k), -1).T
                out.extend((k, tuple(row)) for row in idx.tolist())
            self._pairs = out
        return self._pairs

    def distinct_coords(self) -> np.ndarray:
        keys = set()
        for k in self.delta.levels:
            keys.update(level_point_keys(k))
        pts = np.array(sorted(key_to_coords(key) for key in keys))
        return pts


def sample_grid(delta: LevelSet) -> SampleGrid:
    return SampleGrid(delta=delta, budget=delta.budget(),
                      distinct_points=delta.distinct_points())
