"""Exact statistics for known class densities.

Given a pair of diagonal Gaussian mixtures with priors, this module
provides the optimal sign classifier (decide class 1 where
p1*f1(x) - p2*f2(x) >= 0), its exact per-class error probabilities in one
dimension via root-finding plus Gaussian CDF mass, Monte Carlo error
estimates, posterior class probabilities, the attainable maximum of the
difference criterion, and an exhaustive optimality verifier on small
finite alphabets.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .losses import PhiSpec
from .seeding import substream

_WEIGHT_TOL = 1e-12
_BOUNDARY_XTOL = 1e-10
_COVERAGE = 1e-8


@dataclass
class MixtureDensity:
    """Weighted mixture of axis-aligned Gaussians.

    weights: (m,), strictly positive, summing to 1; means and variances
    are (m, k) with strictly positive variances.
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=float))
        if self.means.shape != self.variances.shape:
            raise ValueError("means and variances must have matching shapes")
        if self.weights.shape[0] != self.means.shape[0]:
            raise ValueError("one weight per component required")
        if np.any(self.weights <= 0):
            raise ValueError("component weights must be positive")
        if abs(self.weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {self.weights.sum()!r}, expected 1")
        if np.any(self.variances <= 0):
            raise ValueError("variances must be strictly positive")

    @property
    def dim(self):
        return self.means.shape[1]

    @classmethod
    def from_spec(cls, spec):
        """Build from [[weight, mean, var], ...]; mean/var scalar or list."""
        weights, means, variances = [], [], []
        for w, mu, var in spec:
            weights.append(float(w))
            means.append(np.atleast_1d(np.asarray(mu, dtype=float)))
            variances.append(np.atleast_1d(np.asarray(var, dtype=float)))
        return cls(np.array(weights), np.vstack(means), np.vstack(variances))

    def to_spec(self):
        out = []
        for w, mu, var in zip(self.weights, self.means, self.variances):
            if self.dim == 1:
                out.append([float(w), float(mu[0]), float(var[0])])
            else:
                out.append([float(w), mu.tolist(), var.tolist()])
        return out

    def pdf(self, X):
        """Density at each row of X (N x k)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected points of shape (N, {self.dim}), got {X.shape}")
        # (N, m, k) residuals collapse over k per component
        diff = X[:, None, :] - self.means[None, :, :]
        quad = np.sum(diff**2 / self.variances[None, :, :], axis=2)
        lognorm = 0.5 * np.sum(np.log(2.0 * np.pi * self.variances), axis=1)
        comp = np.exp(-0.5 * quad - lognorm[None, :])
        return comp @ self.weights

    def pdf_point(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.pdf(x[None, :])[0])

    def cdf(self, x):
        """Mixture CDF, scalar problems only."""
        if self.dim != 1:
            raise ValueError("cdf is defined for 1-D mixtures only")
        x = np.asarray(x, dtype=float)
        sigma = np.sqrt(self.variances[:, 0])
        z = (x[..., None] - self.means[:, 0]) / sigma
        return ndtr(z) @ self.weights

    def sample(self, n, rng):
        """n i.i.d. draws, returned as an (n, k) matrix."""
        rng = np.random.default_rng(rng)
        idx = rng.choice(len(self.weights), size=n, p=self.weights)
        noise = rng.standard_normal((n, self.dim))
        return self.means[idx] + noise * np.sqrt(self.variances[idx])


def gaussian(mean, var):
    """Single-component mixture, convenient for tests and configs."""
    return MixtureDensity(np.array([1.0]), np.atleast_2d(mean), np.atleast_2d(var))


@dataclass
class HypothesisPair:
    """Two class densities with priors p1 and p2 = 1 - p1."""

    f1: MixtureDensity
    f2: MixtureDensity
    p1: float

    def __post_init__(self):
        self.p1 = float(self.p1)
        if not 0.0 < self.p1 < 1.0:
            raise ValueError(f"p1 must lie in (0, 1), got {self.p1}")
        if self.f1.dim != self.f2.dim:
            raise ValueError("class densities must share the input dimension")

    @property
    def p2(self):
        return 1.0 - self.p1

    @property
    def dim(self):
        return self.f1.dim

    def signed(self, X):
        """p1*f1 - p2*f2 at each row of X; the sign is the optimal decision."""
        return self.p1 * self.f1.pdf(X) - self.p2 * self.f2.pdf(X)

    def signed_1d(self, xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return self.signed(xs[:, None])


@dataclass
class ErrorRates:
    """Per-class error probabilities plus their two summaries.

    ``avg`` is the unweighted mean of the two class errors (what equal-size
    test sets measure); ``weighted`` is p1*err1 + p2*err2, the probability
    of error the sign rule minimizes.  They coincide at equal priors.
    """

    err1: float
    err2: float
    avg: float
    weighted: float


def _rates(pair, err1, err2):
    err1, err2 = float(err1), float(err2)
    return ErrorRates(err1, err2, 0.5 * (err1 + err2), pair.p1 * err1 + pair.p2 * err2)


def density(d: MixtureDensity, x) -> float:
    """Mixture density at a single point."""
    return d.pdf_point(x)


def lrt_decide(pair: HypothesisPair, x) -> int:
    """Optimal label for one point: 1 where p1*f1 - p2*f2 >= 0, else 2."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return 1 if pair.signed(x[None, :])[0] >= 0.0 else 2


def decide_batch(pair: HypothesisPair, X) -> np.ndarray:
    return np.where(pair.signed(np.asarray(X, dtype=float)) >= 0.0, 1, 2)


def posterior(pair: HypothesisPair, x):
    """(P(class 1 | x), P(class 2 | x)); raises where the mixture underflows."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n1 = pair.p1 * pair.f1.pdf_point(x)
    n2 = pair.p2 * pair.f2.pdf_point(x)
    den = n1 + n2
    if den <= 0.0:
        raise ValueError(f"mixture density underflows at x={x.tolist()}")
    return n1 / den, n2 / den


def _scan_interval(pair, span=10.0):
    means = np.concatenate([pair.f1.means[:, 0], pair.f2.means[:, 0]])
    sig = np.sqrt(
        np.concatenate([pair.f1.variances[:, 0], pair.f2.variances[:, 0]])
    ).max()
    return means.min() - span * sig, means.max() + span * sig


def find_decision_boundaries(pair: HypothesisPair, n_scan=20001, span=10.0):
    """All sign changes of p1*f1 - p2*f2 on a wide scan interval (1-D).

    A fine grid brackets each crossing, bisection then refines it to an
    absolute tolerance of 1e-10.  Warns if the interval misses more than
    1e-8 of either class's probability mass.
    """
    if pair.dim != 1:
        raise ValueError("boundary search is defined for scalar problems only")
    lo, hi = _scan_interval(pair, span)
    for name, dens in (("f1", pair.f1), ("f2", pair.f2)):
        covered = float(dens.cdf(hi) - dens.cdf(lo))
        if covered < 1.0 - _COVERAGE:
            warnings.warn(
                f"scan interval [{lo:.3g}, {hi:.3g}] holds only {covered!r} of {name}'s mass",
                stacklevel=2,
            )
    xs = np.linspace(lo, hi, n_scan)
    hs = pair.signed_1d(xs)

    roots = []
    signs = np.sign(hs)
    for i in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
        a, b = xs[i], xs[i + 1]
        fa = hs[i]
        while b - a > _BOUNDARY_XTOL:
            mid = 0.5 * (a + b)
            fm = pair.signed_1d(mid)[0]
            if fa * fm > 0:
                a, fa = mid, fm
            else:
                b = mid
        roots.append(0.5 * (a + b))
    # grid points landing exactly on a root
    roots.extend(xs[signs == 0].tolist())
    return np.sort(np.asarray(roots))


def _regions(pair, boundaries):
    """Yield (lo, hi, decide_1) over the partition induced by the boundaries."""
    edges = [-np.inf, *boundaries.tolist(), np.inf]
    for lo, hi in zip(edges[:-1], edges[1:]):
        if np.isinf(lo) and np.isinf(hi):
            rep = 0.0
        elif np.isinf(lo):
            rep = hi - 1.0
        elif np.isinf(hi):
            rep = lo + 1.0
        else:
            rep = 0.5 * (lo + hi)
        yield lo, hi, bool(pair.signed_1d(rep)[0] >= 0.0)


def _mass(dens, lo, hi):
    lo_cdf = 0.0 if np.isinf(lo) else float(dens.cdf(lo))
    hi_cdf = 1.0 if np.isinf(hi) else float(dens.cdf(hi))
    return hi_cdf - lo_cdf


def lrt_errors_quadrature(pair: HypothesisPair) -> ErrorRates:
    """Exact error probabilities of the optimal sign rule (1-D).

    err1 is the class-1 mass falling in decide-2 regions, err2 the class-2
    mass in decide-1 regions; region masses come from Gaussian CDF
    differences, so accuracy is limited only by boundary refinement.
    """
    boundaries = find_decision_boundaries(pair)
    err1 = err2 = 0.0
    for lo, hi, decide_1 in _regions(pair, boundaries):
        if decide_1:
            err2 += _mass(pair.f2, lo, hi)
        else:
            err1 += _mass(pair.f1, lo, hi)
    return _rates(pair, err1, err2)


def lrt_errors_montecarlo(pair: HypothesisPair, n_per_class: int, seed) -> ErrorRates:
    """Error fractions of the sign rule on fresh per-class samples."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    X1 = pair.f1.sample(n_per_class, substream(seed, "mc-class1"))
    X2 = pair.f2.sample(n_per_class, substream(seed, "mc-class2"))
    err1 = np.mean(decide_batch(pair, X1) == 2)
    err2 = np.mean(decide_batch(pair, X2) == 1)
    return _rates(pair, err1, err2)


def _simpson(f, lo, hi, panels):
    if panels % 2:
        panels += 1
    xs = np.linspace(lo, hi, panels + 1)
    ys = f(xs)
    h = (hi - lo) / panels
    return h / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum() + 2.0 * ys[2:-2:2].sum())


def criterion_upper_bound(pair: HypothesisPair, n_panels=10000) -> float:
    """Maximum attainable value of the difference criterion (1-D).

    Integrates |p1*f1(x) - p2*f2(x)| by composite Simpson, splitting the
    domain at the sign changes so every segment is smooth with constant
    sign.  Equals 1 - 2 * (weighted optimal error); the identity is checked
    in tests against the CDF-based error computation, which shares no
    integration code with this routine.
    """
    if pair.dim != 1:
        raise ValueError("the bound integral is implemented for scalar problems only")
    lo, hi = _scan_interval(pair)
    edges = [lo, *find_decision_boundaries(pair).tolist(), hi]
    width = hi - lo
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        panels = max(64, int(round(n_panels * (b - a) / width)))
        total += abs(_simpson(lambda xs: pair.signed_1d(xs), a, b, panels))
    return total


@dataclass
class DiscretePair:
    """Two pmfs on a finite alphabet of size m, with priors."""

    f1: np.ndarray
    f2: np.ndarray
    p1: float

    def __post_init__(self):
        self.f1 = np.asarray(self.f1, dtype=float)
        self.f2 = np.asarray(self.f2, dtype=float)
        self.p1 = float(self.p1)
        if self.f1.shape != self.f2.shape or self.f1.ndim != 1:
            raise ValueError("f1 and f2 must be 1-D vectors of equal length")
        for name, f in (("f1", self.f1), ("f2", self.f2)):
            if np.any(f < 0):
                raise ValueError(f"{name} has negative entries")
            if abs(f.sum() - 1.0) > _WEIGHT_TOL:
                raise ValueError(f"{name} sums to {f.sum()!r}, expected 1")
        if not 0.0 < self.p1 < 1.0:
            raise ValueError(f"p1 must lie in (0, 1), got {self.p1}")

    @property
    def p2(self):
        return 1.0 - self.p1

    @property
    def m(self):
        return self.f1.shape[0]


@dataclass
class BruteForceResult:
    best_assignment: np.ndarray
    best_value: float
    lrt_assignment: np.ndarray
    lrt_value: float


class OptimalityViolation(AssertionError):
    """Exhaustive search found an assignment beating the sign rule."""


def brute_force_optimality(d: DiscretePair, phi: PhiSpec, tol=1e-12) -> BruteForceResult:
    """Enumerate every +-1 labeling of the alphabet and score the criterion.

    The criterion of an assignment D is sum_x (p1*f1(x) - p2*f2(x)) * phi(D(x)).
    Raises OptimalityViolation if any assignment beats the sign rule by more
    than ``tol``; alphabets above 20 symbols are rejected (2^m enumeration).
    """
    if d.m > 20:
        raise ValueError(f"alphabet size {d.m} exceeds the enumeration cap of 20")
    h = d.p1 * d.f1 - d.p2 * d.f2
    phi_pos = float(phi.phi(1.0))
    phi_neg = float(phi.phi(-1.0))
    base = float(h.sum() * phi_neg)
    gains = h * (phi_pos - phi_neg)

    best_value = -np.inf
    best_code = 0
    shifts = np.arange(d.m)
    for start in range(0, 2**d.m, 1 << 16):
        codes = np.arange(start, min(start + (1 << 16), 2**d.m), dtype=np.int64)
        bits = ((codes[:, None] >> shifts) & 1).astype(float)
        values = base + bits @ gains
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value = float(values[i])
            best_code = int(codes[i])

    best_bits = (best_code >> shifts) & 1
    best_assignment = np.where(best_bits == 1, 1.0, -1.0)
    lrt_assignment = np.where(h >= 0.0, 1.0, -1.0)
    lrt_value = float(np.sum(h * np.where(h >= 0.0, phi_pos, phi_neg)))
    if best_value - lrt_value > tol:
        raise OptimalityViolation(
            f"assignment {best_assignment.tolist()} scores {best_value!r}, "
            f"sign rule scores {lrt_value!r}"
        )
    return BruteForceResult(best_assignment, best_value, lrt_assignment, lrt_value)
