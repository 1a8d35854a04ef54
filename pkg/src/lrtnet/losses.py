"""Loss nonlinearities and the output nonlinearity composed from them.

Three families are supported, selected by string name in run configs:

* ``cat_a_*``: odd bounded shapes with a global minimum of -1 at z = -1 and a
  global maximum of +1 at z = +1.  Trained by maximizing the between-class
  difference of means of phi(output); the network output is unconstrained.
* ``cat_b_*``: strictly increasing on [-1, 1] with phi(+-1) = +-1.  Requires
  the network output squashed into [-1, 1], here via tanh; the trained head
  is the composition phi(tanh(z)).
* legacy margin penalties (``hinge``, ``abs``, ``abs_pow``, ``hinge_pow``):
  nonnegative convex penalties minimized over phi(z) for one class and
  phi(-z) for the other, with an identity output head.

All phi callables accept scalars or numpy arrays.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np


class Category(Enum):
    """Which training family a nonlinearity belongs to."""

    CAT_A = "cat_a"          # bounded extremes at +-1, unconstrained output
    CAT_B = "cat_b"          # increasing on [-1, 1], squashed output
    LEGACY_SUM = "legacy"    # margin penalty, minimized over both classes


@dataclass(frozen=True)
class PhiSpec:
    """A loss nonlinearity phi with its derivative and family tag.

    ``nonsmooth_points`` lists z values where phi_prime is a one-sided or
    slowly-convergent choice; finite-difference checks must stay clear of a
    small neighborhood around them.
    """

    name: str
    category: Category
    rho: float | None
    phi: Callable
    phi_prime: Callable
    nonsmooth_points: tuple = ()


@dataclass(frozen=True)
class OutputNonlinearity:
    """The network-output map omega and its derivative.

    For the bounded-extremes family omega is phi itself; for the monotone
    family omega = phi(tanh(z)) so the output stays inside (-1, 1); for
    legacy penalties omega is the identity and phi enters the criterion only.
    """

    omega: Callable
    omega_prime: Callable
    source: PhiSpec


def squash(z):
    """Output limiter keeping the classifier statistic inside (-1, 1)."""
    return np.tanh(z)


def squash_prime(z):
    return 1.0 - np.tanh(z) ** 2


def _scalarize(out):
    return out if np.ndim(out) else float(out)


def make_phi_rational(rho: float) -> PhiSpec:
    """phi(z) = rho*z / (rho - 1 + |z|**rho), heavy-tailed, extremes at +-1.

    Tails decay like a fixed power of 1/z, so outputs far from the +-1
    targets still contribute to the criterion.
    """
    if rho <= 1:
        raise ValueError(f"rational family needs rho > 1, got {rho}")
    rho = float(rho)

    def phi(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(rho * z / (rho - 1.0 + np.abs(z) ** rho))

    def phi_prime(z):
        z = np.asarray(z, dtype=float)
        az = np.abs(z) ** rho
        return _scalarize(rho * (rho - 1.0) * (1.0 - az) / (rho - 1.0 + az) ** 2)

    # |z|**rho has a curvature cusp at 0 for rho < 2; the derivative there is
    # the analytic rho/(rho-1) but central differences converge slowly
    nonsmooth = (0.0,) if rho < 2 else ()
    return PhiSpec("cat_a_rational", Category.CAT_A, rho, phi, phi_prime, nonsmooth)


def make_phi_exp(rho: float) -> PhiSpec:
    """phi(z) = z * exp((1 - |z|**rho) / rho), fast-decaying tails.

    Outputs far from +-1 contribute almost nothing, which screens outliers.
    phi_prime(0) is the analytic limit exp(1/rho); for rho < 2 the curvature
    jumps or blows up at 0, so central differences converge slowly there and
    0 is flagged for grid checks.
    """
    if rho <= 0:
        raise ValueError(f"exponential family needs rho > 0, got {rho}")
    rho = float(rho)

    def phi(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(z * np.exp((1.0 - np.abs(z) ** rho) / rho))

    def phi_prime(z):
        z = np.asarray(z, dtype=float)
        az = np.abs(z) ** rho
        return _scalarize((1.0 - az) * np.exp((1.0 - az) / rho))

    nonsmooth = (0.0,) if rho < 2 else ()
    return PhiSpec("cat_a_exp", Category.CAT_A, rho, phi, phi_prime, nonsmooth)


def make_phi_cat_a_default() -> PhiSpec:
    """The default bounded-extremes choice phi(z) = 2z / (1 + z**2)."""
    return make_phi_rational(2.0)


def make_phi_cat_b_identity() -> PhiSpec:
    """phi(z) = z on [-1, 1]; composed with tanh the head becomes tanh(z).

    Training with this head is equivalent to minimizing the sigmoid-smoothed
    count of sign errors, since 1/(1 + exp(-2z)) = (tanh(z) + 1) / 2.
    """

    def phi(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(z + 0.0)

    def phi_prime(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(np.ones_like(z))

    return PhiSpec("cat_b_identity", Category.CAT_B, None, phi, phi_prime)


def make_phi_hinge() -> PhiSpec:
    """Hinge penalty phi(z) = max(1 - z, 0).

    The derivative at the knee z = 1 is the right derivative 0, so samples
    that already satisfy the margin are left untouched.
    """

    def phi(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(np.maximum(1.0 - z, 0.0))

    def phi_prime(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(np.where(z < 1.0, -1.0, 0.0))

    return PhiSpec("hinge", Category.LEGACY_SUM, None, phi, phi_prime, (1.0,))


def make_legacy_phi(kind: str, rho: float | None = None) -> PhiSpec:
    """Margin penalties: 'abs', 'abs_pow', 'hinge', 'hinge_pow'.

    The power variants require rho > 1; their optimizer is a smooth
    posterior-difference statistic rather than the raw sign rule, but the
    induced classifier is still the likelihood-ratio decision.
    """
    if kind == "hinge":
        return make_phi_hinge()

    if kind == "abs":

        def phi(z):
            z = np.asarray(z, dtype=float)
            return _scalarize(np.abs(1.0 - z))

        def phi_prime(z):
            z = np.asarray(z, dtype=float)
            return _scalarize(-np.sign(1.0 - z))

        return PhiSpec("abs", Category.LEGACY_SUM, None, phi, phi_prime, (1.0,))

    if kind in ("abs_pow", "hinge_pow"):
        if rho is None or rho <= 1:
            raise ValueError(f"{kind} needs rho > 1, got {rho}")
        rho = float(rho)

        if kind == "abs_pow":

            def phi(z):
                z = np.asarray(z, dtype=float)
                return _scalarize(np.abs(1.0 - z) ** rho)

            def phi_prime(z):
                z = np.asarray(z, dtype=float)
                return _scalarize(-rho * np.abs(1.0 - z) ** (rho - 1.0) * np.sign(1.0 - z))

        else:

            def phi(z):
                z = np.asarray(z, dtype=float)
                return _scalarize(np.maximum(1.0 - z, 0.0) ** rho)

            def phi_prime(z):
                z = np.asarray(z, dtype=float)
                # clamp before the fractional power to avoid nan for z > 1
                return _scalarize(-rho * np.maximum(1.0 - z, 0.0) ** (rho - 1.0))

        return PhiSpec(kind, Category.LEGACY_SUM, rho, phi, phi_prime, (1.0,))

    raise ValueError(f"unknown legacy penalty kind {kind!r}")


def output_nonlinearity(phi: PhiSpec) -> OutputNonlinearity:
    """Compose the output map for a given nonlinearity family."""
    if phi.category is Category.CAT_A:
        return OutputNonlinearity(phi.phi, phi.phi_prime, phi)

    if phi.category is Category.CAT_B:

        def omega(z):
            return phi.phi(np.tanh(z))

        def omega_prime(z):
            t = np.tanh(z)
            return phi.phi_prime(t) * (1.0 - t**2)

        return OutputNonlinearity(omega, omega_prime, phi)

    # legacy: identity head, phi applied at the criterion level
    def identity(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(z + 0.0)

    def identity_prime(z):
        z = np.asarray(z, dtype=float)
        return _scalarize(np.ones_like(z))

    return OutputNonlinearity(identity, identity_prime, phi)


# names accepted by run configs
_FACTORIES = {
    "cat_a_rational": lambda rho: make_phi_rational(_require_rho("cat_a_rational", rho)),
    "cat_a_exp": lambda rho: make_phi_exp(_require_rho("cat_a_exp", rho)),
    "cat_a_default": lambda rho: make_phi_cat_a_default(),
    "cat_b_identity": lambda rho: make_phi_cat_b_identity(),
    "hinge": lambda rho: make_phi_hinge(),
    "abs": lambda rho: make_legacy_phi("abs"),
    "abs_pow": lambda rho: make_legacy_phi("abs_pow", rho),
    "hinge_pow": lambda rho: make_legacy_phi("hinge_pow", rho),
}


def _require_rho(name, rho):
    if rho is None:
        raise ValueError(f"loss {name!r} requires a rho value")
    return rho


def phi_names():
    return sorted(_FACTORIES)


def make_phi(name: str, rho: float | None = None) -> PhiSpec:
    """Build a nonlinearity from its config name, e.g. 'cat_a_rational'."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(
            f"unknown loss name {name!r}; known: {', '.join(phi_names())}"
        ) from None
    return factory(rho)
