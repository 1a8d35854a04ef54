"""Two-layer fully connected network with a ReLU hidden layer.

The forward map is U = A x + a, Z = relu(U), z = B.Z + b, y = omega(z);
the scalar y is the classifier statistic whose sign decides the class.
Gradients of omega(z) with respect to every parameter come in closed form:

    dA = omega'(z) * (B o relu'(U)) x^T      da = omega'(z) * (B o relu'(U))
    dB = omega'(z) * Z                       db = omega'(z)

with relu'(u) = 1 for u > 0 and 0 for u <= 0 (dead units stay dead).
"""

import json
from dataclasses import dataclass

import numpy as np

from .losses import OutputNonlinearity


@dataclass
class NetParams:
    """Parameters {A, a, B, b}: A is n x k, a and B have length n, b scalar."""

    A: np.ndarray
    a: np.ndarray
    B: np.ndarray
    b: float

    @property
    def n_hidden(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.A.shape[1]

    def copy(self):
        return NetParams(self.A.copy(), self.a.copy(), self.B.copy(), float(self.b))

    def validate(self):
        n, _ = self.A.shape
        if self.a.shape != (n,) or self.B.shape != (n,):
            raise ValueError(
                f"inconsistent shapes: A {self.A.shape}, a {self.a.shape}, B {self.B.shape}"
            )
        if not (
            np.all(np.isfinite(self.A))
            and np.all(np.isfinite(self.a))
            and np.all(np.isfinite(self.B))
            and np.isfinite(self.b)
        ):
            raise ValueError("non-finite network parameter")

    def all_finite(self):
        return (
            bool(np.all(np.isfinite(self.A)))
            and bool(np.all(np.isfinite(self.a)))
            and bool(np.all(np.isfinite(self.B)))
            and bool(np.isfinite(self.b))
        )


@dataclass
class ForwardTrace:
    """Intermediate quantities of one forward pass."""

    U: np.ndarray
    Z: np.ndarray
    z: float
    y: float


@dataclass
class ParamGradient:
    """Gradient of omega(z) with respect to {A, a, B, b}; shapes mirror NetParams."""

    gA: np.ndarray
    ga: np.ndarray
    gB: np.ndarray
    gb: float

    def scaled(self, c: float):
        return ParamGradient(self.gA * c, self.ga * c, self.gB * c, self.gb * c)


def glorot_init(n: int, k: int, rng) -> NetParams:
    """Uniform fan-balanced init for A and B; offsets start at zero.

    A entries are uniform on +-sqrt(6/(k+n)), B on +-sqrt(6/(n+1)) (the
    second layer maps n hidden units to one output).  ``rng`` is an int seed
    or a numpy Generator; the same seed always produces the same parameters.
    """
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    rng = np.random.default_rng(rng)
    lim_a = np.sqrt(6.0 / (k + n))
    lim_b = np.sqrt(6.0 / (n + 1))
    A = rng.uniform(-lim_a, lim_a, size=(n, k))
    B = rng.uniform(-lim_b, lim_b, size=n)
    return NetParams(A, np.zeros(n), B, 0.0)


def forward(params: NetParams, x: np.ndarray, omega: OutputNonlinearity) -> ForwardTrace:
    """One forward pass on a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.n_inputs,):
        raise ValueError(f"input shape {x.shape} does not match k={params.n_inputs}")
    U = params.A @ x + params.a
    Z = np.maximum(U, 0.0)
    z = float(params.B @ Z + params.b)
    y = float(omega.omega(z))
    return ForwardTrace(U, Z, z, y)


def forward_batch(params: NetParams, X: np.ndarray, omega: OutputNonlinearity) -> np.ndarray:
    """Outputs y for a sample matrix X (N x k); row i matches forward(X[i])."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.n_inputs:
        raise ValueError(f"sample matrix shape {X.shape} does not match k={params.n_inputs}")
    U = X @ params.A.T + params.a
    Z = np.maximum(U, 0.0)
    zv = Z @ params.B + params.b
    return np.asarray(omega.omega(zv), dtype=float)


def gradient(
    params: NetParams, x: np.ndarray, trace: ForwardTrace, omega: OutputNonlinearity
) -> ParamGradient:
    """Per-sample gradient of omega(z) from an existing forward trace."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.n_inputs,):
        raise ValueError(f"input shape {x.shape} does not match k={params.n_inputs}")
    w = float(omega.omega_prime(trace.z))
    s = params.B * (trace.U > 0.0)
    ga = w * s
    gA = np.outer(ga, x)
    gB = w * trace.Z
    return ParamGradient(gA, ga, gB, w)


def save_params(params: NetParams, path):
    """Write a JSON checkpoint: {n, k}, then A row-major, a, B, b.

    Floats are serialized with full round-trip precision, so load_params
    restores bit-identical values.
    """
    params.validate()
    payload = {
        "n": params.n_hidden,
        "k": params.n_inputs,
        "A": params.A.reshape(-1).tolist(),
        "a": params.a.tolist(),
        "B": params.B.tolist(),
        "b": float(params.b),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_params(path) -> NetParams:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    n, k = int(payload["n"]), int(payload["k"])
    A = np.asarray(payload["A"], dtype=float).reshape(n, k)
    a = np.asarray(payload["a"], dtype=float)
    B = np.asarray(payload["B"], dtype=float)
    params = NetParams(A, a, B, float(payload["b"]))
    params.validate()
    return params
