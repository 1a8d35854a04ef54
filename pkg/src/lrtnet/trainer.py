"""Training algorithms for the two-layer network.

Both algorithms normalize every gradient element by the square root of a
running power estimate P <- lam * P + (1 - lam) * g**2 before applying the
learning rate, so the effective step per element starts at mu / sqrt(1 - lam)
(a sign step; expected warm-up behavior, not bias-corrected) and adapts to
the gradient scale afterwards.

Two criterion modes share all of this plumbing:

* ``difference_max``: ascend the between-class difference of mean outputs.
  The per-sample gradient is the closed-form gradient of omega(z); a batch
  iteration uses per-class gradient sums g1, g2 and steps along g1 - g2,
  a stochastic iteration steps along eps * g with eps = +1 for class 1 and
  -1 for class 2.
* ``sum_min``: descend the mean margin penalty phi(eps * z) with the
  identity output head, same normalization, opposite step sign.
"""

from dataclasses import dataclass

import numpy as np

from .datasets import LabeledDataset, merged_iterator
from .evaluate import (
    DIFFERENCE_MAX,
    SUM_MIN,
    EvolutionLog,
    EvolutionPoint,
    evaluate,
)
from .losses import Category, PhiSpec, make_phi, output_nonlinearity
from .network import NetParams, forward, glorot_init, gradient
from .seeding import substream

EPS_DIV = 1e-12  # keeps 0/0 at zero when a gradient element and its power vanish

PERMUTED = "permuted"
ALTERNATING_PAIRS = "alternating_pairs"


class TrainingDiverged(RuntimeError):
    """A parameter became non-finite during training."""


@dataclass
class TrainerState:
    """Network parameters plus the gradient power estimates.

    powM mirrors A, powm mirrors a, powN mirrors B and pown mirrors b; all
    start at zero and stay nonnegative (they are convex combinations of
    squares).  t counts completed iterations.
    """

    params: NetParams
    powM: np.ndarray
    powm: np.ndarray
    powN: np.ndarray
    pown: float
    mu: float
    lam: float
    t: int = 0


@dataclass
class TrainRun:
    """Configuration of one training run (the trainer-level contract)."""

    mode: str                 # "sgd" | "batch"
    criterion: str            # "difference_max" | "sum_min"
    phi_name: str
    rho: float | None
    n_hidden: int
    mu: float
    lam: float
    iterations: int
    sampling_policy: str = PERMUTED
    eval_every: int = 100
    seed: int = 0
    dataset_ref: str = ""

    def to_dict(self):
        return {
            "mode": self.mode,
            "criterion": self.criterion,
            "phi_name": self.phi_name,
            "rho": self.rho,
            "n_hidden": self.n_hidden,
            "mu": self.mu,
            "lambda": self.lam,
            "iterations": self.iterations,
            "sampling_policy": self.sampling_policy,
            "eval_every": self.eval_every,
            "seed": self.seed,
            "dataset_ref": self.dataset_ref,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            mode=d["mode"],
            criterion=d["criterion"],
            phi_name=d["phi_name"],
            rho=d.get("rho"),
            n_hidden=int(d["n_hidden"]),
            mu=float(d["mu"]),
            lam=float(d["lambda"]),
            iterations=int(d["iterations"]),
            sampling_policy=d.get("sampling_policy", PERMUTED),
            eval_every=int(d.get("eval_every", 100)),
            seed=int(d.get("seed", 0)),
            dataset_ref=d.get("dataset_ref", ""),
        )


def check_pairing(phi: PhiSpec, mode: str):
    """Criterion modes are tied to nonlinearity families."""
    if mode == DIFFERENCE_MAX and phi.category is Category.LEGACY_SUM:
        raise ValueError(f"{phi.name!r} is a margin penalty; use the sum_min criterion")
    if mode == SUM_MIN and phi.category is not Category.LEGACY_SUM:
        raise ValueError(f"{phi.name!r} is not a margin penalty; use difference_max")
    if mode not in (DIFFERENCE_MAX, SUM_MIN):
        raise ValueError(f"unknown criterion mode {mode!r}")


def init_state(params: NetParams, mu: float, lam: float) -> TrainerState:
    if mu <= 0:
        raise ValueError(f"learning rate must be positive, got {mu}")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"forgetting factor must lie in (0, 1), got {lam}")
    n, k = params.A.shape
    return TrainerState(
        params=params,
        powM=np.zeros((n, k)),
        powm=np.zeros(n),
        powN=np.zeros(n),
        pown=0.0,
        mu=mu,
        lam=lam,
    )


def _check_finite(params: NetParams, t: int):
    if not params.all_finite():
        raise TrainingDiverged(f"non-finite parameter after iteration {t}")


def _apply_update(state, dA, da, dB, db, direction):
    """Shared power update plus normalized parameter step."""
    lam, mu = state.lam, state.mu
    powM = lam * state.powM + (1.0 - lam) * dA**2
    powm = lam * state.powm + (1.0 - lam) * da**2
    powN = lam * state.powN + (1.0 - lam) * dB**2
    pown = lam * state.pown + (1.0 - lam) * db**2
    step = direction * mu
    p = state.params
    new_params = NetParams(
        p.A + step * dA / (np.sqrt(powM) + EPS_DIV),
        p.a + step * da / (np.sqrt(powm) + EPS_DIV),
        p.B + step * dB / (np.sqrt(powN) + EPS_DIV),
        p.b + step * db / (np.sqrt(pown) + EPS_DIV),
    )
    t = state.t + 1
    _check_finite(new_params, t)
    return TrainerState(new_params, powM, powm, powN, float(pown), mu, lam, t)


def _class_gradient_sums(params, X, weights, U, Z):
    """Gradient sums over a sample matrix with per-sample scalar weights."""
    S = (U > 0.0) * params.B          # N x n, B o relu'(U) rows
    WS = weights[:, None] * S
    gA = WS.T @ X
    ga = WS.sum(axis=0)
    gB = Z.T @ weights
    gb = float(weights.sum())
    return gA, ga, gB, gb


def batch_step(state: TrainerState, data: LabeledDataset, phi: PhiSpec, mode: str,
               omega=None) -> TrainerState:
    """One full-data iteration.

    Computes per-class gradient sums at the current parameters, updates the
    power estimates with the elementwise square of their difference, and
    steps along (class-1 sum minus class-2 sum) normalized by the root
    power: ascent in difference mode, descent in sum mode.
    """
    check_pairing(phi, mode)
    omega = omega or output_nonlinearity(phi)
    p = state.params
    sums = []
    for X, eps in ((data.class1, 1.0), (data.class2, -1.0)):
        U = X @ p.A.T + p.a
        Z = np.maximum(U, 0.0)
        zv = Z @ p.B + p.b
        if mode == DIFFERENCE_MAX:
            weights = np.asarray(omega.omega_prime(zv), dtype=float)
        else:
            weights = np.asarray(phi.phi_prime(eps * zv), dtype=float)
        sums.append(_class_gradient_sums(p, X, weights, U, Z))
    dA, da, dB, db = (g1 - g2 for g1, g2 in zip(sums[0], sums[1]))
    direction = 1.0 if mode == DIFFERENCE_MAX else -1.0
    return _apply_update(state, dA, da, dB, db, direction)


def sgd_step(state: TrainerState, x, label: int, phi: PhiSpec, mode: str,
             omega=None) -> TrainerState:
    """One single-sample iteration.

    eps is +1 for a class-1 sample and -1 for class 2; the power estimates
    track the squared per-sample gradient and the parameter step is
    mu * eps * g / sqrt(P) in difference mode (ascent) and its negation on
    the penalty gradient in sum mode (descent).
    """
    if label not in (1, 2):
        raise ValueError(f"label must be 1 or 2, got {label}")
    check_pairing(phi, mode)
    omega = omega or output_nonlinearity(phi)
    trace = forward(state.params, x, omega)
    g = gradient(state.params, x, trace, omega)
    eps = 1.0 if label == 1 else -1.0
    if mode == SUM_MIN:
        # identity head: scale the raw gradient of z by the penalty slope
        g = g.scaled(float(phi.phi_prime(eps * trace.z)))
        direction = -eps
    else:
        direction = eps
    return _apply_update(state, g.gA, g.ga, g.gB, g.gb, direction)


def train(run: TrainRun, train_data: LabeledDataset, eval_data=None,
          initial_params=None, progress=None):
    """Run a configured training job.

    Stochastic mode consumes the policy's sample stream: under 'permuted'
    one iteration is one sample of the merged, freshly permuted set; under
    'alternating_pairs' one iteration takes one sample from each class.
    Batch mode performs full-data iterations.  Every ``eval_every``
    iterations (and at the final one) the current network is scored on
    ``eval_data`` (the training set when absent) and appended to the
    returned EvolutionLog; ``progress``, when given, is called with each
    new snapshot.
    """
    if run.iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {run.iterations}")
    if run.eval_every < 1:
        raise ValueError(f"eval_every must be >= 1, got {run.eval_every}")
    phi = make_phi(run.phi_name, run.rho)
    check_pairing(phi, run.criterion)
    omega = output_nonlinearity(phi)
    if initial_params is None:
        params = glorot_init(run.n_hidden, train_data.k, substream(run.seed, "init"))
    else:
        params = initial_params.copy()
    state = init_state(params, run.mu, run.lam)
    if eval_data is None:
        eval_data = train_data
    log = EvolutionLog()

    def snapshot(iteration, state):
        report = evaluate(state.params, phi, omega, eval_data, run.criterion)
        point = EvolutionPoint(iteration, report.err1, report.err2, report.avg, report.j_hat)
        log.append(point)
        if progress is not None:
            progress(point)

    if run.mode == "batch":
        for t in range(1, run.iterations + 1):
            state = batch_step(state, train_data, phi, run.criterion, omega)
            if t % run.eval_every == 0 or t == run.iterations:
                snapshot(t, state)
    elif run.mode == "sgd":
        stream = merged_iterator(train_data, run.sampling_policy, run.seed)
        per_tick = 2 if run.sampling_policy == ALTERNATING_PAIRS else 1
        for t in range(1, run.iterations + 1):
            for _ in range(per_tick):
                x, label = next(stream)
                state = sgd_step(state, x, label, phi, run.criterion, omega)
            if t % run.eval_every == 0 or t == run.iterations:
                snapshot(t, state)
    else:
        raise ValueError(f"unknown training mode {run.mode!r}")
    return state, log
