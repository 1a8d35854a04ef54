"""Acceptance gate: every release criterion at its pinned tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS/FAIL/SKIP
line per criterion.  The two image-dataset criteria need the corresponding
files under LRTNET_DATA_DIR and carry the ``slow`` marker; everything else
runs self-contained.  Setting LRTNET_LONG_TESTS=1 switches the digit
benchmark to its full iteration budget.
"""

import copy
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest
from helpers import (
    assert_gradients_close,
    cifar_record,
    draw_clear_config,
    fd_gradient,
    idx_images_bytes,
    idx_labels_bytes,
)

from lrtnet import datasets
from lrtnet.cli import PRESETS, DataError, _resolve_path, load_experiment_data, main
from lrtnet.evaluate import DIFFERENCE_MAX, SUM_MIN, evaluate
from lrtnet.losses import make_phi, output_nonlinearity
from lrtnet.network import forward, glorot_init, gradient
from lrtnet.oracle import (
    DiscretePair,
    HypothesisPair,
    MixtureDensity,
    brute_force_optimality,
    criterion_upper_bound,
    gaussian,
    lrt_errors_quadrature,
)
from lrtnet.seeding import substream
from lrtnet.trainer import TrainRun, train

LONG_BUDGET = os.environ.get("LRTNET_LONG_TESTS") == "1"

# published reference values for the bimodal benchmark
LRT_TARGET = (0.194, 0.345, 0.269)
CAT_A_TARGET = (0.178, 0.361, 0.269)
CAT_B_TARGET = (0.178, 0.362, 0.270)
HINGE_TARGET = (0.143, 0.401, 0.272)


@contextmanager
def criterion(num, label):
    try:
        yield
    except pytest.skip.Exception:
        print(f"\nACCEPTANCE {num} ({label}): SKIP")
        raise
    except BaseException:
        print(f"\nACCEPTANCE {num} ({label}): FAIL")
        raise
    print(f"\nACCEPTANCE {num} ({label}): PASS")


def table_pair():
    return HypothesisPair(
        gaussian(0.0, 1.0),
        MixtureDensity.from_spec([[0.6, 1.0, 1.0], [0.4, -3.0, 1.0]]),
        0.5,
    )


def random_scalar_pair(rng):
    def mixture():
        m = rng.integers(1, 4)
        return MixtureDensity(
            rng.dirichlet(np.ones(m)),
            rng.uniform(-4, 4, size=(m, 1)),
            rng.uniform(0.3, 2.0, size=(m, 1)) ** 2,
        )

    return HypothesisPair(mixture(), mixture(), float(rng.uniform(0.2, 0.8)))


def _mnist_paths():
    ds = PRESETS["mnist-4v9-cat-a"]["dataset"]
    return [ds[k] for k in ("train_images", "train_labels", "test_images", "test_labels")]


def _cifar_paths():
    ds = PRESETS["cifar-cat-b"]["dataset"]
    return list(ds["train_files"]) + list(ds["test_files"])


def _dataset_available(paths):
    try:
        for p in paths:
            _resolve_path(p)
    except DataError:
        return False
    return True


def test_criterion_1_exact_errors_match_published_values():
    with criterion(1, "exact optimal errors on the bimodal benchmark"):
        start = time.perf_counter()
        rates = lrt_errors_quadrature(table_pair())
        elapsed = time.perf_counter() - start
        assert abs(rates.err1 - LRT_TARGET[0]) <= 0.002
        assert abs(rates.err2 - LRT_TARGET[1]) <= 0.002
        assert abs(rates.avg - LRT_TARGET[2]) <= 0.002
        assert elapsed < 1.0, f"quadrature took {elapsed:.3f}s"


@pytest.fixture(scope="module")
def synthetic_compare():
    """The three methods trained on the bimodal preset from one shared
    initialization, scored on the preset's 10**5-per-class test sets."""
    config = copy.deepcopy(PRESETS["synthetic-cat-a"])
    train_set, test_set, pair = load_experiment_data(config)
    shared = glorot_init(config["n_hidden"], train_set.k, substream(config["seed"], "init"))
    results = {}
    for method, phi_name, mode in (
        ("cat_a", "cat_a_default", DIFFERENCE_MAX),
        ("cat_b", "cat_b_identity", DIFFERENCE_MAX),
        ("hinge", "hinge", SUM_MIN),
    ):
        run = TrainRun(
            mode="sgd", criterion=mode, phi_name=phi_name, rho=None,
            n_hidden=config["n_hidden"], mu=config["mu"], lam=config["lambda"],
            iterations=config["iterations"], sampling_policy=config["sampling_policy"],
            eval_every=config["iterations"], seed=config["seed"],
        )
        state, _ = train(run, train_set, eval_data=test_set, initial_params=shared)
        phi = make_phi(phi_name)
        results[method] = evaluate(state.params, phi, output_nonlinearity(phi),
                                   test_set, mode)
    return results, lrt_errors_quadrature(pair)


def _assert_close_to_target(report, target, lrt):
    assert abs(report.err1 - target[0]) <= 0.02, (report.err1, target[0])
    assert abs(report.err2 - target[1]) <= 0.02, (report.err2, target[1])
    assert abs(report.avg - target[2]) <= 0.02, (report.avg, target[2])
    assert report.avg <= lrt.avg + 0.01


def test_criterion_2_bounded_extremes_training_matches_table(synthetic_compare):
    with criterion(2, "bimodal training, heavy-tailed bounded loss"):
        results, lrt = synthetic_compare
        _assert_close_to_target(results["cat_a"], CAT_A_TARGET, lrt)


def test_criterion_3_remaining_methods_and_deviation_ordering(synthetic_compare):
    with criterion(3, "bimodal training, monotone loss and hinge baseline"):
        results, lrt = synthetic_compare
        _assert_close_to_target(results["cat_b"], CAT_B_TARGET, lrt)
        _assert_close_to_target(results["hinge"], HINGE_TARGET, lrt)
        # the hinge tracks the optimal per-class errors worse than both
        # difference-criterion methods
        for field, exact in (("err1", lrt.err1), ("err2", lrt.err2)):
            hinge_dev = abs(getattr(results["hinge"], field) - exact)
            for other in ("cat_a", "cat_b"):
                assert hinge_dev > abs(getattr(results[other], field) - exact), field


@pytest.mark.slow
def test_criterion_4_digit_pair_benchmark():
    with criterion(4, "handwritten 4-vs-9 benchmark"):
        if not _dataset_available(_mnist_paths()):
            pytest.skip("digit dataset files not present under LRTNET_DATA_DIR")
        config = copy.deepcopy(PRESETS["mnist-4v9-cat-a"])
        if LONG_BUDGET:
            config["iterations"] = 500_000
        train_set, test_set, _ = load_experiment_data(config)
        run = TrainRun(
            mode="sgd", criterion=config["criterion"], phi_name=config["phi_name"],
            rho=config["rho"], n_hidden=config["n_hidden"], mu=config["mu"],
            lam=config["lambda"], iterations=config["iterations"],
            sampling_policy=config["sampling_policy"],
            eval_every=config["eval_every"], seed=config["seed"],
        )
        state, log = train(run, train_set, eval_data=test_set)
        final = log.points[-1]
        if LONG_BUDGET:
            # average misclassified count at the full budget
            wrong = 0.5 * (final.err1 * test_set.n1 + final.err2 * test_set.n2)
            assert wrong <= 12.0, wrong
        else:
            assert final.avg <= 0.015, final.avg


@pytest.mark.slow
def test_criterion_5_image_pair_benchmark():
    with criterion(5, "grayscale image pair benchmark"):
        if not _dataset_available(_cifar_paths()):
            pytest.skip("image dataset files not present under LRTNET_DATA_DIR")
        config = copy.deepcopy(PRESETS["cifar-cat-b"])
        train_set, test_set, _ = load_experiment_data(config)
        shared = glorot_init(config["n_hidden"], train_set.k,
                             substream(config["seed"], "init"))
        finals = {}
        for method, phi_name, mode, mu in (
            ("cat_b", "cat_b_identity", DIFFERENCE_MAX, 2e-5),
            ("hinge", "hinge", SUM_MIN, 1e-5),
        ):
            run = TrainRun(
                mode="sgd", criterion=mode, phi_name=phi_name, rho=None,
                n_hidden=config["n_hidden"], mu=mu, lam=config["lambda"],
                iterations=config["iterations"],
                sampling_policy=config["sampling_policy"],
                eval_every=config["iterations"], seed=config["seed"],
            )
            state, log = train(run, train_set, eval_data=test_set,
                               initial_params=shared)
            finals[method] = log.points[-1].avg
        assert abs(finals["cat_b"] - finals["hinge"]) <= 0.03, finals
        assert finals["cat_b"] < 0.5 and finals["hinge"] < 0.5, finals


def test_criterion_6_exhaustive_search_never_beats_the_sign_rule():
    with criterion(6, "exhaustive optimality of the sign rule"):
        rng = np.random.default_rng(606)
        variants = [
            make_phi("cat_a_rational", 1.5),
            make_phi("cat_a_rational", 2.0),
            make_phi("cat_a_rational", 4.0),
            make_phi("cat_a_exp", 0.5),
            make_phi("cat_a_exp", 1.0),
            make_phi("cat_a_exp", 2.0),
            make_phi("cat_b_identity"),
        ]
        for _ in range(100):
            m = int(rng.integers(2, 9))
            d = DiscretePair(rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m)),
                             float(rng.uniform(0.2, 0.8)))
            for phi in variants:
                res = brute_force_optimality(d, phi, tol=1e-12)
                assert abs(res.best_value - res.lrt_value) <= 1e-12


def test_criterion_7_gradients_match_finite_differences():
    with criterion(7, "closed-form gradients vs central differences"):
        rng = np.random.default_rng(707)
        families = [
            ("cat_a_default", None),
            ("cat_a_exp", 1.0),
            ("cat_b_identity", None),
            ("hinge", None),
        ]
        for phi_name, rho in families:
            omega = output_nonlinearity(make_phi(phi_name, rho))
            for _ in range(100):
                params, x = draw_clear_config(rng, omega)
                trace = forward(params, x, omega)
                g = gradient(params, x, trace, omega)
                numeric = fd_gradient(params, x, omega, step=1e-5)
                assert_gradients_close((g.gA, g.ga, g.gB, g.gb), numeric, rtol=1e-4)


def test_criterion_8_bound_identity():
    with criterion(8, "criterion maximum equals 1 - 2 * optimal error"):
        rng = np.random.default_rng(808)
        for _ in range(20):
            pair = random_scalar_pair(rng)
            bound = criterion_upper_bound(pair)
            rates = lrt_errors_quadrature(pair)
            assert abs(bound - (1.0 - 2.0 * rates.weighted)) <= 1e-6


def test_criterion_9_preset_reruns_are_byte_identical(tmp_path):
    with criterion(9, "byte-identical evolution logs"):
        blobs = []
        for sub in ("first", "second"):
            out = tmp_path / sub
            code = main([
                "run", "--preset", "synthetic-cat-a", "--out-dir", str(out),
                "--iterations", "400", "--eval-every", "50", "--quiet",
            ])
            assert code == 0
            blobs.append((out / "evolution.csv").read_bytes())
        assert blobs[0] == blobs[1]


def test_criterion_10_parsers_and_their_distinct_errors(tmp_path):
    with criterion(10, "binary format parsers and error taxonomy"):
        # clean image fixture parses exactly
        img = np.zeros((28, 28), dtype=np.uint8)
        img[0, 0] = 255
        ip = tmp_path / "img.idx"
        lp = tmp_path / "lab.idx"
        ip.write_bytes(idx_images_bytes([img]))
        lp.write_bytes(idx_labels_bytes([4]))
        X, y = datasets.load_idx(ip, lp)
        assert X[0, 0] == 1.0 and X[0, 1] == 0.0 and y[0] == 4

        # clean image-record fixture parses exactly
        cp = tmp_path / "batch.bin"
        pixels = np.arange(3072) % 256
        cp.write_bytes(cifar_record(3, pixels))
        px, labels = datasets.load_cifar_binary(cp)
        assert labels[0] == 3 and px[0, 0] == 0.0 and px[0, 255] == 255.0

        # each malformation has its designated error class
        cases = []
        bad_magic = tmp_path / "bm.idx"
        bad_magic.write_bytes(idx_images_bytes([img], magic=0x00000802))
        cases.append((datasets.MagicNumberError,
                      lambda: datasets.load_idx(bad_magic, lp)))
        truncated = tmp_path / "tr.idx"
        truncated.write_bytes(idx_images_bytes([img])[:-10])
        cases.append((datasets.TruncatedFileError,
                      lambda: datasets.load_idx(truncated, lp)))
        lp3 = tmp_path / "lab3.idx"
        lp3.write_bytes(idx_labels_bytes([1, 2, 3]))
        cases.append((datasets.CountMismatchError,
                      lambda: datasets.load_idx(ip, lp3)))
        short = tmp_path / "short.bin"
        short.write_bytes(b"\x00" * 3074)
        cases.append((datasets.RecordLengthError,
                      lambda: datasets.load_cifar_binary(short)))
        badlabel = tmp_path / "badlabel.bin"
        badlabel.write_bytes(cifar_record(10, pixels))
        cases.append((datasets.LabelRangeError,
                      lambda: datasets.load_cifar_binary(badlabel)))

        seen = set()
        for exc_type, trigger in cases:
            with pytest.raises(exc_type) as info:
                trigger()
            assert type(info.value) is exc_type
            seen.add(exc_type)
        assert len(seen) == len(cases), "error classes must be pairwise distinct"
