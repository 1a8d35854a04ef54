"""Experiment runner.

Subcommands:

* ``lrtnet run --config cfg.json | --preset NAME [--compare] [--out-dir D]``
  trains a network per the config and writes evolution.csv, report.json,
  params.json and evolution.png into the output directory (plus
  lrt_reference.json when exact class densities are known).  ``--compare``
  trains every configured method from one shared initialization and adds a
  combined comparison figure.
* ``lrtnet oracle --config cfg.json`` prints the exact optimal error
  probabilities and the attainable criterion maximum for the configured
  densities.
* ``lrtnet validate --config cfg.json`` checks a config and lists
  violations.

Dataset paths are resolved against the LRTNET_DATA_DIR environment
variable when relative.  Exit codes: 0 success, 2 invalid config, 3 data
problem, 4 training diverged.
"""

import argparse
import copy
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import datasets, evaluate, network, oracle, plots
from .evaluate import DIFFERENCE_MAX, SUM_MIN
from .losses import make_phi, output_nonlinearity
from .seeding import substream
from .trainer import (
    ALTERNATING_PAIRS,
    PERMUTED,
    TrainingDiverged,
    TrainRun,
    check_pairing,
    train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

DATA_DIR_ENV = "LRTNET_DATA_DIR"

# method shorthand used by --compare and mu_by_method
METHODS = {
    "cat_a": {"phi_name": "cat_a_default", "rho": None, "criterion": DIFFERENCE_MAX},
    "cat_b": {"phi_name": "cat_b_identity", "rho": None, "criterion": DIFFERENCE_MAX},
    "hinge": {"phi_name": "hinge", "rho": None, "criterion": SUM_MIN},
}


class ConfigurationError(Exception):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class DataError(Exception):
    pass


def _synthetic_dataset():
    return {
        "kind": "synthetic",
        "p1": 0.5,
        "f1": [[1.0, 0.0, 1.0]],
        "f2": [[0.6, 1.0, 1.0], [0.4, -3.0, 1.0]],
        "n_train_per_class": 5000,
        "n_test_per_class": 100000,
    }


def _mnist_dataset():
    return {
        "kind": "mnist",
        "train_images": "train-images-idx3-ubyte",
        "train_labels": "train-labels-idx1-ubyte",
        "test_images": "t10k-images-idx3-ubyte",
        "test_labels": "t10k-labels-idx1-ubyte",
        "digit_a": 4,
        "digit_b": 9,
        "max_per_class": 5500,
    }


def _cifar_dataset():
    return {
        "kind": "cifar",
        "train_files": [f"cifar-10-batches-bin/data_batch_{i}.bin" for i in range(1, 6)],
        "test_files": ["cifar-10-batches-bin/test_batch.bin"],
        "class_a": 1,   # automobile
        "class_b": 0,   # airplane
    }


def _preset(experiment, dataset, method, *, n_hidden, mu, iterations,
            sampling_policy, eval_every, seed, compare_methods, mu_by_method=None):
    cfg = {
        "experiment": experiment,
        "dataset": dataset,
        "phi_name": METHODS[method]["phi_name"],
        "rho": METHODS[method]["rho"],
        "criterion": METHODS[method]["criterion"],
        "mode": "sgd",
        "n_hidden": n_hidden,
        "mu": mu,
        "lambda": 0.99,
        "iterations": iterations,
        "sampling_policy": sampling_policy,
        "eval_every": eval_every,
        "seed": seed,
        "compare_methods": compare_methods,
    }
    if mu_by_method:
        cfg["mu_by_method"] = mu_by_method
    return cfg


def build_presets():
    presets = {}
    for method in ("cat_a", "cat_b", "hinge"):
        presets[f"synthetic-{method.replace('_', '-')}"] = _preset(
            "synthetic", _synthetic_dataset(), method,
            n_hidden=100, mu=1e-4, iterations=5000,
            sampling_policy=ALTERNATING_PAIRS, eval_every=50, seed=99,
            compare_methods=["cat_a", "cat_b", "hinge"],
        )
    for method in ("cat_a", "hinge"):
        presets[f"mnist-4v9-{method.replace('_', '-')}"] = _preset(
            "mnist", _mnist_dataset(), method,
            n_hidden=300, mu=1e-4, iterations=100000,
            sampling_policy=PERMUTED, eval_every=1000, seed=11,
            compare_methods=["cat_a", "hinge"],
        )
    for method, mu in (("cat_b", 2e-5), ("hinge", 1e-5)):
        presets[f"cifar-{method.replace('_', '-')}"] = _preset(
            "cifar", _cifar_dataset(), method,
            n_hidden=100, mu=mu, iterations=100000,
            sampling_policy=PERMUTED, eval_every=1000, seed=11,
            compare_methods=["cat_b", "hinge"],
            mu_by_method={"cat_b": 2e-5, "hinge": 1e-5},
        )
    return presets


PRESETS = build_presets()


def validate(config):
    """Structural and range validation; returns a list of violations."""
    v = []
    experiment = config.get("experiment")
    if experiment not in ("synthetic", "mnist", "cifar", "custom"):
        v.append(f"experiment: unknown value {experiment!r}")

    def _num(name, ok, message):
        value = config.get(name)
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not ok(value):
            v.append(f"{name}: {message}, got {value!r}")

    _num("mu", lambda x: x > 0, "must be a positive number")
    _num("lambda", lambda x: 0 < x < 1, "must lie strictly between 0 and 1")
    _num("iterations", lambda x: isinstance(x, int) and x >= 1, "must be an integer >= 1")
    _num("n_hidden", lambda x: isinstance(x, int) and x >= 1, "must be an integer >= 1")
    _num("eval_every", lambda x: isinstance(x, int) and x >= 1, "must be an integer >= 1")
    if not isinstance(config.get("seed"), int):
        v.append(f"seed: must be an integer, got {config.get('seed')!r}")
    if config.get("mode") not in ("sgd", "batch"):
        v.append(f"mode: must be 'sgd' or 'batch', got {config.get('mode')!r}")
    if config.get("sampling_policy") not in (PERMUTED, ALTERNATING_PAIRS):
        v.append(f"sampling_policy: unknown value {config.get('sampling_policy')!r}")
    if config.get("criterion") not in (DIFFERENCE_MAX, SUM_MIN):
        v.append(f"criterion: unknown value {config.get('criterion')!r}")

    try:
        phi = make_phi(config.get("phi_name"), config.get("rho"))
    except (ValueError, TypeError) as err:
        v.append(f"phi_name/rho: {err}")
    else:
        if config.get("criterion") in (DIFFERENCE_MAX, SUM_MIN):
            try:
                check_pairing(phi, config["criterion"])
            except ValueError as err:
                v.append(f"criterion: {err}")

    dataset = config.get("dataset")
    if not isinstance(dataset, dict):
        v.append("dataset: must be an object")
        return v
    kind = dataset.get("kind", experiment)
    if kind == "synthetic":
        p1 = dataset.get("p1")
        if not isinstance(p1, (int, float)) or not 0 < p1 < 1:
            v.append(f"dataset.p1: must lie in (0, 1), got {p1!r}")
        for name in ("f1", "f2"):
            try:
                oracle.MixtureDensity.from_spec(dataset[name])
            except (KeyError, TypeError, ValueError) as err:
                v.append(f"dataset.{name}: {err}")
        for name in ("n_train_per_class", "n_test_per_class"):
            value = dataset.get(name)
            if not isinstance(value, int) or value < 1:
                v.append(f"dataset.{name}: must be an integer >= 1, got {value!r}")
    elif kind == "mnist":
        for name in ("train_images", "train_labels", "test_images", "test_labels"):
            if not isinstance(dataset.get(name), str):
                v.append(f"dataset.{name}: path required")
        if dataset.get("digit_a") == dataset.get("digit_b"):
            v.append("dataset.digit_a/digit_b: the two digits must differ")
    elif kind == "cifar":
        for name in ("train_files", "test_files"):
            files = dataset.get(name)
            if not isinstance(files, list) or not files:
                v.append(f"dataset.{name}: nonempty list of paths required")
        if dataset.get("class_a") == dataset.get("class_b"):
            v.append("dataset.class_a/class_b: the two classes must differ")
    else:
        v.append(f"dataset.kind: unknown value {kind!r}")
    return v


def _data_root():
    return Path(os.environ.get(DATA_DIR_ENV, "."))


def _resolve_path(p):
    path = Path(p)
    if not path.is_absolute():
        path = _data_root() / path
    if path.exists():
        return path
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gz
    raise DataError(f"dataset file not found: {path}")


def hypothesis_pair_from_config(dataset):
    return oracle.HypothesisPair(
        oracle.MixtureDensity.from_spec(dataset["f1"]),
        oracle.MixtureDensity.from_spec(dataset["f2"]),
        float(dataset["p1"]),
    )


def load_experiment_data(config):
    """Build (train, test, pair) from a validated config.

    ``pair`` carries the exact class densities and is None for file-backed
    experiments.
    """
    dataset = config["dataset"]
    kind = dataset.get("kind", config["experiment"])
    seed = config["seed"]
    if kind == "synthetic":
        pair = hypothesis_pair_from_config(dataset)
        n_train = dataset["n_train_per_class"]
        n_test = dataset["n_test_per_class"]
        train_set = datasets.LabeledDataset(
            datasets.sample_mixture(pair.f1, n_train, substream(seed, "train-data-1")),
            datasets.sample_mixture(pair.f2, n_train, substream(seed, "train-data-2")),
            provenance="synthetic",
        )
        test_set = datasets.LabeledDataset(
            datasets.sample_mixture(pair.f1, n_test, substream(seed, "test-data-1")),
            datasets.sample_mixture(pair.f2, n_test, substream(seed, "test-data-2")),
            provenance="synthetic",
        )
        return train_set, test_set, pair

    if kind == "mnist":
        try:
            train_x, train_y = datasets.load_idx(
                _resolve_path(dataset["train_images"]), _resolve_path(dataset["train_labels"])
            )
            test_x, test_y = datasets.load_idx(
                _resolve_path(dataset["test_images"]), _resolve_path(dataset["test_labels"])
            )
        except (OSError, datasets.DataFormatError) as err:
            raise DataError(str(err)) from err
        a, b = dataset["digit_a"], dataset["digit_b"]
        try:
            train_set = datasets.filter_binary(
                train_y, a, b, train_x,
                max_per_class=dataset.get("max_per_class"), provenance="mnist",
            )
            test_set = datasets.filter_binary(test_y, a, b, test_x, provenance="mnist")
        except ValueError as err:
            raise DataError(str(err)) from err
        return train_set, test_set, None

    if kind == "cifar":
        try:
            train_px, train_y = datasets.load_cifar_binary(
                [_resolve_path(p) for p in dataset["train_files"]]
            )
            test_px, test_y = datasets.load_cifar_binary(
                [_resolve_path(p) for p in dataset["test_files"]]
            )
        except (OSError, datasets.DataFormatError) as err:
            raise DataError(str(err)) from err
        train_gray = datasets.to_grayscale(train_px)
        test_gray = datasets.to_grayscale(test_px)
        a, b = dataset["class_a"], dataset["class_b"]
        try:
            train_set = datasets.filter_binary(
                train_y, a, b, train_gray,
                max_per_class=dataset.get("max_per_class"), provenance="cifar",
            )
        except ValueError as err:
            raise DataError(str(err)) from err
        # standardize with statistics of the full two-class training pool
        scaler = datasets.fit_standardizer(
            np.vstack([train_set.class1, train_set.class2])
        )
        train_set = datasets.LabeledDataset(
            scaler.transform(train_set.class1),
            scaler.transform(train_set.class2),
            provenance="cifar",
        )
        try:
            test_set = datasets.filter_binary(test_y, a, b, test_gray, provenance="cifar")
        except ValueError as err:
            raise DataError(str(err)) from err
        test_set = datasets.LabeledDataset(
            scaler.transform(test_set.class1),
            scaler.transform(test_set.class2),
            provenance="cifar",
        )
        return train_set, test_set, None

    raise DataError(f"cannot build datasets for kind {kind!r}")


def _train_run_from_config(config):
    return TrainRun(
        mode=config["mode"],
        criterion=config["criterion"],
        phi_name=config["phi_name"],
        rho=config.get("rho"),
        n_hidden=config["n_hidden"],
        mu=config["mu"],
        lam=config["lambda"],
        iterations=config["iterations"],
        sampling_policy=config["sampling_policy"],
        eval_every=config["eval_every"],
        seed=config["seed"],
        dataset_ref=config.get("dataset", {}).get("kind", config.get("experiment", "")),
    )


def _write_artifacts(out_dir, config, state, log, report, pair, quiet=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    evaluate.export_evolution_csv(log, out_dir / "evolution.csv")
    evaluate.export_report_json(report, out_dir / "report.json")
    network.save_params(state.params, out_dir / "params.json")
    lrt = None
    if pair is not None:
        lrt = oracle.lrt_errors_quadrature(pair)
        reference = {
            "err1": lrt.err1,
            "err2": lrt.err2,
            "avg": lrt.avg,
            "weighted": lrt.weighted,
            "criterion_upper_bound": oracle.criterion_upper_bound(pair),
        }
        with open(out_dir / "lrt_reference.json", "w", encoding="utf-8") as fh:
            json.dump(reference, fh, indent=2, sort_keys=True)
            fh.write("\n")
    plots.render_evolution(log, out_dir / "evolution.png", lrt=lrt)
    if not quiet:
        print(f"wrote artifacts to {out_dir}")
    return lrt


def _progress_printer(label):
    def emit(point):
        print(
            f"[{label}] iter {point.iteration}: err1={point.err1:.4f} "
            f"err2={point.err2:.4f} avg={point.avg:.4f} j={point.j_hat:.4f}"
        )

    return emit


def run_single(config, out_dir, quiet=False):
    """Train one configuration and write its artifacts."""
    train_set, test_set, pair = load_experiment_data(config)
    run = _train_run_from_config(config)
    progress = None if quiet else _progress_printer(config["phi_name"])
    state, log = train(run, train_set, eval_data=test_set, progress=progress)
    phi = make_phi(run.phi_name, run.rho)
    report = evaluate.evaluate(state.params, phi, output_nonlinearity(phi),
                               test_set, run.criterion)
    _write_artifacts(out_dir, config, state, log, report, pair, quiet=quiet)
    return state, log, report


def run_compare(config, out_dir, quiet=False):
    """Train each configured method from one shared initialization."""
    out_dir = Path(out_dir)
    methods = config.get("compare_methods") or list(METHODS)
    train_set, test_set, pair = load_experiment_data(config)
    shared = network.glorot_init(
        config["n_hidden"], train_set.k, substream(config["seed"], "init")
    )
    mu_by_method = config.get("mu_by_method", {})
    logs, results = {}, {}
    for method in methods:
        mcfg = copy.deepcopy(config)
        mcfg.update(METHODS[method])
        mcfg["mu"] = mu_by_method.get(method, config["mu"])
        run = _train_run_from_config(mcfg)
        progress = None if quiet else _progress_printer(method)
        state, log = train(run, train_set, eval_data=test_set,
                           initial_params=shared, progress=progress)
        phi = make_phi(run.phi_name, run.rho)
        report = evaluate.evaluate(state.params, phi, output_nonlinearity(phi),
                                   test_set, run.criterion)
        lrt = _write_artifacts(out_dir / method, mcfg, state, log, report, pair,
                               quiet=quiet)
        logs[method] = log
        results[method] = report
    plots.render_evolution(logs, out_dir / "comparison.png", lrt=lrt)
    summary = {
        method: {"err1": r.err1, "err2": r.err2, "avg": r.avg}
        for method, r in results.items()
    }
    if pair is not None:
        ref = oracle.lrt_errors_quadrature(pair)
        summary["lrt"] = {"err1": ref.err1, "err2": ref.err2, "avg": ref.avg}
    with open(out_dir / "comparison.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results


def load_config(args):
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigurationError(
                [f"preset: unknown name {args.preset!r}; known: {', '.join(sorted(PRESETS))}"]
            )
        config = copy.deepcopy(PRESETS[args.preset])
    else:
        config = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config.update(json.load(fh))
        except OSError as err:
            raise ConfigurationError([f"config: {err}"]) from err
        except json.JSONDecodeError as err:
            raise ConfigurationError([f"config: invalid JSON ({err})"]) from err
    for name in ("iterations", "eval_every", "seed"):
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            config[name] = value
    if not config:
        raise ConfigurationError(["either --config or --preset is required"])
    return config


def cmd_run(args):
    config = load_config(args)
    violations = validate(config)
    if violations:
        raise ConfigurationError(violations)
    default_name = args.preset or Path(args.config).stem
    out_dir = Path(args.out_dir) if args.out_dir else Path("runs") / default_name
    if args.compare:
        run_compare(config, out_dir, quiet=args.quiet)
    else:
        _, _, report = run_single(config, out_dir, quiet=args.quiet)
        print(
            f"final: err1={report.err1:.6f} err2={report.err2:.6f} "
            f"avg={report.avg:.6f} pooled={report.pooled:.6f}"
        )
    return EXIT_OK


def cmd_oracle(args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigurationError([f"config: {err}"]) from err
    if "f1" in config and "f2" in config:
        dataset = config
    else:
        dataset = config.get("dataset", {})
        if dataset.get("kind", config.get("experiment")) != "synthetic":
            raise ConfigurationError(
                ["oracle needs explicit densities: give {p1, f1, f2} or a synthetic config"]
            )
    try:
        pair = hypothesis_pair_from_config(dataset)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigurationError([f"densities: {err}"]) from err
    rates = oracle.lrt_errors_quadrature(pair)
    bound = oracle.criterion_upper_bound(pair)
    print(f"err1     = {rates.err1:.6f}")
    print(f"err2     = {rates.err2:.6f}")
    print(f"avg      = {rates.avg:.6f}")
    print(f"weighted = {rates.weighted:.6f}")
    print(f"criterion upper bound = {bound:.6f}")
    return EXIT_OK


def cmd_validate(args):
    config = load_config(args)
    violations = validate(config)
    if violations:
        for item in violations:
            print(f"invalid: {item}")
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lrtnet",
        description="train two-layer binary classifiers and compare them with the exact optimal rule",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train a network and write artifacts")
    run_p.add_argument("--config", help="JSON run config")
    run_p.add_argument("--preset", help=f"named preset: {', '.join(sorted(PRESETS))}")
    run_p.add_argument("--compare", action="store_true",
                       help="train all configured methods from one shared initialization")
    run_p.add_argument("--out-dir", help="artifact directory (default runs/<name>)")
    run_p.add_argument("--iterations", type=int, help="override iteration budget")
    run_p.add_argument("--eval-every", dest="eval_every", type=int,
                       help="override evaluation cadence")
    run_p.add_argument("--seed", type=int, help="override run seed")
    run_p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    run_p.set_defaults(func=cmd_run)

    oracle_p = sub.add_parser("oracle", help="print exact optimal errors and the criterion bound")
    oracle_p.add_argument("--config", required=True)
    oracle_p.set_defaults(func=cmd_oracle)

    val_p = sub.add_parser("validate", help="check a config without running it")
    val_p.add_argument("--config", help="JSON run config")
    val_p.add_argument("--preset", help="named preset")
    val_p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as err:
        for item in err.violations:
            print(f"config error: {item}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDiverged as err:
        print(f"training diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
