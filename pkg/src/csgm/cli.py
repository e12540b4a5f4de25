"""Command-line driver: prepare, select, train, evaluate, roc, benchmark.

Settings come from an optional INI file (``[pipeline]`` section, plus
``[dataset]``/``[columns]`` sections for a custom table) and flags; flags
win. Every command writes ``<command>_config.ini`` beside its outputs.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .baseline import fit_logistic, predict_logistic, predict_logistic_label
from .classifier import CsgmModel, fit_csgm, posterior_good, predict
from .dataset import (BUILTIN_DATASETS, DatasetConfig, EncodedDataset, SplitSpec, builtin_config,
                      drop_missing, encode_dummy, encode_integer, export_csv, load_csv, locate_file,
                      standardize_fit_apply, train_test_split)
from .errors import CsgmError, DataError, NumericalError
from .gmm import EmConfig, select_components, write_selection_csv
from .metrics import dump_json, format_score, per_cluster_accuracy, roc_curve, score_report
from .resample import SmoteConfig, smote_balance

logger = logging.getLogger("csgm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    dataset: str
    seed: int
    data_dir: str | None = None
    dataset_config: str | None = None
    encoding: str | None = None  # None: the dataset's own default
    smote: bool | None = None  # None: the dataset's own default
    standardize: bool = True
    train_fraction: float = 2.0 / 3.0
    range_min: int = 1
    range_max: int = 12
    criterion: str = "bic"
    boundary: float = 0.5
    max_iter: int = 500
    rel_tol: float = 1e-6
    reg_eps: float | None = None
    n_restarts: int = 5
    out: str = "runs"

    def __post_init__(self):
        if self.dataset not in BUILTIN_DATASETS + ("custom",):
            raise UsageError(f"unknown dataset {self.dataset!r}")
        if self.dataset == "custom" and not self.dataset_config:
            raise UsageError("a custom dataset needs [dataset] and [columns] sections in --config")
        if self.encoding not in (None, "dummy", "integer"):
            raise UsageError(f"unknown encoding {self.encoding!r}")
        if self.criterion not in ("aic", "bic"):
            raise UsageError(f"criterion must be aic or bic, got {self.criterion!r}")
        if not 1 <= self.range_min <= self.range_max:
            raise UsageError(f"invalid component range {self.range_min}:{self.range_max}")
        if not 0.0 <= self.boundary <= 1.0:
            raise UsageError(f"boundary must lie in [0, 1], got {self.boundary}")
        if not 0.0 < self.train_fraction < 1.0:
            raise UsageError("train_fraction must lie in (0, 1)")
        try:
            self.em_config()
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    @property
    def n_range(self):
        return (self.range_min, self.range_max)

    def em_config(self) -> EmConfig:
        return EmConfig(max_iter=self.max_iter, rel_tol=self.rel_tol, reg_eps=self.reg_eps,
                        n_restarts=self.n_restarts, seed=self.seed)

    def dataset_spec(self) -> DatasetConfig:
        if self.dataset_config:
            spec = DatasetConfig.read(self.dataset_config)
            return spec if self.dataset == "custom" else replace(spec, name=self.dataset)
        return builtin_config(self.dataset)

    def to_ini(self) -> str:
        lines = ["[pipeline]"]
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {'auto' if value is None else _ini_value(value)}")
        return "\n".join(lines) + "\n"


def _ini_value(value):
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_value(key, raw: str):
    kind = _TYPES[key]
    raw = raw.strip()
    if "None" in kind and raw.lower() in ("auto", "none", ""):
        return None
    try:
        if kind.startswith("bool"):
            return configparser.ConfigParser.BOOLEAN_STATES[raw.lower()]
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except (KeyError, ValueError):
        raise UsageError(f"bad value for {key}: {raw!r}") from None
    return raw


def read_config_file(path) -> dict:
    """``[pipeline]`` entries of an INI file as typed values."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None
    values = {}
    if parser.has_section("pipeline"):
        for key, raw in parser["pipeline"].items():
            if key not in _TYPES:
                raise UsageError(f"unknown pipeline setting {key!r} in {path}")
            values[key] = _parse_value(key, raw)
    if parser.has_section("dataset"):
        values.setdefault("dataset_config", str(path))
        values.setdefault("dataset", "custom")
    return values


def _parse_range(text: str):
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--range expects MIN:MAX, got {text!r}") from None
    return lo, hi


def config_from_args(args) -> PipelineConfig:
    values = read_config_file(args.config) if args.config else {}
    overrides = {
        "dataset": args.dataset,
        "seed": args.seed,
        "data_dir": args.data_dir,
        "encoding": args.encoding,
        "criterion": args.criterion,
        "boundary": args.boundary,
        "out": args.out,
    }
    if args.smote is not None:
        overrides["smote"] = args.smote == "on"
    if args.no_standardize:
        overrides["standardize"] = False
    if args.range is not None:
        overrides["range_min"], overrides["range_max"] = _parse_range(args.range)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "seed" not in values:
        raise UsageError("a seed is required (--seed or 'seed' in the config file)")
    values.setdefault("dataset", "german")
    return PipelineConfig(**values)


# --------------------------------------------------------------------------
# pipeline steps shared by the commands
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Prepared:
    spec: DatasetConfig
    n_rows: int  # rows in the file
    n_complete: int  # rows left after dropping incomplete ones
    full: EncodedDataset  # encoded, unscaled
    train: EncodedDataset  # scaled, before SMOTE
    test: EncodedDataset
    smote: SmoteConfig | None

    def fit_data(self) -> EncodedDataset:
        """The rows the classifier is fitted on (SMOTE-balanced when enabled)."""
        return self.train if self.smote is None else smote_balance(self.train, self.smote)


def prepare_data(cfg: PipelineConfig) -> Prepared:
    spec = cfg.dataset_spec()
    path = locate_file(spec, cfg.data_dir)
    raw = load_csv(path, spec.schema)
    table = drop_missing(raw)
    encoding = cfg.encoding or spec.encoding
    full = encode_dummy(table) if encoding == "dummy" else encode_integer(table)
    train, test = train_test_split(full, SplitSpec(cfg.train_fraction, cfg.seed))
    if cfg.standardize:
        train, test = standardize_fit_apply(train, test)
    use_smote = spec.smote if cfg.smote is None else cfg.smote
    smote = SmoteConfig(seed=cfg.seed) if use_smote else None
    return Prepared(spec, len(raw), len(table), full, train, test, smote)


def train_model(cfg: PipelineConfig, prep: Prepared):
    return fit_csgm(prep.train, cfg.em_config(), n_range=cfg.n_range, criterion=cfg.criterion,
                    smote=prep.smote, boundary=cfg.boundary)


def evaluate_model(model: CsgmModel, data: EncodedDataset) -> dict:
    scores = posterior_good(data.features, model)
    report = score_report(predict(data.features, model), data.labels, scores=scores,
                          clusters=per_cluster_accuracy(model, data))
    report["n_components"] = model.n_components
    report["decision_boundary"] = model.decision_boundary
    return report


def load_model(path) -> CsgmModel:
    try:
        return CsgmModel.from_json(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc.strerror}", stage="load_model") from None
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path} is not a valid model file: {exc}", stage="load_model") from None


def _check_compatible(model: CsgmModel, data: EncodedDataset, path):
    if model.gmm.n_features != data.n_features:
        raise DataError(f"model {path} expects {model.gmm.n_features} features, "
                        f"the prepared data has {data.n_features}", stage="evaluate")
    ms, ds = model.standardization, data.standardization
    same = (ms is None and ds is None) or (
        ms is not None and ds is not None
        and np.array_equal(ms.mean, ds.mean) and np.array_equal(ms.scale, ds.scale))
    if not same:
        raise DataError(f"model {path} was trained with different scaling than this config "
                        "produces (check seed, dataset and --no-standardize)", stage="evaluate")


def reference_scores() -> dict:
    text = resources.files("csgm").joinpath("reference_scores.json").read_text("utf-8")
    return json.loads(text)


def _split_data(prep: Prepared, split: str) -> EncodedDataset:
    return prep.fit_data() if split == "train" else prep.test


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _out_dir(cfg: PipelineConfig, command: str) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{command}_config.ini").write_text(cfg.to_ini(), encoding="utf-8")
    return out


def _write_json(doc, path: Path):
    dump_json(doc, path)
    logger.info("wrote %s", path)


def cmd_prepare(cfg: PipelineConfig) -> dict:
    prep = prepare_data(cfg)
    out = _out_dir(cfg, "prepare")
    export_csv(prep.train, out / "train.csv")
    export_csv(prep.test, out / "test.csv")
    fit = prep.fit_data()
    if prep.smote is not None:
        export_csv(fit, out / "train_balanced.csv")
    summary = {
        "dataset": prep.spec.name,
        "n_rows": prep.n_rows,
        "n_total": prep.n_complete,
        "n_dropped_missing": prep.n_rows - prep.n_complete,
        "class_counts": list(prep.full.class_counts()),
        "n_features": prep.full.n_features,
        "encoding": cfg.encoding or prep.spec.encoding,
        "standardized": cfg.standardize,
        "smote": prep.smote is not None,
        "train_class_counts": list(prep.train.class_counts()),
        "train_class_counts_balanced": list(fit.class_counts()),
        "test_class_counts": list(prep.test.class_counts()),
    }
    _write_json(summary, out / "summary.json")
    print(f"{summary['dataset']}: {summary['n_total']} rows "
          f"({summary['n_dropped_missing']} dropped), d={summary['n_features']}, "
          f"classes 0/1 = {summary['class_counts'][0]}/{summary['class_counts'][1]}")
    print(f"train 0/1 = {summary['train_class_counts'][0]}/{summary['train_class_counts'][1]}"
          f" -> {summary['train_class_counts_balanced'][0]}/{summary['train_class_counts_balanced'][1]}"
          f", test 0/1 = {summary['test_class_counts'][0]}/{summary['test_class_counts'][1]}")
    return summary


def cmd_select(cfg: PipelineConfig) -> int:
    prep = prepare_data(cfg)
    data = prep.fit_data()
    chosen, rows = select_components(data.features, cfg.n_range, cfg.em_config(), cfg.criterion)
    out = _out_dir(cfg, "select")
    write_selection_csv(rows, out / "selection.csv")
    for r in rows:
        print(f"N_c={r.n_components:3d}  logL={r.log_likelihood:14.4f}  "
              f"AIC={r.aic:14.4f}  BIC={r.bic:14.4f}")
    print(f"chosen n_components ({cfg.criterion.upper()}): {chosen}")
    return chosen


def cmd_train(cfg: PipelineConfig):
    prep = prepare_data(cfg)
    model, report, table = train_model(cfg, prep)
    out = _out_dir(cfg, "train")
    (out / "model.json").write_text(model.to_json() + "\n", encoding="utf-8")
    write_selection_csv(table, out / "selection.csv")
    doc = report.to_dict()
    doc["cluster_counts"] = [
        {"cluster": k, "n_0": int(c[0]), "n_1": int(c[1]), "label": int(model.cluster_labels[k]),
         "ratio_good": float(model.ratio_good[k])}
        for k, c in enumerate(model.cluster_counts)
    ]
    doc["test_cluster_counts"] = [
        {"cluster": c["cluster"], "n": c["n"]}
        for c in evaluate_model(model, prep.test)["per_cluster"]
    ]
    _write_json(doc, out / "fit_report.json")
    print(f"n_components={report.n_components} ({report.criterion.upper()}), "
          f"train accuracy {report.train_accuracy:.4f}, EM converged={report.em.converged}")
    return model, report


def cmd_evaluate(cfg: PipelineConfig, model_path, split: str) -> dict:
    model = load_model(model_path)
    prep = prepare_data(cfg)
    data = _split_data(prep, split)
    _check_compatible(model, data, model_path)
    report = evaluate_model(model, data)
    report["split"] = split
    out = _out_dir(cfg, "evaluate")
    _write_json(report, out / f"evaluation_{split}.json")
    cm = report["confusion_matrix"]
    print(f"{split}: TN={cm['tn']} FP={cm['fp']} FN={cm['fn']} TP={cm['tp']}")
    for key in ("accuracy", "precision", "recall", "f1", "auc"):
        print(f"  {key:9s} {format_score(report[key])}")
    return report


def cmd_roc(cfg: PipelineConfig, model_path, split: str):
    model = load_model(model_path)
    prep = prepare_data(cfg)
    data = _split_data(prep, split)
    _check_compatible(model, data, model_path)
    curve = roc_curve(posterior_good(data.features, model), data.labels)
    out = _out_dir(cfg, "roc")
    curve.write_csv(out / f"roc_{split}.csv")
    print(f"{split} AUC = {curve.auc:.4f} ({len(curve.thresholds)} thresholds)")
    return curve


_BENCH_KEYS = ("accuracy", "precision", "recall", "f1", "auc")


def cmd_benchmark(cfg: PipelineConfig) -> list:
    prep = prepare_data(cfg)
    model, report, _ = train_model(cfg, prep)
    train = report.train_data
    lr = fit_logistic(train)
    rows = []
    for split, data in (("train", train), ("test", prep.test)):
        ours = evaluate_model(model, data)
        rows.append({"model": "GMM", "source": "this package", "split": split,
                     **{k: ours[k] for k in _BENCH_KEYS}})
        lr_report = score_report(predict_logistic_label(lr, data.features), data.labels,
                                 scores=predict_logistic(lr, data.features))
        rows.append({"model": "LR", "source": "this package", "split": split,
                     **{k: lr_report[k] for k in _BENCH_KEYS}})
    ref = reference_scores()
    name = prep.spec.name
    if name in ref["accuracy"]["train"]:
        for split in ("train", "test"):
            for m in ref["models"]:
                sc = ref["scores"][split][name][m]
                rows.append({"model": m, "source": "published (external)", "split": split,
                             "accuracy": ref["accuracy"][split][name][m], **sc})
    out = _out_dir(cfg, "benchmark")
    _write_json({"dataset": name, "n_components": model.n_components, "rows": rows},
                out / "benchmark.json")
    with open(out / "benchmark.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "source", "split", *_BENCH_KEYS])
        for r in rows:
            w.writerow([r["model"], r["source"], r["split"],
                        *("" if r[k] is None else repr(r[k]) for k in _BENCH_KEYS)])
    print(f"{'model':6s} {'source':22s} {'split':5s} " + " ".join(f"{k:>9s}" for k in _BENCH_KEYS))
    for r in rows:
        print(f"{r['model']:6s} {r['source']:22s} {r['split']:5s} "
              + " ".join(f"{format_score(r[k]):>9s}" for k in _BENCH_KEYS))
    return rows


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [pipeline] section")
    common.add_argument("--dataset", choices=BUILTIN_DATASETS + ("custom",))
    common.add_argument("--data-dir", dest="data_dir", help="directory holding the raw tables")
    common.add_argument("--seed", type=int, help="seed for split, SMOTE and EM (required)")
    common.add_argument("--smote", choices=("on", "off"))
    common.add_argument("--criterion", choices=("aic", "bic"))
    common.add_argument("--range", metavar="MIN:MAX", help="candidate component counts")
    common.add_argument("--boundary", type=float, metavar="D", help="decision boundary")
    common.add_argument("--encoding", choices=("dummy", "integer"))
    common.add_argument("--no-standardize", dest="no_standardize", action="store_true")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="csgm", description="Gaussian-mixture credit scoring experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("prepare", parents=[common], help="encode, scale and split a dataset")
    sub.add_parser("select", parents=[common], help="AIC/BIC table over component counts")
    sub.add_parser("train", parents=[common], help="fit and save a classifier")
    for name, default_split, text in (("evaluate", "test", "score a saved model"),
                                      ("roc", "test", "ROC curve of a saved model")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--model", help="model file (default: <out>/model.json)")
        p.add_argument("--split", choices=("train", "test"), default=default_split)
    sub.add_parser("benchmark", parents=[common], help="compare with logistic regression")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        model_path = getattr(args, "model", None) or str(Path(cfg.out) / "model.json")
        if args.command == "prepare":
            cmd_prepare(cfg)
        elif args.command == "select":
            cmd_select(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, model_path, args.split)
        elif args.command == "roc":
            cmd_roc(cfg, model_path, args.split)
        else:
            cmd_benchmark(cfg)
    except UsageError as exc:
        print(f"csgm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"csgm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, CsgmError) as exc:
        print(f"csgm: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:  # e.g. a test split holding a single class
        print(f"csgm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
