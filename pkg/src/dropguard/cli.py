"""Command-line harness: train / attack / defend-search / sap-eval /
analyze-gradients / report, plus a synthetic-data generator.

Configuration is a flat INI file (sections and key = value lines; see
README for every key).  Flags override config keys; seed, output
directory, inference mode, and test dropout rate are always recorded in
the output manifest.  Any command repeated with the same seed writes
byte-identical CSV and JSON-lines artifacts.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import time

import numpy as np

from . import __version__
from .analysis import (
    describe_mode,
    sample_gradients,
    variance_summary,
    write_histograms_csv,
    write_samples_csv,
    write_variance_csv,
)
from .attacks import (
    CarliniWagnerL2,
    FastGradientSign,
    MajorityVote,
    SaliencyMapAttack,
    SinglePass,
    write_results_jsonl,
)
from .campaign import attack_campaign
from .datasets import (
    load_cifar10_bin,
    load_mnist_idx,
    make_synthetic,
    write_cifar10_bin,
    write_idx_images,
    write_idx_labels,
)
from .defenses import (
    DefenseSearchConfig,
    defensive_dropout_search,
    write_trace_csv,
    write_trace_summary_json,
    write_trace_table_csv,
)
from .network import (
    Deterministic,
    Sap,
    TestDropout,
    architecture,
    init_params,
    load_params,
    save_params,
)
from .rng import SeedStream
from .training import TrainConfig, accuracy_records, train, write_metrics_csv

__all__ = ["main"]


# ---------------------------------------------------------------------------
# configuration

_DEFAULTS = {
    "data": {
        "kind": "mnist-idx",
        "train_images": "", "train_labels": "",
        "test_images": "", "test_labels": "",
        "train_files": "", "test_files": "",
        "train_limit": "0", "test_limit": "0",  # 0 = use everything
    },
    "model": {"architecture": "mnist"},
    "train": {
        "epochs": "10", "batch_size": "128", "learning_rate": "0.001",
        "optimizer": "adam", "momentum": "0.9", "dropout_rate": "0.0",
        "eval_test_each_epoch": "true",
    },
    "mode": {
        "inference": "deterministic",  # deterministic | test-dropout | sap
        "test_dropout": "0.0",
        "sap_samples": "",             # blank = layer width
        "passes_per_example": "10",
    },
    "attack": {
        "kind": "cw",                  # fgsm | jsma | cw
        "epsilon": "0.25",
        "theta": "1.0", "gamma": "0.145",
        "kappa": "0.0", "binary_search_steps": "10", "max_iterations": "100",
        "learning_rate": "0.005", "c_init": "0.01",
        "c_min": "0.0001", "c_max": "1000000",
        "grad_samples": "1",
        "n_images": "100",
        "policy": "single",            # single | majority:<odd m>
        "batch_pairs": "128",
    },
    "defense": {
        "max_accuracy_drop": "0.01",
        "step_size": "0.1",
        "n_accuracy": "1000",
    },
    "analysis": {
        "n_samples": "50", "n_dims": "5",
        "image_index": "0", "target": "",
        "rates": "0.1,0.3,0.5,0.7",
        "include_deterministic": "false",
        "include_sap": "true",
        "objective": "margin",
    },
    "output": {"dir": "out", "seed": "0"},
}


def _load_settings(args) -> dict:
    cfg = {s: dict(kv) for s, kv in _DEFAULTS.items()}
    if getattr(args, "config", None):
        parser = configparser.ConfigParser()
        with open(args.config) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            if section not in cfg:
                raise ValueError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in cfg[section]:
                    raise ValueError(f"unknown config key {section}.{key}")
                cfg[section][key] = value
    for item in getattr(args, "set", None) or []:
        key, _, value = item.partition("=")
        section, _, name = key.partition(".")
        if section not in cfg or name not in cfg[section]:
            raise ValueError(f"unknown config key {item!r}")
        cfg[section][name] = value
    if getattr(args, "seed", None) is not None:
        cfg["output"]["seed"] = str(args.seed)
    if getattr(args, "out", None):
        cfg["output"]["dir"] = args.out
    if getattr(args, "mode", None):
        cfg["mode"]["inference"] = args.mode
    if getattr(args, "test_dropout", None) is not None:
        cfg["mode"]["test_dropout"] = str(args.test_dropout)
    return cfg


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _getint(cfg, s, k):
    return int(cfg[s][k])


def _getfloat(cfg, s, k):
    return float(cfg[s][k])


def _getbool(cfg, s, k):
    return cfg[s][k].strip().lower() in ("1", "true", "yes", "on")


def _load_split(cfg, split) -> "Dataset":
    kind = cfg["data"]["kind"]
    if kind == "mnist-idx":
        images = cfg["data"][f"{split}_images"]
        labels = cfg["data"][f"{split}_labels"]
        if not images or not labels:
            raise ValueError(f"data.{split}_images / data.{split}_labels not set")
        ds = load_mnist_idx(images, labels, split=split)
    elif kind == "cifar10-bin":
        files = [p.strip() for p in cfg["data"][f"{split}_files"].split(",") if p.strip()]
        if not files:
            raise ValueError(f"data.{split}_files not set")
        ds = load_cifar10_bin(files, split=split)
    else:
        raise ValueError(f"unknown data.kind {kind!r}")
    limit = _getint(cfg, "data", f"{split}_limit")
    return ds.subset(limit) if limit else ds


def _build_mode(cfg):
    inference = cfg["mode"]["inference"]
    if inference == "deterministic":
        return Deterministic()
    if inference == "test-dropout":
        rate = _getfloat(cfg, "mode", "test_dropout")
        return TestDropout(rate) if rate > 0 else Deterministic()
    if inference == "sap":
        raw = cfg["mode"]["sap_samples"].strip()
        return Sap(int(raw) if raw else None)
    raise ValueError(f"unknown mode.inference {inference!r}")


def _build_attack(cfg):
    kind = cfg["attack"]["kind"]
    k = _getint(cfg, "attack", "grad_samples")
    if kind == "fgsm":
        return FastGradientSign(_getfloat(cfg, "attack", "epsilon"), k)
    if kind == "jsma":
        return SaliencyMapAttack(
            _getfloat(cfg, "attack", "theta"),
            _getfloat(cfg, "attack", "gamma"), k,
        )
    if kind == "cw":
        return CarliniWagnerL2(
            kappa=_getfloat(cfg, "attack", "kappa"),
            binary_search_steps=_getint(cfg, "attack", "binary_search_steps"),
            max_iterations=_getint(cfg, "attack", "max_iterations"),
            learning_rate=_getfloat(cfg, "attack", "learning_rate"),
            c_init=_getfloat(cfg, "attack", "c_init"),
            c_range=(_getfloat(cfg, "attack", "c_min"),
                     _getfloat(cfg, "attack", "c_max")),
            grad_samples=k,
        )
    raise ValueError(f"unknown attack.kind {kind!r}")


def _build_policy(cfg):
    raw = cfg["attack"]["policy"]
    if raw == "single":
        return SinglePass()
    if raw.startswith("majority:"):
        return MajorityVote(int(raw.split(":", 1)[1]))
    raise ValueError(f"unknown attack.policy {raw!r}")


def _policy_label(policy):
    return "single" if isinstance(policy, SinglePass) else f"majority:{policy.m}"


def _outdir(cfg) -> str:
    out = cfg["output"]["dir"]
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(cfg, command, extra=None):
    out = _outdir(cfg)
    lines = {
        "command": command,
        "seed": cfg["output"]["seed"],
        "out": out,
        "mode": cfg["mode"]["inference"],
        "test_dropout": cfg["mode"]["test_dropout"],
        "config_hash": _config_hash(cfg),
        "code_version": __version__,
    }
    lines.update(extra or {})
    with open(os.path.join(out, "manifest.txt"), "w") as fh:
        for key, value in lines.items():
            fh.write(f"{key} = {value}\n")
    return out


def _campaign_summary(camp, mode, policy) -> dict:
    succ = [r for r in camp.results if r.success]
    mean = lambda vals: float(np.mean(vals)) if vals else None
    return {
        "n_pairs": camp.n_pairs,
        "n_success": camp.n_success,
        "attack_success_rate": camp.attack_success_rate,
        "mean_l0": mean([r.l0 for r in succ]),
        "mean_l1": mean([r.l1 for r in succ]),
        "mean_l2": mean([r.l2 for r in succ]),
        "mean_linf": mean([r.linf for r in succ]),
        "excluded_misclassified": camp.excluded_misclassified,
        "skipped_errors": camp.skipped_errors,
        "mode": describe_mode(mode),
        "policy": _policy_label(policy),
    }


def _write_summary(summary: dict, out, stem="summary"):
    with open(os.path.join(out, f"{stem}.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out, f"{stem}.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        keys = sorted(summary)
        writer.writerow(keys)
        writer.writerow(["" if summary[k] is None else summary[k] for k in keys])


# ---------------------------------------------------------------------------
# commands


def cmd_train(args):
    cfg = _load_settings(args)
    seed = _getint(cfg, "output", "seed")
    train_ds = _load_split(cfg, "train")
    test_ds = _load_split(cfg, "test")
    arch = architecture(cfg["model"]["architecture"])
    tcfg = TrainConfig(
        epochs=_getint(cfg, "train", "epochs"),
        batch_size=_getint(cfg, "train", "batch_size"),
        learning_rate=_getfloat(cfg, "train", "learning_rate"),
        optimizer=cfg["train"]["optimizer"],
        momentum=_getfloat(cfg, "train", "momentum"),
        dropout_rate=_getfloat(cfg, "train", "dropout_rate"),
        seed=seed,
    )
    params0 = init_params(arch, SeedStream(seed).child("init"))
    eval_each = _getbool(cfg, "train", "eval_test_each_epoch")
    t0 = time.time()
    params, log = train(
        params0, train_ds.images, train_ds.labels, tcfg,
        test_ds.images if eval_each else None,
        test_ds.labels if eval_each else None,
    )
    wall = time.time() - t0
    out = _write_manifest(cfg, "train", {
        "train_checksum": train_ds.checksum,
        "test_checksum": test_ds.checksum,
    })
    save_params(params, os.path.join(out, "model.dgrd"))
    write_metrics_csv(log, os.path.join(out, "metrics.csv"))
    final_acc = log.rows[-1]["test_acc"] if log.rows and eval_each else ""
    print(f"trained {arch.name} for {tcfg.epochs} epochs in {wall:.1f}s; "
          f"final test accuracy: {final_acc}")
    return 0


def _load_model(cfg, args):
    arch = architecture(cfg["model"]["architecture"])
    return load_params(args.model, arch)


def cmd_attack(args):
    cfg = _load_settings(args)
    seed = _getint(cfg, "output", "seed")
    params = _load_model(cfg, args)
    test_ds = _load_split(cfg, "test")
    attack = _build_attack(cfg)
    mode = _build_mode(cfg)
    policy = _build_policy(cfg)
    t0 = time.time()
    camp = attack_campaign(
        params, attack, test_ds.images, test_ds.labels,
        _getint(cfg, "attack", "n_images"), mode,
        SeedStream(seed).child("campaign"), policy,
        batch_size=_getint(cfg, "attack", "batch_pairs"),
    )
    wall = time.time() - t0
    out = _write_manifest(cfg, "attack", {
        "attack": cfg["attack"]["kind"],
        "test_checksum": test_ds.checksum,
    })
    write_results_jsonl(camp.records, os.path.join(out, "results.jsonl"))
    summary = _campaign_summary(camp, mode, policy)
    summary["attack"] = cfg["attack"]["kind"]
    _write_summary(summary, out)
    asr = summary["attack_success_rate"]
    print(f"{cfg['attack']['kind']} on {camp.n_pairs} pairs in {wall:.1f}s; "
          f"success rate: {'null' if asr is None else f'{asr:.4f}'}")
    return 0


def cmd_defend_search(args):
    cfg = _load_settings(args)
    seed = _getint(cfg, "output", "seed")
    params = _load_model(cfg, args)
    test_ds = _load_split(cfg, "test")
    attack = _build_attack(cfg)
    policy = _build_policy(cfg)
    dcfg = DefenseSearchConfig(
        attack=attack,
        max_accuracy_drop=_getfloat(cfg, "defense", "max_accuracy_drop"),
        step_size=_getfloat(cfg, "defense", "step_size"),
        n_images=_getint(cfg, "attack", "n_images"),
        n_accuracy=_getint(cfg, "defense", "n_accuracy"),
        passes_per_example=_getint(cfg, "mode", "passes_per_example"),
        policy=policy,
        seed=seed,
    )
    t0 = time.time()
    trace = defensive_dropout_search(params, test_ds.images, test_ds.labels, dcfg)
    trace.train_rate = _getfloat(cfg, "train", "dropout_rate")
    wall = time.time() - t0
    out = _write_manifest(cfg, "defend-search", {
        "attack": cfg["attack"]["kind"],
        "test_checksum": test_ds.checksum,
        "policy": _policy_label(policy),
    })
    write_trace_csv(trace, os.path.join(out, "trace.csv"))
    write_trace_table_csv(trace, os.path.join(out, "table.csv"))
    write_trace_summary_json(trace, os.path.join(out, "summary.json"))
    rates_dir = os.path.join(out, "rates")
    os.makedirs(rates_dir, exist_ok=True)
    for rate, camp in trace.campaigns:
        write_results_jsonl(
            camp.records, os.path.join(rates_dir, f"test_{rate:g}.jsonl")
        )
    print(f"searched {len(trace.rows)} rates in {wall:.1f}s; "
          f"chosen test dropout rate: {trace.chosen_rate:g}")
    return 0


def cmd_sap_eval(args):
    cfg = _load_settings(args)
    seed = _getint(cfg, "output", "seed")
    params = _load_model(cfg, args)
    test_ds = _load_split(cfg, "test")
    attack = _build_attack(cfg)
    policy = _build_policy(cfg)
    raw = cfg["mode"]["sap_samples"].strip()
    mode = Sap(int(raw) if raw else None)
    root = SeedStream(seed)
    n_acc = _getint(cfg, "defense", "n_accuracy")
    t0 = time.time()
    acc, acc_rows = accuracy_records(
        params, test_ds.images[:n_acc], test_ds.labels[:n_acc], mode,
        _getint(cfg, "mode", "passes_per_example"), root.child("acc/sap"),
    )
    camp = attack_campaign(
        params, attack, test_ds.images, test_ds.labels,
        _getint(cfg, "attack", "n_images"), mode,
        root.child("attack/sap"), policy,
        batch_size=_getint(cfg, "attack", "batch_pairs"),
    )
    wall = time.time() - t0
    out = _write_manifest(cfg, "sap-eval", {
        "attack": cfg["attack"]["kind"],
        "test_checksum": test_ds.checksum,
    })
    write_results_jsonl(camp.records, os.path.join(out, "results.jsonl"))
    write_results_jsonl(acc_rows, os.path.join(out, "accuracy.jsonl"))
    summary = _campaign_summary(camp, mode, policy)
    summary["attack"] = cfg["attack"]["kind"]
    summary["test_accuracy"] = acc
    _write_summary(summary, out)
    asr = summary["attack_success_rate"]
    print(f"sap eval in {wall:.1f}s; accuracy {acc:.4f}, "
          f"success rate {'null' if asr is None else f'{asr:.4f}'}")
    return 0


def cmd_analyze_gradients(args):
    cfg = _load_settings(args)
    seed = _getint(cfg, "output", "seed")
    params = _load_model(cfg, args)
    test_ds = _load_split(cfg, "test")
    idx = _getint(cfg, "analysis", "image_index")
    x = test_ds.images[idx]
    true = int(test_ds.labels[idx])
    raw_target = cfg["analysis"]["target"].strip()
    target = int(raw_target) if raw_target else (true + 1) % params.arch.n_classes
    n_samples = _getint(cfg, "analysis", "n_samples")
    n_dims = _getint(cfg, "analysis", "n_dims")
    objective = cfg["analysis"]["objective"]
    from .analysis import default_dims

    dims = default_dims(int(np.prod(params.arch.input_shape)), n_dims)
    modes = []
    if _getbool(cfg, "analysis", "include_deterministic"):
        modes.append(Deterministic())
    for raw in cfg["analysis"]["rates"].split(","):
        raw = raw.strip()
        if raw:
            modes.append(TestDropout(float(raw)))
    if _getbool(cfg, "analysis", "include_sap"):
        raw = cfg["mode"]["sap_samples"].strip()
        modes.append(Sap(int(raw) if raw else None))
    root = SeedStream(seed)
    t0 = time.time()
    sets = [
        sample_gradients(params, x, target, mode, n_samples, dims,
                         root.child(f"grad/{describe_mode(mode)}"),
                         objective=objective, image_id=idx)
        for mode in modes
    ]
    wall = time.time() - t0
    out = _write_manifest(cfg, "analyze-gradients", {
        "image_index": idx, "target": target,
        "test_checksum": test_ds.checksum,
    })
    write_samples_csv(sets, os.path.join(out, "samples.csv"))
    write_variance_csv(variance_summary(sets), os.path.join(out, "variance.csv"))
    write_histograms_csv(sets, os.path.join(out, "histograms.csv"))
    print(f"sampled {len(sets)} modes x {n_samples} gradients in {wall:.1f}s")
    return 0


def cmd_report(args):
    t0 = time.time()
    out = args.out
    manifest = {}
    manifest_path = os.path.join(out, "manifest.txt")
    with open(manifest_path) as fh:
        for line in fh:
            key, _, value = line.partition(" = ")
            manifest[key.strip()] = value.rstrip("\n")
    tables = {}
    audits = {}

    def recompute(jsonl_path):
        rows = []
        with open(jsonl_path) as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        attacked = [r for r in rows if "skipped" not in r]
        succ = [r for r in attacked if r["success"]]
        mean = lambda vals: float(np.mean(vals)) if vals else None
        return {
            "n_pairs": len(attacked),
            "n_success": len(succ),
            "attack_success_rate": len(succ) / len(attacked) if attacked else None,
            "mean_l0": mean([r["l0"] for r in succ]),
            "mean_l1": mean([r["l1"] for r in succ]),
            "mean_l2": mean([r["l2"] for r in succ]),
            "mean_linf": mean([r["linf"] for r in succ]),
            "skipped_errors": len(rows) - len(attacked),
        }

    def close(a, b):
        if a is None or b in (None, ""):
            return a is None and b in (None, "")
        return abs(float(a) - float(b)) <= 1e-9

    results_path = os.path.join(out, "results.jsonl")
    if os.path.exists(results_path):
        table = recompute(results_path)
        tables["attack"] = table
        summary_path = os.path.join(out, "summary.json")
        if os.path.exists(summary_path):
            with open(summary_path) as fh:
                summary = json.load(fh)
            audits["attack"] = all(
                close(table[k], summary.get(k))
                for k in ("attack_success_rate", "mean_l2", "n_pairs", "n_success")
            )
    acc_path = os.path.join(out, "accuracy.jsonl")
    if os.path.exists(acc_path):
        with open(acc_path) as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
        acc = float(np.mean([r["correct"] for r in rows])) if rows else None
        tables["accuracy"] = {"test_accuracy": acc, "n_records": len(rows)}
        summary_path = os.path.join(out, "summary.json")
        if os.path.exists(summary_path):
            with open(summary_path) as fh:
                summary = json.load(fh)
            if "test_accuracy" in summary:
                audits["accuracy"] = close(acc, summary["test_accuracy"])
    trace_path = os.path.join(out, "trace.csv")
    if os.path.exists(trace_path):
        with open(trace_path, newline="") as fh:
            trace_rows = list(csv.DictReader(fh))
        per_rate = {}
        ok = True
        for row in trace_rows:
            rate = row["test_rate"]
            jsonl = os.path.join(out, "rates", f"test_{float(rate):g}.jsonl")
            if os.path.exists(jsonl):
                table = recompute(jsonl)
                per_rate[rate] = table
                ok = ok and close(table["attack_success_rate"],
                                  row["attack_success_rate"] or None)
                ok = ok and close(table["mean_l2"], row["mean_l2"] or None)
        tables["trace"] = per_rate
        audits["trace"] = ok

    report = {
        "config": manifest,
        "tables": tables,
        "records": sorted(
            p for p in ("results.jsonl", "accuracy.jsonl")
            if os.path.exists(os.path.join(out, p))
        ),
        "audit": audits,
        "consistent": all(audits.values()) if audits else True,
        "wall_clock_seconds": time.time() - t0,
        "code_version": __version__,
    }
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"report: {'consistent' if report['consistent'] else 'INCONSISTENT'} "
          f"({len(tables)} tables audited)")
    return 0 if report["consistent"] else 1


def cmd_make_synthetic(args):
    os.makedirs(args.out, exist_ok=True)
    if args.kind == "mnist-idx":
        shape, quant = (28, 28, 1), 255.0
        train = make_synthetic(args.n_train, shape, seed=args.seed, split="train")
        test = make_synthetic(args.n_test, shape, seed=args.seed, split="test")
        for ds, stem in ((train, "train"), (test, "test")):
            pixels = np.round(ds.images * quant).astype(np.uint8)
            write_idx_images(pixels, os.path.join(args.out, f"{stem}-images-idx3-ubyte"))
            write_idx_labels(ds.labels, os.path.join(args.out, f"{stem}-labels-idx1-ubyte"))
    elif args.kind == "cifar10-bin":
        shape = (32, 32, 3)
        train = make_synthetic(args.n_train, shape, seed=args.seed, split="train")
        test = make_synthetic(args.n_test, shape, seed=args.seed, split="test")
        write_cifar10_bin(np.round(train.images * 255).astype(np.uint8),
                          train.labels, os.path.join(args.out, "train_batch.bin"))
        write_cifar10_bin(np.round(test.images * 255).astype(np.uint8),
                          test.labels, os.path.join(args.out, "test_batch.bin"))
    else:
        raise ValueError(f"unknown kind {args.kind!r}")
    print(f"wrote {args.n_train}+{args.n_test} synthetic examples to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(sub, model=True):
    sub.add_argument("--config", help="INI configuration file")
    sub.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                     help="override a single config key")
    sub.add_argument("--seed", type=int, help="override output.seed")
    sub.add_argument("--out", help="override output.dir")
    sub.add_argument("--mode", help="override mode.inference")
    sub.add_argument("--test-dropout", type=float, dest="test_dropout",
                     help="override mode.test_dropout")
    if model:
        sub.add_argument("--model", required=True, help="path to a .dgrd parameter file")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dropguard",
        description="stochastic test-time defenses and white-box attacks for small CNNs",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("train", help="train a model and save its parameters")
    _add_common(sub, model=False)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("attack", help="run an attack campaign against a model")
    _add_common(sub)
    sub.set_defaults(func=cmd_attack)

    sub = subs.add_parser("defend-search",
                          help="search the largest in-budget test dropout rate")
    _add_common(sub)
    sub.set_defaults(func=cmd_defend_search)

    sub = subs.add_parser("sap-eval",
                          help="evaluate stochastic activation pruning head-to-head")
    _add_common(sub)
    sub.set_defaults(func=cmd_sap_eval)

    sub = subs.add_parser("analyze-gradients",
                          help="sample input gradients across modes and export CSVs")
    _add_common(sub)
    sub.set_defaults(func=cmd_analyze_gradients)

    sub = subs.add_parser("report", help="recompute and audit a result directory")
    sub.add_argument("--out", required=True, help="output directory to audit")
    sub.set_defaults(func=cmd_report)

    sub = subs.add_parser("make-synthetic",
                          help="generate a synthetic dataset in a supported on-disk format")
    sub.add_argument("--kind", choices=("mnist-idx", "cifar10-bin"),
                     default="mnist-idx")
    sub.add_argument("--n-train", type=int, default=2000)
    sub.add_argument("--n-test", type=int, default=500)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", required=True)
    sub.set_defaults(func=cmd_make_synthetic)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
