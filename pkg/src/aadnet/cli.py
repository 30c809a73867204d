"""Command-line entry point: ``aadnet synth|run|train|embed|gradcheck``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .exceptions import AADError

log = logging.getLogger("aadnet")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MIN_WINDOW_S, MAX_WINDOW_S = 0.1, 2.0
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
CHECKPOINT_NAME = "model.aadm"


class UsageError(Exception):
    """Invalid flags or inputs; maps to exit code 2."""


class StageFailure(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"stage {stage!r} failed: {type(exc).__name__}: {exc}")
        self.stage = stage


def _window(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be a number, got {text!r}") from None
    if not MIN_WINDOW_S <= value <= MAX_WINDOW_S:
        raise argparse.ArgumentTypeError(
            f"window must lie in [{MIN_WINDOW_S}, {MAX_WINDOW_S}] s, got {value}"
        )
    return value


def _task(text):
    value = text.upper()
    if value not in ("OA", "TA"):
        raise argparse.ArgumentTypeError(f"task must be oa or ta, got {text!r}")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser():
    p = argparse.ArgumentParser(prog="aadnet", description="EEG auditory attention decoding.")
    p.add_argument("--config", type=Path, help="JSON file of default flag values; flags win")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--subjects", type=_positive_int, default=16)
    s.add_argument("--trials", type=_positive_int, default=12)
    s.add_argument("--seconds", type=float, default=69.0)
    s.add_argument("--snr", type=float, default=0.0)
    s.add_argument("--gain", type=float, default=0.8)
    s.add_argument("--channels", type=_positive_int, default=32)
    s.add_argument("--fs", type=float, default=500.0)
    s.add_argument("--matched-bands", action="store_true",
                   help="same source band for both timbre classes")
    s.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("run", help="nested cross-validated evaluation")
    _data_flags(r)
    r.add_argument("--model", choices=("aadnet", "fbcsp", "pca"), default="aadnet")
    r.add_argument("--out", type=Path, required=True)
    r.add_argument("--grid", action="store_true", help="inner-CV grid search (aadnet only)")
    r.add_argument("--epoch-cap", type=int, default=50,
                   help="epoch cap during grid search; 0 disables the cap")
    r.add_argument("--ablate", choices=("m1", "m2", "m3", "all"))
    r.add_argument("--cv-unit", choices=("window", "trial"), default="window")
    r.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    t = sub.add_parser("train", help="train one network on every window and save a checkpoint")
    _data_flags(t)
    t.add_argument("--subject", help="restrict training to one subject")
    t.add_argument("--out", type=Path, required=True)

    e = sub.add_parser("embed", help="2-D PCA of hidden markers for every window")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--data", type=Path, required=True)
    e.add_argument("--task", type=_task, required=True)
    e.add_argument("--subject")
    e.add_argument("--stride", type=float)
    e.add_argument("--out", type=Path, required=True, help="output TSV, or a directory for embed.tsv")

    g = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, help="directory for the run manifest")
    return p


def _data_flags(p):
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--task", type=_task, required=True)
    p.add_argument("--window", type=_window, default=0.5)
    p.add_argument("--stride", type=float, help="window stride in seconds (default: window)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=_positive_int, default=100)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=_positive_int, default=20)
    p.add_argument("--weight-decay", type=float, default=1e-2)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            overrides = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(overrides, dict):
            parser.error("config file must hold a JSON object")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(overrides) - known
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)
        # re-validate file values that bypassed argparse type conversion
        if "window" in overrides and "--window" not in argv:
            try:
                args.window = _window(str(args.window))
            except argparse.ArgumentTypeError as exc:
                parser.error(str(exc))
    return args


def run_config(args):
    """Flags as a plain dict for the manifest."""
    out = {}
    for k, v in sorted(vars(args).items()):
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _configure_logging():
    level = os.environ.get("AAD_LOG_LEVEL", "error").lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


class Run:
    """Manifest and FAILED-marker bookkeeping around one command."""

    def __init__(self, out_dir, args):
        from .harness.reports import FAILED_FILE, MANIFEST_FILE, RunManifest

        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            probe = self.out_dir / ".write_probe"
            probe.write_bytes(b"")
            probe.unlink()
        except OSError as exc:
            raise UsageError(f"output directory {self.out_dir} is not writable: {exc}") from None
        self.failed = self.out_dir / FAILED_FILE
        if self.failed.exists():
            self.failed.unlink()
        self.manifest = RunManifest(self.out_dir / MANIFEST_FILE)
        self.manifest.update("run", {"command": args.command, "status": "running"})
        self.manifest.update("config", run_config(args))
        self.manifest.write()
        self.stage = "setup"

    def enter(self, stage):
        self.stage = stage
        log.info("stage %s", stage)

    def fail(self, exc):
        self.manifest.set("run", "status", "failed")
        self.manifest.set("run", "failed_stage", self.stage)
        self.manifest.write()
        self.failed.write_text(f"stage: {self.stage}\nerror: {type(exc).__name__}: {exc}\n",
                               encoding="utf-8")

    def done(self):
        self.manifest.set("run", "status", "complete")
        self.manifest.write()


def _load_windows(args, run, subject=None, stride=None):
    from .data import read_manifest
    from .preprocess import Preprocessor

    run.enter("load")
    ds = read_manifest(args.data)
    run.manifest.update("dataset", {"path": str(args.data), "fs": ds.fs,
                                    "n_channels": ds.n_channels,
                                    "generator_seed": ds.generator_seed,
                                    "subjects": ",".join(sorted(ds.subjects))})
    if subject is not None and subject not in ds.subjects:
        raise UsageError(f"subject {subject!r} is not in the dataset")
    trials = ds.load_trials(subject)
    run.enter("preprocess")
    window = getattr(args, "window", None)
    pre = Preprocessor(window_s=window, stride_s=stride)
    windows = pre.run(trials)
    run.manifest.append_log(pre.stage_log)
    run.manifest.set("dataset", "n_windows", len(windows))
    return windows


def _train_config(args, seed):
    from .harness.training import TrainConfig

    return TrainConfig(lr=args.lr, batch=args.batch, epochs=args.epochs,
                       weight_decay=args.weight_decay, seed=seed).validate()


def cmd_synth(args, session):
    from .data import SynthSpec, generate_synthetic

    spec = SynthSpec(n_subjects=args.subjects, trials_per_subject=args.trials,
                     trial_seconds=args.seconds, fs=args.fs, n_channels=args.channels,
                     snr_db=args.snr, spatial_gain=args.gain, seed=args.seed,
                     ta_contrast=not args.matched_bands)
    try:
        spec.validate()
    except AADError as exc:
        raise UsageError(str(exc)) from None
    run = session.open(args.out, args)
    run.manifest.update("generator", dataclasses.asdict(spec))
    run.enter("generate")
    manifest = generate_synthetic(spec, args.out)
    files = manifest.files()
    n_bytes = sum(p.stat().st_size for _, p in files)
    run.manifest.update("output", {"trial_files": len(files), "bytes": n_bytes})
    run.done()
    print(f"wrote {len(manifest.subjects)} subjects, {len(files)} trial files, "
          f"{n_bytes} bytes to {args.out}")
    return EXIT_OK


def cmd_run(args, session):
    from .harness import evaluate as E
    from .harness.reports import (ABLATION_FILE, METRICS_FILE, ROC_FILE, write_ablation,
                                  write_metrics, write_roc)
    from .harness.search import EPOCH_CAP
    from .harness.training import GRID

    if args.jobs == 0 or args.jobs < -1:
        raise UsageError("--jobs must be positive or -1")
    if args.ablate and args.model != "aadnet":
        raise UsageError("--ablate applies to --model aadnet only")
    if args.grid and args.model != "aadnet":
        raise UsageError("--grid applies to --model aadnet only")
    run = session.open(args.out, args)
    windows = _load_windows(args, run, stride=args.stride)
    cap = None if args.epoch_cap == 0 else args.epoch_cap
    spec = E.EvalSpec(task=args.task, window_s=args.window, model=args.model,
                      cfg=_train_config(args, args.seed), seed=args.seed,
                      grid=dict(GRID) if args.grid else None,
                      epoch_cap=cap, cv_unit=args.cv_unit)
    run.manifest.update("protocol", {
        "cv_unit": args.cv_unit, "outer_folds": 5, "inner_folds": 5,
        "grid_search": bool(args.grid),
        "grid_epoch_cap": cap if args.grid else "n/a",
        "grid_epoch_cap_default": EPOCH_CAP,
        "final_retrain": "outer-train windows, no validation split, last epoch",
    })
    run.manifest.write()
    run.enter("evaluate")
    if args.ablate:
        variants = ("M1", "M2", "M3") if args.ablate == "all" else (args.ablate.upper(),)
        ablation = E.run_ablation(windows, spec, variants, n_jobs=args.jobs)
        reports = [ablation.baseline] + [ablation.variants[v] for v in sorted(ablation.variants)]
    else:
        ablation = None
        reports = [E.evaluate_outer(windows, spec, n_jobs=args.jobs)]
    run.enter("report")
    for rep in reports:
        tag = f"{rep.spec.model}/{rep.spec.variant}"
        for subject, digest in sorted(rep.plan_digests.items()):
            run.manifest.set("folds", f"{tag}/{subject}", digest)
        for r in rep.subjects:
            for j, cfg in enumerate(r.fold_configs):
                run.manifest.set("fold_configs", f"{tag}/{r.subject}/{j}",
                                 json.dumps(cfg, sort_keys=True, default=str))
    write_metrics(args.out / METRICS_FILE, reports)
    write_roc(args.out / ROC_FILE, reports)
    if ablation is not None:
        write_ablation(args.out / ABLATION_FILE, ablation)
        for k, drop in sorted(ablation.acc_drops().items()):
            run.manifest.set("observations", f"acc_drop/{k}", drop)
    for rep in reports:
        run.manifest.update("summary", {
            f"{rep.spec.model}/{rep.spec.variant}/{k}": v for k, v in rep.mean.items()
        })
        print(f"{rep.spec.model:<7} {rep.spec.variant:<8} task {rep.spec.task} "
              f"window {rep.spec.window_s} s  ACC {rep.mean['ACC']:.4f} +/- {rep.sd['ACC']:.4f}")
    run.done()
    return EXIT_OK


def cmd_train(args, session):
    from .harness.training import train
    from .model import ModelConfig, init_model, save_model

    run = session.open(args.out, args)
    windows = _load_windows(args, run, subject=args.subject, stride=args.stride)
    run.enter("train")
    cfg = ModelConfig(n_channels=windows.X.shape[1], sample_rate=windows.fs,
                      window_samples=windows.window_samples)
    params, hist = train(init_model(cfg, [args.seed, 0]), windows.X, windows.labels(args.task),
                         cfg=_train_config(args, args.seed))
    run.enter("save")
    path = save_model(params, args.out / CHECKPOINT_NAME)
    run.manifest.update("output", {"checkpoint": str(path),
                                   "final_train_loss": hist.train_loss[-1]})
    run.done()
    print(f"trained on {len(windows)} windows; checkpoint {path}")
    return EXIT_OK


def cmd_embed(args, session):
    from .harness.embedding import export_embedding
    from .harness.reports import EMBED_FILE, write_embedding
    from .model import load_model

    out = args.out
    target = out if out.suffix == ".tsv" else out / EMBED_FILE
    run = session.open(target.parent, args)
    run.enter("checkpoint")
    params = load_model(args.checkpoint)
    cfg = params.config
    args.window = cfg.window_samples / cfg.sample_rate
    windows = _load_windows(args, run, subject=args.subject, stride=args.stride)
    if windows.X.shape[1:] != (cfg.n_channels, cfg.window_samples) or windows.fs != cfg.sample_rate:
        raise AADError(
            f"checkpoint expects {cfg.n_channels} channels x {cfg.window_samples} samples at "
            f"{cfg.sample_rate} Hz, data gives {windows.X.shape[1]} x {windows.X.shape[2]} "
            f"at {windows.fs} Hz"
        )
    run.enter("embed")
    points, labels, pca = export_embedding(params, windows.X, windows.labels(args.task))
    write_embedding(target, points, labels)
    run.manifest.update("output", {
        "embedding": str(target), "rows": len(points),
        "explained_variance_ratio": ",".join(f"{v:.6f}" for v in pca.explained_variance_ratio),
    })
    run.done()
    print(f"wrote {len(points)} points to {target}")
    return EXIT_OK


def cmd_gradcheck(args, session):
    from .gradcheck import format_table, run_all

    run = session.open(args.out, args) if args.out is not None else None
    if run:
        run.enter("gradcheck")
    results = run_all(args.seed)
    print(format_table(results))
    ok = all(r.passed for r in results)
    if run:
        for r in results:
            run.manifest.set("gradcheck", r.name, f"{r.max_rel_error:.3e} {'PASS' if r.passed else 'FAIL'}")
        run.manifest.set("run", "status", "complete" if ok else "failed")
        run.manifest.write()
    if not ok:
        bad = ", ".join(r.name for r in results if not r.passed)
        print(f"FAILED: {bad}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"synth": cmd_synth, "run": cmd_run, "train": cmd_train,
            "embed": cmd_embed, "gradcheck": cmd_gradcheck}


class Session:
    """Holds the :class:`Run` a command opened so a failure can be recorded on it."""

    def __init__(self):
        self.run = None

    def open(self, out_dir, args):
        self.run = Run(out_dir, args)
        return self.run


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    _configure_logging()
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    session = Session()
    try:
        return COMMANDS[args.command](args, session)
    except UsageError as exc:
        print(f"aadnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # any runtime failure becomes exit 1 with its stage
        run = session.run
        stage = run.stage if run else "setup"
        if run:
            run.fail(exc)
        log.debug("traceback", exc_info=True)
        print(f"aadnet: error in stage {stage}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
