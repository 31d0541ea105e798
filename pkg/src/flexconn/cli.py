"""``flexconn`` command line: train, predict, evaluate, sweep, phantom, gradcheck.

Every subcommand accepts ``--config FILE``, a flat ``key = value`` text
file whose keys are the subcommand's long flag names (dashes or
underscores). Flags given on the command line win over the file; the file
wins over built-in defaults. Multi-value keys are whitespace separated.

Exit codes: 0 success, 1 usage error, 2 data or file-format error,
3 numeric failure (divergence, failed gradient check).

Compressed ``.nii.gz`` inputs are not read; decompress them first with
``gunzip -k``.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .inference import (
    DEFAULT_THRESHOLD,
    SWEEP_THRESHOLDS,
    InferenceConfig,
    normalize_intensity,
    segment,
    sweep_threshold,
)
from .metrics import (
    DEFAULT_SCORE_WEIGHTS,
    MetricsReport,
    challenge_score,
    evaluate_pair,
    volume_agreement,
    wilcoxon_signed_rank,
)
from .network import NetworkConfig, PathwayConfig, build_network, check_gradients
from .phantom import PhantomError, PhantomSpec, generate_cohort, generate_phantom
from .targets import DEFAULT_SIGMA, concat_patchsets, extract_patches, make_membership_target
from .training import TrainingConfig, TrainingDivergedError, train
from .volio import ModelFileError, NiftiError, load_model, read_volume, save_model, write_volume
from .volume import Volume

log = logging.getLogger("flexconn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

METRIC_COLUMNS = ("dice", "lfpr", "ltpr", "ppv", "vd")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# configuration files


def read_config(path: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: Dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in out:
            raise UsageError(f"{path}:{n}: duplicate key {key!r}")
        out[key] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, values: Dict[str, str]) -> None:
    actions = {
        a.dest: a
        for a in parser._actions
        if a.option_strings and a.dest not in ("help", "config")
    }
    unknown = sorted(set(values) - set(actions))
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    defaults = {}
    for key, text in values.items():
        action = actions[key]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r} needs a boolean, got {text!r}")
            defaults[key] = low in ("true", "1", "yes")
            continue
        convert = action.type or str
        try:
            if action.nargs in ("+", "*") or isinstance(action.nargs, int):
                items = [convert(t) for t in text.split()]
                if isinstance(action.nargs, int) and len(items) != action.nargs:
                    raise ValueError(f"expected {action.nargs} values")
                defaults[key] = items
            else:
                defaults[key] = convert(text)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key!r}: bad value {text!r} ({exc})") from exc
    parser.set_defaults(**defaults)


def _require(args, *names: str) -> None:
    for name in names:
        if getattr(args, name) in (None, []):
            raise UsageError(f"missing required flag --{name.replace('_', '-')}")


# ---------------------------------------------------------------------------
# shared helpers


def _load(path: str) -> Volume:
    return read_volume(path)


def _normalized(path: str, args) -> Volume:
    v = _load(path)
    if args.no_normalize:
        return v.with_data(np.asarray(v.data, dtype=np.float32))
    return normalize_intensity(v, args.normalize_percentile, args.normalize_clip)


def _add_normalization(p: argparse.ArgumentParser) -> None:
    p.add_argument("--normalize-percentile", type=float, default=99.0,
                   help="divide each input by this percentile of its nonzero voxels")
    p.add_argument("--normalize-clip", type=float, default=1.5,
                   help="upper clip after normalization")
    p.add_argument("--no-normalize", action="store_true",
                   help="feed raw intensities to the network")
    p.add_argument("--slice-axis", type=int, default=2, choices=(0, 1, 2),
                   help="axis along which 2-D slices are taken")


def _write_pgm_slices(m: Volume, out_dir: str, slice_axis: int) -> int:
    """One 8-bit binary PGM per slice; membership 0..1 maps to 0..255."""
    os.makedirs(out_dir, exist_ok=True)
    data = np.moveaxis(np.asarray(m.data, dtype=np.float64), slice_axis, 2)
    for k in range(data.shape[2]):
        img = np.clip(np.round(data[:, :, k].T * 255.0), 0, 255).astype(np.uint8)
        h, w = img.shape
        with open(os.path.join(out_dir, f"slice_{k:04d}.pgm"), "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(img.tobytes())
    return data.shape[2]


# ---------------------------------------------------------------------------
# train


def _train_parser(sub) -> argparse.ArgumentParser:
    p = sub.add_parser("train", help="train a model on (T1, FLAIR, mask) triples",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="key = value file of defaults for these flags")
    p.add_argument("--t1", nargs="+", help="T1-w / MPRAGE volumes (.nii)")
    p.add_argument("--flair", nargs="+", help="FLAIR volumes, same order as --t1")
    p.add_argument("--mask", nargs="+", help="binary lesion masks, same order as --t1")
    p.add_argument("--out-model", help="model file to write")
    p.add_argument("--out-log", help="training CSV; empty means <out-model>.csv")
    p.add_argument("--log-times", action="store_true",
                   help="add a wall-clock column to the training CSV")
    p.add_argument("--seed", type=int, default=0, help="initialisation and shuffling seed")
    d = TrainingConfig()
    p.add_argument("--epochs", type=int, default=d.epochs, help="passes over the training patches")
    p.add_argument("--batch-size", type=int, default=d.batch_size, help="patches per Adam step")
    p.add_argument("--learning-rate", type=float, default=d.learning_rate, help="Adam step size")
    p.add_argument("--validation-fraction", type=float, default=d.validation_fraction,
                   help="share of patches held out for the validation loss")
    p.add_argument("--patch", type=int, nargs=2, default=list(d.patch), metavar=("P1", "P2"),
                   help="in-plane patch size (odd)")
    p.add_argument("--depth", type=int, default=5, help="filter banks per contrast pathway")
    p.add_argument("--fusion-depth", type=int, default=None,
                   help="filter banks in the fusion pathway; empty means the same as --depth")
    p.add_argument("--last-filters", type=int, default=8,
                   help="filters in the last bank; counts double towards the input")
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA,
                   help="Gaussian width of the membership target")
    _add_normalization(p)
    p.set_defaults(func=cmd_train)
    return p


def cmd_train(args) -> int:
    _require(args, "t1", "flair", "mask", "out_model")
    if not len(args.t1) == len(args.flair) == len(args.mask):
        raise UsageError(
            f"--t1, --flair and --mask need the same number of paths "
            f"({len(args.t1)}, {len(args.flair)}, {len(args.mask)})"
        )
    fusion_depth = args.fusion_depth if args.fusion_depth is not None else args.depth
    try:
        net_cfg = NetworkConfig(
            num_contrasts=2,
            contrast_pathway=PathwayConfig.from_depth(args.depth, args.last_filters),
            fusion_pathway=PathwayConfig.from_depth(fusion_depth, args.last_filters),
        )
        train_cfg = TrainingConfig(
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            validation_fraction=args.validation_fraction,
            seed=args.seed,
            patch=tuple(args.patch),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    sets = []
    for t1, flair, mask in zip(args.t1, args.flair, args.mask):
        m = _load(mask)
        binary = m.with_data((np.asarray(m.data) > 0).astype(np.uint8))
        target = make_membership_target(binary, args.sigma, args.slice_axis)
        sets.append(
            extract_patches(
                [_normalized(t1, args), _normalized(flair, args)],
                binary,
                train_cfg.patch,
                target=target,
                slice_axis=args.slice_axis,
            )
        )
        log.info("%s: %d lesion patches", mask, len(sets[-1]))
    data = concat_patchsets(sets)

    net = build_network(net_cfg, seed=args.seed)
    net, history = train(
        net, data, train_cfg,
        progress=lambda r: log.info("epoch %d train %.6g val %.6g", r.epoch, r.train_loss, r.val_loss),
    )
    save_model(net, args.out_model)
    out_log = args.out_log or f"{args.out_model}.csv"
    Path(out_log).write_text(history.to_csv(include_time=args.log_times))
    print(f"wrote {args.out_model} and {out_log} ({len(data)} patches, {len(history)} epochs)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict


def _predict_parser(sub) -> argparse.ArgumentParser:
    p = sub.add_parser("predict", help="membership and segmentation for one subject",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="key = value file of defaults for these flags")
    p.add_argument("--model", help="model file")
    p.add_argument("--model2", help="second model; memberships are averaged")
    p.add_argument("--t1", help="T1-w / MPRAGE volume")
    p.add_argument("--flair", help="FLAIR volume")
    p.add_argument("--wm-mask", help="optional white-matter mask restricting the segmentation")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="membership threshold for the segmentation")
    p.add_argument("--out-membership", help="float32 membership volume to write")
    p.add_argument("--out-seg", help="uint8 segmentation volume to write")
    p.add_argument("--overlay-dir", help="also write one PGM image of membership per slice here")
    _add_normalization(p)
    p.set_defaults(func=cmd_predict)
    return p


def cmd_predict(args) -> int:
    _require(args, "model", "t1", "flair", "out_membership", "out_seg")
    try:
        InferenceConfig(threshold=args.threshold)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    nets = [load_model(args.model)[0]]
    if args.model2:
        nets.append(load_model(args.model2)[0])
    for path, net in zip([args.model, args.model2], nets):
        if net.config.num_contrasts != 2:
            raise DataError(
                f"contrast-count mismatch: {path} expects {net.config.num_contrasts} "
                f"contrasts, 2 supplied (--t1, --flair)"
            )
    contrasts = [_normalized(args.t1, args), _normalized(args.flair, args)]
    if contrasts[0].shape != contrasts[1].shape:
        raise DataError(f"--t1 shape {contrasts[0].shape} != --flair shape {contrasts[1].shape}")
    wm = _load(args.wm_mask) if args.wm_mask else None
    cfg = InferenceConfig(threshold=args.threshold, wm_mask=wm)
    membership, seg = segment(nets, contrasts, cfg, args.slice_axis)
    write_volume(membership, args.out_membership, "float32")
    write_volume(seg, args.out_seg, "uint8")
    if args.overlay_dir:
        n = _write_pgm_slices(membership, args.overlay_dir, args.slice_axis)
        log.info("wrote %d overlay slices to %s", n, args.overlay_dir)
    print(f"wrote {args.out_membership} and {args.out_seg} ({int(seg.data.sum())} lesion voxels)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def _evaluate_parser(sub) -> argparse.ArgumentParser:
    p = sub.add_parser("evaluate", help="per-case metrics and cohort summary",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="key = value file of defaults for these flags")
    p.add_argument("--auto", nargs="+", help="automated segmentations")
    p.add_argument("--manual", nargs="+", help="manual segmentations, same order")
    p.add_argument("--auto2", nargs="+",
                   help="segmentations of a second method; enables Wilcoxon comparisons")
    p.add_argument("--out-csv", help="per-case metrics CSV")
    p.add_argument("--out-summary", help="cohort summary CSV; empty means <out-csv stem>_summary.csv")
    for key, w in DEFAULT_SCORE_WEIGHTS.items():
        p.add_argument(f"--weight-{key.replace('_', '-')}", type=float, default=w,
                       help=f"challenge-score weight of {key}")
    p.add_argument("--workers", type=int, default=1, help="cases evaluated in parallel")
    p.set_defaults(func=cmd_evaluate)
    return p


def _evaluate_cases(autos, manuals, weights, workers):
    def one(pair):
        a, m = pair
        va, vm = _load(a), _load(m)
        if va.shape != vm.shape:
            raise DataError(f"{a} shape {va.shape} != {m} shape {vm.shape}")
        return evaluate_pair(va, vm, weights)

    pairs = list(zip(autos, manuals))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, pairs))
    return [one(p) for p in pairs]


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def cmd_evaluate(args) -> int:
    _require(args, "auto", "manual", "out_csv")
    if len(args.auto) != len(args.manual):
        raise UsageError(f"--auto has {len(args.auto)} paths, --manual has {len(args.manual)}")
    if args.auto2 is not None and len(args.auto2) != len(args.manual):
        raise UsageError(f"--auto2 has {len(args.auto2)} paths, --manual has {len(args.manual)}")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    weights = {k: getattr(args, f"weight_{k}") for k in DEFAULT_SCORE_WEIGHTS}
    try:
        challenge_score(MetricsReport(dice=1.0, lfpr=0.0, ltpr=1.0, ppv=1.0, vd=0.0), weights)
    except ValueError as exc:
        raise UsageError(f"bad score weights: {exc}") from exc

    methods = {"auto": _evaluate_cases(args.auto, args.manual, weights, args.workers)}
    if args.auto2 is not None:
        methods["auto2"] = _evaluate_cases(args.auto2, args.manual, weights, args.workers)

    summary: List[List[str]] = []
    for name, reports in methods.items():
        vols_a = [r.auto_voxels for r in reports]
        vols_m = [r.manual_voxels for r in reports]
        if len(reports) >= 2:
            agree = volume_agreement(vols_a, vols_m)
        else:
            agree = {"pearson_r": float("nan"), "slope": float("nan"), "intercept": float("nan")}
        r = agree["pearson_r"]
        if not math.isnan(r):
            for rep in reports:
                rep.score = challenge_score(rep, weights, volume_correlation=r)
        for col in METRIC_COLUMNS + ("score",):
            vals = np.array([getattr(rep, col) for rep in reports], dtype=np.float64)
            vals = vals[~np.isnan(vals)]
            med = float(np.median(vals)) if vals.size else float("nan")
            summary.append([name, f"median_{col}", _fmt(med), ""])
        for key in ("pearson_r", "slope", "intercept"):
            note = "" if not math.isnan(agree[key]) else "undefined for this cohort"
            summary.append([name, f"volume_{key}", _fmt(agree[key]), note])

    if "auto2" in methods:
        for col in METRIC_COLUMNS:
            x = [getattr(r, col) for r in methods["auto"]]
            y = [getattr(r, col) for r in methods["auto2"]]
            keep = [i for i in range(len(x)) if not (math.isnan(x[i]) or math.isnan(y[i]))]
            try:
                res = wilcoxon_signed_rank([x[i] for i in keep], [y[i] for i in keep])
            except ValueError as exc:
                summary.append(["auto-vs-auto2", f"wilcoxon_{col}", "", f"warning: {exc}"])
                continue
            summary.append(["auto-vs-auto2", f"wilcoxon_{col}_statistic", _fmt(res.statistic), ""])
            summary.append(
                ["auto-vs-auto2", f"wilcoxon_{col}_p", _fmt(res.pvalue), f"n={res.n_effective}"]
            )

    header = ["method", "case", "auto_path", "manual_path", *METRIC_COLUMNS, "score",
              "auto_voxels", "manual_voxels", "auto_components", "manual_components"]
    with open(args.out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for name, reports in methods.items():
            paths = args.auto if name == "auto" else args.auto2
            for i, (rep, a, m) in enumerate(zip(reports, paths, args.manual)):
                w.writerow([name, i, a, m, *(_fmt(getattr(rep, c)) for c in METRIC_COLUMNS),
                            _fmt(rep.score), rep.auto_voxels, rep.manual_voxels,
                            rep.auto_components, rep.manual_components])
    out_summary = args.out_summary or str(Path(args.out_csv).with_suffix("")) + "_summary.csv"
    with open(out_summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "quantity", "value", "note"])
        w.writerows(summary)
    for row in summary:
        if row[3].startswith("warning"):
            print(f"{row[1]}: {row[3]}", file=sys.stderr)
    print(f"wrote {args.out_csv} and {out_summary}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _sweep_parser(sub) -> argparse.ArgumentParser:
    p = sub.add_parser("sweep", help="Dice against the truth for thresholds 0.05..0.85",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="key = value file of defaults for these flags")
    p.add_argument("--membership", help="membership volume")
    p.add_argument("--truth", help="binary reference segmentation")
    p.add_argument("--out-csv", help="CSV of (threshold, dice) rows")
    p.set_defaults(func=cmd_sweep)
    return p


def cmd_sweep(args) -> int:
    _require(args, "membership", "truth", "out_csv")
    m, t = _load(args.membership), _load(args.truth)
    if m.shape != t.shape:
        raise DataError(f"membership shape {m.shape} != truth shape {t.shape}")
    rows = sweep_threshold(m, t, SWEEP_THRESHOLDS)
    with open(args.out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "dice"])
        for tau, d in rows:
            w.writerow([f"{tau:.2f}", repr(d)])
    best = max(rows, key=lambda r: r[1])
    print(f"wrote {args.out_csv}; best threshold {best[0]:.2f} (Dice {best[1]:.4f})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# phantom


def _phantom_parser(sub) -> argparse.ArgumentParser:
    d = PhantomSpec()
    p = sub.add_parser("phantom", help="write synthetic (T1, FLAIR, mask) triples",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="key = value file of defaults for these flags")
    p.add_argument("--out-dir", help="directory for case_XXX_{t1,flair,mask}.nii")
    p.add_argument("--n-cases", type=int, default=1,
                   help="number of cases; more than one gives a cohort of rising lesion load")
    p.add_argument("--seed", type=int, default=d.seed, help="random seed (cohorts derive per-case seeds)")
    p.add_argument("--dims", type=int, nargs=3, default=list(d.dims), help="voxels along x, y, z")
    p.add_argument("--spacing", type=float, nargs=3, default=list(d.spacing), help="voxel size in mm")
    p.add_argument("--n-lesions", type=int, default=d.n_lesions, help="lesions per case (cohorts scale this)")
    p.add_argument("--radius-range", type=float, nargs=2, default=list(d.radius_range),
                   help="lesion semi-axis range in in-plane voxels")
    p.add_argument("--noise-sigma", type=float, default=d.noise_sigma, help="Gaussian noise std")
    p.set_defaults(func=cmd_phantom)
    return p


def cmd_phantom(args) -> int:
    _require(args, "out_dir")
    if args.n_cases < 1:
        raise UsageError("--n-cases must be >= 1")
    try:
        spec = PhantomSpec(
            dims=tuple(args.dims),
            spacing=tuple(args.spacing),
            n_lesions=args.n_lesions,
            radius_range=tuple(args.radius_range),
            noise_sigma=args.noise_sigma,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.n_cases == 1:
        cases = [generate_phantom(spec)]
    else:
        cases = generate_cohort(args.n_cases, spec, seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    for i, case in enumerate(cases):
        stem = os.path.join(args.out_dir, f"case_{i:03d}")
        write_volume(case.mprage, f"{stem}_t1.nii", "float32")
        write_volume(case.flair, f"{stem}_flair.nii", "float32")
        write_volume(case.mask, f"{stem}_mask.nii", "uint8")
        print(f"{stem}: {case.lesion_voxels} lesion voxels")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck


def _gradcheck_parser(sub) -> argparse.ArgumentParser:
    p = sub.add_parser("gradcheck", help="compare backprop with finite differences",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--config", help="key = value file of defaults for these flags")
    p.add_argument("--seed", type=int, default=0, help="network and input seed")
    p.add_argument("--n-coords", type=int, default=20, help="parameter entries checked")
    p.add_argument("--tolerance", type=float, default=1e-4, help="largest accepted relative error")
    p.set_defaults(func=cmd_gradcheck)
    return p


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    cfg = NetworkConfig.from_depth(2, last_filters=2)
    net = build_network(cfg, seed=args.seed, dtype=np.float64)
    # small positive biases keep most ReLUs away from their kink
    net = net.with_parameters([p + 0.1 if p.ndim == 1 else p for p in net.parameters()])
    inputs = [rng.random((2, 1, 9, 9)) for _ in range(2)]
    target = rng.random((2, 1, 9, 9))
    worst = check_gradients(net, inputs, target, n_coords=args.n_coords, seed=args.seed)
    ok = worst < args.tolerance
    print(f"max relative error {worst:.3e} over {args.n_coords} coordinates: {'ok' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flexconn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for make in (_train_parser, _predict_parser, _evaluate_parser, _sweep_parser,
                 _phantom_parser, _gradcheck_parser):
        make(sub)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _parse(argv: Sequence[str]):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("no subcommand given; see flexconn --help")
    if getattr(args, "config", None):
        sp = _subparser(parser, args.command)
        _apply_config(sp, read_config(args.config))
        args = parser.parse_args(argv)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDivergedError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, NiftiError, ModelFileError, PhantomError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
