"""Command-line front end: calibrate, infer, complexity, detect, eval.

Every subcommand is deterministic given identical inputs and flags; the
randomized strategy derives one generator per sample from seed + ordinal,
so results are identical for any worker count. Exit codes: 0 success (or
in-distribution for `detect`), 2 out-of-distribution for `detect`,
1 any error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import datastore
from .complexity import (
    CodecId,
    complexity_score,
    compress_bit_length,
    jpeg2000_available,
    select_exit,
)
from .detector import (
    GreedyStrategy,
    MoodStrategy,
    RandomizedStrategy,
    SplitMix64,
    calibrate_greedy_gammas,
    constant_detect,
    greedy_detect,
    mood_detect,
    parse_strategy,
    randomized_detect,
)
from .errors import InputError, MoodError, UnsupportedCodecError
from .exitnet import analytic_cost_model, forward_all_exits, read_weights
from .metrics import (
    DEFAULT_FIVE_EXIT_COSTS,
    build_report,
    report_rows_to_csv,
    report_rows_to_table,
)
from .scoring import ScoreFunctionId, calibrate_profile

__all__ = ["main", "entrypoint"]


def _fmt6(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _parse_codec(name: str) -> CodecId:
    codec = CodecId.parse(name)
    if codec is CodecId.JPEG2000_LOSSLESS and not jpeg2000_available():
        raise UnsupportedCodecError("codec jpeg2000 is unsupported in this build")
    return codec


def _load_records(path):
    header, stream = datastore.read_logits(path)
    return header, list(stream)


def _load_images(path) -> dict:
    return dict(datastore.read_images(path))


def _require_images_for(records, images_by_id, what: str) -> None:
    record_ids = {r.sample_id for r in records}
    image_ids = set(images_by_id)
    if record_ids != image_ids:
        missing = sorted(record_ids - image_ids)[:3]
        extra = sorted(image_ids - record_ids)[:3]
        raise InputError(
            f"{what}: logits/images sample ids differ "
            f"(logits without images {missing}, images without logits {extra})"
        )


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def cmd_calibrate(args) -> int:
    codec = _parse_codec(args.codec)
    score_fn = ScoreFunctionId.parse(args.score, temperature=args.temperature)
    header, records = _load_records(args.id_logits)
    images = _load_images(args.id_images)
    _require_images_for(records, images, "calibrate")
    profile = calibrate_profile(records, images, codec=codec,
                                score_fn=score_fn, target_tpr=args.tpr)
    datastore.write_profile(profile, args.out)
    print(f"calibrated profile: k={profile.k} num_classes={profile.num_classes} "
          f"samples={profile.created_from} gamma={_fmt6(profile.gamma)} "
          f"l_max_bits={profile.l_max_bits}")
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------

def cmd_infer(args) -> int:
    weights = read_weights(args.weights)
    labels = {}
    if args.labels:
        import json

        with open(args.labels, "r", encoding="utf-8") as fh:
            labels = {str(k): int(v) for k, v in json.load(fh).items()}

    def records():
        for sample_id, img in datastore.read_images(args.images):
            yield forward_all_exits(weights, img, sample_id=sample_id,
                                    label=labels.get(sample_id))

    header = datastore.LogitsFileHeader(
        k=weights.k, num_classes=weights.num_classes, model_tag=args.model_tag
    )
    datastore.write_logits(args.out, header, records())
    costs_out = args.costs_out or f"{args.out}.costs.json"
    datastore.write_cost_model(analytic_cost_model(weights), costs_out)
    print(f"wrote {args.out} and {costs_out}")
    return 0


# ---------------------------------------------------------------------------
# complexity
# ---------------------------------------------------------------------------

def cmd_complexity(args) -> int:
    codec = _parse_codec(args.codec)
    profile = datastore.read_profile(args.profile) if args.profile else None
    exits = []
    bit_values = []
    for sample_id, img in datastore.read_images(args.images):
        bits = compress_bit_length(img, codec)
        bit_values.append(bits)
        if profile is None:
            print(f"{sample_id}\t{bits}")
        else:
            cs = complexity_score(img, profile.l_max_bits, codec)
            exit_index = select_exit(cs.normalized, profile.k)
            exits.append(exit_index)
            print(f"{sample_id}\t{bits}\t{_fmt6(cs.normalized)}\t{exit_index}")
    if args.histogram:
        if profile is not None:
            counts = [0] * profile.k
            for e in exits:
                counts[e - 1] += 1
            print("exit histogram:")
            for i, c in enumerate(counts, start=1):
                print(f"  exit {i}: {c}")
        else:
            lo, hi = min(bit_values), max(bit_values)
            span = max(hi - lo, 1)
            counts = [0] * 10
            for b in bit_values:
                counts[min((b - lo) * 10 // span, 9)] += 1
            print("bits histogram:")
            for i, c in enumerate(counts):
                print(f"  [{lo + i * span / 10:.6g}, {lo + (i + 1) * span / 10:.6g}): {c}")
    return 0


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------

def _load_single_image(path):
    p = Path(path)
    if p.is_dir():
        raise InputError("detect expects a single image file, not a directory")
    if p.suffix.lower() == ".png":
        import numpy as np
        from PIL import Image, UnidentifiedImageError

        from .complexity import ImageBuffer
        from .errors import DecodeError

        try:
            with Image.open(p) as pil:
                mode = "L" if pil.mode == "L" else "RGB"
                arr = np.asarray(pil.convert(mode), dtype=np.uint8)
        except (UnidentifiedImageError, OSError) as exc:
            raise DecodeError(f"{p}: cannot decode PNG ({exc})") from None
        return ImageBuffer.from_array(arr)
    images = list(datastore.read_images(p))
    if len(images) != 1:
        raise InputError(f"{p}: expected exactly one image, found {len(images)}")
    return images[0][1]


def cmd_detect(args) -> int:
    profile = datastore.read_profile(args.profile)
    costs = _resolve_costs(args.costs, profile.k)
    header, records = _load_records(args.logits)
    if args.id is not None:
        records = [r for r in records if r.sample_id == args.id]
        if not records:
            raise InputError(f"no record with id {args.id!r} in {args.logits}")
    if len(records) != 1:
        raise InputError(
            f"{args.logits} holds {len(records)} records; pass --id to pick one"
        )
    record = records[0]
    img = _load_single_image(args.image)
    outcome = mood_detect(record, img, profile, costs)
    pred = "" if outcome.predicted_class is None else f" class={outcome.predicted_class}"
    print(f"decision={outcome.decision} exit={outcome.exit_used} "
          f"score={_fmt6(outcome.score)}{pred} flops={_fmt6(outcome.charged_flops)}")
    return 0 if outcome.decision == "in" else 2


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _resolve_costs(costs_path, k: int):
    if costs_path:
        costs = datastore.read_cost_model(costs_path)
        if costs.k != k:
            raise InputError(f"cost model covers {costs.k} exits, profile has {k}")
        return costs
    if k == DEFAULT_FIVE_EXIT_COSTS.k:
        return DEFAULT_FIVE_EXIT_COSTS
    raise InputError(
        f"no --costs given and the bundled default covers 5 exits, profile has {k}"
    )


def _run_strategy(strategy, records, images_by_id, profile, costs,
                  greedy_gammas, workers: int):
    def one(indexed):
        ordinal, record = indexed
        if isinstance(strategy, MoodStrategy):
            return mood_detect(record, images_by_id[record.sample_id], profile, costs)
        if isinstance(strategy, GreedyStrategy):
            return greedy_detect(record, profile, greedy_gammas, costs)
        if isinstance(strategy, RandomizedStrategy):
            rng = SplitMix64(strategy.seed + ordinal)
            return randomized_detect(record, profile, rng, costs)
        return constant_detect(record, profile, strategy.exit_index, costs)

    indexed = list(enumerate(records))
    if workers <= 1:
        return [one(item) for item in indexed]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, indexed))


def cmd_eval(args) -> int:
    profile = datastore.read_profile(args.profile)
    costs = _resolve_costs(args.costs, profile.k)
    if args.strategy == "random":
        strategy = RandomizedStrategy(seed=args.seed)
    else:
        strategy = parse_strategy(args.strategy)
    needs_images = isinstance(strategy, MoodStrategy)

    ood_logits = args.ood_logits or []
    ood_images = args.ood_images or []
    if not ood_logits:
        raise InputError("eval needs at least one --ood-logits")
    if needs_images and len(ood_images) != len(ood_logits):
        raise InputError(
            f"strategy mood pairs each --ood-logits with an --ood-images "
            f"(got {len(ood_logits)} and {len(ood_images)})"
        )

    id_header, id_records = _load_records(args.id_logits)
    id_images = {}
    if needs_images:
        if not args.id_images:
            raise InputError("strategy mood needs --id-images")
        id_images = _load_images(args.id_images)
        _require_images_for(id_records, id_images, "eval (id)")

    greedy_gammas = None
    if isinstance(strategy, GreedyStrategy):
        greedy_gammas = strategy.per_exit_gammas or calibrate_greedy_gammas(
            id_records, profile
        )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    id_outcomes = _run_strategy(strategy, id_records, id_images, profile, costs,
                                greedy_gammas, args.workers)
    datastore.write_outcomes(out_dir / "outcomes.id.jsonl", id_outcomes)
    id_scores = [o.score for o in id_outcomes]
    id_labels = None
    if all(r.label is not None for r in id_records):
        id_labels = {r.sample_id: r.label for r in id_records}

    names = []
    for path in ood_logits:
        base = Path(path).stem
        name = base
        n = 2
        while name in names or name == "id":
            name = f"{base}_{n}"
            n += 1
        names.append(name)

    rows = []
    for idx, path in enumerate(ood_logits):
        header, records = _load_records(path)
        if (header.k, header.num_classes) != (id_header.k, id_header.num_classes):
            raise InputError(
                f"{path}: shape ({header.k}, {header.num_classes}) does not match "
                f"id logits ({id_header.k}, {id_header.num_classes})"
            )
        images_by_id = {}
        if needs_images:
            images_by_id = _load_images(ood_images[idx])
            _require_images_for(records, images_by_id, f"eval ({names[idx]})")
        outcomes = _run_strategy(strategy, records, images_by_id, profile, costs,
                                 greedy_gammas, args.workers)
        datastore.write_outcomes(out_dir / f"outcomes.{names[idx]}.jsonl", outcomes)
        report = build_report(
            id_outcomes, outcomes, id_scores, [o.score for o in outcomes],
            costs, target_tpr=profile.target_tpr, id_labels=id_labels,
        )
        rows.append((args.strategy, names[idx], report))

    if len(rows) > 1:
        rows.append((args.strategy, "average", _average_report(rows)))

    csv_text = report_rows_to_csv(rows)
    table_text = report_rows_to_table(rows)
    (out_dir / "report.csv").write_text(csv_text, encoding="utf-8")
    (out_dir / "report.txt").write_text(table_text, encoding="utf-8")
    print(table_text, end="")
    print(f"wrote {out_dir / 'report.csv'}")
    return 0


def _average_report(rows):
    from .metrics import EvalReport

    reports = [r for _, _, r in rows]
    n = len(reports)
    accs = [r.id_accuracy for r in reports]
    hist = tuple(
        sum(r.exit_histogram[i] for r in reports)
        for i in range(len(reports[0].exit_histogram))
    )
    return EvalReport(
        auroc=sum(r.auroc for r in reports) / n,
        fpr_at_tpr=sum(r.fpr_at_tpr for r in reports) / n,
        id_accuracy=(None if any(a is None for a in accs) else sum(accs) / n),
        mean_flops=sum(r.mean_flops for r in reports) / n,
        exit_histogram=hist,
        n_id=reports[0].n_id,
        n_ood=sum(r.n_ood for r in reports),
    )


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mood",
        description="Multi-level OOD detection: complexity-routed early exits "
                    "with per-exit energy scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit a calibration profile on ID data")
    p.add_argument("--id-logits", required=True)
    p.add_argument("--id-images", required=True)
    p.add_argument("--codec", default="png", choices=["png", "jpeg2000"])
    p.add_argument("--score", default="adjusted-energy",
                   choices=["msp", "odin", "energy", "adjusted-energy"])
    p.add_argument("--temperature", type=float, default=1000.0)
    p.add_argument("--tpr", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("infer", help="run the built-in net, write logits + costs")
    p.add_argument("--weights", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--costs-out", default=None)
    p.add_argument("--labels", default=None,
                   help="optional JSON file mapping sample id to class index")
    p.add_argument("--model-tag", default="exitnet")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("complexity", help="per-image compressed bit lengths")
    p.add_argument("--images", required=True)
    p.add_argument("--codec", default="png", choices=["png", "jpeg2000"])
    p.add_argument("--profile", default=None,
                   help="also print normalized complexity and routed exit")
    p.add_argument("--histogram", action="store_true")
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("detect", help="single-sample decision (exit 0=in, 2=out)")
    p.add_argument("--profile", required=True)
    p.add_argument("--costs", default=None)
    p.add_argument("--image", required=True)
    p.add_argument("--logits", required=True)
    p.add_argument("--id", default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="run a strategy over ID and OOD datasets")
    p.add_argument("--profile", required=True)
    p.add_argument("--costs", default=None)
    p.add_argument("--id-logits", required=True)
    p.add_argument("--id-images", default=None)
    p.add_argument("--ood-logits", action="append", default=[])
    p.add_argument("--ood-images", action="append", default=[])
    p.add_argument("--strategy", default="mood",
                   help="mood | greedy | random[:<seed>] | constant:<i>")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for --strategy random (random:<seed> overrides)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; 2 is reserved for "out".
        if exc.code not in (0, None):
            return 1
        return 0
    try:
        return args.func(args)
    except MoodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
