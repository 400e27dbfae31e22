"""On-disk artifact formats: logits files, image containers, profiles,
cost models, and per-sample outcomes.

Readers stream record-by-record and validate shapes as they go; mismatched
sample sets between logits and images are an error, never a silent
intersection. Floats are written with 17 significant digits so every
artifact round-trips bit-exactly and output files are byte-stable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .complexity import CodecId, ImageBuffer
from .detector import DetectionOutcome
from .errors import (
    DecodeError,
    InputError,
    MagicError,
    ParseError,
    SchemaError,
    TruncatedError,
)
from .exitnet import ExitCostModel
from .scoring import CalibrationProfile, ScoreFunctionId

__all__ = [
    "LogitsFileHeader",
    "read_logits",
    "write_logits",
    "read_images",
    "write_image_container",
    "write_profile",
    "read_profile",
    "write_cost_model",
    "read_cost_model",
    "write_outcomes",
    "read_outcomes",
]

_IMG_MAGIC = b"MOODIMG1"


def _fmt_float(v: float) -> str:
    return f"{float(v):.17g}"


@dataclass(frozen=True)
class LogitsFileHeader:
    """First line of a logits file; every record must obey k and num_classes."""

    k: int
    num_classes: int
    model_tag: str = ""
    sample_count: int | None = None


# ---------------------------------------------------------------------------
# Logits files: one JSON header line, then one JSON record per line.
# ---------------------------------------------------------------------------

def write_logits(path, header: LogitsFileHeader, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        head = {"k": header.k, "num_classes": header.num_classes,
                "model_tag": header.model_tag}
        if header.sample_count is not None:
            head["sample_count"] = header.sample_count
        fh.write(json.dumps(head, separators=(",", ":")) + "\n")
        for rec in records:
            fh.write(_render_record(rec))


def _render_record(rec) -> str:
    logit_text = ",".join(
        "[" + ",".join(_fmt_float(v) for v in exit_row) + "]"
        for exit_row in rec.logits
    )
    label = "null" if rec.label is None else str(int(rec.label))
    return (f'{{"id":{json.dumps(rec.sample_id)},"label":{label},'
            f'"logits":[{logit_text}]}}\n')


def read_logits(path) -> tuple[LogitsFileHeader, Iterator]:
    """Header plus a lazy record stream; shape-checks every record."""
    fh = open(path, "r", encoding="utf-8")
    first = fh.readline()
    if not first.strip():
        fh.close()
        raise ParseError(f"{path}: missing header line")
    try:
        head = json.loads(first)
    except json.JSONDecodeError as exc:
        fh.close()
        raise ParseError(f"{path}: line 1: invalid JSON header ({exc})") from None
    if not isinstance(head, dict) or "k" not in head or "num_classes" not in head:
        fh.close()
        raise SchemaError(f"{path}: header must carry k and num_classes")
    header = LogitsFileHeader(
        k=int(head["k"]),
        num_classes=int(head["num_classes"]),
        model_tag=str(head.get("model_tag", "")),
        sample_count=(int(head["sample_count"]) if "sample_count" in head else None),
    )
    if header.k < 1 or header.num_classes < 1:
        fh.close()
        raise SchemaError(f"{path}: header k and num_classes must be >= 1")
    return header, _iter_records(path, fh, header)


def _iter_records(path, fh, header: LogitsFileHeader):
    from .scoring import LogitsRecord

    with fh:
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc})") from None
            if not isinstance(row, dict) or "id" not in row or "logits" not in row:
                raise SchemaError(f"{path}: line {lineno}: record needs id and logits")
            logits = row["logits"]
            if (not isinstance(logits, list) or len(logits) != header.k
                    or any(not isinstance(e, list) or len(e) != header.num_classes
                           for e in logits)):
                raise SchemaError(
                    f"{path}: line {lineno}: logits must be {header.k} exits x "
                    f"{header.num_classes} classes"
                )
            label = row.get("label")
            try:
                yield LogitsRecord(
                    sample_id=str(row["id"]),
                    logits=np.asarray(logits, dtype=np.float64),
                    label=(None if label is None else int(label)),
                )
            except (InputError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from None


# ---------------------------------------------------------------------------
# Images: MOODIMG1 container or a directory of PNG files.
# ---------------------------------------------------------------------------

def write_image_container(path, images: Iterable[ImageBuffer]) -> None:
    imgs = list(images)
    with open(path, "wb") as fh:
        fh.write(_IMG_MAGIC)
        fh.write(struct.pack("<I", len(imgs)))
        for img in imgs:
            fh.write(struct.pack("<HHB", img.height, img.width, img.channels))
            fh.write(img.pixels)


def _read_container(path) -> Iterator[tuple[str, ImageBuffer]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(_IMG_MAGIC))
        if magic != _IMG_MAGIC:
            raise MagicError(f"{path}: not a MOODIMG1 container (magic {magic!r})")
        raw = fh.read(4)
        if len(raw) != 4:
            raise TruncatedError(f"{path}: container ended before image count")
        (count,) = struct.unpack("<I", raw)
        for index in range(count):
            head = fh.read(5)
            if len(head) != 5:
                raise TruncatedError(
                    f"{path}: container ended in header of image {index}"
                )
            h, w, c = struct.unpack("<HHB", head)
            payload = fh.read(h * w * c)
            if len(payload) != h * w * c:
                raise TruncatedError(
                    f"{path}: container ended in pixels of image {index} "
                    f"({len(payload)} of {h * w * c} bytes)"
                )
            try:
                yield str(index), ImageBuffer(h, w, c, payload)
            except InputError as exc:
                raise SchemaError(f"{path}: image {index}: {exc}") from None
        if fh.read(1):
            raise SchemaError(f"{path}: trailing bytes after {count} declared images")


def _read_png_dir(path: Path) -> Iterator[tuple[str, ImageBuffer]]:
    from PIL import Image, UnidentifiedImageError

    files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise InputError(f"{path}: no .png files found")
    for p in files:
        try:
            with Image.open(p) as pil:
                mode = "L" if pil.mode == "L" else "RGB"
                arr = np.asarray(pil.convert(mode), dtype=np.uint8)
        except (UnidentifiedImageError, OSError) as exc:
            raise DecodeError(f"{p}: cannot decode PNG ({exc})") from None
        yield p.stem, ImageBuffer.from_array(arr)


def read_images(path) -> Iterator[tuple[str, ImageBuffer]]:
    """Stream (sample_id, image) pairs from a container or a PNG directory.

    Container ids are the image indexes as strings; directory ids are the
    filename stems in lexicographic order.
    """
    p = Path(path)
    if p.is_dir():
        return _read_png_dir(p)
    return _read_container(p)


# ---------------------------------------------------------------------------
# Calibration profile: a single JSON document with a fixed field order.
# ---------------------------------------------------------------------------

def write_profile(profile: CalibrationProfile, path) -> None:
    fields = [
        f'  "k": {profile.k}',
        f'  "num_classes": {profile.num_classes}',
        '  "energy_means": ['
        + ", ".join(_fmt_float(m) for m in profile.energy_means) + "]",
        f'  "l_max_bits": {profile.l_max_bits}',
        f'  "gamma": {_fmt_float(profile.gamma)}',
        f'  "codec": {json.dumps(profile.codec.value)}',
        f'  "score_fn": {json.dumps(profile.score_fn.kind)}',
    ]
    if profile.score_fn.kind == "odin":
        fields.append(f'  "temperature": {_fmt_float(profile.score_fn.temperature)}')
    fields.append(f'  "target_tpr": {_fmt_float(profile.target_tpr)}')
    fields.append(f'  "created_from": {profile.created_from}')
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("{\n" + ",\n".join(fields) + "\n}\n")


_PROFILE_REQUIRED = ("k", "num_classes", "energy_means", "l_max_bits", "gamma",
                     "codec", "score_fn", "target_tpr", "created_from")


def read_profile(path) -> CalibrationProfile:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: profile must be a JSON object")
    missing = [f for f in _PROFILE_REQUIRED if f not in doc]
    if missing:
        raise SchemaError(f"{path}: profile missing fields {missing}")
    try:
        score_fn = ScoreFunctionId.parse(
            doc["score_fn"],
            temperature=float(doc.get("temperature", 1000.0)),
        )
        profile = CalibrationProfile(
            k=int(doc["k"]),
            num_classes=int(doc["num_classes"]),
            energy_means=tuple(float(m) for m in doc["energy_means"]),
            l_max_bits=int(doc["l_max_bits"]),
            gamma=float(doc["gamma"]),
            codec=CodecId.parse(doc["codec"]),
            score_fn=score_fn,
            target_tpr=float(doc["target_tpr"]),
            created_from=int(doc["created_from"]),
        )
    except (InputError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: {exc}") from None
    return profile


# ---------------------------------------------------------------------------
# Cost model file.
# ---------------------------------------------------------------------------

def write_cost_model(costs: ExitCostModel, path) -> None:
    flops = ", ".join(_fmt_float(f) for f in costs.cumulative_flops)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f'{{\n  "k": {costs.k},\n  "cumulative_flops": [{flops}]\n}}\n')


def read_cost_model(path) -> ExitCostModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict) or "k" not in doc or "cumulative_flops" not in doc:
        raise SchemaError(f"{path}: cost model needs k and cumulative_flops")
    flops = doc["cumulative_flops"]
    if not isinstance(flops, list) or len(flops) != int(doc["k"]):
        raise SchemaError(f"{path}: cumulative_flops must list exactly k values")
    try:
        return ExitCostModel(tuple(float(f) for f in flops))
    except (InputError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Per-sample outcomes: JSON lines, full float precision.
# ---------------------------------------------------------------------------

def write_outcomes(path, outcomes: Iterable[DetectionOutcome]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for o in outcomes:
            pred = "null" if o.predicted_class is None else str(o.predicted_class)
            fh.write(
                f'{{"id":{json.dumps(o.sample_id)},"decision":"{o.decision}",'
                f'"exit":{o.exit_used},"score":{_fmt_float(o.score)},'
                f'"pred":{pred},"flops":{_fmt_float(o.charged_flops)}}}\n'
            )


def read_outcomes(path) -> list[DetectionOutcome]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc})") from None
            try:
                out.append(DetectionOutcome(
                    sample_id=str(row["id"]),
                    decision=str(row["decision"]),
                    exit_used=int(row["exit"]),
                    score=float(row["score"]),
                    predicted_class=(None if row["pred"] is None else int(row["pred"])),
                    charged_flops=float(row["flops"]),
                ))
            except (KeyError, InputError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from None
    return out
