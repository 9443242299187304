"""Domain types and dataset ingestion for COCO/Flickr-style caption splits.

The canonical on-disk format is JSONL, one record per line:
``{"image_id": str, "image_uri": str, "references": [str, ...]}``.
Karpathy-style split JSON files are supported as an import adapter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence


class DatasetError(ValueError):
    """Raised when a split file or record fails validation."""


@dataclass(frozen=True)
class GenParams:
    """How a caption was produced by the captioner."""

    temperature: Optional[float] = None
    beams: Optional[int] = None
    seed: Optional[int] = None


@dataclass(frozen=True)
class Caption:
    text: str
    source: str  # one of: baseline-beam, sampled, summary, reference
    gen_params: Optional[GenParams] = None

    SOURCES = ("baseline-beam", "sampled", "summary", "reference")

    def __post_init__(self):
        if not self.text.strip():
            raise DatasetError("caption text is empty")
        if self.source not in self.SOURCES:
            raise DatasetError(f"unknown caption source: {self.source!r}")
        if self.source == "sampled" and (
            self.gen_params is None or self.gen_params.temperature is None
        ):
            raise DatasetError("sampled captions must carry a temperature")
        if self.source == "baseline-beam" and (
            self.gen_params is None or self.gen_params.beams is None
        ):
            raise DatasetError("baseline captions must carry a beam count")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    image_uri: str
    references: tuple[str, ...]

    def __post_init__(self):
        if not self.image_id:
            raise DatasetError("image_id is empty")
        if not self.references:
            raise DatasetError(f"record {self.image_id!r} has no references")


@dataclass(frozen=True)
class CandidateSet:
    """The k temperature-sampled captions for one image.

    Duplicate captions are allowed; they encode distribution mass.
    """

    image_id: str
    captions: tuple[Caption, ...]
    temperature: float
    k: int

    def __post_init__(self):
        if self.temperature <= 0:
            raise DatasetError("temperature must be > 0")
        if len(self.captions) != self.k:
            raise DatasetError(
                f"candidate set for {self.image_id!r} has {len(self.captions)} "
                f"captions, expected k={self.k}"
            )

    def texts(self) -> list[str]:
        return [c.text for c in self.captions]


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    records: tuple[ImageRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.image_id in seen:
                raise DatasetError(f"duplicate image_id: {rec.image_id!r}")
            seen.add(rec.image_id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.records)

    def ids(self) -> list[str]:
        return [r.image_id for r in self.records]

    def by_id(self, image_id: str) -> ImageRecord:
        for rec in self.records:
            if rec.image_id == image_id:
                return rec
        raise DatasetError(f"unknown image_id: {image_id!r}")


def _record_from_obj(obj: dict, locus: str) -> ImageRecord:
    try:
        refs = tuple(str(r) for r in obj["references"])
        return ImageRecord(
            image_id=str(obj["image_id"]),
            image_uri=str(obj.get("image_uri", "")),
            references=refs,
        )
    except KeyError as exc:
        raise DatasetError(f"{locus}: missing field {exc}") from exc


def load_split(path: str | Path, format: str = "jsonl", name: Optional[str] = None) -> DatasetSplit:
    """Load a dataset split from disk.

    ``format`` is ``jsonl`` (canonical) or ``karpathy-json`` (import adapter
    that keeps only ``"split": "test"`` images).
    """
    path = Path(path)
    split_name = name or path.stem
    if format == "jsonl":
        records = []
        with path.open() as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
                records.append(_record_from_obj(obj, f"{path}:{lineno}"))
        return DatasetSplit(name=split_name, records=tuple(records))
    if format == "karpathy-json":
        with path.open() as fh:
            blob = json.load(fh)
        records = []
        for i, img in enumerate(blob.get("images", [])):
            if img.get("split") != "test":
                continue
            refs = tuple(
                s["raw"].strip() if "raw" in s else str(s.get("sentence", "")).strip()
                for s in img.get("sentences", [])
            )
            image_id = str(img.get("cocoid", img.get("imgid", i)))
            uri = img.get("filepath", "")
            filename = img.get("filename", "")
            image_uri = f"{uri}/{filename}" if uri else filename
            records.append(
                ImageRecord(image_id=image_id, image_uri=image_uri, references=refs)
            )
        return DatasetSplit(name=split_name, records=tuple(records))
    raise DatasetError(f"unknown split format: {format!r}")


def save_split(split: DatasetSplit, path: str | Path) -> None:
    """Write a split as canonical JSONL (round-trips bit-exactly)."""
    path = Path(path)
    with path.open("w") as fh:
        for rec in split.records:
            fh.write(
                json.dumps(
                    {
                        "image_id": rec.image_id,
                        "image_uri": rec.image_uri,
                        "references": list(rec.references),
                    }
                )
                + "\n"
            )


def subset(split: DatasetSplit, ids: Sequence[str], name: Optional[str] = None) -> DatasetSplit:
    """Return the records named by ``ids``, in the order of ``ids``."""
    index = {rec.image_id: rec for rec in split.records}
    missing = [i for i in ids if i not in index]
    if missing:
        raise DatasetError(f"unknown ids: {missing[:5]}")
    return DatasetSplit(
        name=name or f"{split.name}-subset",
        records=tuple(index[i] for i in ids),
    )
