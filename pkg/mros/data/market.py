"""
Market-1501 ingestion.

Expected layout under the dataset root::

    bounding_box_train/   training images
    bounding_box_test/    gallery images
    query/                query images

File names follow ``<id>_c<camera>s<sequence>_<frame>_<box>.jpg``.
"""

import os
import re
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Union

from mros.data.records import DatasetSplit, ImageRecord, write_identity_map
from mros.errors import EmptyDatasetError, LayoutError, ParseError
from mros.utils.logging import get_logger

logger = get_logger("mros.data.market")

MARKET_PATTERN = re.compile(r"^(-?\d+)_c(\d+)s(\d+)_(\d+)_(\d+)\.jpe?g$")
SUBDIRS = {"train": "bounding_box_train", "gallery": "bounding_box_test", "query": "query"}
IMAGE_SUFFIXES = (".jpg", ".jpeg")


def parse_market_filename(name: str) -> Dict[str, int]:
    """
    Extract identity, camera and sequence from a Market-1501 file name.

    Raises:
        ParseError: if the name does not follow the convention
    """
    match = MARKET_PATTERN.match(os.path.basename(name))
    if not match:
        raise ParseError(f"not a Market-1501 file name: {name!r}")
    identity, camera, sequence, frame, box = (int(g) for g in match.groups())
    return {"identity": identity, "camera": camera, "sequence": sequence, "frame": frame, "box": box}


def format_market_filename(record: ImageRecord, suffix: str = ".jpg") -> str:
    identity = f"{record.identity:04d}" if record.identity >= 0 else str(record.identity)
    return f"{identity}_c{record.camera}s{record.sequence}_{record.frame:06d}_{record.box:02d}{suffix}"


def _scan(directory: Path) -> List[ImageRecord]:
    records = []
    for name in sorted(os.listdir(directory)):
        if not name.lower().endswith(IMAGE_SUFFIXES):
            logger.debug(f"Skipping non-image file {name}")
            continue
        fields = parse_market_filename(name)
        records.append(ImageRecord(path=str(directory / name), **fields))
    return records


def relabel(train: List[ImageRecord]) -> Dict[int, int]:
    """Dense ``[0, num_classes)`` index over sorted training identities."""
    return {identity: dense for dense, identity in enumerate(sorted({r.identity for r in train}))}


def load_market(root: Union[str, Path], identity_map_path: Optional[Union[str, Path]] = None) -> DatasetSplit:
    """
    Load the three Market-1501 splits by parsing file names.

    Junk images (identity -1) are dropped from training and kept in the
    gallery for the evaluation protocol to exclude.

    Args:
        root: Dataset root directory
        identity_map_path: Where to persist the dense identity map

    Returns:
        DatasetSplit with dense training labels
    """
    root = Path(root)
    for sub in SUBDIRS.values():
        if not (root / sub).is_dir():
            raise LayoutError(f"missing {sub}/ under {root}")

    splits = {key: _scan(root / sub) for key, sub in SUBDIRS.items()}
    if not any(splits.values()):
        raise EmptyDatasetError(f"no parsable images under {root}")
    for key, records in splits.items():
        if not records:
            raise EmptyDatasetError(f"{SUBDIRS[key]}/ under {root} has no parsable images")

    train = [r for r in splits["train"] if not r.is_junk]
    identity_map = relabel(train)
    train = [replace(r, label=identity_map[r.identity]) for r in train]
    dataset = DatasetSplit(train=train, gallery=splits["gallery"], query=splits["query"], identity_map=identity_map)

    missing = dataset.missing_query_identities()
    if missing:
        logger.warning(f"{len(missing)} query identities have no gallery image")
    if identity_map_path is not None:
        write_identity_map(Path(identity_map_path), identity_map)

    logger.info(
        f"Market-1501: {len(train)} train images / {dataset.num_classes} identities, "
        f"{len(dataset.gallery)} gallery, {len(dataset.query)} query"
    )
    return dataset
