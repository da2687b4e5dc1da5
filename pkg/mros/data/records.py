"""
Dataset record types.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

JUNK_IDENTITY = -1


@dataclass(frozen=True)
class ImageRecord:
    """
    One bounding-box image.

    identity -1 marks junk images; ``label`` is the dense training index
    (-1 outside the training split).
    """

    identity: int
    camera: int
    sequence: int
    path: str
    frame: int = 0
    box: int = 0
    label: int = -1

    @property
    def image_id(self) -> str:
        return Path(self.path).stem

    @property
    def is_junk(self) -> bool:
        return self.identity == JUNK_IDENTITY


@dataclass
class DatasetSplit:
    train: List[ImageRecord] = field(default_factory=list)
    gallery: List[ImageRecord] = field(default_factory=list)
    query: List[ImageRecord] = field(default_factory=list)
    identity_map: Dict[int, int] = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return len(self.identity_map)

    def counts(self) -> Dict[str, int]:
        return {"train": len(self.train), "gallery": len(self.gallery), "query": len(self.query)}

    def split(self, name: str) -> List[ImageRecord]:
        if name not in ("train", "gallery", "query"):
            raise KeyError(f"unknown split {name!r}")
        return getattr(self, name)

    def missing_query_identities(self) -> List[int]:
        """Query identities that never appear in the gallery."""
        gallery_ids = {r.identity for r in self.gallery}
        return sorted({r.identity for r in self.query if r.identity not in gallery_ids})


def write_identity_map(path: Path, identity_map: Dict[int, int], fingerprint: Optional[str] = None) -> None:
    """Two-column text file: ``original_id dense_index``, after an optional ``# fingerprint=`` line."""
    with open(path, "w", encoding="utf-8") as f:
        if fingerprint:
            f.write(f"# fingerprint={fingerprint}\n")
        for original, dense in sorted(identity_map.items(), key=lambda kv: kv[1]):
            f.write(f"{original} {dense}\n")


def read_identity_map(path: Path) -> Dict[int, int]:
    mapping: Dict[int, int] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip() and not line.startswith("#"):
                original, dense = line.split()
                mapping[int(original)] = int(dense)
    return mapping
