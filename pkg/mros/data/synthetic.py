"""
Synthetic identity datasets for desk-scale experiments.

Every identity is a stack of colored horizontal bands (seeded); each image
adds a camera-dependent tint and Gaussian pixel noise. Images are split per
identity: the first half goes to training, then one query per camera where
available (always leaving at least one gallery image), the rest to gallery.
"""

import csv
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from mros.data.images import save_png, to_uint8
from mros.data.records import DatasetSplit, ImageRecord, write_identity_map
from mros.errors import EmptyDatasetError, LayoutError, SyntheticSpecError
from mros.utils.logging import get_logger

logger = get_logger("mros.data.synthetic")

MANIFEST_NAME = "manifest.csv"
IDENTITY_MAP_NAME = "identity_map.txt"
BANDS = 6
TINT_AMPLITUDE = 0.05


@dataclass(frozen=True)
class SyntheticSpec:
    num_identities: int = 20
    images_per_identity: int = 12
    num_cameras: int = 3
    image_height: int = 48
    image_width: int = 24
    noise_level: float = 0.1
    seed: int = 0

    def validate(self, K: Optional[int] = None) -> None:
        if self.num_identities < 2:
            raise SyntheticSpecError(f"need at least 2 identities, got {self.num_identities}")
        if self.num_cameras < 1:
            raise SyntheticSpecError(f"need at least 1 camera, got {self.num_cameras}")
        if self.images_per_identity < 3:
            raise SyntheticSpecError(
                f"images_per_identity={self.images_per_identity} cannot fill train, query and gallery"
            )
        if K is not None and self.images_per_identity < K:
            raise SyntheticSpecError(f"images_per_identity={self.images_per_identity} is smaller than K={K}")
        if self.image_height < BANDS:
            raise SyntheticSpecError(f"image_height must be at least {BANDS}")
        if self.noise_level < 0:
            raise SyntheticSpecError("noise_level must be non-negative")


@dataclass
class SyntheticDataset:
    split: DatasetSplit
    images: Dict[str, np.ndarray]


def _identity_patterns(spec: SyntheticSpec) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    return rng.uniform(0.0, 1.0, size=(spec.num_identities, BANDS, 3))


def _camera_tints(spec: SyntheticSpec) -> np.ndarray:
    rng = np.random.default_rng([spec.seed, 1])
    return rng.uniform(-TINT_AMPLITUDE, TINT_AMPLITUDE, size=(spec.num_cameras, 3))


def render_image(spec: SyntheticSpec, pattern: np.ndarray, tint: np.ndarray, identity: int, index: int) -> np.ndarray:
    """Render one ``3 x H x W`` image; noise is seeded by (seed, identity, index)."""
    rows = np.minimum(np.arange(spec.image_height) * BANDS // spec.image_height, BANDS - 1)
    base = pattern[rows]  # H x 3
    image = np.broadcast_to(base.T[:, :, None], (3, spec.image_height, spec.image_width)) + tint[:, None, None]
    if spec.noise_level > 0:
        rng = np.random.default_rng([spec.seed, 2, identity, index])
        image = image + rng.normal(0.0, spec.noise_level, size=image.shape)
    return np.clip(image, 0.0, 1.0)


def _assign(spec: SyntheticSpec, identity: int) -> List[Tuple[str, int, int]]:
    """(split, index, camera) for every image of one identity."""
    n = spec.images_per_identity
    cameras = [(j % spec.num_cameras) + 1 for j in range(n)]
    n_train = n // 2
    out = [("train", j, cameras[j]) for j in range(n_train)]
    remaining = list(range(n_train, n))
    query = []
    seen = set()
    for j in remaining:
        if cameras[j] in seen or len(remaining) - len(query) <= 1:
            continue
        seen.add(cameras[j])
        query.append(j)
    for j in remaining:
        out.append(("query" if j in query else "gallery", j, cameras[j]))
    return out


def generate_synthetic(
    spec: SyntheticSpec,
    out_dir: Optional[Union[str, Path]] = None,
    K: Optional[int] = None,
    workers: int = 1,
    fingerprint: Optional[str] = None,
) -> SyntheticDataset:
    """
    Render a deterministic synthetic dataset.

    Args:
        spec: Dataset geometry, noise and seed
        out_dir: When given, write PNGs in the Market-1501 directory layout
            plus ``manifest.csv`` and ``identity_map.txt``
        K: Samples per identity the sampler will draw, validated against spec
        workers: Rendering threads
        fingerprint: Config fingerprint recorded in the written text files

    Returns:
        Records of the three splits and the rendered images keyed by path
    """
    spec.validate(K)
    patterns = _identity_patterns(spec)
    tints = _camera_tints(spec)
    subdirs = {"train": "bounding_box_train", "gallery": "bounding_box_test", "query": "query"}

    jobs = []
    split = DatasetSplit(identity_map={i: i for i in range(spec.num_identities)})
    for identity in range(spec.num_identities):
        for part, index, camera in _assign(spec, identity):
            name = f"{identity:04d}_c{camera}s1_{index:06d}_00.png"
            path = str(Path(subdirs[part]) / name)
            record = ImageRecord(
                identity=identity,
                camera=camera,
                sequence=1,
                path=path,
                frame=index,
                label=identity if part == "train" else -1,
            )
            split.split(part).append(record)
            jobs.append((record, index))

    def _render(job):
        record, index = job
        return record.path, render_image(spec, patterns[record.identity], tints[record.camera - 1], record.identity, index)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        images = dict(pool.map(_render, jobs))

    if out_dir is not None:
        root = Path(out_dir)
        for sub in subdirs.values():
            (root / sub).mkdir(parents=True, exist_ok=True)
        for path, image in images.items():
            save_png(root / path, image)
        write_manifest(root / MANIFEST_NAME, split, fingerprint)
        write_identity_map(root / IDENTITY_MAP_NAME, split.identity_map, fingerprint)
        logger.info(f"Synthetic dataset written to {root}: {split.counts()}")

    return SyntheticDataset(split=split, images=images)


def write_manifest(path: Path, split: DatasetSplit, fingerprint: Optional[str] = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        if fingerprint:
            f.write(f"# fingerprint={fingerprint}\n")
        writer = csv.writer(f)
        writer.writerow(["split", "path", "identity", "camera", "sequence", "frame", "label"])
        for part in ("train", "gallery", "query"):
            for r in split.split(part):
                writer.writerow([part, r.path, r.identity, r.camera, r.sequence, r.frame, r.label])


def load_synthetic(root: Union[str, Path]) -> DatasetSplit:
    """Read a dataset written by ``generate_synthetic``; paths become absolute."""
    root = Path(root)
    manifest = root / MANIFEST_NAME
    if not manifest.exists():
        raise LayoutError(f"no {MANIFEST_NAME} under {root}")
    split = DatasetSplit()
    for row in _manifest_rows(manifest):
        split.split(row["split"]).append(ImageRecord(
            identity=int(row["identity"]),
            camera=int(row["camera"]),
            sequence=int(row["sequence"]),
            path=str(root / row["path"]),
            frame=int(row["frame"]),
            label=int(row["label"]),
        ))
    if not split.train:
        raise EmptyDatasetError(f"synthetic dataset at {root} has no training images")
    split.identity_map = {r.identity: r.label for r in split.train}
    return split


def quantized(images: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Images as they read back from PNG (8-bit quantization)."""
    return {path: to_uint8(img).transpose(2, 0, 1).astype(np.float64) / 255.0 for path, img in images.items()}


def content_hash(root: Union[str, Path]) -> str:
    """
    SHA-256 over the relative paths and bytes of every file the dataset
    lists. Comment lines of the text files are left out, so the hash
    depends on the data only.
    """
    root = Path(root)
    digest = hashlib.sha256()
    files = [MANIFEST_NAME, IDENTITY_MAP_NAME] + [row["path"] for row in _manifest_rows(root / MANIFEST_NAME)]
    for rel in sorted(files):
        digest.update(rel.encode("utf-8"))
        data = (root / rel).read_bytes()
        if rel in (MANIFEST_NAME, IDENTITY_MAP_NAME):
            data = b"".join(line for line in data.splitlines(keepends=True) if not line.startswith(b"#"))
        digest.update(data)
    return digest.hexdigest()


def _manifest_rows(path: Path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(line for line in f if not line.startswith("#")))
