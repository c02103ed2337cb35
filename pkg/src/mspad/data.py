"""Multispectral face samples, the artifact taxonomy and dataset file IO.

Band images live on disk as 16-bit binary PGM files, one per band, and a
dataset is described by a single ``manifest.json`` next to them.
"""
from __future__ import annotations

import enum
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

WAVELENGTHS = (530, 590, 650, 710, 770, 830, 890, 950, 1000)
N_BANDS = len(WAVELENGTHS)
MAX_INTENSITY = 65535

MANIFEST_NAME = "manifest.json"


class DatasetError(Exception):
    """Raised when dataset files are missing, malformed or inconsistent."""


@dataclass(frozen=True)
class Band:
    index: int

    def __post_init__(self):
        if not 0 <= self.index < N_BANDS:
            raise ValueError(f"band index must be in 0..{N_BANDS - 1}, got {self.index}")

    @property
    def wavelength(self) -> int:
        return WAVELENGTHS[self.index]

    @classmethod
    def from_wavelength(cls, nm: int) -> "Band":
        try:
            return cls(WAVELENGTHS.index(int(nm)))
        except ValueError:
            raise ValueError(f"no band centred at {nm}nm") from None

    @classmethod
    def all(cls) -> list["Band"]:
        return [cls(i) for i in range(N_BANDS)]


class PAIGroup(str, enum.Enum):
    BONAFIDE = "Bonafide"
    PRINT = "Print"
    DISPLAY = "Display"
    MASK = "Mask"


class PAISpecies(str, enum.Enum):
    BONAFIDE = "Bonafide"
    PRINT1 = "PrintArtifact1"
    PRINT2 = "PrintArtifact2"
    DISPLAY1 = "DisplayArtifact1"
    DISPLAY2 = "DisplayArtifact2"
    DISPLAY3 = "DisplayArtifact3"
    DISPLAY4 = "DisplayArtifact4"
    MASK1 = "MaskArtifact1"
    MASK2 = "MaskArtifact2"

    @property
    def group(self) -> PAIGroup:
        for g in (PAIGroup.PRINT, PAIGroup.DISPLAY, PAIGroup.MASK):
            if self.value.startswith(g.value):
                return g
        return PAIGroup.BONAFIDE

    @property
    def is_attack(self) -> bool:
        return self is not PAISpecies.BONAFIDE

    @property
    def label(self) -> int:
        """+1 for bonafide, -1 for any attack."""
        return -1 if self.is_attack else 1

    @property
    def code(self) -> int:
        return list(PAISpecies).index(self)

    @classmethod
    def attacks(cls) -> list["PAISpecies"]:
        return [s for s in cls if s.is_attack]

    @classmethod
    def of_group(cls, group: PAIGroup) -> list["PAISpecies"]:
        return [s for s in cls if s.group is group]


@dataclass(frozen=True, eq=False)
class SpectralCube:
    """Nine co-registered band images of one face sample.

    ``data`` is a read-only uint16 array of shape (9, H, W) in band order.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[0] != N_BANDS:
            raise ValueError(f"cube must have shape (9, H, W), got {arr.shape}")
        h, w = arr.shape[1:]
        if h % 4 or w % 4 or h == 0 or w == 0:
            raise ValueError(f"cube height and width must be positive multiples of 4, got {h}x{w}")
        if np.issubdtype(arr.dtype, np.floating):
            if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > MAX_INTENSITY:
                raise ValueError("intensities must lie in [0, 65535]")
            if not np.array_equal(arr, np.round(arr)):
                raise ValueError("intensities must be integers")
        elif arr.size and (arr.min() < 0 or arr.max() > MAX_INTENSITY):
            raise ValueError("intensities must lie in [0, 65535]")
        arr = arr.astype(np.uint16, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def bands(self) -> list[np.ndarray]:
        return [self.data[i] for i in range(N_BANDS)]

    def band(self, band: Band | int) -> np.ndarray:
        idx = band.index if isinstance(band, Band) else int(band)
        return self.data[idx]

    def as_float(self) -> np.ndarray:
        """Intensities scaled to [0, 1] as float64."""
        return self.data.astype(np.float64) / MAX_INTENSITY

    def __eq__(self, other):
        if not isinstance(other, SpectralCube):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


def band_filename(subject_id: int, session: int, sample_index: int,
                  species: PAISpecies, wavelength: int) -> str:
    return f"s{subject_id}_ses{session}_n{sample_index}_{species.value}_{wavelength}nm.pgm"


@dataclass(frozen=True)
class SampleRecord:
    subject_id: int
    session: int
    sample_index: int
    species: PAISpecies
    file_paths: tuple[str, ...]

    @classmethod
    def create(cls, subject_id: int, session: int, sample_index: int,
               species: PAISpecies) -> "SampleRecord":
        """Record with the conventional file names (relative to the dataset root)."""
        files = tuple(band_filename(subject_id, session, sample_index, species, wl)
                      for wl in WAVELENGTHS)
        return cls(subject_id, session, sample_index, species, files)

    @property
    def key(self) -> tuple:
        return (self.subject_id, self.session, self.sample_index, self.species)

    @property
    def sample_id(self) -> str:
        return f"s{self.subject_id}_ses{self.session}_n{self.sample_index}_{self.species.value}"

    def to_json(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "session": self.session,
            "sample_index": self.sample_index,
            "species": self.species.value,
            "files": list(self.file_paths),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SampleRecord":
        return cls(int(obj["subject_id"]), int(obj["session"]), int(obj["sample_index"]),
                   PAISpecies(obj["species"]), tuple(obj["files"]))


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[SampleRecord, ...]
    image_height: int
    image_width: int
    generator_seed: int | None = None
    root: Path = field(default=Path("."), compare=False)
    extra: dict = field(default_factory=dict, compare=False)

    def path_of(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def to_json(self) -> dict:
        out = dict(self.extra)
        out.update({
            "image_height": self.image_height,
            "image_width": self.image_width,
            "generator_seed": self.generator_seed,
            "records": [r.to_json() for r in self.records],
        })
        return out

    def save(self, path: str | os.PathLike | None = None) -> Path:
        path = Path(path) if path is not None else self.root / MANIFEST_NAME
        atomic_write_text(path, json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DatasetManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        try:
            obj = json.loads(path.read_text())
        except FileNotFoundError:
            raise DatasetError(f"manifest not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise DatasetError(f"malformed manifest {path}: {exc}") from None
        try:
            records = tuple(SampleRecord.from_json(r) for r in obj["records"])
            extra = {k: v for k, v in obj.items()
                     if k not in ("records", "image_height", "image_width", "generator_seed")}
            return cls(records, int(obj["image_height"]), int(obj["image_width"]),
                       obj.get("generator_seed"), root=path.parent, extra=extra)
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"malformed manifest {path}: {exc!r}") from None


def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# --- PGM (P5, 16 bit big endian) ---------------------------------------------

def write_pgm(path: str | os.PathLike, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    h, w = image.shape
    header = f"P5\n{w} {h}\n{MAX_INTENSITY}\n".encode("ascii")
    atomic_write_bytes(path, header + image.astype(">u2").tobytes())


def _pgm_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM; 16-bit rasters are big endian. Returns uint16."""
    path = Path(path)
    try:
        buf = path.read_bytes()
    except FileNotFoundError:
        raise DatasetError(f"missing band file: {path}") from None
    except OSError as exc:
        raise DatasetError(f"cannot read band file {path}: {exc}") from None
    try:
        (magic, w, h, maxval), offset = _pgm_tokens(buf, 4)
        if magic != b"P5":
            raise ValueError(f"not a binary PGM (magic {magic!r})")
        w, h, maxval = int(w), int(h), int(maxval)
        if w <= 0 or h <= 0 or not 0 < maxval <= MAX_INTENSITY:
            raise ValueError("bad dimensions or max value")
        dtype = ">u2" if maxval > 255 else "u1"
        nbytes = w * h * np.dtype(dtype).itemsize
        raster = buf[offset:offset + nbytes]
        if len(raster) != nbytes:
            raise ValueError(f"raster has {len(raster)} bytes, expected {nbytes}")
        img = np.frombuffer(raster, dtype=dtype).reshape(h, w)
    except ValueError as exc:
        raise DatasetError(f"malformed band file {path}: {exc}") from None
    return img.astype(np.uint16)


def load_cube(record: SampleRecord, manifest: DatasetManifest) -> SpectralCube:
    if len(record.file_paths) != N_BANDS:
        raise DatasetError(f"record {record.sample_id} lists {len(record.file_paths)} files, expected 9")
    bands = []
    for rel in record.file_paths:
        path = manifest.path_of(rel)
        img = read_pgm(path)
        if img.shape != (manifest.image_height, manifest.image_width):
            raise DatasetError(
                f"dimension mismatch in {path}: {img.shape[0]}x{img.shape[1]}, "
                f"manifest declares {manifest.image_height}x{manifest.image_width}")
        bands.append(img)
    return SpectralCube(np.stack(bands))


def save_cube(cube: SpectralCube, record: SampleRecord, root: str | os.PathLike = ".") -> None:
    if len(record.file_paths) != N_BANDS:
        raise ValueError("record must list exactly 9 files")
    root = Path(root)
    for i, rel in enumerate(record.file_paths):
        p = Path(rel)
        try:
            write_pgm(p if p.is_absolute() else root / p, cube.data[i])
        except OSError as exc:
            raise DatasetError(f"cannot write {root / p}: {exc}") from None


def load_all(manifest: DatasetManifest, records: Sequence[SampleRecord] | None = None) -> np.ndarray:
    """Stack every cube of ``records`` (default: all) into an (n, 9, H, W) uint16 array."""
    records = manifest.records if records is None else records
    out = np.empty((len(records), N_BANDS, manifest.image_height, manifest.image_width), np.uint16)
    for k, rec in enumerate(records):
        out[k] = load_cube(rec, manifest).data
    return out


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __len__(self):
        return len(self.violations)

    def __str__(self):
        if self.ok:
            return "manifest valid"
        return "\n".join(self.violations)


def validate_manifest(manifest: DatasetManifest, check_files: bool = True) -> ValidationReport:
    """List every invariant violation of ``manifest``; never raises."""
    report = ValidationReport()
    v = report.violations
    h, w = manifest.image_height, manifest.image_width
    if h <= 0 or w <= 0 or h % 4 or w % 4:
        v.append(f"image size {h}x{w} is not a positive multiple of 4")
    seen = set()
    for rec in manifest.records:
        if rec.key in seen:
            v.append(f"duplicate record (subject={rec.subject_id}, session={rec.session}, "
                     f"sample={rec.sample_index}, species={rec.species.value})")
        seen.add(rec.key)
        if rec.subject_id < 1 or rec.sample_index < 1:
            v.append(f"{rec.sample_id}: identifiers must be positive")
        if rec.session not in (1, 2):
            v.append(f"{rec.sample_id}: session must be 1 or 2")
        elif rec.species.is_attack and rec.session != 1:
            v.append(f"{rec.sample_id}: attack samples are single-session (session must be 1)")
        if len(rec.file_paths) != N_BANDS:
            v.append(f"{rec.sample_id}: has {len(rec.file_paths)} file paths, expected 9")
            continue
        if not check_files:
            continue
        for rel in rec.file_paths:
            path = manifest.path_of(rel)
            try:
                img = read_pgm(path)
            except DatasetError as exc:
                v.append(str(exc))
                continue
            if img.shape != (h, w):
                v.append(f"dimension mismatch in {path}: {img.shape[0]}x{img.shape[1]}")
    return report
