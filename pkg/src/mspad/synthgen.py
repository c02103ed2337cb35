"""Seeded synthetic multispectral face datasets.

Every subject gets a smooth face pattern (three anisotropic Gaussian bumps)
that is reused by all of that subject's bonafide and attack samples. Each band
image is

    65535 * clip(reflectance[band] * face * texture + noise[band], 0, 1)

where the texture modulation depends on the class (skin micro-texture,
halftone dots, display pixel lattice, or a blurred face for masks). The
display profile is near zero from 770nm upward, so those bands are mostly
sensor noise.

All randomness comes from ``numpy.random.SeedSequence`` keyed on
(seed, purpose, subject, session, sample, species, band), so the output does
not depend on generation order.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .data import (MANIFEST_NAME, MAX_INTENSITY, N_BANDS, WAVELENGTHS, DatasetError,
                   DatasetManifest, PAIGroup, PAISpecies, SampleRecord, SpectralCube,
                   save_cube)

TEXTURE_KINDS = ("skin", "halftone", "pixelgrid", "smooth")
HALFTONE_JITTER = 2.0

_TAG_FACE, _TAG_TEXTURE, _TAG_NOISE, _TAG_PHOTO = 1, 2, 3, 4


@dataclass(frozen=True)
class SpectralProfile:
    """Per-group appearance model.

    ``texture_strength`` scales the multiplicative texture, except for the
    ``smooth`` kind where it is the Gaussian blur sigma applied to the face.
    ``replay_strength`` adds the subject's own skin texture on top, as a
    replayed photograph would; ``replay_blur`` softens that copy.
    """

    mean_reflectance: tuple[float, ...]
    band_noise_sigma: tuple[float, ...]
    texture_kind: str
    texture_strength: float = 0.1
    replay_strength: float = 0.0
    replay_blur: float = 0.0

    def __post_init__(self):
        refl = tuple(float(v) for v in self.mean_reflectance)
        sig = tuple(float(v) for v in self.band_noise_sigma)
        if len(refl) != N_BANDS or len(sig) != N_BANDS:
            raise ValueError("profiles need 9 reflectance and 9 noise values")
        if any(not 0 <= v <= 1 for v in refl):
            raise ValueError("mean reflectance values must lie in [0, 1]")
        if any(v < 0 for v in sig):
            raise ValueError("noise sigmas must be non-negative")
        if self.texture_kind not in TEXTURE_KINDS:
            raise ValueError(f"texture_kind must be one of {TEXTURE_KINDS}")
        if min(self.texture_strength, self.replay_strength, self.replay_blur) < 0:
            raise ValueError("texture and replay parameters must be non-negative")
        object.__setattr__(self, "mean_reflectance", refl)
        object.__setattr__(self, "band_noise_sigma", sig)

    @property
    def spread(self) -> float:
        return max(self.mean_reflectance) - min(self.mean_reflectance)


def default_profiles() -> dict[PAIGroup, SpectralProfile]:
    noise = (0.01,) * N_BANDS
    return {
        # haemoglobin absorption dip at 590nm, NIR plateau
        PAIGroup.BONAFIDE: SpectralProfile(
            (0.42, 0.30, 0.50, 0.58, 0.62, 0.64, 0.65, 0.60, 0.56), noise, "skin", 0.12),
        PAIGroup.PRINT: SpectralProfile(
            (0.52, 0.52, 0.53, 0.54, 0.55, 0.55, 0.56, 0.55, 0.54), noise, "halftone", 0.05),
        # emissive panel: visible only, nothing past 710nm
        PAIGroup.DISPLAY: SpectralProfile(
            (0.40, 0.42, 0.38, 0.08, 0.01, 0.01, 0.015, 0.01, 0.01), noise, "pixelgrid", 0.02,
            replay_strength=0.08),
        PAIGroup.MASK: SpectralProfile(
            (0.56, 0.57, 0.59, 0.61, 0.62, 0.63, 0.63, 0.62, 0.60), noise, "smooth", 1.5),
    }


@dataclass(frozen=True)
class GenConfig:
    n_subjects: int = 40
    sessions_bonafide: int = 2
    samples_per_cell: int = 5
    attack_samples: int | None = 6
    mask_subjects: int | None = None
    mask_samples: int | None = None
    image_size: int = 32
    seed: int = 42
    noise_floor: float = 0.05
    profiles: dict = field(default_factory=default_profiles)

    def __post_init__(self):
        if self.image_size <= 0 or self.image_size % 4:
            raise ValueError(f"image_size must be a positive multiple of 4, got {self.image_size}")
        for name in ("n_subjects", "sessions_bonafide", "samples_per_cell"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.sessions_bonafide > 2:
            raise ValueError("at most 2 bonafide sessions are supported")
        for name in ("attack_samples", "mask_subjects", "mask_samples"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")
        profiles = default_profiles()
        for key, prof in dict(self.profiles).items():
            profiles[PAIGroup(key)] = prof
        object.__setattr__(self, "profiles", profiles)

    @property
    def n_attack_samples(self) -> int:
        return self.attack_samples if self.attack_samples is not None else self.samples_per_cell

    @property
    def n_mask_subjects(self) -> int:
        if self.mask_subjects is not None:
            return min(self.mask_subjects, self.n_subjects)
        return max(1, self.n_subjects // 4)

    @property
    def n_mask_samples(self) -> int:
        return self.mask_samples if self.mask_samples is not None else self.samples_per_cell

    def expected_records(self) -> int:
        """S*B*k + S*a*6 + M*m*2 (bonafide, print+display, masks)."""
        return (self.n_subjects * self.sessions_bonafide * self.samples_per_cell
                + self.n_subjects * self.n_attack_samples * 6
                + self.n_mask_subjects * self.n_mask_samples * 2)

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in
               ("n_subjects", "sessions_bonafide", "samples_per_cell", "attack_samples",
                "mask_subjects", "mask_samples", "image_size", "seed", "noise_floor")}
        out["profiles"] = {g.value: asdict(p) for g, p in self.profiles.items()}
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GenConfig":
        obj = dict(obj)
        profiles = {}
        defaults = default_profiles()
        for key, p in obj.pop("profiles", {}).items():
            group = PAIGroup(key)
            base = asdict(defaults[group])
            base.update(p)
            profiles[group] = SpectralProfile(**base)
        unknown = set(obj) - {f for f in cls.__dataclass_fields__ if f != "profiles"}
        if unknown:
            raise ValueError(f"unknown generator config keys: {', '.join(sorted(unknown))}")
        return cls(profiles=profiles, **obj)

    @classmethod
    def load(cls, path) -> "GenConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


def _rng(seed, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *map(int, key)]))


def face_pattern(seed: int, subject_id: int, size: int) -> np.ndarray:
    """Subject-specific smooth pattern in roughly [0.45, 1]."""
    rng = _rng(seed, _TAG_FACE, subject_id)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    out = np.full((size, size), 0.45)
    for _ in range(3):
        cy, cx = rng.uniform(0.25, 0.75, size=2)
        sy, sx = rng.uniform(0.12, 0.35, size=2)
        theta = rng.uniform(0, np.pi)
        dy, dx = yy - cy, xx - cx
        u = dy * np.cos(theta) + dx * np.sin(theta)
        v = -dy * np.sin(theta) + dx * np.cos(theta)
        out += rng.uniform(0.15, 0.25) * np.exp(-0.5 * ((u / sy) ** 2 + (v / sx) ** 2))
    return np.minimum(out, 1.0)


def _bandlimited(rng, size, lo=0.7, hi=2.0) -> np.ndarray:
    white = rng.standard_normal((size, size))
    z = gaussian_filter(white, lo, mode="wrap") - gaussian_filter(white, hi, mode="wrap")
    return z / (z.std() + 1e-12)


def texture_modulation(kind: str, strength: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Multiplicative texture field around 1 (``smooth`` returns ones; see :func:`render_cube`)."""
    p, q = np.mgrid[0:size, 0:size]
    if kind == "skin":
        return 1.0 + strength * _bandlimited(rng, size)
    if kind == "halftone":
        # dot screen with a 4px period and random registration
        phase = rng.integers(0, 4, size=2)
        dots = np.cos(np.pi * (p + phase[0]) / 2) * np.cos(np.pi * (q + phase[1]) / 2)
        # per-dot strength varies (dithering, ink spread)
        gain = rng.uniform(1 - HALFTONE_JITTER, 1 + HALFTONE_JITTER, size=(size // 4 + 2, size // 4 + 2))
        gain = np.kron(gain, np.ones((4, 4)))[phase[0]:phase[0] + size, phase[1]:phase[1] + size]
        return 1.0 + strength * dots * gain
    if kind == "pixelgrid":
        # dark gaps between 2px display cells
        phase = rng.integers(0, 2, size=2)
        gaps = (((p + phase[0]) % 2) == 0) | (((q + phase[1]) % 2) == 0)
        return 1.0 - strength * (gaps - 0.75)
    if kind == "smooth":
        return np.ones((size, size))
    raise ValueError(f"unknown texture kind {kind!r}")


def render_cube(config: GenConfig, record: SampleRecord) -> SpectralCube:
    size = config.image_size
    species = record.species
    prof = config.profiles[species.group]
    key = (record.subject_id, record.session, record.sample_index, species.code)
    face = face_pattern(config.seed, record.subject_id, size)
    if prof.texture_kind == "smooth":
        face = gaussian_filter(face, prof.texture_strength, mode="nearest")
    tex = texture_modulation(prof.texture_kind, prof.texture_strength,
                             _rng(config.seed, _TAG_TEXTURE, *key), size)
    if prof.replay_strength > 0:
        # attacks reproduce a photograph of the subject, skin texture included
        photo = _bandlimited(_rng(config.seed, _TAG_PHOTO, record.subject_id), size)
        if prof.replay_blur > 0:
            photo = gaussian_filter(photo, prof.replay_blur, mode="wrap")
        tex = tex + prof.replay_strength * photo
    signal = face * tex
    bands = np.empty((N_BANDS, size, size))
    for k in range(N_BANDS):
        noise = _rng(config.seed, _TAG_NOISE, *key, k).standard_normal((size, size))
        bands[k] = prof.mean_reflectance[k] * signal + prof.band_noise_sigma[k] * noise
    return SpectralCube(np.round(np.clip(bands, 0.0, 1.0) * MAX_INTENSITY).astype(np.uint16))


def dataset_records(config: GenConfig) -> list[SampleRecord]:
    """Records in canonical order: species, subject, session, sample."""
    records = []
    for species in PAISpecies:
        if species is PAISpecies.BONAFIDE:
            subjects, sessions, samples = config.n_subjects, config.sessions_bonafide, config.samples_per_cell
        elif species.group is PAIGroup.MASK:
            subjects, sessions, samples = config.n_mask_subjects, 1, config.n_mask_samples
        else:
            subjects, sessions, samples = config.n_subjects, 1, config.n_attack_samples
        for subject in range(1, subjects + 1):
            for session in range(1, sessions + 1):
                for n in range(1, samples + 1):
                    records.append(SampleRecord.create(subject, session, n, species))
    return records


def generate_dataset(config: GenConfig, out_dir: str | os.PathLike) -> DatasetManifest:
    """Write every band image plus ``manifest.json`` under ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create output directory {out_dir}: {exc}") from None
    if not os.access(out_dir, os.W_OK):
        raise DatasetError(f"output directory is not writable: {out_dir}")
    records = dataset_records(config)
    for rec in records:
        save_cube(render_cube(config, rec), rec, out_dir)
    manifest = DatasetManifest(
        tuple(records), config.image_size, config.image_size, config.seed, root=out_dir,
        extra={
            "count_formula": "n_subjects*sessions_bonafide*samples_per_cell"
                             " + n_subjects*attack_samples*6 + mask_subjects*mask_samples*2",
            "expected_records": config.expected_records(),
            "generator_config": config.to_json(),
            "wavelengths_nm": list(WAVELENGTHS),
        })
    manifest.save(out_dir / MANIFEST_NAME)
    return manifest


def with_overrides(config: GenConfig, **changes) -> GenConfig:
    return replace(config, **changes)
