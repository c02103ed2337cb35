import json

import numpy as np
import pytest

from mspad.data import (WAVELENGTHS, Band, DatasetError, DatasetManifest, PAIGroup, PAISpecies,
                        SampleRecord, SpectralCube, load_cube, read_pgm, save_cube,
                        validate_manifest, write_pgm)

from conftest import random_cube


def test_bands_are_a_bijection_onto_wavelengths():
    bands = Band.all()
    assert [b.wavelength for b in bands] == [530, 590, 650, 710, 770, 830, 890, 950, 1000]
    assert [b.index for b in bands] == list(range(9))
    assert all(a.wavelength < b.wavelength for a, b in zip(bands, bands[1:]))
    assert Band.from_wavelength(830).index == 5
    with pytest.raises(ValueError):
        Band(9)


@pytest.mark.parametrize("species,group", [
    (PAISpecies.BONAFIDE, PAIGroup.BONAFIDE),
    (PAISpecies.PRINT2, PAIGroup.PRINT),
    (PAISpecies.DISPLAY3, PAIGroup.DISPLAY),
    (PAISpecies.MASK1, PAIGroup.MASK),
])
def test_species_group(species, group):
    assert species.group is group


def test_taxonomy_counts():
    assert len(PAISpecies.attacks()) == 8
    assert len(PAISpecies.of_group(PAIGroup.DISPLAY)) == 4


def test_cube_rejects_size_not_divisible_by_4():
    with pytest.raises(ValueError, match="multiples of 4"):
        SpectralCube(np.zeros((9, 30, 32), np.uint16))
    with pytest.raises(ValueError):
        SpectralCube(np.zeros((8, 32, 32), np.uint16))


def test_cube_is_read_only(rng):
    cube = random_cube(rng, 8)
    with pytest.raises(ValueError):
        cube.data[0, 0, 0] = 1


def test_save_load_roundtrip_bit_exact(tmp_path, rng):
    cube = random_cube(rng, 32)
    rec = SampleRecord.create(3, 1, 2, PAISpecies.DISPLAY1)
    save_cube(cube, rec, tmp_path)
    manifest = DatasetManifest((rec,), 32, 32, root=tmp_path)
    back = load_cube(rec, manifest)
    assert back.height == back.width == 32
    assert np.array_equal(back.data, cube.data)
    for i, band in enumerate(Band.all()):
        assert rec.file_paths[i].endswith(f"_{band.wavelength}nm.pgm")


def test_constant_cube_roundtrip(tmp_path):
    cube = SpectralCube(np.full((9, 32, 32), 1234, np.uint16))
    rec = SampleRecord.create(1, 1, 1, PAISpecies.BONAFIDE)
    save_cube(cube, rec, tmp_path)
    assert len(list(tmp_path.glob("*.pgm"))) == 9
    for f in tmp_path.glob("*.pgm"):
        assert np.all(read_pgm(f) == 1234)


def test_pgm_wire_format(tmp_path):
    img = np.array([[0, 1], [256, 65535]], np.uint16)
    write_pgm(tmp_path / "x.pgm", img)
    raw = (tmp_path / "x.pgm").read_bytes()
    assert raw == b"P5\n2 2\n65535\n" + bytes([0, 0, 0, 1, 1, 0, 255, 255])


def test_pgm_reader_accepts_comments_and_8bit(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n\x07\xff")
    assert read_pgm(tmp_path / "c.pgm").tolist() == [[7, 255]]


def test_file_names():
    rec = SampleRecord.create(12, 2, 4, PAISpecies.BONAFIDE)
    assert rec.file_paths[0] == "s12_ses2_n4_Bonafide_530nm.pgm"
    assert rec.file_paths[-1] == "s12_ses2_n4_Bonafide_1000nm.pgm"


def test_missing_band_file_names_path(tmp_path, rng):
    rec = SampleRecord.create(1, 1, 1, PAISpecies.BONAFIDE)
    save_cube(random_cube(rng, 8), rec, tmp_path)
    victim = tmp_path / rec.file_paths[WAVELENGTHS.index(830)]
    victim.unlink()
    with pytest.raises(DatasetError, match="830nm"):
        load_cube(rec, DatasetManifest((rec,), 8, 8, root=tmp_path))


def test_dimension_mismatch_and_malformed(tmp_path, rng):
    rec = SampleRecord.create(1, 1, 1, PAISpecies.BONAFIDE)
    save_cube(random_cube(rng, 8), rec, tmp_path)
    with pytest.raises(DatasetError, match="dimension mismatch"):
        load_cube(rec, DatasetManifest((rec,), 16, 16, root=tmp_path))
    (tmp_path / rec.file_paths[0]).write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(DatasetError, match=rec.file_paths[0]):
        load_cube(rec, DatasetManifest((rec,), 8, 8, root=tmp_path))


def test_manifest_json_field_names(tmp_path):
    rec = SampleRecord.create(1, 1, 1, PAISpecies.MASK2)
    m = DatasetManifest((rec,), 8, 8, 7, root=tmp_path)
    path = m.save()
    obj = json.loads(path.read_text())
    assert set(obj["records"][0]) == {"subject_id", "session", "sample_index", "species", "files"}
    assert obj["image_height"] == 8 and obj["generator_seed"] == 7
    assert DatasetManifest.load(tmp_path).records == (rec,)


def test_generated_manifest_validates(small_dataset):
    report = validate_manifest(small_dataset)
    assert report.ok, str(report)
    # idempotent and side-effect free
    assert validate_manifest(small_dataset).violations == report.violations


def test_duplicate_record_is_one_violation(small_dataset):
    dup = small_dataset.records[0]
    m = DatasetManifest(small_dataset.records + (dup,), 16, 16, root=small_dataset.root)
    report = validate_manifest(m)
    assert len(report.violations) == 1
    assert "duplicate" in report.violations[0]


def test_record_with_eight_paths_is_one_violation(small_dataset):
    rec = small_dataset.records[0]
    short = SampleRecord(rec.subject_id, rec.session, rec.sample_index, rec.species, rec.file_paths[:8])
    m = DatasetManifest((short,) + small_dataset.records[1:], 16, 16, root=small_dataset.root)
    assert len(validate_manifest(m).violations) == 1


def test_attack_in_second_session_is_flagged(tmp_path):
    rec = SampleRecord.create(1, 2, 1, PAISpecies.PRINT1)
    report = validate_manifest(DatasetManifest((rec,), 8, 8, root=tmp_path), check_files=False)
    assert any("single-session" in v for v in report.violations)
