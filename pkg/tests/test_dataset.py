import dataclasses
import math

import numpy as np
import pytest

from nbrestore.attributes import encode_jpeg, encode_noise, encode_scale
from nbrestore.dataset import (
    generate_sample,
    ingest_corpus,
    load_manifest,
    read_shards,
    regenerate_input,
    split_names,
    write_shards,
)
from nbrestore.errors import DatasetError
from nbrestore.synthetic import write_corpus


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    write_corpus(d, count=12, seed=77, size=96)
    return d


@pytest.fixture(scope="module")
def manifest(corpus_dir):
    return ingest_corpus(corpus_dir, split_ratio=0.75, seed=5,
                         sample_count=64)


class TestSplit:
    def test_291_sources_at_095(self):
        names = [f"img_{i:03d}.png" for i in range(291)]
        assignment = split_names(names, 0.95, seed=1)
        counts = {"train": 0, "val": 0}
        for v in assignment.values():
            counts[v] += 1
        assert counts == {"train": 276, "val": 15}

    def test_single_source_cannot_split(self):
        with pytest.raises(DatasetError):
            split_names(["only.png"], 0.5, seed=0)

    def test_deterministic(self):
        names = [f"{i}.png" for i in range(20)]
        assert split_names(names, 0.8, 3) == split_names(names, 0.8, 3)
        assert split_names(names, 0.8, 3) != split_names(names, 0.8, 4)


class TestIngest:
    def test_manifest_contents(self, manifest, corpus_dir):
        assert manifest.patch_size == 50
        assert len(manifest.sources) == 12
        assert sum(s.split == "train" for s in manifest.sources) == 9
        assert sum(s.split == "val" for s in manifest.sources) == 3
        for s in manifest.sources:
            assert (s.height, s.width) == (96, 96)

    def test_rerun_same_hash(self, corpus_dir):
        a = ingest_corpus(corpus_dir, split_ratio=0.75, seed=5, sample_count=64)
        b = ingest_corpus(corpus_dir, split_ratio=0.75, seed=5, sample_count=64)
        assert a.content_hash() == b.content_hash()

    def test_empty_directory(self, tmp_path):
        with pytest.raises(DatasetError):
            ingest_corpus(tmp_path)

    def test_undecodable_skipped(self, tmp_path):
        write_corpus(tmp_path, count=3, seed=1, size=64)
        (tmp_path / "junk.png").write_bytes(b"not a png at all")
        with pytest.warns(UserWarning):
            manifest = ingest_corpus(tmp_path, split_ratio=0.5, seed=0)
        assert len(manifest.sources) == 3

    def test_save_load_round_trip(self, manifest, tmp_path):
        path = tmp_path / "manifest.json"
        manifest.save(path)
        back = load_manifest(path)
        assert back == manifest
        assert back.content_hash() == manifest.content_hash()


class TestGenerateSample:
    def test_deterministic(self, manifest):
        a = generate_sample(manifest, 7)
        b = generate_sample(manifest, 7)
        assert np.array_equal(a.input_patch, b.input_patch)
        assert np.array_equal(a.target_patch, b.target_patch)
        assert a.attribute == b.attribute
        assert a.provenance == b.provenance

    def test_patch_geometry(self, manifest):
        s = generate_sample(manifest, 0)
        assert s.input_patch.shape == (50, 50)
        assert s.target_patch.shape == (50, 50)
        assert s.input_patch.dtype == np.float32

    def test_single_degradation_and_true_attribute(self, manifest):
        encoders = {"awgn": encode_noise, "scale": encode_scale,
                    "jpeg": encode_jpeg}
        for i in range(24):
            s = generate_sample(manifest, i)
            spec = s.provenance.spec
            assert spec.kind in manifest.degradation_kinds
            value = encoders[spec.kind](spec.param)
            assert getattr(s.attribute,
                           {"awgn": "noise", "scale": "scale",
                            "jpeg": "jpeg"}[spec.kind]) == value
            others = [v for name, v in zip(("noise", "scale", "jpeg"),
                                           s.attribute.as_tuple())
                      if name != {"awgn": "noise", "scale": "scale",
                                  "jpeg": "jpeg"}[spec.kind]]
            assert others == [0.0, 0.0]

    def test_parameter_ranges(self, manifest):
        for i in range(40):
            spec = generate_sample(manifest, i).provenance.spec
            if spec.kind == "awgn":
                assert 5 / 255 <= spec.param <= 55 / 255
            elif spec.kind == "scale":
                assert spec.param in (1.0, 2.0, 3.0, 4.0)
            else:
                assert 5 <= spec.param <= 95 and spec.param.is_integer()

    def test_label_truthfulness(self, manifest):
        for i in range(16):
            s = generate_sample(manifest, i)
            assert np.array_equal(regenerate_input(manifest, s), s.input_patch)

    def test_kind_histogram_uniform(self, corpus_dir):
        n = 10_000
        manifest = ingest_corpus(corpus_dir, split_ratio=0.75, seed=9,
                                 sample_count=n)
        counts = {k: 0 for k in manifest.degradation_kinds}
        for i in range(n):
            counts[generate_sample(manifest, i).provenance.spec.kind] += 1
        p = 1.0 / 3.0
        bound = 3.0 * math.sqrt(n * p * (1 - p))
        for k, c in counts.items():
            assert abs(c - n * p) < bound, (k, c)

    def test_index_out_of_range(self, manifest):
        with pytest.raises(IndexError):
            generate_sample(manifest, manifest.sample_count)

    def test_all_sources_too_small(self, tmp_path):
        write_corpus(tmp_path, count=4, seed=2, size=32)  # < patch 50
        manifest = ingest_corpus(tmp_path, split_ratio=0.5, seed=0,
                                 sample_count=4)
        with pytest.raises(DatasetError):
            generate_sample(manifest, 0)

    def test_val_split_uses_other_sources(self, manifest):
        val = manifest.for_split("val", sample_count=8)
        val_paths = {s.path for s in manifest.sources if s.split == "val"}
        for i in range(8):
            assert generate_sample(val, i).provenance.source_path in val_paths

    def test_augment_flag_off_by_default(self, manifest):
        assert manifest.augment is False
        assert all(generate_sample(manifest, i).provenance.augment_k == 0
                   for i in range(8))
        # turning it off explicitly serializes identically
        assert dataclasses.replace(manifest, augment=False).content_hash() \
            == manifest.content_hash()

    def test_augment_truthful_and_varied(self, manifest):
        aug = dataclasses.replace(manifest, augment=True)
        assert aug.content_hash() != manifest.content_hash()
        ks = set()
        for i in range(24):
            s = generate_sample(aug, i)
            ks.add(s.provenance.augment_k)
            assert s.input_patch.shape == (50, 50)
            assert np.array_equal(regenerate_input(aug, s), s.input_patch)
        assert len(ks) > 3  # several dihedral variants drawn


class TestShards:
    def test_shard_sizes(self, corpus_dir, tmp_path):
        manifest = ingest_corpus(corpus_dir, split_ratio=0.75, seed=5,
                                 sample_count=10)
        paths = write_shards(manifest, shard_size=4, out_dir=tmp_path)
        assert [p.name for p in paths] == ["shard_0000.bin", "shard_0001.bin",
                                           "shard_0002.bin"]
        samples = list(read_shards(tmp_path))
        assert len(samples) == 10

    def test_round_trip_bit_exact(self, manifest, tmp_path):
        small = dataclasses.replace(manifest, sample_count=12)
        write_shards(small, shard_size=5, out_dir=tmp_path)
        for i, loaded in enumerate(read_shards(tmp_path)):
            fresh = generate_sample(small, i)
            assert np.array_equal(loaded.input_patch, fresh.input_patch)
            assert np.array_equal(loaded.target_patch, fresh.target_patch)
            assert loaded.attribute == fresh.attribute
            assert loaded.provenance.spec == fresh.provenance.spec
            assert loaded.provenance.crop_y == fresh.provenance.crop_y
            assert loaded.provenance.mode == fresh.provenance.mode

    def test_empty_manifest_rejected(self, manifest, tmp_path):
        empty = dataclasses.replace(manifest, sample_count=0)
        with pytest.raises(DatasetError):
            write_shards(empty, shard_size=4, out_dir=tmp_path)

    def test_bad_shard_size(self, manifest, tmp_path):
        with pytest.raises(DatasetError):
            write_shards(manifest, shard_size=0, out_dir=tmp_path)
