import math

import numpy as np
import pytest

from nbrestore.attributes import AttributeVector
from nbrestore.degrade import apply_chain, parse_chain
from nbrestore.errors import DatasetError, InvalidParameterError
from nbrestore.evaluation import (
    SuiteDefinition,
    attribute_sweep,
    emit_report,
    image_chain,
    list_builtin_suites,
    load_builtin_suite,
    load_report,
    load_suite,
    render_table,
    resolve_dataset,
    run_suite,
    true_attribute_vector,
)
from nbrestore.imgio import load_image
from nbrestore.metrics import psnr
from nbrestore.model import ModelConfig, build_model, zero_final_layer
from nbrestore.synthetic import write_corpus
from nbrestore.training import validate

TINY = ModelConfig(layers=3, features=4)


@pytest.fixture(scope="module")
def image_set(tmp_path_factory):
    d = tmp_path_factory.mktemp("eval_set")
    write_corpus(d, count=3, seed=55, size=96)
    return d


@pytest.fixture(scope="module")
def identity_ckpt():
    return zero_final_layer(build_model(TINY, seed=1))


def awgn_suite(dataset, sigma=25 / 255, policy="true", seed=3):
    return SuiteDefinition(name="awgn-test", dataset=str(dataset),
                           chain=parse_chain(f"awgn:{sigma!r}"),
                           attribute_policy=policy, seed=seed)


class TestBuiltinSuites:
    def test_list_contains_paper_tables(self):
        names = list_builtin_suites()
        for expected in ("awgn25", "sr3", "jpeg30", "awgn50+jpeg30",
                         "awgn50+up1", "snp05-as-gauss50", "jpeg10+up1"):
            assert expected in names

    def test_composite_suite_definition(self):
        suite = load_builtin_suite("awgn50+jpeg30")
        kinds = [s.kind for s in suite.chain.steps]
        assert kinds == ["awgn", "jpeg"]
        assert suite.chain.steps[0].param == pytest.approx(50 / 255)
        assert suite.chain.steps[1].param == 30
        vec = true_attribute_vector(suite.chain)
        assert vec.as_tuple() == pytest.approx((50 / 55, 0.0, 0.7))

    def test_snp_suite_uses_gaussian_surrogate(self):
        suite = load_builtin_suite("snp05-as-gauss50")
        assert suite.attribute_policy == "vector"
        assert suite.attribute_vector.noise == pytest.approx(50 / 55)
        assert suite.chain.steps[0].kind == "salt_pepper"

    def test_dataset_override(self, image_set):
        suite = load_builtin_suite("awgn25", dataset=str(image_set))
        assert suite.dataset == str(image_set)

    def test_sr_suites_crop_border(self):
        for s, name in ((2, "sr2"), (3, "sr3"), (4, "sr4")):
            assert load_builtin_suite(name).border_crop == s

    def test_unknown_suite(self):
        with pytest.raises(DatasetError):
            load_builtin_suite("nope")


class TestRunSuite:
    def test_identity_model_reproduces_noisy_psnr(self, identity_ckpt, image_set):
        suite = awgn_suite(image_set)
        report = run_suite(identity_ckpt, suite)
        assert len(report.rows) == 3
        for index, row in enumerate(report.rows):
            clean = load_image(image_set / row["image"], grayscale=True)
            noisy = apply_chain(clean, image_chain(suite, index))
            assert row["psnr"] == pytest.approx(psnr(clean, noisy), abs=1e-9)

    def test_aggregate_is_mean(self, identity_ckpt, image_set):
        report = run_suite(identity_ckpt, awgn_suite(image_set))
        assert report.aggregate["psnr"] == pytest.approx(
            np.mean([r["psnr"] for r in report.rows]))
        assert report.aggregate["ssim"] == pytest.approx(
            np.mean([r["ssim"] for r in report.rows]))

    def test_deterministic_bytes(self, identity_ckpt, image_set):
        suite = awgn_suite(image_set)
        a = run_suite(identity_ckpt, suite).to_json()
        b = run_suite(identity_ckpt, suite).to_json()
        assert a == b

    def test_clean_identity_gives_infinite_psnr(self, identity_ckpt, image_set,
                                                tmp_path):
        # scale x1 leaves the image untouched; identity model restores it
        suite = SuiteDefinition(name="clean", dataset=str(image_set),
                                chain=parse_chain("scale:1"),
                                attribute_policy="zeros")
        report = run_suite(identity_ckpt, suite)
        assert report.aggregate["psnr"] == math.inf
        # serialized as the token "inf", never a sentinel number
        assert '"inf"' in report.to_json()
        files = emit_report(report, tmp_path)
        assert load_report(files[0]).aggregate["psnr"] == math.inf

    def test_size_mismatch_resize_back(self, identity_ckpt, image_set):
        suite = SuiteDefinition(name="up", dataset=str(image_set),
                                chain=parse_chain("upscale_percent:1"))
        report = run_suite(identity_ckpt, suite)
        # restored came back at 97x97 and was resized to 96x96 for metrics
        assert all(np.isfinite(r["psnr"]) for r in report.rows)
        assert report.suite["size_mismatch"] == "resize_back"

    def test_border_crop_changes_metrics(self, identity_ckpt, image_set):
        base = SuiteDefinition(name="sr", dataset=str(image_set),
                               chain=parse_chain("scale:2"))
        cropped = SuiteDefinition(name="sr-crop", dataset=str(image_set),
                                  chain=parse_chain("scale:2"), border_crop=2)
        a = run_suite(identity_ckpt, base)
        b = run_suite(identity_ckpt, cropped)
        assert a.rows[0]["psnr"] != b.rows[0]["psnr"]

    def test_missing_dataset_mentions_fetch(self, identity_ckpt):
        suite = awgn_suite("no_such_dataset_anywhere")
        with pytest.raises(DatasetError, match="fetch_dataset"):
            run_suite(identity_ckpt, suite)

    def test_datasets_root_resolution(self, identity_ckpt, image_set):
        suite = awgn_suite(image_set.name)
        report = run_suite(identity_ckpt, suite,
                           datasets_root=image_set.parent)
        assert len(report.rows) == 3

    def test_undecodable_image_recorded(self, identity_ckpt, image_set, tmp_path):
        import shutil
        broken = tmp_path / "broken_set"
        shutil.copytree(image_set, broken)
        (broken / "bad.png").write_bytes(b"nope")
        report = run_suite(identity_ckpt, awgn_suite(broken))
        assert [f["image"] for f in report.failures] == ["bad.png"]
        assert len(report.rows) == 3


class TestValidateWrapper:
    def test_validate_delegates(self, identity_ckpt, image_set):
        suites = [awgn_suite(image_set)]
        out = validate(identity_ckpt, suites)
        assert set(out) == {"awgn-test"}
        assert len(out["awgn-test"].rows) == 3

    def test_suite_order_does_not_matter(self, identity_ckpt, image_set):
        s1 = awgn_suite(image_set)
        s2 = SuiteDefinition(name="jpeg-test", dataset=str(image_set),
                             chain=parse_chain("jpeg:30"))
        ab = validate(identity_ckpt, [s1, s2])
        ba = validate(identity_ckpt, [s2, s1])
        assert ab["awgn-test"].to_json() == ba["awgn-test"].to_json()
        assert ab["jpeg-test"].to_json() == ba["jpeg-test"].to_json()


class TestAttributeSweep:
    def test_matches_single_forward(self, identity_ckpt, natural_image):
        pts = attribute_sweep(identity_ckpt, natural_image, 0, [0.0])
        assert len(pts) == 1
        assert np.array_equal(pts[0].restored, natural_image)

    def test_values_validated(self, identity_ckpt, natural_image):
        with pytest.raises(InvalidParameterError):
            attribute_sweep(identity_ckpt, natural_image, 0, [])
        with pytest.raises(InvalidParameterError):
            attribute_sweep(identity_ckpt, natural_image, 0, [1.5])
        with pytest.raises(InvalidParameterError):
            attribute_sweep(identity_ckpt, natural_image, 5, [0.5])

    def test_reference_metrics_attached(self, identity_ckpt, natural_image):
        pts = attribute_sweep(identity_ckpt, natural_image, 0, [0.0, 1.0],
                              reference=natural_image)
        assert pts[0].psnr_vs_reference == math.inf


class TestReports:
    def test_emit_and_parse_round_trip(self, identity_ckpt, image_set, tmp_path):
        report = run_suite(identity_ckpt, awgn_suite(image_set))
        files = emit_report(report, tmp_path)
        assert len(files) == 2
        back = load_report(files[0])
        assert back.rows == report.rows
        assert back.aggregate == report.aggregate
        assert back.suite == report.suite

    def test_table_has_row_per_image(self, identity_ckpt, image_set):
        report = run_suite(identity_ckpt, awgn_suite(image_set))
        table = render_table(report)
        for row in report.rows:
            assert row["image"] in table
        assert "aggregate" in table

    def test_empty_report_rejected(self, identity_ckpt, image_set, tmp_path):
        report = run_suite(identity_ckpt, awgn_suite(image_set))
        report.rows = []
        with pytest.raises(DatasetError):
            emit_report(report, tmp_path)

    def test_suite_json_round_trip(self, tmp_path):
        suite = SuiteDefinition(
            name="x", dataset="set5",
            chain=parse_chain("awgn:0.1|jpeg:40"),
            attribute_policy="vector",
            attribute_vector=AttributeVector(0.5, 0, 0.25),
            border_crop=1, seed=11, min_mean_psnr=20.0)
        path = tmp_path / "suite.json"
        import json as _json
        path.write_text(_json.dumps(suite.to_dict()))
        again = load_suite(path)
        assert again.to_dict() == suite.to_dict()


def test_resolve_dataset_prefers_literal_path(image_set):
    assert resolve_dataset(str(image_set)) == image_set
