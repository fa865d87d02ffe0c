"""
Tests for the feature, coefficient and report file codecs
"""
import pytest

from config.settings import PipelineConfig
from src.infrastructure.tsv_io import (
    ExclusionLog,
    coefficients_path,
    load_coefficients,
    parse_header,
    read_feature_rows,
    save_coefficients,
    write_feature_rows,
)
from src.models.cascade_models import FeatureRow, ModelCoefficients, ModelVariant
from src.models.errors import ConfigMismatchError, DataError


@pytest.fixture
def cfg():
    return PipelineConfig()


def _rows(floor):
    return [
        FeatureRow.build("a", 3, 2, 5, 1 / 3, 2, None, floor),
        FeatureRow.build("b", 2, 1, 1, 0.0, 1, None, floor),
        FeatureRow.build("c", 1, 1, 4, None, 0, None, floor),
        FeatureRow.build("d", 1, 0, 0, None, 0, "no early adoption", floor),
    ]


class TestFeatureFiles:

    def test_layout(self, tmp_path, cfg):
        path = tmp_path / "features.tsv"
        write_feature_rows(_rows(cfg.density_floor), path, cfg.feature_settings(), cfg.fingerprint())

        lines = path.read_text().splitlines()
        assert parse_header(lines[0])["fingerprint"] == cfg.fingerprint()
        assert lines[1].split("\t") == ["tweet_id", "n_adopters", "early_pop", "final_pop", "density", "depth", "excluded_reason"]
        assert lines[3] == "b\t2\t1\t1\t0.0\t1\t-"
        assert lines[4] == "c\t1\t1\t4\t-\t0\t-"
        assert lines[5] == "d\t1\t0\t0\t-\t0\tno early adoption"

    def test_read_back(self, tmp_path, cfg):
        path = tmp_path / "features.tsv"
        rows = _rows(cfg.density_floor)
        write_feature_rows(rows, path, cfg.feature_settings(), cfg.fingerprint())
        loaded, header = read_feature_rows(path, cfg.fingerprint())
        assert loaded == rows
        assert header["t_i"] == "3600"

    def test_fingerprint_mismatch(self, tmp_path, cfg):
        path = tmp_path / "features.tsv"
        write_feature_rows(_rows(cfg.density_floor), path, cfg.feature_settings(), cfg.fingerprint())
        with pytest.raises(ConfigMismatchError):
            read_feature_rows(path, PipelineConfig(t_i=60).fingerprint())

    def test_missing_column(self, tmp_path):
        path = tmp_path / "features.tsv"
        path.write_text("# fingerprint=x\ntweet_id\tdepth\na\t1\n")
        with pytest.raises(DataError):
            read_feature_rows(path)

    def test_invalid_row(self, tmp_path):
        path = tmp_path / "features.tsv"
        path.write_text(
            "# fingerprint=x\n"
            "tweet_id\tn_adopters\tearly_pop\tfinal_pop\tdensity\tdepth\texcluded_reason\n"
            "a\t2\t3\t1\t0.5\t1\t-\n"
        )
        with pytest.raises(DataError) as info:
            read_feature_rows(path)
        assert ":3:" in str(info.value)


class TestExclusionLog:

    def test_logs_excluded_rows_as_they_pass(self, tmp_path, cfg):
        path = tmp_path / "features.exclusions.tsv"
        rows = _rows(cfg.density_floor)
        with ExclusionLog(path, cfg.fingerprint()) as log:
            passed = log.track(iter(rows))
            assert [next(passed) for _ in range(3)] == rows[:3]
            assert log.count == 0
            assert next(passed) == rows[3]
            assert log.count == 1
            assert list(passed) == []

        lines = path.read_text().splitlines()
        assert parse_header(lines[0])["fingerprint"] == cfg.fingerprint()
        assert lines[1:] == ["tweet_id\texcluded_reason", "d\tno early adoption"]

    def test_record_needs_open_file(self, tmp_path, cfg):
        log = ExclusionLog(tmp_path / "x.tsv", cfg.fingerprint())
        with pytest.raises(RuntimeError):
            log.record(_rows(cfg.density_floor)[3])


class TestCoefficientFiles:

    def test_save_and_load(self, tmp_path, cfg):
        model = ModelCoefficients(variant=ModelVariant.WITH_DEPTH, coeffs=(0.1, 1 / 3, -2.5), n_train=40, fingerprint=cfg.fingerprint())
        path = coefficients_path(tmp_path, ModelVariant.WITH_DEPTH)
        save_coefficients(model, path, cfg.feature_settings())

        assert path.name == "coeffs_with_depth.txt"
        assert load_coefficients(path, cfg.fingerprint()) == model

    def test_refuses_other_fingerprint(self, tmp_path, cfg):
        model = ModelCoefficients(variant=ModelVariant.BASELINE, coeffs=(1.0, 0.0), n_train=4, fingerprint="0000")
        path = tmp_path / "coeffs.txt"
        save_coefficients(model, path, cfg.feature_settings())
        with pytest.raises(ConfigMismatchError):
            load_coefficients(path, cfg.fingerprint())

    def test_malformed(self, tmp_path):
        path = tmp_path / "coeffs.txt"
        path.write_text("variant=baseline\ncoeffs=1.0\nn_train=3\n")
        with pytest.raises(DataError):
            load_coefficients(path)
