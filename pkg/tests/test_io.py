import numpy as np
import pytest

from lfqmli.errors import DuplicatePath, FormatVersionError, NonFiniteMos, ParseError, PathMismatch
from lfqmli.evaluation import TrialReport, TrialResult
from lfqmli.features import FEATURE_NAMES, FeatureConfig
from lfqmli.io import (
    ConfigMismatch,
    FeatureCache,
    align,
    check_config,
    format_report_table,
    parse_manifest,
    read_feature_cache,
    read_model,
    report_to_json,
    write_feature_cache,
    write_manifest,
    write_model,
)
from lfqmli.svr import Hyperparams, svr_predict, svr_train

GOOD = "path,mos,scene,distortion\na.npy,3.5,s1,blur\nb.npy,2.25,s1,jpeg\nsub/c.npy,4,s2,\n"


def write(tmp_path, text, name="m.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def random_cache(n=5, seed=0, config=FeatureConfig()):
    rng = np.random.default_rng(seed)
    return FeatureCache(config, tuple(f"lf{k}.npy" for k in range(n)), rng.normal(size=(n, 14)) / 3, (False,) * (n - 1) + (True,))


class TestManifest:
    def test_well_formed(self, tmp_path):
        m = parse_manifest(write(tmp_path, GOOD))
        assert len(m) == 3
        assert m.paths == ["a.npy", "b.npy", "sub/c.npy"]
        np.testing.assert_array_equal(m.mos, [3.5, 2.25, 4.0])
        assert m.scenes == ["s1", "s1", "s2"]
        assert m.resolve(m.rows[2]) == tmp_path / "sub" / "c.npy"

    def test_bad_mos_names_line(self, tmp_path):
        with pytest.raises(ParseError, match="line 2"):
            parse_manifest(write(tmp_path, "path,mos,scene,distortion\na.npy,abc,s,d\n"))

    @pytest.mark.parametrize(
        "text, exc",
        [
            ("path,mos\na,1\n", ParseError),
            ("path,mos,scene,distortion\n", ParseError),
            ("", ParseError),
            ("path,mos,scene,distortion\na,1,s\n", ParseError),
            ("path,mos,scene,distortion\na,1,s,d\na,2,s,d\n", DuplicatePath),
            ("path,mos,scene,distortion\na,nan,s,d\n", NonFiniteMos),
            ("path,mos,scene,distortion\na,inf,s,d\n", NonFiniteMos),
        ],
    )
    def test_errors(self, tmp_path, text, exc):
        with pytest.raises(exc):
            parse_manifest(write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            parse_manifest(tmp_path / "nope.csv")

    def test_round_trip_bytes(self, tmp_path):
        src = write(tmp_path, "path,mos,scene,distortion\na.npy,3.5,s1,blur\nb.npy,0.1,s1,\n")
        out = tmp_path / "out.csv"
        write_manifest(parse_manifest(src), out)
        assert out.read_bytes() == src.read_bytes()


class TestFeatureCache:
    def test_round_trip_exact(self, tmp_path):
        cache = random_cache()
        p = tmp_path / "f.csv"
        write_feature_cache(cache, p)
        back = read_feature_cache(p)
        assert back.paths == cache.paths and back.fallback == cache.fallback
        assert back.config == cache.config
        assert back.values.tobytes() == cache.values.tobytes()

    def test_header_declares_order_and_config(self, tmp_path):
        p = tmp_path / "f.csv"
        write_feature_cache(random_cache(config=FeatureConfig(0.5, 10, "all")), p)
        head = p.read_text().splitlines()
        assert head[0] == "# lfqa-features 1"
        assert ",".join(FEATURE_NAMES) in head[1]
        assert "# keep: 0.5" in head and "# threshold: 10" in head and "# sai: all" in head

    def test_rewrite_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_feature_cache(random_cache(), a)
        write_feature_cache(read_feature_cache(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_wrong_version(self, tmp_path):
        p = tmp_path / "f.csv"
        write_feature_cache(random_cache(), p)
        p.write_text(p.read_text().replace("lfqa-features 1", "lfqa-features 9"))
        with pytest.raises(FormatVersionError):
            read_feature_cache(p)

    def test_wrong_field_count(self, tmp_path):
        p = tmp_path / "f.csv"
        write_feature_cache(random_cache(), p)
        lines = p.read_text().splitlines()
        lines[-1] = lines[-1].rsplit(",", 2)[0]
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError, match="line"):
            read_feature_cache(p)

    def test_align_reorders(self, tmp_path):
        cache = random_cache(3)
        m = parse_manifest(write(tmp_path, "path,mos,scene,distortion\nlf2.npy,1,a,\nlf0.npy,2,a,\nlf1.npy,3,a,\n"))
        np.testing.assert_array_equal(align(cache, m), cache.values[[2, 0, 1]])

    @pytest.mark.parametrize("rows", ["lf0.npy,1,a,\nlf1.npy,2,a,\n", "lf0.npy,1,a,\nlf1.npy,2,a,\nlf2.npy,3,a,\nlf9.npy,3,a,\n"])
    def test_align_mismatch(self, tmp_path, rows):
        m = parse_manifest(write(tmp_path, "path,mos,scene,distortion\n" + rows))
        with pytest.raises(PathMismatch):
            align(random_cache(3), m)

    def test_config_mismatch(self):
        with pytest.raises(ConfigMismatch):
            check_config(random_cache(), FeatureConfig(threshold=10))
        check_config(random_cache(), FeatureConfig())


class TestModel:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(71)
        X = rng.normal(size=(30, 6))
        model = svr_train(X, X[:, 0] ** 2, Hyperparams(8.0, 0.25, 0.1))
        p = tmp_path / "m.txt"
        write_model(model, p, ("ulbp",), FeatureConfig())
        back, subset, config = read_model(p)
        assert subset == ("ulbp",) and config == FeatureConfig()
        assert back.hyperparams == model.hyperparams and back.bias == model.bias
        probe = rng.normal(size=(10, 6))
        assert svr_predict(back, probe).tobytes() == svr_predict(model, probe).tobytes()
        p2 = tmp_path / "m2.txt"
        write_model(back, p2, subset, config)
        assert p.read_bytes() == p2.read_bytes()

    def test_bad_version(self, tmp_path):
        p = write(tmp_path, "lfqa-svr 2\n", "m.txt")
        with pytest.raises(FormatVersionError):
            read_model(p)

    def test_truncated(self, tmp_path):
        model = svr_train([[0.0], [1.0], [2.0]], [0.0, 1.0, 4.0], Hyperparams(10, 1))
        p = tmp_path / "m.txt"
        write_model(model, p, ("ged", "ulbp", "sq"), FeatureConfig())
        p.write_text("".join(p.read_text().splitlines(keepends=True)[:-1]))
        with pytest.raises(ParseError):
            read_model(p)


def test_report_outputs():
    import json

    trials = (TrialResult(0.9, 0.8, 0.5, Hyperparams(1, 2)), TrialResult(0.7, 0.6, 0.4, Hyperparams(4, 8)))
    report = TrialReport(trials, seed=3)
    doc = json.loads(report_to_json(report, split_by="row"))
    assert doc["median"] == {"srocc": 0.7, "lcc": 0.6, "rmse": 0.4}
    assert doc["trials"] == 2 and doc["split_by"] == "row"
    assert doc["per_trial"][1]["C"] == 4
    assert "0.7000" in format_report_table(report)
