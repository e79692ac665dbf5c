import os

import pandas as pd

from reports import LinePlot, emit_report, read_manifest, write_manifest


def curve_frame():
    return pd.DataFrame({"fraction": [0.0, 0.5, 1.0], "freqx": [0.9, 0.5, 0.1], "random": [0.9, 0.7, 0.1]})


class TestEmitReport:
    def test_writes_tables_and_plots(self, tmp_path):
        plots = {"curve": LinePlot(curve_frame(), "fraction", ["freqx", "random"], "Deletion")}
        paths = emit_report({"curve": curve_frame()}, tmp_path / "out", plots)
        assert [os.path.basename(p) for p in paths] == ["curve.csv", "curve.svg"]
        assert pd.read_csv(paths[0]).equals(curve_frame())

    def test_reruns_are_byte_identical(self, tmp_path):
        plots = {"curve": LinePlot(curve_frame(), "fraction", ["freqx"])}
        first = emit_report({"curve": curve_frame()}, tmp_path / "a", plots)
        second = emit_report({"curve": curve_frame()}, tmp_path / "b", plots)
        for a, b in zip(first, second):
            with open(a, "rb") as fa, open(b, "rb") as fb:
                assert fa.read() == fb.read()

    def test_float_format(self, tmp_path):
        frame = pd.DataFrame({"x": [1 / 3]})
        path = emit_report({"x": frame}, tmp_path)[0]
        with open(path) as f:
            assert f.read() == "x\n0.3333333333\n"


class TestManifest:
    def test_round_trip(self, tmp_path):
        write_manifest(tmp_path, {"experiment": "delins"}, {"root": 0, "data": 12}, "abc", [str(tmp_path / "t.csv")])
        manifest = read_manifest(tmp_path)
        assert manifest["config"] == {"experiment": "delins"}
        assert manifest["seeds"]["data"] == 12
        assert manifest["files"] == ["t.csv"]
        assert manifest["created_at"].endswith("+00:00")

    def test_missing_manifest(self, tmp_path):
        assert read_manifest(tmp_path) == {}
