import argparse
import json
import math

import numpy as np
import pytest

from curvkit import formats
from curvkit.config import DEFAULT_SEED, JOBS_ENV, RunConfig, default_jobs
from curvkit.metric_core import SampledSpace, tripod_metric
from curvkit.utils import ConfigError, InputFormatError, MetricViolation


def test_csv_with_labels():
    M = formats.parse_csv_metric("a,b\n0,1\n1,0\n")
    assert M.labels == ["a", "b"]
    assert M.d[0, 1] == 1.0


def test_csv_written_and_read_back():
    text = formats.format_csv_metric(tripod_metric())
    assert text.splitlines()[0] == "center,leaf1,leaf2,leaf3"
    M = formats.parse_csv_metric(text)
    np.testing.assert_array_equal(M.d, tripod_metric().d)


def test_csv_error_positions():
    with pytest.raises(InputFormatError) as err:
        formats.parse_csv_metric("0,1\n1,x\n")
    assert (err.value.line, err.value.column) == (2, 2)
    assert "line 2, column 2" in str(err.value)
    with pytest.raises(InputFormatError) as err:
        formats.parse_csv_metric("0,1\n1\n")
    assert err.value.line == 2
    with pytest.raises(InputFormatError):
        formats.parse_csv_metric("\n\n")


def test_csv_must_be_a_metric():
    with pytest.raises(MetricViolation):
        formats.parse_csv_metric("0,1\n2,0\n")


def test_coordinate_rows():
    pts = formats.parse_csv_points("x,y\n0,0\n1,2.5\n")
    np.testing.assert_array_equal(pts, [[0.0, 0.0], [1.0, 2.5]])
    with pytest.raises(InputFormatError) as err:
        formats.parse_csv_points("0,0\n1\n")
    assert err.value.line == 2


def test_json_errors_carry_positions():
    with pytest.raises(InputFormatError) as err:
        formats.parse_json('{"edges": [1, 2,]}')
    assert err.value.line == 1


def test_load_space_picks_the_format(tmp_path):
    csv_path = tmp_path / "tripod.csv"
    csv_path.write_text(formats.format_csv_metric(tripod_metric()))
    assert formats.load_space(csv_path).labels[0] == "center"
    graph_path = tmp_path / "path.json"
    graph_path.write_text(json.dumps({"vertices": 3, "edges": [[0, 1, 1.0], [1, 2, 1.0]]}))
    S = formats.load_space(graph_path)
    assert isinstance(S, SampledSpace)
    assert S.distance(0, 2) == 2.0
    bad = tmp_path / "bad.json"
    bad.write_text("[]")
    with pytest.raises(InputFormatError):
        formats.load_space(bad)


def test_report_is_deterministic():
    report = formats.make_report("check-cbb", {"margin": -math.inf, "b": 1, "a": np.float64(0.5)}, status="fail")
    text = formats.dumps_report(report)
    assert text == formats.dumps_report(report)
    doc = json.loads(text)
    assert doc["schema"] == "curvkit/1"
    assert doc["result"]["margin"] == "-inf"
    assert list(doc["result"]) == ["a", "b", "margin"]


def _args(**kw):
    base = dict(command="check-cbb", inputs=["x.csv"], kappa=None, kappa_min=None, kappa_max=None, tol=None,
                seed=None, jobs=None, out=None, plot=None, verbose=False)
    base.update(kw)
    return argparse.Namespace(**base)


def test_run_config_defaults(monkeypatch):
    monkeypatch.delenv(JOBS_ENV, raising=False)
    cfg = RunConfig.from_args(_args(point="0"))
    assert cfg.kappa == 0.0
    assert cfg.seed == DEFAULT_SEED == 0xA1E
    assert cfg.jobs == 1
    assert cfg.options == {"point": "0"}


def test_run_config_rejects_empty_range():
    with pytest.raises(ConfigError):
        RunConfig.from_args(_args(kappa_min=1.0, kappa_max=0.0))
    with pytest.raises(ConfigError):
        RunConfig(command="check-cat", tol=0.0)


def test_jobs_from_environment(monkeypatch):
    monkeypatch.setenv(JOBS_ENV, "3")
    assert default_jobs() == 3
    assert RunConfig.from_args(_args()).jobs == 3
    assert RunConfig.from_args(_args(jobs=2)).jobs == 2
    monkeypatch.setenv(JOBS_ENV, "many")
    with pytest.raises(ConfigError):
        default_jobs()
