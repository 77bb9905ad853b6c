import io
import json
import warnings

import numpy as np
import pytest

from firmnet.exceptions import ConfigError, PanelFormatError
from firmnet.io import (
    load_panel,
    read_growth,
    read_panel,
    read_params,
    read_registry,
    read_table,
    save_panel,
    table_to_string,
    write_edge_list,
    write_growth,
    write_params,
    write_registry,
    write_table,
)
from firmnet.model import GrowthPanel, StructuralParams
from firmnet.synthetic import GeneratorConfig, generate_panel


def test_load_minimal_rows():
    panel = load_panel([(2003, "A", "B", "G"), (2003, "B", "A", "H")], {"A": 0, "B": 1})
    assert panel.nnz(2003) == (1, 1)
    assert panel.G(2003)[0, 1] == 1 and panel.H(2003)[1, 0] == 1


def test_self_loop_dropped_with_warning():
    with pytest.warns(UserWarning, match="1 self-loops"):
        panel = load_panel([(2003, "A", "A", "G"), (2003, "A", "B", "G")], ["A", "B"])
    assert panel.nnz(2003) == (1, 0)
    assert panel.ingest_report.self_loops == 1


def test_duplicates_collapsed_with_warning():
    with pytest.warns(UserWarning, match="2 duplicate"):
        panel = load_panel([(1, "A", "B", "G")] * 3, ["A", "B"])
    assert panel.nnz(1) == (1, 0)
    assert panel.ingest_report.duplicates == 2


def test_unknown_firm_rejected_with_line_number():
    text = "year,source,target,relation\n2003,A,B,G\n2003,A,Z,G\n"
    with pytest.raises(PanelFormatError, match="line 3"):
        load_panel(io.StringIO(text), ["A", "B"])


@pytest.mark.parametrize(
    "row",
    ["2003,A,B\n", "20x3,A,B,G\n", "2003,A,B,Q\n"],
)
def test_malformed_rows(row):
    text = "year,source,target,relation\n" + row
    with pytest.raises(PanelFormatError, match="line 2"):
        load_panel(io.StringIO(text), ["A", "B"])


def test_bad_header():
    with pytest.raises(PanelFormatError, match="line 1"):
        load_panel(io.StringIO("a,b,c,d\n"), ["A"])


def test_years_argument_adds_empty_snapshots():
    panel = load_panel([(2004, "A", "B", "G")], ["A", "B"], years=[2003, 2004])
    assert panel.years == [2003, 2004]
    assert panel.nnz(2003) == (0, 0)


@pytest.fixture(scope="module")
def generated():
    return generate_panel(GeneratorConfig(firm_count=300, n_years=10, seed=5))


def test_binary_round_trip_bit_identical(generated, tmp_path):
    save_panel(generated.panel, tmp_path / "p.fnp")
    back = read_panel(tmp_path / "p.fnp")
    assert back.identical(generated.panel)


def test_binary_bad_magic(tmp_path):
    (tmp_path / "x.fnp").write_bytes(b"NOTAFILE" + b"\x00" * 40)
    with pytest.raises(PanelFormatError):
        read_panel(tmp_path / "x.fnp")


def test_edge_list_round_trip(generated, tmp_path):
    write_registry(generated.panel.firm_ids, tmp_path / "firms.csv")
    write_edge_list(generated.panel, tmp_path / "edges.csv")
    ids = read_registry(tmp_path / "firms.csv")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        back = load_panel(tmp_path / "edges.csv", ids)
    assert back.identical(generated.panel)


def test_growth_round_trip_exact(generated, tmp_path):
    ids = generated.panel.firm_ids
    write_growth(generated.growth, ids, tmp_path / "g.csv")
    back = read_growth(tmp_path / "g.csv", ids)
    assert back.years == generated.growth.years
    np.testing.assert_array_equal(back.y, generated.growth.y)


def test_growth_incomplete_year_rejected():
    text = "year,firm,log_growth\n2003,A,0.1\n"
    with pytest.raises(PanelFormatError, match="missing"):
        read_growth(io.StringIO(text), ["A", "B"])


def test_growth_duplicate_rejected():
    text = "year,firm,log_growth\n2003,A,0.1\n2003,A,0.2\n"
    with pytest.raises(PanelFormatError, match="line 3"):
        read_growth(io.StringIO(text), ["A"])


def test_params_round_trip(tmp_path):
    p = StructuralParams(0.06, 0.05, 0.01, 0.02, -0.3, 0.001, 0.5)
    write_params(p, tmp_path / "p.json")
    assert read_params(tmp_path / "p.json") == p


@pytest.mark.parametrize(
    "doc",
    [
        {"beta_G": 0.1},
        {**StructuralParams().to_dict(), "extra": 1.0},
        {**StructuralParams().to_dict(), "sigma0": -1.0},
    ],
)
def test_params_rejected(doc):
    with pytest.raises(ConfigError):
        read_params(doc)


def test_params_invalid_json(tmp_path):
    (tmp_path / "p.json").write_text("{not json")
    with pytest.raises(ConfigError):
        read_params(tmp_path / "p.json")


def test_table_round_trip(tmp_path):
    rows = [(2003, "severed", 0.1 + 0.2, float("nan")), (2004, "formed", 1e-300, 3.0)]
    write_table(tmp_path / "t.csv", ("year", "type", "a", "b"), rows)
    back = read_table(tmp_path / "t.csv")
    assert back[0]["year"] == 2003 and back[0]["type"] == "severed"
    assert back[0]["a"] == 0.1 + 0.2
    assert np.isnan(back[0]["b"])
    assert back[1]["a"] == 1e-300
    assert table_to_string(("x",), [(1,)]) == "x\n1\n"


def test_growth_panel_json_free_of_numpy_types(generated):
    # generator config must serialise with the stdlib encoder
    json.dumps(generated.config.to_dict())
    assert isinstance(generated.growth, GrowthPanel)
