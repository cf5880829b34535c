import json

import pytest

from transit_equity.cli import main
from transit_equity.config import RunConfig
from transit_equity.errors import InvalidInputError

from conftest import SMALL_CITY


@pytest.fixture(scope="module")
def city_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "spec.json").write_text(json.dumps(SMALL_CITY))
    assert main(["synth", "--spec", str(root / "spec.json"), "--seed", "3", "--out", str(root / "city")]) == 0
    return root


@pytest.fixture(scope="module")
def workspace(city_dir):
    ws = city_dir / "ws"
    assert main(["ingest", "--config", str(city_dir / "city" / "config.json"), "--workspace", str(ws)]) == 0
    return ws


def first_line(path):
    return path.read_text().splitlines()[0]


def test_config_defaults_and_hash():
    cfg = RunConfig()
    assert (cfg.side_m, cfg.min_density, cfg.depart_s, cfg.horizon_s) == (1000.0, 100.0, 28_800.0, 3_600.0)
    assert (cfg.walk_speed_mps, cfg.walk_detour, cfg.max_access_s) == (1.39, 1.3, 1_200.0)
    assert (cfg.footpath_radius_m, cfg.min_transfer_s, cfg.percentile) == (500.0, 60.0, 0.65)
    assert cfg.with_overrides({"threads": 8}).hash() == cfg.hash()
    assert cfg.with_overrides({"horizon_s": 1800}).hash() != cfg.hash()
    with pytest.raises(InvalidInputError):
        RunConfig.from_dict({"nope": 1})
    with pytest.raises(InvalidInputError):
        RunConfig.from_dict({"percentile": 0})


def test_flags_override_config_file(city_dir, tmp_path):
    cfg = json.loads((city_dir / "city" / "config.json").read_text())
    cfg["min_density"] = 5000.0
    path = city_dir / "city" / "dense.json"
    path.write_text(json.dumps(cfg))
    assert main(["ingest", "--config", str(path), "--workspace", str(tmp_path / "a")]) == 0
    assert main(["ingest", "--config", str(path), "--workspace", str(tmp_path / "b"), "--min-density", "100"]) == 0
    a = json.loads((tmp_path / "a" / "manifest.json").read_text())
    b = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert a["hexagons"] < b["hexagons"]


def test_ingest_manifest(workspace, city_dir, tmp_path):
    m = json.loads((workspace / "manifest.json").read_text())
    assert m["hexagons"] > 0 and m["connections"] > 0 and m["lines"] == 8
    assert m["roles"] == {"C1": "center_circulator", "S1": "suburban_connector"}
    assert first_line(workspace / "grid.csv") == f"# config_hash={m['config_hash']}"
    again = tmp_path / "again"
    assert main(["ingest", "--config", str(city_dir / "city" / "config.json"), "--workspace", str(again)]) == 0
    assert json.loads((again / "manifest.json").read_text())["checksum"] == m["checksum"]


def test_ingest_errors(city_dir, tmp_path, capsys):
    code = main(["ingest", "--workspace", str(tmp_path / "w"), "--gtfs-dir", str(city_dir / "city" / "gtfs"),
                 "--population-csv", str(tmp_path / "missing.csv")])
    assert code == 2
    assert "missing.csv" in capsys.readouterr().err
    bad = tmp_path / "gtfs"
    bad.mkdir()
    for f in (city_dir / "city" / "gtfs").iterdir():
        (bad / f.name).write_text(f.read_text())
    (bad / "stop_times.txt").write_text("trip_id,arrival_time,departure_time,stop_id,stop_sequence\nX,8:00,8:00:00,Q,1\n")
    code = main(["ingest", "--workspace", str(tmp_path / "w"), "--gtfs-dir", str(bad),
                 "--population-csv", str(city_dir / "city" / "population.csv")])
    assert code == 2
    assert "stop_times.txt:2" in capsys.readouterr().err


def test_state_errors(workspace, tmp_path):
    assert main(["score", "--workspace", str(tmp_path / "nothing"), "--method", "fast"]) == 3
    fresh = tmp_path / "fresh"
    fresh.mkdir()
    for f in ("manifest.json", "config.json", "grid.csv"):
        (fresh / f).write_bytes((workspace / f).read_bytes())
    assert main(["export-geojson", "--workspace", str(fresh), "--layer", "accessibility"]) == 3
    assert main(["gini", "--workspace", str(fresh)]) == 3
    assert main(["correlate", "--workspace", str(fresh)]) == 3


def test_full_pipeline(workspace):
    ws = str(workspace)
    assert main(["accessibility", "--workspace", ws]) == 0
    assert main(["gini", "--workspace", ws]) == 0
    assert main(["score", "--workspace", ws, "--method", "fast"]) == 0
    assert main(["score", "--workspace", ws, "--method", "exact"]) == 0
    assert main(["correlate", "--workspace", ws]) == 0
    m = json.loads((workspace / "manifest.json").read_text())
    h, n_hex = m["config_hash"], m["hexagons"]
    assert first_line(workspace / "accessibility.csv") == f"# config_hash={h}"
    assert (workspace / "accessibility.csv").read_text().splitlines()[1] == "hex_id,lat,lon,population,accessibility"
    assert (workspace / "scores_exact.csv").read_text().splitlines()[1] == "line_id,line_name,delta_g"
    assert (workspace / "scores_fast.csv").read_text().splitlines()[1] == "line_id,line_name,e_score"
    assert (workspace / "cumulative_importance.csv").read_text().splitlines()[1] == "rank,hex_id,line_id,I"
    fast = json.loads((workspace / "score_fast_meta.json").read_text())
    exact = json.loads((workspace / "score_exact_meta.json").read_text())
    assert fast["scans"] == n_hex
    assert exact["scans"] == (m["lines"] + 1) * n_hex
    assert fast["base_gini"] == pytest.approx(exact["base_gini"], abs=1e-15)
    corr = json.loads((workspace / "correlation.json").read_text())
    assert set(corr) == {"r", "p", "n", "config_hash"} and corr["n"] == 8
    gini = json.loads((workspace / "gini.json").read_text())["gini"]
    assert gini == pytest.approx(exact["base_gini"], abs=1e-12)


def test_exports(workspace):
    ws = str(workspace)
    assert main(["accessibility", "--workspace", ws]) == 0
    for layer in ("grid", "accessibility", "lorenz"):
        assert main(["export-geojson", "--workspace", ws, "--layer", layer]) == 0
    n_hex = json.loads((workspace / "manifest.json").read_text())["hexagons"]
    for name in ("grid.geojson", "accessibility.geojson"):
        gj = json.loads((workspace / name).read_text())
        assert gj["type"] == "FeatureCollection" and len(gj["features"]) == n_hex
        for f in gj["features"]:
            ring = f["geometry"]["coordinates"][0]
            assert ring[0] == ring[-1] and len(ring) == 7
            area2 = sum(x1 * y2 - x2 * y1 for (x1, y1), (x2, y2) in zip(ring, ring[1:]))
            assert area2 > 0  # right-hand rule: exterior ring counter-clockwise
    props = json.loads((workspace / "accessibility.geojson").read_text())["features"][0]["properties"]
    assert {"accessibility", "population"} <= set(props)
    lines = (workspace / "lorenz.csv").read_text().splitlines()
    assert lines[1] == "x,y" and lines[2] == "0.0,0.0" and lines[-1] == "1.0,1.0"


def test_correlate_identical_and_disjoint(workspace, tmp_path):
    ws = tmp_path / "ws"
    ws.mkdir()
    for f in ("manifest.json", "config.json", "grid.csv"):
        (ws / f).write_bytes((workspace / f).read_bytes())
    rows = "# config_hash=x\nline_id,line_name,{col}\nA,A,1.0\nB,B,2.0\nC,C,4.0\n"
    (ws / "scores_exact.csv").write_text(rows.format(col="delta_g"))
    (ws / "scores_fast.csv").write_text(rows.format(col="e_score"))
    assert main(["correlate", "--workspace", str(ws)]) == 0
    assert json.loads((ws / "correlation.json").read_text())["r"] == pytest.approx(1.0)
    (ws / "scores_fast.csv").write_text(rows.format(col="e_score").replace("A,A", "X,X").replace("B,B", "Y,Y"))
    assert main(["correlate", "--workspace", str(ws)]) == 3


def test_synth_invalid_spec(tmp_path):
    (tmp_path / "bad.json").write_text(json.dumps({"radial_lines": 0, "circulator_lines": 0,
                                                   "suburban_connector": False}))
    assert main(["synth", "--spec", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 2


def test_synth_writes_required_files(city_dir):
    gtfs = city_dir / "city" / "gtfs"
    for name in ("stops.txt", "routes.txt", "trips.txt", "stop_times.txt", "calendar.txt"):
        assert (gtfs / name).exists()
    assert (city_dir / "city" / "population.csv").read_text().startswith("lat,lon,population\n")
