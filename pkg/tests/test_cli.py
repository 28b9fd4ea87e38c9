import csv
import io

import pytest

from adm_broadcast.cli import main
from adm_broadcast.model import DensityClass, KnowledgeBase, Priority
from adm_broadcast.scenarios import (
    PRESETS, bundled_kb_path, format_scenario, parse_scenario, preset_scenario, table_kb,
)


def test_presets_match_topology_table():
    got = {name: (p.node_count, p.spacing) for name, p in PRESETS.items()}
    assert got == {"urban": (400, 25.0), "suburban": (134, 75.0), "highway": (50, 200.0),
                   "rural": (10, 1000.0)}
    assert PRESETS["rural"].duty_cycle == 0.2
    assert all(p.duty_cycle == 1.0 for n, p in PRESETS.items() if n != "rural")


def test_bundled_kb_round_trips_bytes():
    raw = bundled_kb_path().read_text()
    kb = KnowledgeBase.parse(raw)
    assert kb.serialize() == raw
    assert kb.entries == table_kb().entries


def test_scenario_file_round_trip(tmp_path):
    sc = preset_scenario("highway", seed=4)
    assert parse_scenario(format_scenario(sc)) == sc
    text = "preset rural\nseed 9\nsource 3 ML 0.5\n"
    sc = parse_scenario(text)
    assert sc.node_count == 10 and sc.seed == 9 and sc.source_schedule[0].priority == Priority.ML


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_simulate_adm_rows_per_priority(capsys):
    code, out, _ = run_cli(capsys, "simulate", "--preset", "highway", "--sources", "6", "--seed", "1")
    assert code == 0
    assert [r["priority"] for r in rows(out)] == ["HL", "ML", "LL", "all"]


def test_simulate_urban_simple(capsys):
    code, out, _ = run_cli(capsys, "simulate", "--preset", "urban", "--behavior", "simple",
                           "--sources", "3")
    assert code == 0
    (row,) = rows(out)
    assert row["behavior"] == "simple" and row["sources"] == "3"


def test_missing_kb_entry_is_named(tmp_path, capsys):
    kb = table_kb()
    del kb.entries[DensityClass.Medium, Priority.LL]
    path = tmp_path / "kb.txt"
    kb.save(path)
    code, _, err = run_cli(capsys, "simulate", "--preset", "suburban", "--kb", str(path))
    assert code != 0 and "Medium LL" in err


def test_malformed_kb_and_unknown_preset(tmp_path, capsys):
    path = tmp_path / "kb.txt"
    path.write_text("High HL 0.5\n")
    code, _, err = run_cli(capsys, "simulate", "--preset", "suburban", "--kb", str(path))
    assert code != 0 and "line 1" in err
    code, _, err = run_cli(capsys, "sweep", "--presets", "downtown", "--replications", "1")
    assert code != 0 and "downtown" in err


def test_invalid_ga_config(tmp_path, capsys):
    cfg = tmp_path / "ga.txt"
    cfg.write_text("population 7\n")
    code, _, err = run_cli(capsys, "optimize", "--preset", "highway", "--ga-config", str(cfg),
                           "--out", str(tmp_path / "kb.txt"))
    assert code != 0 and "population" in err


def test_optimize_appends_low_rows(tmp_path, capsys):
    cfg = tmp_path / "ga.txt"
    cfg.write_text("population 4\ngenerations 1\nreplications 1\n")
    out = tmp_path / "kb.txt"
    partial = table_kb()
    for pr in Priority:
        del partial.entries[DensityClass.Low, pr]
    partial.save(out)
    code, _, _ = run_cli(capsys, "optimize", "--preset", "highway", "--ga-config", str(cfg),
                         "--out", str(out))
    assert code == 0
    kb = KnowledgeBase.load(out)
    assert kb.complete
    assert kb.entries[DensityClass.High, Priority.HL] == table_kb().entries[DensityClass.High, Priority.HL]
    assert (tmp_path / "front-highway.csv").read_text().startswith("p,nr,dr,ttl,nc,pt,r,fr\n")


def test_sweep_cell_equals_simulate(capsys):
    args = ["--seed", "3", "--replications", "2", "--sources", "4"]
    _, sweep, _ = run_cli(capsys, "sweep", "--presets", "highway", "--behaviors", "adm", *args)
    _, sim, _ = run_cli(capsys, "simulate", "--preset", "highway", "--behavior", "adm", *args)
    assert sweep == sim


def test_sweep_shape(capsys):
    _, out, _ = run_cli(capsys, "sweep", "--presets", "rural", "--sources", "1,3",
                        "--replications", "1")
    got = [(r["behavior"], r["sources"], r["priority"]) for r in rows(out)]
    # one source carries only an HL packet
    assert len(got) == (2 + 4) + 2 * 2
    assert got[0] == ("adm", "1", "HL")


def test_same_seed_same_bytes(tmp_path, capsys):
    for k in (1, 2):
        assert main(["simulate", "--preset", "highway", "--sources", "5", "--seed", "11",
                     "--replications", "2", "--trace", "--out", str(tmp_path / f"r{k}")]) == 0
    names = sorted(p.name for p in (tmp_path / "r1").iterdir())
    assert names == ["aggregate.csv", "packets_rep0.csv", "packets_rep1.csv",
                     "trace_rep0.csv", "trace_rep1.csv"]
    for n in names:
        assert (tmp_path / "r1" / n).read_bytes() == (tmp_path / "r2" / n).read_bytes()


def test_parallel_matches_serial(capsys, monkeypatch):
    args = ["simulate", "--preset", "highway", "--sources", "3", "--replications", "3"]
    _, serial, _ = run_cli(capsys, *args)
    monkeypatch.setenv("ADM_THREADS", "2")
    _, parallel, _ = run_cli(capsys, *args)
    assert serial == parallel
