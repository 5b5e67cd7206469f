import json
import subprocess
import sys

import pytest

from filterscale import FitResult, PoolFit
from filterscale.cli import main
from filterscale.io import (
    InputError,
    ManifestEntry,
    fmt,
    parse_budget,
    parse_budgets,
    parse_floats,
    read_fit_result,
    read_manifest,
    read_observation_log,
    write_fit_result,
    write_manifest,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def manifest(tmp_path):
    path = tmp_path / "pools.json"
    write_manifest(path, [ManifestEntry("top", 12.8e6, 1, "best 10%"),
                          ManifestEntry("low", 12.8e6, 2)])
    return path


# --- formatting and parsing -------------------------------------------------


@pytest.mark.parametrize("value, text", [
    (128e6, "128000000"), (0.30680366608246222, "0.306803666"), (1e-12, "1e-12"), (3, "3"),
])
def test_fmt(value, text):
    assert fmt(value) == text


@pytest.mark.parametrize("text, value", [
    ("128M", 128e6), ("12.8M", 12.8e6), ("3.4B", 3.4e9), ("3.4G", 3.4e9), ("500k", 5e5),
    ("1T", 1e12), ("42", 42.0), ("1e6", 1e6),
])
def test_parse_budget(text, value):
    assert parse_budget(text) == pytest.approx(value)


@pytest.mark.parametrize("bad", ["", "M", "12X", "-5M", "0"])
def test_parse_budget_rejects(bad):
    with pytest.raises(InputError):
        parse_budget(bad)


def test_parse_budgets():
    assert parse_budgets("32M,64M,128M,640M") == [32e6, 64e6, 128e6, 640e6]
    g = parse_budgets("geom:32M:640M:25")
    assert len(g) == 25 and g[0] == 32e6 and g[-1] == 640e6
    for bad in ("64M,32M", "geom:1:2", "geom:5:1:3", ""):
        with pytest.raises(InputError):
            parse_budgets(bad)


def test_parse_floats():
    assert parse_floats("0:2:0.25") == [0, 0.25, 0.5, 0.75, 1, 1.25, 1.5, 1.75, 2]
    assert parse_floats("0.01,0.2") == [0.01, 0.2]
    with pytest.raises(InputError):
        parse_floats("a,b")


# --- observation logs -------------------------------------------------------


def test_read_observation_log(tmp_path):
    p = write(tmp_path / "o.csv", "pool_id,samples_seen,error\na,1,0.5\na,2,0.4\nb,1,0.6\n")
    assert read_observation_log(p) == {"a": [(1.0, 0.5), (2.0, 0.4)], "b": [(1.0, 0.6)]}


def test_accuracy_is_converted(tmp_path):
    p = write(tmp_path / "o.csv", "pool_id,samples_seen,accuracy\na,1,0.25\n")
    assert read_observation_log(p, accuracy=True) == {"a": [(1.0, 0.75)]}
    with pytest.raises(InputError, match="accuracy"):
        read_observation_log(p)


@pytest.mark.parametrize("body, where", [
    ("pool,samples_seen,error\n", ":1:"),
    ("pool_id,samples_seen,error\na,1,1.2\n", ":2:"),
    ("pool_id,samples_seen,error\na,1,0.5\na,x,0.4\n", ":3:"),
    ("pool_id,samples_seen,error\na,2,0.5\na,1,0.4\n", ":3:"),
    ("pool_id,samples_seen,error\na,1,0.5\na,1,0.5\n", ":3:"),
    ("pool_id,samples_seen,error\na,1,0.5,9\n", ":2:"),
    ("pool_id,samples_seen,error\na,-1,0.5\n", ":2:"),
])
def test_observation_log_diagnostics(tmp_path, body, where):
    p = write(tmp_path / "bad.csv", body)
    with pytest.raises(InputError, match=where):
        read_observation_log(p)


def test_empty_log(tmp_path):
    with pytest.raises(InputError):
        read_observation_log(write(tmp_path / "e.csv", ""))
    with pytest.raises(InputError):
        read_observation_log(write(tmp_path / "h.csv", "pool_id,samples_seen,error\n"))


# --- manifests and fit results ----------------------------------------------


def test_manifest_round_trip(manifest):
    entries = read_manifest(manifest)
    assert [e.pool_id for e in entries] == ["top", "low"]
    assert entries[0].description == "best 10%"


@pytest.mark.parametrize("raw", [
    [],
    [{"pool_id": "a", "size": 1}],
    [{"pool_id": "a", "size": 1, "quality_rank": 2}],
    [{"pool_id": "a", "size": 1, "quality_rank": 1}, {"pool_id": "a", "size": 1, "quality_rank": 2}],
    [{"pool_id": "a", "size": -1, "quality_rank": 1}],
    {"nope": 1},
])
def test_manifest_validation(tmp_path, raw):
    with pytest.raises(InputError):
        read_manifest(write(tmp_path / "m.json", json.dumps(raw)))


def test_manifest_accepts_object_form(tmp_path):
    raw = {"pools": [{"pool_id": "b", "size": 5, "quality_rank": 2},
                     {"pool_id": "a", "size": 5, "quality_rank": 1}]}
    assert [e.pool_id for e in read_manifest(write(tmp_path / "m.json", json.dumps(raw)))] == \
        ["a", "b"]


def test_fit_result_round_trip(tmp_path):
    fit = FitResult(0.1 + 0.2, {"x": PoolFit(-0.1234567890123, 3.0, 0.05, 1e-17),
                                "y": PoolFit(-0.2, 7.0, 0.1, 0.0)},
                    1e-17, "a=lin:0.001:1.0:100;b=geom:0.005:0.5:100;tau=int:1:50;d=0.05")
    path = tmp_path / "fit.json"
    write_fit_result(path, fit)
    assert read_fit_result(path) == fit


def test_bad_fit_result(tmp_path):
    with pytest.raises(InputError):
        read_fit_result(write(tmp_path / "f.json", '{"a": 1}'))
    with pytest.raises(InputError, match=":1:"):
        read_fit_result(write(tmp_path / "g.json", "{"))


# --- command line -----------------------------------------------------------


# grid values of the default search space
B_TOP, B_LOW = "-0.17969068319023135", "-0.0981520325020135"


def simulate(tmp_path, out="obs.csv", pool="top", b=B_TOP, tau="3", noise="0", extra=()):
    return main(["simulate", "--a", "0.4954545454545455", "--b", b, "--tau", tau,
                 "--d", "0.05", "--pool-size", "12.8M", "--pool-id", pool, "--unit", "1M",
                 "--budgets", "6.4M,12.8M,32M,64M,128M,640M", "--noise", noise,
                 "--out", str(tmp_path / out), *extra])


def test_simulate_is_byte_stable(tmp_path):
    assert simulate(tmp_path, "a.csv", noise="0.01", extra=("--seed", "5")) == 0
    assert simulate(tmp_path, "b.csv", noise="0.01", extra=("--seed", "5")) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    text = (tmp_path / "a.csv").read_text()
    assert text.startswith("pool_id,samples_seen,error\ntop,6400000,")
    assert "\r" not in text


def test_invalid_params_exit_2_without_output(tmp_path, capsys):
    assert simulate(tmp_path, "bad.csv", b="0.3") == 2
    assert not (tmp_path / "bad.csv").exists()
    assert "error" in capsys.readouterr().err


def test_fit_extrapolate_mix_recommend(tmp_path, manifest, capsys):
    assert simulate(tmp_path, "top.csv", "top", B_TOP, "3") == 0
    assert simulate(tmp_path, "low.csv", "low", B_LOW, "7") == 0
    lines = (tmp_path / "top.csv").read_text().splitlines()
    lines += (tmp_path / "low.csv").read_text().splitlines()[1:]
    header, rows = lines[0], sorted(lines[1:], key=lambda r: (r.split(",")[0],
                                                              float(r.split(",")[1])))
    log = write(tmp_path / "all.csv", "\n".join([header, *rows]) + "\n")

    fit = tmp_path / "fit.json"
    assert main(["fit", str(log), "--manifest", str(manifest), "--out", str(fit),
                 "--unit", "1M", "--jobs", "2"]) == 0
    result = read_fit_result(fit)
    # logs carry nine significant digits
    assert result.total_l2_loss < 1e-16
    assert result.a == 0.4954545454545455
    assert result.per_pool["top"] == PoolFit(float(B_TOP), 3.0, 0.05, result.per_pool["top"].l2_loss)
    assert result.per_pool["low"].tau == 7.0

    pred = tmp_path / "pred.csv"
    assert main(["extrapolate", str(fit), "--pool-id", "low", "--pool-size", "12.8M",
                 "--budgets", "1B", "--unit", "1M", "--out", str(pred)]) == 0
    assert pred.read_text().splitlines()[0] == "samples_seen,predicted_error"
    assert main(["extrapolate", str(fit), "--pool-id", "low", "--budgets", "1B",
                 "--out", str(tmp_path / "x.csv")]) == 2

    for form in ("utility", "effective-data"):
        out = tmp_path / f"mix_{form}.csv"
        assert main(["mix", str(fit), "--manifest", str(manifest), "--pools", "top,low",
                     "--budgets", "32M,640M", "--unit", "1M", "--formulation", form,
                     "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 3

    capsys.readouterr()
    report = tmp_path / "rec.json"
    assert main(["recommend", str(fit), "--manifest", str(manifest), "--unit", "1M",
                 "--budgets", "32M,64M,128M,640M", "--out", str(report)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert sum(":" in line and "crossover" not in line for line in printed) == 4
    data = json.loads(report.read_text())
    assert data["strategies"] == ["top", "top+low"]
    assert data["budgets"] == [32000000, 64000000, 128000000, 640000000]
    assert (tmp_path / "rec.series.csv").exists()


def test_recommend_single_bucket(tmp_path, capsys):
    man = tmp_path / "one.json"
    write_manifest(man, [ManifestEntry("only", 12.8e6, 1)])
    fit = tmp_path / "fit.json"
    write_fit_result(fit, FitResult(0.5, {"only": PoolFit(-0.18, 3.0, 0.05, 0.0)}, 0.0, "v"))
    assert main(["recommend", str(fit), "--manifest", str(man), "--unit", "1M",
                 "--out", str(tmp_path / "r.json")]) == 0
    assert "no crossovers" in capsys.readouterr().out


def test_sweep_k_cli(tmp_path, manifest, capsys):
    fit = tmp_path / "fit.json"
    write_fit_result(fit, FitResult(0.5, {"top": PoolFit(-0.18, 2.0, 0.05, 0.0),
                                          "low": PoolFit(-0.12, 4.0, 0.05, 0.0)}, 0.0, "v"))
    for k, expected in (("1", "argmin k = 1 "), ("0", "argmin k = 0 ")):
        merged = tmp_path / f"merged{k}.csv"
        assert main(["simulate", "--fit", str(fit), "--manifest", str(manifest), "--mix",
                     "top,low", "--tau-exponent", k, "--unit", "1M",
                     "--budgets", "12.8M,25.6M,51.2M,102.4M,204.8M,409.6M,640M",
                     "--out", str(merged)]) == 0
        capsys.readouterr()
        assert main(["sweep-k", str(merged), "--fit", str(fit), "--manifest", str(manifest),
                     "--unit", "1M", "--out", str(tmp_path / f"k{k}.csv")]) == 0
        assert expected in capsys.readouterr().out


def test_sweep_k_single_pool_warns(tmp_path, manifest, capsys):
    fit = tmp_path / "fit.json"
    write_fit_result(fit, FitResult(0.5, {"top": PoolFit(-0.18, 2.0, 0.05, 0.0)}, 0.0, "v"))
    merged = tmp_path / "m.csv"
    assert main(["simulate", "--fit", str(fit), "--manifest", str(manifest), "--unit", "1M",
                 "--budgets", "12.8M,64M", "--out", str(merged)]) == 0
    assert main(["sweep-k", str(merged), "--fit", str(fit), "--manifest", str(manifest),
                 "--unit", "1M", "--out", str(tmp_path / "k.csv")]) == 0
    assert "warning" in capsys.readouterr().err
    losses = {r.split(",")[1] for r in (tmp_path / "k.csv").read_text().splitlines()[1:]}
    assert len(losses) == 1


def test_missing_manifest_pool_is_input_error(tmp_path, manifest):
    log = write(tmp_path / "o.csv", "pool_id,samples_seen,error\nzzz,1000000,0.5\n")
    assert main(["fit", str(log), "--manifest", str(manifest), "--out",
                 str(tmp_path / "f.json")]) == 2
    assert not (tmp_path / "f.json").exists()


def test_empty_grid_is_exit_3(tmp_path, manifest):
    log = write(tmp_path / "o.csv", "pool_id,samples_seen,error\ntop,1000000,0.5\n")
    assert main(["fit", str(log), "--manifest", str(manifest), "--out",
                 str(tmp_path / "f.json"), "--tau-min", "5", "--tau-max", "4"]) == 3


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "filterscale", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.startswith("filterscale ")
    bad = subprocess.run([sys.executable, "-m", "filterscale", "nosuch"],
                         capture_output=True, text=True)
    assert bad.returncode == 2
