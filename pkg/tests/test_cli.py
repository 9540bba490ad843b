import csv
import io
import json
import subprocess
import sys

import pytest

from coherent_link.cli import CSV_HEADER, main
from coherent_link.nonideal import NoiseConfig, rate_point
from coherent_link.protocols import cow_dr_rate


def run(args):
    buf = io.StringIO()
    code = main(args, out=buf)
    return code, buf.getvalue()


def run_json(args):
    code, text = run(args)
    return code, json.loads(text) if text else None


def test_rate_lossless():
    code, doc = run_json(["rate", "--protocol", "ctw", "--eta", "1", "--alpha", "2"])
    assert code == 0
    assert doc["rate"] == pytest.approx(0.99966, abs=1e-5)
    assert doc["bound_direct"] == "inf"


def test_rate_zero_alpha():
    code, doc = run_json(["rate", "--protocol", "cow-usd", "--eta", "0.5", "--alpha", "0"])
    assert code == 0 and doc["rate"] == 0.0


def test_rate_round_trips_library_value():
    code, doc = run_json(["rate", "--protocol", "cow-dr", "--eta", "0.7", "--alpha", "0.9"])
    assert doc["rate"] == cow_dr_rate(0.9, 0.7).rate


def test_rate_with_loss_db_and_noise():
    code, doc = run_json(
        ["rate", "--protocol", "ctw", "--loss-db", "3", "--alpha", "0.6", "--epsilon", "0.1", "--dark", "0.01"]
    )
    assert code == 0
    assert doc["rate"] == rate_point("ctw", 0.6, 10**-0.3, NoiseConfig(0.1, 0.01)).rate


def test_rate_optimize():
    code, doc = run_json(["rate", "--protocol", "ctw", "--eta", "1", "--optimize-alpha"])
    assert code == 0 and "boundary" in doc["flags"]


def test_json_keys_sorted():
    _, text = run(["rate", "--protocol", "ctw", "--eta", "0.5", "--alpha", "0.5"])
    keys = list(json.loads(text))
    assert keys == sorted(keys)


@pytest.mark.parametrize(
    "args",
    [
        ["rate", "--protocol", "ctw", "--eta", "0.5"],
        ["rate", "--protocol", "ctw", "--alpha", "0.5"],
        ["rate", "--protocol", "nope", "--eta", "0.5", "--alpha", "1"],
        ["rate", "--protocol", "ctw", "--eta", "1.5", "--alpha", "1"],
        ["rate", "--protocol", "cow-dr", "--eta", "0.5", "--alpha", "1", "--dark", "0.01"],
        ["rate", "--protocol", "ctw", "--eta", "0.5", "--alpha", "1", "--epsilon", "0.7"],
        ["ghz", "--n", "1", "--per-link-success", "0.5"],
        ["ghz", "--n", "4"],
        ["oracle-check", "--protocol", "ctw", "--eta", "0.5", "--alpha", "0.5", "--cutoff", "ten"],
    ],
)
def test_validation_errors_exit_1(args, capsys):
    code, _ = run(args)
    assert code == 1
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize(
    "args", [["rate", "--bogus"], ["frobnicate"], [], ["rate", "--eta", "0.5", "--loss-db", "3"]]
)
def test_parser_errors_exit_1(args):
    with pytest.raises(SystemExit) as exc:
        main(args)
    assert exc.value.code == 1


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_sweep_file(tmp_path):
    out = tmp_path / "s.csv"
    code, _ = run(["sweep", "--points", "2", "--loss-db-min", "0.5", "--loss-db-max", "5", "--out", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 2 * 3
    raw = out.read_bytes()
    assert b"\r" not in raw
    meta = json.loads((tmp_path / "s.csv.meta.json").read_text())
    assert meta["points"] == 2 and "created" in meta


def test_sweep_byte_identical(tmp_path):
    args = ["sweep", "--points", "3", "--protocol", "ctw,cow-usd", "--dark", "0.001"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(args + ["--out", str(a)])
    run(args + ["--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_sweep_rows_round_trip(tmp_path):
    out = tmp_path / "s.csv"
    run(["sweep", "--points", "5", "--protocol", "ctw", "--protocol", "cow-usd", "--visibility", "0.95", "--out", str(out)])
    noise = NoiseConfig(visibility=0.95)
    header, *rows = read_csv(out)
    for row in rows:
        rec = dict(zip(header, row))
        r = rate_point(rec["protocol"], float(rec["alpha"]), float(rec["eta"]), noise)
        assert r.rate == pytest.approx(float(rec["rate"]), abs=1e-9)


def test_sweep_low_loss_above_cap(tmp_path):
    out = tmp_path / "s.csv"
    run(["sweep", "--points", "2", "--loss-db-min", "0.01", "--loss-db-max", "3", "--out", str(out)])
    header, *rows = read_csv(out)
    low = [dict(zip(header, r)) for r in rows if float(r[1]) == 0.01]
    assert len(low) == 3
    assert all(float(r["rate"]) > 0.5 for r in low)


def test_sweep_numbers_have_12_digits():
    code, text = run(["sweep", "--points", "2", "--protocol", "ctw", "--alpha", "0.123456789012345"])
    row = text.splitlines()[1].split(",")
    assert row[3] == "0.123456789012"


def test_sweep_unwritable(capsys):
    code, _ = run(["sweep", "--points", "2", "--out", "/nonexistent-dir/x.csv"])
    assert code == 1


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('protocol = ["ctw"]\npoints = 3\nloss_db_max = 10.0\n')
    code, text = run(["sweep", "--config", str(cfg), "--points", "4"])
    assert code == 0
    lines = text.splitlines()
    assert len(lines) == 5
    assert lines[-1].startswith("ctw,10,")


@pytest.mark.parametrize("body", ["bogus = 1\n", "points = 'many'\n", "n = 4\n", "points = [\n"])
def test_config_fails_closed(tmp_path, body):
    cfg = tmp_path / "c.toml"
    cfg.write_text(body)
    code, _ = run(["sweep", "--config", str(cfg)])
    assert code == 1


def test_oracle_check_passes():
    code, doc = run_json(["oracle-check", "--protocol", "ctw", "--alpha", "0.6", "--eta", "0.5", "--tolerance", "1e-8"])
    assert code == 0 and doc["pass"]
    names = {e["quantity"] for e in doc["entries"]}
    assert {"success", "dephasing_T", "hashing", "p_cat_norm_form[d1_even]"} <= names


def test_oracle_check_cow_dr():
    code, doc = run_json(["oracle-check", "--protocol", "cow-dr", "--alpha", "0.9", "--eta", "0.7", "--tolerance", "1e-6"])
    assert code == 0 and doc["max_abs_dev"] < 1e-9
    assert any("twirl" in n for n in doc["notes"])


@pytest.mark.parametrize("protocol", ["ctw", "cow-usd", "cow-dr"])
def test_oracle_check_zero_alpha(protocol):
    code, doc = run_json(["oracle-check", "--protocol", protocol, "--alpha", "0", "--eta", "0.5"])
    assert code == 0 and doc["pass"]


def test_oracle_check_with_noise():
    code, doc = run_json(["oracle-check", "--protocol", "cow-usd", "--alpha", "0.7", "--eta", "0.6", "--dark", "0.01"])
    assert code == 0
    code, doc = run_json(["oracle-check", "--protocol", "ctw", "--alpha", "0.7", "--eta", "0.6", "--visibility", "0.9"])
    assert code == 0


def test_oracle_check_fails_at_zero_tolerance():
    code, doc = run_json(["oracle-check", "--protocol", "ctw", "--alpha", "0.9", "--eta", "0.3", "--tolerance", "1e-30"])
    assert code == 2 and not doc["pass"]


def test_oracle_check_truncation(capsys):
    code, _ = run(["oracle-check", "--protocol", "ctw", "--alpha", "2", "--eta", "0.5", "--cutoff", "5"])
    assert code == 2
    assert "required cutoff" in capsys.readouterr().err


def test_ghz_given_probability():
    code, doc = run_json(["ghz", "--n", "5", "--per-link-success", "0.9", "--policy", "retry-link"])
    assert doc["expected_rounds"]["retry-link"] == pytest.approx(4.444444, abs=1e-6)
    code, doc = run_json(["ghz", "--n", "2", "--per-link-success", "1"])
    assert doc["expected_rounds"] == {"retry-link": 1.0, "restart-chain": 1.0}


def test_ghz_from_eta():
    code, doc = run_json(["ghz", "--n", "8", "--eta", "0.99"])
    assert code == 0
    assert doc["ratio"] > 10
    assert doc["baseline"]["expected_rounds"] == 254.0


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "coherent_link", "rate", "--protocol", "ctw", "--eta", "0.5", "--alpha", "0.5"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["protocol"] == "ctw"
