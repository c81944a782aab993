import csv
import io
from fractions import Fraction

import pytest

from symintel import codec
from symintel.agents import make_agent
from symintel.cli import main, read_manifest
from symintel.machine import Machine, assemble, program_label, program_to_environment
from symintel.spaces import default_space
from symintel.valuation import value_exact

SP = default_space()


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    path = tmp_path_factory.mktemp("inv") / "m.csv"
    assert main(["enumerate", "--L", "12", "--out", str(path)]) == 0
    return path


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_manifest_header_and_rows(manifest):
    text = manifest.read_text()
    assert text.startswith("# symintel inventory manifest v1\n# L = 12\n")
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    table = rows(body)
    assert len(table) == 2**13 - 2
    accepted = [r for r in table if r["accepted"] == "1"]
    names = {(r["program_hex"], r["length_bits"]) for r in accepted}
    for r in accepted:
        bits = format(int(r["program_hex"], 16), f"0{len(r['program_hex']) * 4}b")[: int(r["length_bits"])]
        flipped = ("1" if bits[0] == "0" else "0") + bits[1:]
        assert tuple(program_label(flipped).split(":")) in names


def test_manifest_reloads(manifest, inventory):
    inv = read_manifest(manifest.read_text())
    assert inv.digest == inventory.digest


def test_enumerate_is_byte_identical(tmp_path, manifest):
    again = tmp_path / "again.csv"
    main(["enumerate", "--L", "12", "--out", str(again), "--workers", "2"])
    assert again.read_bytes() == manifest.read_bytes()


def test_enumerate_empty_at_one_bit(capsys):
    main(["enumerate", "--L", "1"])
    out = capsys.readouterr().out
    assert ",1,," not in out and out.count("\n0,1,0,") + out.count("\n8,1,0,") == 2


def test_enumerate_with_program_file(tmp_path, capsys):
    f = tmp_path / "progs.txt"
    f.write_text(f"# hand-written\n{program_label('0' + assemble('ACT EMIT'))}\n")
    main(["enumerate", "--L", "2", "--programs", str(f)])
    out = capsys.readouterr().out
    assert "32,7,1," in out


def test_upsilon_uniform_is_zero(manifest, capsys):
    assert main(["upsilon", "--inventory", str(manifest), "--agent", "uniform", "--agent", "greedy"]) == 0
    table = rows(capsys.readouterr().out)
    assert table[0]["value_num"] == "0"
    assert table[1]["value_num"] != "0"


def test_upsilon_sampled_needs_seed(manifest):
    with pytest.raises(SystemExit):
        main(["upsilon", "--inventory", str(manifest), "--agent", "greedy", "--sampled", "10"])


def test_upsilon_sampled_and_plot_data(manifest, tmp_path, capsys):
    plot = tmp_path / "plot.csv"
    main(["upsilon", "--inventory", str(manifest), "--agent", "uniform", "--sampled", "50", "--seed", "4",
          "--plot-data", str(plot)])
    assert rows(capsys.readouterr().out)[0]["mode"] == "sampled"
    assert plot.read_text().splitlines()[1] == "uniform,0"


def test_compare(manifest, capsys):
    main(["compare", "greedy", "dual:greedy", "--inventory", str(manifest)])
    assert capsys.readouterr().out.strip() == "pi-greater"


def test_value_matches_library(capsys):
    p = "0" + assemble("ACT EMIT")
    main(["value", "--agent", "greedy", "--n", "2", "--program", program_label(p)])
    row = rows(capsys.readouterr().out)[0]
    env = program_to_environment(Machine(SP), p, 2, 64)
    expected = value_exact(make_agent(SP, "greedy"), env, 2).value
    assert Fraction(int(row["value_num"]), int(row["value_den"])) == expected


def test_certify(capsys, tmp_path):
    assert main(["certify", "--program", program_label("0" + assemble("ACT EMIT"))]) == 0
    assert capsys.readouterr().out.strip() == "certified,H=2,budget=1"
    assert main(["certify", "--program", program_label("0" + assemble("INC EMIT"))]) == 1
    assert capsys.readouterr().out.startswith("rejected,budget-violation")
    f = tmp_path / "env.txt"
    f.write_text("# kind = environment\n<> -> o0,1/2:1\n")
    assert main(["certify", "--fixture", str(f), "--H", "0"]) == 1
    assert capsys.readouterr().out.startswith("refused,NotQuiescent")


def test_encode_decode_round_trip(capsys):
    main(["encode", "--history", "o0 1/2 a1"])
    hexed = capsys.readouterr().out.strip()
    assert bytes.fromhex(hexed) == codec.encode_history(SP, ("o0", Fraction(1, 2), "a1"))
    main(["encode", "--decode", hexed])
    assert capsys.readouterr().out.strip() == str(("o0", Fraction(1, 2), "a1"))
    main(["encode", "--measure", "o0,1/2:3/4 o1,0:1/4"])
    hexed = capsys.readouterr().out.strip()
    main(["encode", "--decode", hexed])
    assert capsys.readouterr().out.strip() == "{'o0,1/2': '3/4', 'o1,0': '1/4'}"


def test_run_program(capsys):
    x = codec.encode_history(SP, ("o0", Fraction(0), "a1")).hex()
    assert main(["run", "--program", program_label("1" + assemble("ACT EMIT")), "--input", x]) == 0
    status, steps, out = capsys.readouterr().out.strip().split(",")
    assert status == "halted" and steps == "3"
    assert codec.decode(SP, bytes.fromhex(out)) == {("o0", Fraction(1, 2)): 1}
    assert main(["run", "--program", program_label("0" + assemble("LOOP END")), "--steps", "5"]) == 1


def test_verify_small(manifest, tmp_path, capsys):
    report = tmp_path / "r.csv"
    code = main(["verify", "--inventory", str(manifest), "--fixtures", "3", "--max-n", "1", "--skip-codec",
                 "--report", str(report)])
    assert code == 0
    assert "FAIL" not in capsys.readouterr().out
    assert all(r["passed"] == "1" for r in rows(report.read_text()))


def test_verify_empty_agent_list_is_vacuous(manifest, capsys):
    assert main(["verify", "--inventory", str(manifest), "--agents", "", "--fixtures", "0", "--skip-codec"]) == 0


def test_verify_corrupted_fails(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    main(["enumerate", "--L", "12", "--corrupt", "--out", str(bad)])
    code = main(["verify", "--inventory", str(bad), "--agents", "greedy", "--fixtures", "0", "--skip-codec"])
    out = capsys.readouterr().out
    assert code == 1
    assert "FAIL  upsilon_symmetry" in out and "greedy: Y=" in out
