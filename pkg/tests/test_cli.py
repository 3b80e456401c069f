import pytest

from gp2 import corpus
from gp2.cli import CliInvocation, UsageError, main, parse_args


def test_parse_validate_modes():
    assert parse_args(["-p", "prog.gp2"]).subcommand == "validate-program"
    assert parse_args(["-r", "rule.gp2"]).subcommand == "validate-rule"
    assert parse_args(["-h", "graph.host"]).subcommand == "validate-graph"


def test_parse_run_flags():
    inv = parse_args(["-n", "-m", "prog", "host"])
    assert inv.subcommand == "run"
    assert inv.config.backend == "index_scan"
    assert inv.config.root_mode == "reflect"
    assert inv.paths == ["prog", "host"]

    inv = parse_args(["-f", "-g", "-q", "prog", "host"])
    assert inv.config.fast_shutdown and inv.config.minimal_gc
    assert not inv.config.optimize_plans


def test_minimal_gc_requires_fast_shutdown():
    with pytest.raises(UsageError):
        parse_args(["-g", "prog", "host"])


def test_unknown_flag_and_arity_errors():
    with pytest.raises(UsageError):
        parse_args(["-z", "prog", "host"])
    with pytest.raises(UsageError):
        parse_args(["prog"])
    with pytest.raises(UsageError):
        parse_args([])
    with pytest.raises(UsageError):
        parse_args(["-p"])


def test_bench_subcommand_parse():
    inv = parse_args(["bench", "cfg.txt"])
    assert inv.subcommand == "bench" and inv.paths == ["cfg.txt"]
    inv = parse_args(["bench", "cfg.txt", "-o", "out.csv"])
    assert inv.out_dir == "out.csv"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_exit_code_zero_on_success(tmp_path, capsys):
    prog = _write(tmp_path, "p.gp2", corpus.load_program("is_discrete"))
    host = _write(tmp_path, "h.host", "[ (0, empty) | ]")
    assert main([prog, host]) == 0
    assert capsys.readouterr().out.strip() == "[ | ]"


def test_exit_code_one_on_invalid_program(tmp_path, capsys):
    prog = _write(tmp_path, "p.gp2", "Main = ")
    host = _write(tmp_path, "h.host", "[ | ]")
    assert main([prog, host]) == 1
    assert "syntax" in capsys.readouterr().err


def test_exit_code_two_on_failing_program(tmp_path, capsys):
    prog = _write(tmp_path, "p.gp2", corpus.load_program("is_discrete"))
    host = _write(tmp_path, "h.host", "[ (0, empty) (1, empty) | (0, 0, 1, empty) ]")
    assert main([prog, host]) == 2
    assert capsys.readouterr().err


def test_exit_code_two_on_bad_host_graph(tmp_path, capsys):
    prog = _write(tmp_path, "p.gp2", "Main = skip")
    host = _write(tmp_path, "h.host", "[ (0, empty) (0, empty) | ]")
    assert main([prog, host]) == 2
    capsys.readouterr()


def test_validate_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, "good.gp2", corpus.load_program("is_tree"))
    assert main(["-p", good]) == 0
    bad = _write(tmp_path, "bad.gp2", "Main = nothere")
    assert main(["-p", bad]) == 1
    graph = _write(tmp_path, "g.host", "[ (0, empty) | ]")
    assert main(["-h", graph]) == 0
    badgraph = _write(tmp_path, "b.host", "[ (0, empty) | (0, 0, 9, empty) ]")
    assert main(["-h", badgraph]) == 1
    rule = _write(tmp_path, "r.gp2", "r(x:list)\n[ (1, x) | ] => [ | ]")
    assert main(["-r", rule]) == 0
    capsys.readouterr()


def test_missing_file_is_usage_error(tmp_path, capsys):
    assert main(["-p", str(tmp_path / "absent.gp2")]) == 1
    capsys.readouterr()


def test_output_dir(tmp_path, capsys):
    prog = _write(tmp_path, "p.gp2", "Main = skip")
    host = _write(tmp_path, "h.host", "[ (0, 5) | ]")
    outdir = tmp_path / "out"
    assert main(["-o", str(outdir), prog, host]) == 0
    assert (outdir / "out.host").read_text().strip() == "[ (0, 5) | ]"
    capsys.readouterr()


def test_bench_cli_end_to_end(tmp_path, capsys, monkeypatch):
    cfg = _write(tmp_path, "bench.txt",
                 "program = is_discrete\n"
                 "specs = discrete:40 discrete:80\n"
                 "backends = chain\n"
                 "reps = 4\n")
    monkeypatch.setenv("GP2_BENCH_REPS", "2")
    assert main(["bench", cfg]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0].startswith("program,kind,params")
    assert len(lines) == 3
    assert ",2," in lines[1]       # env var overrode reps

    out_file = tmp_path / "r.csv"
    monkeypatch.delenv("GP2_BENCH_REPS")
    assert main(["bench", cfg, "-o", str(out_file)]) == 0
    assert out_file.read_text().splitlines()[1].count(";") == 3  # 4 reps recorded


def test_bench_cli_bad_config(tmp_path, capsys):
    cfg = _write(tmp_path, "bench.txt", "program = is_discrete\n")
    assert main(["bench", cfg]) == 1
    assert "configuration" in capsys.readouterr().err


def test_help(capsys):
    assert main(["--help"]) == 0
    assert "gp2" in capsys.readouterr().out
