import subprocess
import sys

import pytest

from helpers import DATA, FOAF, LANL, PERSON_SRC
from rdfvm import __version__
from rdfvm.cli import main
from rdfvm.nquads import load_store
from rdfvm.terms import Uri


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def person_world(tmp_path, capsys):
    src = tmp_path / "Person.neno"
    src.write_text(PERSON_SRC)
    api, store = tmp_path / "api.nq", tmp_path / "store.nq"
    assert cli(capsys, "compile", src, "-o", api)[0] == 0
    for who in ("marko", "josh"):
        code, out, _ = cli(capsys, "instantiate", "--api", api, "--class", f"<{LANL}Person>", "--store", store, "--object", f"{LANL}{who}")
        assert code == 0 and out.strip() == f"{LANL}{who}"
    return tmp_path, api, store


def test_compile_reports_summary(tmp_path, capsys):
    src = tmp_path / "p.neno"
    src.write_text(PERSON_SRC)
    code, out, err = cli(capsys, "compile", src, "-o", tmp_path / "api.nq")
    assert code == 0 and out == ""
    assert "1 class(es), 4 method template(s)" in err
    assert len(load_store(tmp_path / "api.nq")) > 0


def test_compile_error_points_at_source(tmp_path, capsys):
    src = tmp_path / "bad.neno"
    src.write_text("prefix x: <http://x/>;\nx:A x:B { oops }")
    code, out, err = cli(capsys, "compile", src, "-o", tmp_path / "api.nq")
    assert code == 1 and "bad.neno" in err
    assert not (tmp_path / "api.nq").exists()


def test_invoke_run_pipeline(person_world, capsys):
    tmp, _, store = person_world
    code, out, _ = cli(capsys, "invoke", "--store", store, "--object", f"{LANL}marko", "--method", "makeFriend", "--arg", f"<{LANL}josh>", "--rvm", "http://example.org/m1")
    assert code == 0 and out.strip() == "http://example.org/m1"
    code, out, _ = cli(capsys, "run", "--store", store)
    assert code == 0 and out == "Terminal\n"
    code, out, _ = cli(capsys, "query", "--store", store, "--prefix", f"lanl={LANL}", "--prefix", f"foaf={FOAF}", "SELECT ?x WHERE { <lanl:marko> <foaf:knows> ?x }")
    assert code == 0 and out == f"<{LANL}josh>\n"
    code, out, _ = cli(capsys, "query", "--store", store, "--prefix", f"lanl={LANL}", "--prefix", f"foaf={FOAF}", "ASK { <lanl:josh> <foaf:knows> ?x }")
    assert out == "false\n"
    code, out, err = cli(capsys, "run", "--store", store)
    assert code == 1 and "no runnable RVM" in err


def test_run_value_and_suspension(person_world, capsys):
    tmp, _, store = person_world
    cli(capsys, "invoke", "--store", store, "--object", f"{LANL}marko", "--method", "isFriend", "--arg", f"<{LANL}josh>", "--rvm", "http://example.org/q")
    code, out, _ = cli(capsys, "run", "--store", store, "--rvm", "http://example.org/q", "--max-cycles", "2")
    assert code == 0 and out == "Suspended\thttp://example.org/q\n"
    code, out, _ = cli(capsys, "run", "--store", store, "--mode", "fhat")
    assert code == 0
    assert out == 'Terminal\t"false"^^<http://www.w3.org/2001/XMLSchema#boolean>\n'


def test_faulted_run_exits_2(tmp_path, capsys):
    src = tmp_path / "c.neno"
    src.write_text("prefix ex: <http://example.org/>;\nrdfs:Resource ex:C {\n  xsd:int f() { return 1 / 0; }\n}\n")
    api, store = tmp_path / "api.nq", tmp_path / "s.nq"
    cli(capsys, "compile", src, "-o", api)
    cli(capsys, "instantiate", "--api", api, "--class", "http://example.org/C", "--store", store, "--object", "http://example.org/c")
    cli(capsys, "invoke", "--store", store, "--object", "http://example.org/c", "--method", "f")
    code, out, _ = cli(capsys, "run", "--store", store)
    assert code == 2 and out.startswith("Faulted\tTypeFault")


def test_dump_is_stable(person_world, capsys):
    _, _, store = person_world
    first = cli(capsys, "dump", "--store", store)[1]
    second = cli(capsys, "dump", "--store", store)[1]
    assert first == second and first.endswith(" .\n")
    marko = cli(capsys, "dump", "--store", store, "--graph", f"{LANL}marko")[1]
    assert marko and all(line.endswith(f"<{LANL}marko> .") for line in marko.splitlines())


def test_instantiate_minted_object(person_world, capsys):
    _, api, store = person_world
    code, out, _ = cli(capsys, "instantiate", "--api", api, "--class", f"{LANL}Person", "--store", store)
    assert code == 0 and out.startswith("urn:uuid:")
    assert load_store(store).count(Uri(out.strip())) > 0


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["dump"],
        ["dump", "--store", "/nonexistent/store.nq"],
        ["run", "--store", "/nonexistent/store.nq"],
        ["query", "--store", "/nonexistent/store.nq", "ASK { ?s ?p ?o }"],
        ["compile", "/nonexistent.neno", "-o", "/tmp/x.nq"],
        ["farm", "--config", "/nonexistent.conf"],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1


def test_usage_errors_on_bad_input(person_world, capsys):
    _, api, store = person_world
    assert cli(capsys, "instantiate", "--api", api, "--class", f"{LANL}Robot", "--store", store)[0] == 1
    assert cli(capsys, "invoke", "--store", store, "--object", f"{LANL}marko", "--method", "fly")[0] == 1
    assert cli(capsys, "invoke", "--store", store, "--object", f"{LANL}marko", "--method", "makeFriend", "--arg", "<<bad")[0] == 1
    assert cli(capsys, "query", "--store", store, "SELECT ?x WHERE {")[0] == 1
    assert cli(capsys, "query", "--store", store, "--prefix", "nope", "ASK { ?s ?p ?o }")[0] == 1
    assert cli(capsys, "migrate", "--store", store, "--graph", "http://example.org/none", "--to", "127.0.0.1:1")[0] == 1


def test_migrate_to_dead_peer_exits_2(person_world, capsys):
    _, _, store = person_world
    before = store.read_text()
    code, _, err = cli(capsys, "migrate", "--store", store, "--graph", f"{LANL}marko", "--to", "127.0.0.1:1", "--timeout", "1")
    assert code == 2 and err
    assert store.read_text() == before


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "rdfvm", "--version"], capture_output=True, text=True, timeout=60)
    assert out.returncode == 0 and out.stdout.strip() == f"rdfvm {__version__}"


def test_bundled_person_source_matches_fixture():
    from importlib import resources

    assert resources.files("rdfvm").joinpath("data/Person.neno").read_text() == (DATA / "Person.neno").read_text()
