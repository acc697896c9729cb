import io
import json

import pytest

from efk.cli import run
from efk.filterlab import TailClass
from efk.structures import ProblemSpec, Vocabulary, VocabularyChain, linear_order
from efk.textio import format_problem

CHAIN = VocabularyChain.constant(Vocabulary.of("</2"))


def efk(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    L2, L3 = linear_order(2), linear_order(3)
    paths = {}

    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        paths[name] = p

    write("identical.txt", format_problem(ProblemSpec(CHAIN, [(L3, L3)] * 4, kseq_tail=TailClass.affine(1, 0))))
    write("identical8.txt", format_problem(ProblemSpec(CHAIN, [(L3, L3)] * 8, kseq_tail=TailClass.affine(1, 0))))
    write("chains.txt", format_problem(ProblemSpec(CHAIN, [(L2, L2), (L2, L2), (L3, L2)], kseq_tail=TailClass.bounded(1))))
    write("k.txt", "prefix: 0 1 2 3\ntail: affine(1,0)\n")
    write("kb.txt", "prefix: 0 1 2 3\ntail: bounded(3)\n")
    write("fam.txt", "#family N=2 V=2\n0 0\n0 1\n1 0\n1 1\n#g 1 1\n")
    write("e1.txt", "0 0 0 0 0 0 0 0\n2 2 2 2 2 2 2 2\n")
    write("e2.txt", "1 1 1 1 1 1 1 1\n0 1 2 0 1 2 0 1\n")
    write("script.txt", "mark\nextend 1 0 window=1,0\nmark\nextend 2 2 window=2,0\nmark\nmerge 2\ncheck 1 : exists y . x < y ; x = x\n")
    write("bad.txt", "#problem N=1\n#nonsense\n")
    return paths


def test_kseq_identical(files):
    code, out, _ = efk("kseq", files["identical.txt"])
    assert code == 0
    assert out.splitlines()[0] == "0 1 2 3"


def test_solve_chain_pair(files):
    code, out, _ = efk("solve", files["chains.txt"], "--index", 2, "--k", 2)
    assert code == 0
    assert "winner=antagonist" in out.splitlines()


def test_expect_turns_into_exit_code(files):
    assert efk("solve", files["chains.txt"], "--index", 2, "--k", 2, "--expect", "protagonist")[0] == 1
    assert efk("solve", files["chains.txt"], "--index", 2, "--k", 0, "--expect", "protagonist")[0] == 0


def test_filter_evens(files):
    code, out, _ = efk("filter", "--kseq", files["k.txt"], "--set", "evens")
    assert code == 0
    assert out.splitlines()[0] == "in_filter=false"
    assert "counterexample" in out and "verified=true" in out
    assert efk("filter", "--kseq", files["kb.txt"], "--set", "evens", "--expect", "member")[0] == 0
    code, out, _ = efk("filter", "--kseq", files["kb.txt"])
    assert out.strip() == "classification=improper"


def test_input_errors(files):
    code, _, err = efk("kseq", files["bad.txt"])
    assert code == 2 and "unknown header" in err
    assert efk("kseq", "/nonexistent/problem.txt")[0] == 2
    assert efk("solve", files["chains.txt"], "--index", 9, "--k", 0)[0] == 2
    assert efk("frobnicate")[0] == 2
    assert efk("filter", "--kseq", files["k.txt"], "--set", "evens &&")[0] == 2


def test_node_cap_exit_code(files, monkeypatch):
    assert efk("solve", files["identical.txt"], "--index", 3, "--k", 3, "--node-cap", 1)[0] == 3
    monkeypatch.setenv("EFK_NODE_CAP", "1")
    assert efk("kseq", files["identical.txt"])[0] == 3
    monkeypatch.setenv("EFK_NODE_CAP", "lots")
    assert efk("kseq", files["identical.txt"])[0] == 2


def test_records_schema(files):
    code, out, _ = efk("solve", files["chains.txt"], "--index", 2, "--k", 2, "--format", "records")
    lines = [json.loads(x) for x in out.splitlines()]
    assert lines[0] == {"command": "solve", "schema": "efk-records", "version": 1}
    rec = lines[1]
    assert rec["op"] == "solve" and rec["winner"] == "antagonist"
    assert set(rec) == {"op", "inputs_digest", "index", "k", "winner", "stats"}
    assert "millis" not in rec["stats"]
    code, out, _ = efk("solve", files["chains.txt"], "--index", 2, "--k", 2, "--format", "records", "--timing")
    assert "millis" in json.loads(out.splitlines()[1])["stats"]


def test_error_record(files):
    code, out, err = efk("kseq", files["bad.txt"], "--format", "records")
    last = json.loads(out.splitlines()[-1])
    assert last["op"] == "error" and last["kind"] == "input"
    assert len(err.splitlines()) == 1


def test_distinguish_and_oracle(files):
    code, out, _ = efk("distinguish", files["chains.txt"], "--index", 2, "--k", 1)
    assert code == 0 and out.startswith("sentence=exists")
    code, out, _ = efk("distinguish", files["identical.txt"], "--index", 2, "--k", 1, "--expect", "none")
    assert code == 0 and "none-found" in out
    code, out, _ = efk("oracle", files["chains.txt"], "--index", 2, "--rank", 2, "--expect", "disagree")
    assert code == 0 and out.startswith("disagree")
    code, out, _ = efk("oracle", files["identical.txt"], "--index", 2, "--rank", 1)
    assert code == 0 and out.startswith("agree")


def test_slalom_command(files):
    code, out, _ = efk("slalom", files["fam.txt"])
    assert code == 0 and out.splitlines()[0] == "size=4"
    code, out, _ = efk("slalom", files["fam.txt"], "--op", "single", "--expect", "infeasible")
    assert code == 0 and out.startswith("infeasible at index 0")
    code, out, _ = efk("slalom", files["fam.txt"], "--op", "single", "--mode", "filtered:c=1,n0=0", "--kseq", files["k.txt"])
    assert code == 0 and out.splitlines()[0] == "size=1"  # no index in [0, 2) has k_n > 1
    code, out, _ = efk("slalom", files["fam.txt"], "--mode", "filtered:c=0,n0=0", "--kseq", files["k.txt"])
    assert out.splitlines()[0] == "size=2"  # only index 1 is required
    assert efk("slalom", files["fam.txt"], "--mode", "filtered:c=1")[0] == 2


def test_validate(files):
    code, out, _ = efk("validate", files["identical.txt"])
    assert code == 0 and out.startswith("ok N=4")


def test_chain_script(files):
    code, out, _ = efk("chain", files["identical8.txt"], files["script.txt"])
    assert code == 0
    assert "merge ell=" in out
    assert "violations=0" in out


def test_assemble_is_deterministic(files):
    args = ("assemble", files["identical8.txt"], "--e1", files["e1.txt"], "--e2", files["e2.txt"], "--format", "records")
    a = efk(*args)
    b = efk(*args, "--jobs", 2)
    assert a[0] == 0 and a[1] == b[1]
    recs = [json.loads(x) for x in a[1].splitlines()]
    assert recs[-1]["injective"] and recs[-1]["covers"]
    short = efk("assemble", files["identical.txt"], "--e1", files["e1.txt"])
    assert short[0] == 2  # sequences longer than the window
