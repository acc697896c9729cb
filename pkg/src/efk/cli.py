"""Command-line front end: ``efk <command> ...``.

Exit codes: 0 success, 1 domain-level negative (a failed ``--expect``, an
invalid problem), 2 input error, 3 resource cap reached.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import Optional

from efk import backforth as bf
from efk.distinguish import extract_distinguisher
from efk.efgame import (
    ANTAGONIST,
    PROTAGONIST,
    UNDECIDED,
    BudgetExceeded,
    compute_k_seq,
    default_node_cap,
    solve_game,
)
from efk.filterlab import (
    TailInconsistency,
    check_certificate,
    classify,
    in_filter,
    is_ultraproduct_problem,
    parse_set,
)
from efk.formulas import to_text
from efk.parser import FormulaSyntaxError, parse
from efk.sentences import first_disagreement
from efk.slalom import (
    EVERYWHERE,
    Filtered,
    Infeasible,
    SearchBoundExceeded,
    check_cover,
    greedy_cover,
    min_cover_exact,
    single_slalom_cover,
)
from efk.structures import kappa, validate_problem
from efk.textio import InputError, parse_family, parse_kseq, parse_problem, parse_sequences

SCHEMA = {"schema": "efk-records", "version": 1}

OK, NEGATIVE, INPUT_ERROR, CAP = 0, 1, 2, 3


class Fail(Exception):
    def __init__(self, code: int, kind: str, reason: str):
        self.code, self.kind, self.reason = code, kind, reason
        super().__init__(reason)


def _input_error(reason: str) -> Fail:
    return Fail(INPUT_ERROR, "input", reason)


class Output:
    """Collects human lines or JSON records, in call order."""

    def __init__(self, fmt: str, command: str, timing: bool):
        self.fmt = fmt
        self.timing = timing
        self.lines: list[str] = []
        if fmt == "records":
            self.lines.append(json.dumps({**SCHEMA, "command": command}, sort_keys=True))

    def say(self, text: str) -> None:
        if self.fmt == "human":
            self.lines.append(text)

    def record(self, op: str, digest: str, body: dict, stats: Optional[dict] = None, millis: Optional[float] = None):
        if self.fmt != "records":
            return
        rec = {"op": op, "inputs_digest": digest, **body}
        st = dict(stats or {})
        if self.timing and millis is not None:
            st["millis"] = round(millis, 3)
        if st:
            rec["stats"] = st
        self.lines.append(json.dumps(rec, sort_keys=True))

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _input_error(f"cannot read {path}: {exc.strerror}") from None


def _digest(*texts: str) -> str:
    h = hashlib.sha256()
    for t in texts:
        h.update(t.encode())
        h.update(b"\0")
    return h.hexdigest()[:16]


def _load_problem(path: str, validate: bool = True):
    text = _read(path)
    try:
        spec = parse_problem(text)
    except InputError as exc:
        raise _input_error(f"{path}: {exc}") from None
    if validate:
        rep = validate_problem(spec)
        if not rep.ok:
            raise _input_error(f"{path}: invalid problem: {rep.violations[0]}")
    return spec, _digest(text)


def _load_kseq(path: str):
    text = _read(path)
    try:
        return parse_kseq(text), _digest(text)
    except InputError as exc:
        raise _input_error(f"{path}: {exc}") from None


def _index(spec, n: int) -> int:
    if not 0 <= n < spec.N:
        raise _input_error(f"index {n} outside the window [0, {spec.N})")
    return n


def _window(text: Optional[str]):
    if text is None:
        return None
    try:
        c, n0 = (int(x) for x in text.split(","))
    except ValueError:
        raise _input_error(f"window must be 'c,n0', found {text!r}") from None
    if c < 0 or n0 < 0:
        raise _input_error("window values must be >= 0")
    return c, n0


def _expect(args, actual: str) -> int:
    if args.expect is not None and args.expect != actual:
        raise Fail(NEGATIVE, "expect", f"expected {args.expect}, got {actual}")
    return OK


def _kvalues(spec, args):
    ks = compute_k_seq(spec, args.node_cap, args.jobs)
    if not ks.complete:
        bad = next(n for n, v in enumerate(ks.values) if v is None)
        raise Fail(CAP, "cap", f"node cap {args.node_cap} reached computing k at index {bad}")
    return ks


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args, out: Output) -> int:
    text = _read(args.problem)
    try:
        spec = parse_problem(text)
    except InputError as exc:
        raise _input_error(f"{args.problem}: {exc}") from None
    rep = validate_problem(spec)
    body = {"ok": rep.ok, "violations": rep.violations, "N": spec.N, "levels": spec.chain.height + 1}
    if rep.ok:
        body["kappa"] = kappa(spec)
    out.record("validate", _digest(text), body)
    if rep.ok:
        out.say(f"ok N={spec.N} levels={spec.chain.height + 1} kappa={kappa(spec)}")
        return OK
    for v in rep.violations:
        out.say(f"violation: {v}")
    return NEGATIVE


def cmd_kseq(args, out: Output) -> int:
    spec, digest = _load_problem(args.problem)
    t0 = time.perf_counter()
    ks = compute_k_seq(spec, args.node_cap, args.jobs)
    millis = (time.perf_counter() - t0) * 1000.0
    shown = ["?" if v is None else str(v) for v in ks.values]
    body = {"kseq": ks.values}
    status = None
    if spec.kseq_tail is not None and ks.complete:
        try:
            status = "ultraproduct" if is_ultraproduct_problem(spec, ks.values) else "pseudo"
        except TailInconsistency as exc:
            status = "inconsistent-tail"
            body["mismatches"] = [list(m) for m in exc.mismatches]
        body["classification"] = status
    out.record("kseq", digest, body, {"nodes": sum(ks.nodes)}, millis)
    out.say(" ".join(shown))
    if status is not None:
        out.say(f"classification={status}")
    if not ks.complete:
        raise Fail(CAP, "cap", "undecided: budget")
    return _expect(args, status) if args.expect else OK


def cmd_solve(args, out: Output) -> int:
    spec, digest = _load_problem(args.problem)
    n = _index(spec, args.index)
    if args.k < 0:
        raise _input_error("k must be >= 0")
    M1, M2 = spec.pairs[n]
    res = solve_game(M1, M2, spec.chain, args.k, args.node_cap)
    body = {"index": n, "k": args.k, "winner": res.winner}
    if args.certificate and res.decided:
        body["certificate_size"] = len(res.certificate())
    out.record("solve", digest, body, {"nodes": res.nodes}, res.millis)
    out.say(f"winner={res.winner}")
    out.say(f"nodes={res.nodes}")
    if "certificate_size" in body:
        out.say(f"certificate_size={body['certificate_size']}")
    if res.winner == UNDECIDED:
        raise Fail(CAP, "cap", "undecided: budget")
    return _expect(args, res.winner)


def cmd_distinguish(args, out: Output) -> int:
    spec, digest = _load_problem(args.problem)
    n = _index(spec, args.index)
    if args.k < 0:
        raise _input_error("k must be >= 0")
    M1, M2 = spec.pairs[n]
    try:
        d = extract_distinguisher(M1, M2, spec.chain, args.k, args.max_width, args.node_cap)
    except BudgetExceeded:
        raise Fail(CAP, "cap", "undecided: budget") from None
    if d.found:
        body = {"index": n, "k": args.k, "sentence": to_text(d.sentence), "direction": d.direction, "width": d.width}
        out.say(f"sentence={to_text(d.sentence)}")
        out.say(f"direction={d.direction} width={d.width}")
        status = "found"
    else:
        if d.reason.startswith(UNDECIDED):
            raise Fail(CAP, "cap", "undecided: budget")
        body = {"index": n, "k": args.k, "sentence": None, "reason": d.reason, "width_cap": d.bound}
        out.say(f"none-found: {d.reason}")
        status = "none"
    out.record("distinguish", digest, body)
    return _expect(args, status)


def cmd_filter(args, out: Output) -> int:
    kspec, digest = _load_kseq(args.kseq)
    if args.classify or args.set is None:
        cls = classify(kspec)
        out.record("classify", digest, {"classification": cls})
        out.say(f"classification={cls}")
        if args.set is None:
            return _expect(args, cls)
    try:
        S = parse_set(args.set, kspec)
    except ValueError as exc:
        raise _input_error(str(exc)) from None
    d = in_filter(kspec, S)
    verified = check_certificate(kspec, S, d)
    rec = d.as_record()
    out.record("filter", _digest(digest, args.set), {**rec, "set": args.set, "verified": verified})
    out.say(f"in_filter={'true' if d.member else 'false'}")
    if d.member:
        out.say(f"witness: every n >= {d.n0} with k_n > {d.c} is in the set")
    else:
        out.say(f"counterexample: n = {d.residue} mod {d.modulus}, n >= {d.start} misses the set while k_n grows")
    out.say(f"verified={'true' if verified else 'false'}")
    return _expect(args, "member" if d.member else "nonmember")


def _mode(args):
    if args.mode == "everywhere":
        return EVERYWHERE
    if not args.mode.startswith("filtered:"):
        raise _input_error(f"mode must be 'everywhere' or 'filtered:c=<c>,n0=<n0>', found {args.mode!r}")
    if args.kseq is None:
        raise _input_error("filtered mode needs --kseq")
    fields = {}
    for part in args.mode[len("filtered:"):].split(","):
        key, _, val = part.partition("=")
        fields[key.strip()] = val
    try:
        c, n0 = int(fields["c"]), int(fields["n0"])
    except (KeyError, ValueError):
        raise _input_error(f"bad filtered mode {args.mode!r}") from None
    kspec, _ = _load_kseq(args.kseq)
    return Filtered(c, n0, kspec)


def cmd_slalom(args, out: Output) -> int:
    text = _read(args.family)
    try:
        fam, g = parse_family(text)
    except InputError as exc:
        raise _input_error(f"{args.family}: {exc}") from None
    if args.g is not None:
        try:
            g = tuple(int(x) for x in args.g.replace(",", " ").split())
        except ValueError:
            raise _input_error(f"bad capacities {args.g!r}") from None
    if g is None:
        raise _input_error("capacities missing: give a #g line or --g")
    if len(g) != fam.N or any(x < 0 for x in g):
        raise _input_error(f"need {fam.N} non-negative capacities")
    mode = _mode(args)
    digest = _digest(text, " ".join(map(str, g)), str(mode))
    t0 = time.perf_counter()
    try:
        if args.op == "single":
            s = single_slalom_cover(fam, g, mode)
            if isinstance(s, Infeasible):
                out.record("slalom", digest, {"op": "single", "feasible": False, "index": s.index,
                                              "values": list(s.values), "capacity": s.capacity})
                out.say(f"infeasible at index {s.index}: values {list(s.values)} exceed capacity {s.capacity}")
                return _expect(args, "infeasible")
            family = [s]
            size = 1
        elif args.op == "greedy":
            family = greedy_cover(fam, g, mode)
            size = len(family)
        else:
            size, family = min_cover_exact(fam, g, mode, args.bound)
    except SearchBoundExceeded as exc:
        raise Fail(CAP, "cap", str(exc)) from None
    except ValueError as exc:
        raise _input_error(str(exc)) from None
    millis = (time.perf_counter() - t0) * 1000.0
    assert check_cover(fam, family, mode).ok
    out.record("slalom", digest, {"op": args.op, "feasible": True, "size": size,
                                  "slaloms": [s.as_lists() for s in family]}, None, millis)
    out.say(f"size={size}")
    for s in family:
        out.say(" | ".join(",".join(map(str, cell)) for cell in s.as_lists()))
    return _expect(args, "feasible") if args.op == "single" else OK


# -- chain scripts ------------------------------------------------------------


def _script_options(parts: list[str], lineno: int) -> tuple[list[str], dict[str, str]]:
    pos, opts = [], {}
    for p in parts:
        if "=" in p:
            key, val = p.split("=", 1)
            opts[key] = val
        else:
            pos.append(p)
    return pos, opts


def _challenge_sets(spec_text: str, lineno: int):
    """``0 1`` for every index, or per-index sets separated by '/' (``-`` for none)."""
    try:
        if "/" in spec_text:
            out = []
            for cell in spec_text.split("/"):
                cell = cell.strip()
                out.append(None if cell == "-" else [int(x) for x in cell.replace(",", " ").split()])
            return out
        return [int(x) for x in spec_text.replace(",", " ").split()]
    except ValueError:
        raise _input_error(f"script line {lineno}: bad challenge {spec_text!r}") from None


def cmd_chain(args, out: Output) -> int:
    """Run a chain script.

    Commands, one per line (``#`` starts a comment):
      ``extend <side> <elements> [window=c,n0] [floor=σ]``
      ``mark`` (append the current approximation to the chain)
      ``merge <σ> [window=c,n0]`` (replace the current one by the merge)
      ``check <r> [window=c,n0] : <formula> ; <formula> ...``
      ``reset``
    """
    spec, digest = _load_problem(args.problem)
    script = _read(args.script)
    digest = _digest(digest, script)
    ks = _kvalues(spec, args)
    ctx = bf.Context(spec, ks.values, args.node_cap)
    s = bf.empty_approx(ctx)
    marked: list[bf.Approximation] = []
    out.say("kseq " + " ".join(map(str, ctx.kseq)))
    out.record("chain-start", digest, {"kseq": list(ctx.kseq)})
    negative = False
    for lineno, raw in enumerate(script.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "extend":
                spec_part, opts = _script_options(rest.split(), lineno)
                if len(spec_part) < 2:
                    raise _input_error(f"script line {lineno}: extend needs a side and elements")
                side = int(spec_part[0])
                w = _challenge_sets(" ".join(spec_part[1:]), lineno)
                s = bf.extend(s, side, w, _window(opts.get("window")), int(opts.get("floor", 1)))
                out.say(f"{lineno}: extend side={side} slacks={' '.join(map(str, s.slacks()))}")
                out.record("extend", digest, {"line": lineno, "side": side,
                                              "maps": [sorted(s.f(n).items()) for n in range(ctx.N)],
                                              "slacks": s.slacks()})
            elif head == "mark":
                marked.append(s)
                out.say(f"{lineno}: mark ({len(marked)} in chain)")
            elif head == "reset":
                s = bf.empty_approx(ctx)
                marked = []
                out.say(f"{lineno}: reset")
            elif head == "merge":
                pos, opts = _script_options(rest.split(), lineno)
                if len(pos) != 1:
                    raise _input_error(f"script line {lineno}: merge needs σ")
                window = _window(opts.get("window")) or (0, 0)
                res = bf.merge_chain(marked or [s], int(pos[0]), window)
                s = res.s
                marked = []
                out.say(f"{lineno}: merge ell={' '.join(map(str, res.ell))} eta={' '.join(map(str, res.eta))}")
                out.record("merge", digest, {"line": lineno, "ell": res.ell, "eta": res.eta,
                                             "window": list(res.window),
                                             "large_sets": {str(k): v for k, v in res.large_sets.items()}})
            elif head == "check":
                left, sep, ftext = rest.partition(":")
                pos, opts = _script_options(left.split(), lineno)
                if not sep or len(pos) != 1:
                    raise _input_error(f"script line {lineno}: check needs '<r> [window=c,n0] : formulas'")
                formulas = [parse(t.strip(), spec.chain.top) for t in ftext.split(";") if t.strip()]
                rep = bf.check_partial_elementary(s, formulas, int(pos[0]), _window(opts.get("window")))
                out.say(f"{lineno}: check checked={rep.checked} violations={len(rep.violations)}")
                out.record("check", digest, {"line": lineno, "checked": rep.checked,
                                             "violations": [[n, f, list(t), k] for n, f, t, k in rep.violations]})
                negative = negative or not rep.clean
            else:
                raise _input_error(f"script line {lineno}: unknown command {head!r}")
        except (bf.ApproxError, FormulaSyntaxError, ValueError) as exc:
            if isinstance(exc, Fail):
                raise
            raise _input_error(f"script line {lineno}: {exc}") from None
    out.record("chain-end", digest, {"transcript": s.transcript().splitlines()})
    return NEGATIVE if negative else OK


def cmd_assemble(args, out: Output) -> int:
    spec, digest = _load_problem(args.problem)
    t1 = _read(args.e1) if args.e1 else ""
    t2 = _read(args.e2) if args.e2 else ""
    try:
        E1 = parse_sequences(t1, spec.N)
        E2 = parse_sequences(t2, spec.N)
    except InputError as exc:
        raise _input_error(str(exc)) from None
    ks = _kvalues(spec, args)
    try:
        asm = bf.assemble(spec, ks.values, E1, E2, _window(args.window))
    except bf.SlackShortfall as exc:
        raise Fail(NEGATIVE, "slack", str(exc)) from None
    except bf.ApproxError as exc:
        raise _input_error(str(exc)) from None
    ok = asm.injective and asm.covers(E1, E2)
    if out.fmt == "records":
        for line in asm.records().splitlines():
            rec = json.loads(line)
            op = "assemble" if "assemble" in rec else "row"
            rec.pop("assemble", None)
            out.record(op, _digest(digest, t1, t2), rec)
        out.record("assemble-check", _digest(digest, t1, t2),
                   {"injective": asm.injective, "covers": asm.covers(E1, E2)})
    out.say(f"window c={asm.c} n0={asm.n0}: {' '.join(map(str, asm.window))}")
    for row in asm.rows:
        out.say(f"side {row.side} entry {row.entry}: {' '.join(map(str, row.source))} -> {' '.join(map(str, row.target))}")
    out.say(f"injective={'true' if asm.injective else 'false'} covers={'true' if asm.covers(E1, E2) else 'false'}")
    return OK if ok else NEGATIVE


def cmd_oracle(args, out: Output) -> int:
    spec, digest = _load_problem(args.problem)
    n = _index(spec, args.index)
    if args.rank < 0 or args.width < 1:
        raise _input_error("rank must be >= 0 and width >= 1")
    level = args.rank if args.level is None else args.level
    M1, M2 = spec.pairs[n]
    vocab = spec.chain.level(level)
    t0 = time.perf_counter()
    checked, phi = first_disagreement(M1, M2, vocab, args.rank, args.rank, args.width)
    millis = (time.perf_counter() - t0) * 1000.0
    status = "agree" if phi is None else "disagree"
    body = {"index": n, "rank": args.rank, "width": args.width, "level": level, "result": status}
    if phi is not None:
        body["sentence"] = to_text(phi)
    out.record("oracle", digest, body, {"sentences": checked}, millis)
    out.say(f"{status} checked={checked}")
    if phi is not None:
        out.say(f"sentence={to_text(phi)}")
    return _expect(args, status)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("human", "records"), default="human")
    common.add_argument("--node-cap", type=int, default=None, help="memoized positions per game (env EFK_NODE_CAP)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for per-index work")
    common.add_argument("--timing", action="store_true", help="include wall-clock millis in records")

    p = argparse.ArgumentParser(prog="efk", description="Budgeted EF games, filters, slaloms and approximations.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a problem file")
    s.add_argument("problem")
    s.set_defaults(func=cmd_validate, expect=None)

    s = sub.add_parser("kseq", parents=[common], help="compute k_n for every window index")
    s.add_argument("problem")
    s.add_argument("--expect", choices=("ultraproduct", "pseudo"))
    s.set_defaults(func=cmd_kseq)

    s = sub.add_parser("solve", parents=[common], help="solve one game")
    s.add_argument("problem")
    s.add_argument("--index", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--certificate", action="store_true")
    s.add_argument("--expect", choices=(PROTAGONIST, ANTAGONIST))
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("distinguish", parents=[common], help="find a separating sentence")
    s.add_argument("problem")
    s.add_argument("--index", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--max-width", type=int, default=None)
    s.add_argument("--expect", choices=("found", "none"))
    s.set_defaults(func=cmd_distinguish)

    s = sub.add_parser("filter", parents=[common], help="classify or decide filter membership")
    s.add_argument("--kseq", required=True)
    s.add_argument("--set", default=None)
    s.add_argument("--classify", action="store_true")
    s.add_argument("--expect", choices=("member", "nonmember", "proper-nonprincipal", "improper"))
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("slalom", parents=[common], help="slalom covers of a function family")
    s.add_argument("family")
    s.add_argument("--op", choices=("single", "greedy", "min"), default="min")
    s.add_argument("--mode", default="everywhere")
    s.add_argument("--kseq", default=None)
    s.add_argument("--g", default=None, help="capacities, space-separated (overrides #g)")
    s.add_argument("--bound", type=int, default=10)
    s.add_argument("--expect", choices=("feasible", "infeasible"))
    s.set_defaults(func=cmd_slalom)

    s = sub.add_parser("chain", parents=[common], help="run an extend/merge script")
    s.add_argument("problem")
    s.add_argument("script")
    s.set_defaults(func=cmd_chain, expect=None)

    s = sub.add_parser("assemble", parents=[common], help="alternate extensions down two enumerations")
    s.add_argument("problem")
    s.add_argument("--e1", default=None)
    s.add_argument("--e2", default=None)
    s.add_argument("--window", default=None, help="c,n0")
    s.set_defaults(func=cmd_assemble, expect=None)

    s = sub.add_parser("oracle", parents=[common], help="brute-force sentence agreement")
    s.add_argument("problem")
    s.add_argument("--index", type=int, required=True)
    s.add_argument("--rank", type=int, required=True)
    s.add_argument("--width", type=int, default=2)
    s.add_argument("--level", type=int, default=None)
    s.add_argument("--expect", choices=("agree", "disagree"))
    s.set_defaults(func=cmd_oracle)
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return OK if exc.code == 0 else INPUT_ERROR
    out = Output(args.format, args.command, args.timing)
    try:
        if args.node_cap is None:
            try:
                args.node_cap = default_node_cap()
            except ValueError as exc:
                raise _input_error(f"EFK_NODE_CAP: {exc}") from None
        if args.node_cap < 1 or args.jobs < 1:
            raise _input_error("--node-cap and --jobs must be >= 1")
        code = args.func(args, out)
    except Fail as exc:
        code = exc.code
        if args.format == "records":
            out.lines.append(json.dumps({"op": "error", "kind": exc.kind, "reason": exc.reason}, sort_keys=True))
        stderr.write(f"efk: {exc.kind}: {exc.reason}\n")
    except BudgetExceeded as exc:
        code = CAP
        stderr.write(f"efk: cap: {exc}\n")
    stdout.write(out.text())
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
