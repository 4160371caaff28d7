"""Command-line front end.

Exit codes: 0 accepted or solved, 1 rejected, 2 usage or parse error,
3 timeout, 4 satisfiable (nothing to certify).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import random
import socket
import sys
import time

from . import bench, wire
from .arith import DEGREE
from .dp import ORDER_POLICIES, DPTimeout, choose_order, run
from .formula import DimacsError, Formula, parse_dimacs, preprocess
from .protocol import (
    ProtocolAbort,
    ProtocolParams,
    VerifierParty,
    derive_seed,
    parse_adversary,
    run_protocol,
    serve,
)

EXIT_OK, EXIT_REJECT, EXIT_USAGE, EXIT_TIMEOUT, EXIT_SATISFIABLE = 0, 1, 2, 3, 4

log = logging.getLogger("dpcert")


class UsageError(Exception):
    pass


def _prime_bits(text: str) -> int:
    bits = int(text)
    if not 8 <= bits <= 62:
        raise argparse.ArgumentTypeError(f"prime bits must be in [8, 62], got {bits}")
    return bits


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _read_formula(path: str) -> Formula:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return preprocess(parse_dimacs(data)[0])
    except (DimacsError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _solve(phi: Formula, policy: str, seed: int, timeout: float | None):
    start = time.perf_counter()
    deadline = None if timeout is None else start + timeout
    order = choose_order(phi, policy, seed, deadline)
    trace = run(phi, order, deadline)
    trace.seconds = time.perf_counter() - start
    return trace


def _params(args, repetitions=None, prover_seed=None, verifier_seed=None) -> ProtocolParams:
    try:
        return ProtocolParams(
            args.prime_bits,
            args.repetitions if repetitions is None else repetitions,
            args.seed_prover if prover_seed is None else prover_seed,
            args.seed_verifier if verifier_seed is None else verifier_seed,
            args.prime,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _stats(**fields):
    # timings vary between runs, so they go to stderr and stdout stays reproducible
    print(" ".join(f"{k}={v}" for k, v in fields.items()), file=sys.stderr)


# -- subcommands -------------------------------------------------------------

def cmd_solve(args) -> int:
    phi = _read_formula(args.file)
    if phi.empty_multiplicity:
        print("UNSATISFIABLE")
        print("rounds: 0 (input contains the empty clause)")
        return EXIT_OK
    try:
        trace = _solve(phi, args.order, args.seed, args.timeout)
    except DPTimeout as exc:
        print(f"TIMEOUT: {exc}")
        return EXIT_TIMEOUT
    print(trace.verdict.upper())
    print(f"variables: {trace.n}")
    print(f"rounds: {trace.k}")
    print("order: " + " ".join(map(str, trace.order)))
    print("clauses: " + " ".join(map(str, trace.clause_profile())))
    if args.trace:
        sys.stdout.write(trace.dump())
    _stats(dp_ms=round(trace.seconds * 1000, 3))
    return EXIT_OK


def cmd_certify(args) -> int:
    phi = _read_formula(args.file)
    params = _params(args)
    try:
        kind = parse_adversary(args.adversary)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        trace = _solve(phi, args.order, args.seed_prover, args.timeout)
    except DPTimeout as exc:
        print(f"TIMEOUT: {exc}")
        return EXIT_TIMEOUT
    if not trace.unsatisfiable:
        print("SATISFIABLE: nothing to certify")
        return EXIT_SATISFIABLE
    if args.transport == "socket" and not args.connect:
        raise UsageError("--transport socket needs --connect HOST:PORT")
    dimacs_path = args.file if args.transport == "stream" else None
    try:
        result = run_protocol(phi, trace, params, kind, args.transport, dimacs_path, args.connect)
    except ProtocolAbort as exc:
        print(f"ABORT: {exc}", file=sys.stderr)
        return EXIT_REJECT
    for idx, r in enumerate(result.runs, 1):
        verdict = "accept" if r.accepted else f"reject ({r.reason.name.lower()})"
        print(f"run {idx}: {verdict} q={r.q} rounds={r.rounds} p2v_bytes={r.p2v_bytes} v2p_bytes={r.v2p_bytes}")
    if result.accepted:
        print("ACCEPT")
    else:
        print(f"REJECT ({result.reason.name.lower()})")
    print(f"error_bound: {result.error_bound():.3e}")
    if args.transcript:
        with open(args.transcript, "w") as fh:
            for r in result.runs:
                fh.write(wire.transcript_lines(r.transcript))
    if args.emit_proofs:
        _emit_proofs(trace, args.emit_proofs, args.file)
    _stats(dp_ms=round(trace.seconds * 1000, 3), prover_ms=round(result.prover_seconds * 1000, 3),
           verifier_ms=round(result.verifier_seconds * 1000, 3))
    return EXIT_OK if result.accepted else EXIT_REJECT


def _emit_proofs(trace, directory: str, source: str):
    os.makedirs(directory, exist_ok=True)
    stem = os.path.join(directory, os.path.splitext(os.path.basename(source))[0])
    with open(stem + ".res", "w") as fh:
        fh.write(bench.emit_resolution_trace(trace))
    with open(stem + ".drat", "w") as fh:
        fh.write(bench.emit_drat(trace))


def binomial_interval(successes: int, trials: int, z: float = 3.0) -> tuple[float, float, float]:
    """Rate, its standard error, and the upper end of a Wilson interval at ``z`` deviations."""
    p = successes / trials
    sigma = math.sqrt(p * (1 - p) / trials)
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return p, sigma, min(1.0, centre + half)


def cmd_attack(args) -> int:
    phi = _read_formula(args.file)
    try:
        kind = parse_adversary(args.strategy)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        trace = _solve(phi, args.order, 0, args.timeout)
    except DPTimeout as exc:
        print(f"TIMEOUT: {exc}")
        return EXIT_TIMEOUT
    if not trace.unsatisfiable:
        print("SATISFIABLE: nothing to attack")
        return EXIT_SATISFIABLE
    accepted = 0
    reasons: dict[str, int] = {}
    qs = set()
    for t in range(args.trials):
        params = _params(args, 1, derive_seed(args.seed_prover, t + 1), derive_seed(args.seed_verifier, t + 1))
        result = run_protocol(phi, trace, params, kind)
        accepted += result.accepted
        qs.add(result.runs[0].q)
        name = "accept" if result.accepted else result.reason.name.lower()
        reasons[name] = reasons.get(name, 0) + 1
    q = min(qs)
    rate, sigma, upper = binomial_interval(accepted, args.trials)
    print(f"strategy: {args.strategy}")
    print(f"trials: {args.trials}")
    print(f"q: {q}" if len(qs) == 1 else f"q: sampled, smallest {q}")
    print(f"rounds: {trace.k}")
    print(f"accepted: {accepted}")
    print(f"rate: {rate:.6f}")
    print(f"sigma: {sigma:.6f}")
    print(f"wilson_upper_3sd: {upper:.6f}")
    print(f"bound_round d/q: {DEGREE / q:.6f}")
    print(f"bound_total dk/q: {min(1.0, DEGREE * trace.k / q):.6f}")
    print("outcomes: " + " ".join(f"{k}={v}" for k, v in sorted(reasons.items())))
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.files:
        instances = [(os.path.splitext(os.path.basename(f))[0], _read_formula(f)) for f in args.files]
    else:
        instances = bench.default_corpus(args.max_holes, args.seed)
    policies = [p.strip() for p in args.orders.split(",") if p.strip()]
    for p in policies:
        if p not in ORDER_POLICIES:
            raise UsageError(f"unknown order policy {p!r}; pick from {', '.join(ORDER_POLICIES)}")
    params = _params(args)
    rows = bench.run_experiment(instances, policies, params, args.timeout, args.seed, args.emit_proofs)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            bench.write_csv(rows, fh)
    else:
        sys.stdout.write(bench.write_csv(rows))
    solved = {p: sum(r["verdict"] in ("accept", "satisfiable") for r in rows if r["policy"] == p) for p in policies}
    print("solved: " + " ".join(f"{p}={n}" for p, n in solved.items()), file=sys.stderr)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.family == "php":
        phi = bench.gen_php(args.size)
        header = f"c pigeonhole, {args.size} holes"
    else:
        m = args.clauses if args.clauses is not None else round(4.26 * args.size)
        phi = bench.gen_random_kcnf(args.size, m, args.width, args.seed)
        header = f"c random {args.width}-CNF, seed {args.seed}"
    sys.stdout.write(header + "\n" + phi.to_dimacs())
    return EXIT_OK


def cmd_serve_verifier(args) -> int:
    phi = _read_formula(args.file)
    if args.listen is None:
        party = _serve_once(phi, args.seed_verifier, sys.stdin.buffer, sys.stdout.buffer)
        return EXIT_OK if party.accepted else EXIT_REJECT
    host, _, port = args.listen.rpartition(":")
    with socket.create_server((host or "127.0.0.1", int(port))) as srv:
        bound = srv.getsockname()
        print(f"listening on {bound[0]}:{bound[1]}", file=sys.stderr, flush=True)
        status = EXIT_OK
        for session in range(args.sessions):
            conn, _ = srv.accept()
            with conn, conn.makefile("rb") as rd, conn.makefile("wb") as wr:
                party = _serve_once(phi, derive_seed(args.seed_verifier, session), rd, wr)
            if not party.accepted:
                status = EXIT_REJECT
    return status


def _serve_once(phi: Formula, seed: int, reader, writer) -> VerifierParty:
    party = VerifierParty(phi, random.Random(seed))
    try:
        serve(party, reader, writer, outgoing=wire.VERIFIER)
    finally:
        state = party.state
        stats = {
            "accepted": party.accepted,
            "reason": party.reason.name.lower(),
            "verifier_seconds": party.seconds,
            "round_ops": list(state.round_ops) if state else [],
            "final_ops": state.final_ops if state else 0,
        }
        print(json.dumps(stats), file=sys.stderr, flush=True)
    return party


# -- parser ------------------------------------------------------------------

def _protocol_flags(p: argparse.ArgumentParser):
    p.add_argument("--prime-bits", type=_prime_bits, default=62,
                   help="q is drawn from [2^bits, 2^(bits+1)), bits in [8, 62] (default 62)")
    p.add_argument("--prime", type=int, default=None, help="use this prime instead of sampling one")
    p.add_argument("--repetitions", type=_positive, default=1)
    p.add_argument("--seed-prover", type=int, default=0)
    p.add_argument("--seed-verifier", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpcert", description="Davis-Putnam refutations with interactive certificates.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run Davis-Putnam and report the verdict")
    p.add_argument("file")
    p.add_argument("--order", choices=ORDER_POLICIES, default="lexi")
    p.add_argument("--seed", type=int, default=0, help="seed for the random order policy")
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--trace", action="store_true", help="print every intermediate formula")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="solve, then certify unsatisfiability interactively")
    p.add_argument("file")
    p.add_argument("--order", choices=ORDER_POLICIES, default="greedy")
    _protocol_flags(p)
    p.add_argument("--transport", choices=("inproc", "stream", "socket"), default="inproc")
    p.add_argument("--connect", help="HOST:PORT of a listening verifier (socket transport)")
    p.add_argument("--transcript", help="write a JSON-lines message log here")
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--adversary", default="honest",
                   help="honest, tamper:ROUND[:INDEX[:OFFSET]], flip[:OFFSET], degree:ROUND[:INDEX], adaptive[:OFFSET]")
    p.add_argument("--emit-proofs", metavar="DIR", help="also write resolution-trace and DRAT files")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("attack", help="estimate how often a cheating prover is accepted")
    p.add_argument("file")
    p.add_argument("--strategy", "--adversary", dest="strategy", default="tamper:1")
    p.add_argument("--trials", type=_positive, default=1000)
    p.add_argument("--order", choices=ORDER_POLICIES, default="greedy")
    _protocol_flags(p)
    p.add_argument("--timeout", type=float, default=None)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="run the policy comparison and write CSV")
    p.add_argument("files", nargs="*", help="DIMACS files (default: built-in corpus)")
    p.add_argument("--orders", default="lexi,greedy")
    p.add_argument("--max-holes", type=_positive, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--emit-proofs", metavar="DIR")
    _protocol_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write a generated instance as DIMACS")
    p.add_argument("family", choices=("php", "random"))
    p.add_argument("size", type=_positive, help="holes for php, variables for random")
    p.add_argument("--clauses", type=int, default=None, help="random: clause count (default 4.26 n)")
    p.add_argument("--width", type=_positive, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("serve-verifier", help="run the verifier over stdio or a socket")
    p.add_argument("file")
    p.add_argument("--seed-verifier", type=int, default=1)
    p.add_argument("--listen", metavar="[HOST:]PORT", help="accept connections instead of using stdio")
    p.add_argument("--sessions", type=_positive, default=1, help="connections to serve before exiting")
    p.set_defaults(func=cmd_serve_verifier)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dpcert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
