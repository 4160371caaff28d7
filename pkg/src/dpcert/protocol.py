"""Interactive certification of a Davis-Putnam refutation.

The prover holds the whole trace ``phi_0 .. phi_k``.  The verifier only
holds ``phi_0`` and walks the claim ``B_q(phi_i)(sigma) = w`` from ``i = k``
down to ``i = 0``, one round per macrostep, then checks the last claim
itself.
"""
from __future__ import annotations

import collections
import json
import os
import random
import socket
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from typing import Sequence

from . import wire
from .arith import (
    DEGREE,
    CompiledFormula,
    UnivariatePoly,
    compatible_map,
    delta,
    eval_B,
    eval_poly,
    partial_eval_B,
    shape_check,
)
from .dp import Kind, Trace, build_schedule, check_permutation
from .field import MAX_MODULUS, is_prime, pick_protocol_prime, sample_prime
from .formula import Formula
from .wire import Header, Message, Reason, Tag


class Rejected(Exception):
    def __init__(self, reason: Reason, detail: str = ""):
        super().__init__(f"{reason.name.lower()}: {detail}" if detail else reason.name.lower())
        self.reason = reason


class ProtocolAbort(RuntimeError):
    """The transport failed; distinct from a rejection."""


@dataclass
class ProtocolParams:
    prime_bits: int = 62
    repetitions: int = 1
    prover_seed: int = 0
    verifier_seed: int = 1
    prime: int | None = None  # force q instead of sampling
    degree: int = DEGREE

    def __post_init__(self):
        if self.degree != DEGREE:
            raise ValueError("the degree bound is fixed at 6")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.prime is None and not 2 <= self.prime_bits <= 62:
            raise ValueError("prime_bits must be in [2, 62]")
        if self.prime is not None and (not is_prime(self.prime) or not 3 <= self.prime < MAX_MODULUS):
            raise ValueError(f"forced modulus {self.prime} is not a prime in [3, 2**63)")


def derive_seed(seed: int, repetition: int) -> int:
    return seed if repetition == 0 else seed * 1_000_003 + repetition


# -- provers -----------------------------------------------------------------

@dataclass(frozen=True)
class Honest:
    pass


@dataclass(frozen=True)
class TamperRound:
    round: int
    index: int = 3
    offset: int = 1


@dataclass(frozen=True)
class FlipFinalClaim:
    offset: int = 1


@dataclass(frozen=True)
class DegreeViolation:
    round: int
    index: int = 5  # x^5 is out of shape for both kinds


@dataclass(frozen=True)
class Adaptive:
    """Lies about the final constant, then forges every round to stay consistent with the lie.

    A forged polynomial differs from the honest one by a multiple of a
    polynomial with as many roots as the round shape permits, so the lie is
    carried forward unless the challenge lands on one of those roots.
    """
    offset: int = 1


ProverKind = Honest | TamperRound | FlipFinalClaim | DegreeViolation | Adaptive


def parse_adversary(text: str | None) -> ProverKind:
    """``honest``, ``tamper:ROUND[:INDEX[:OFFSET]]``, ``flip[:OFFSET]``, ``degree:ROUND[:INDEX]``
    or ``adaptive[:OFFSET]``."""
    if not text or text == "honest":
        return Honest()
    name, *args = text.split(":")
    nums = [int(a) for a in args]
    if name == "tamper" and 1 <= len(nums) <= 3:
        return TamperRound(*nums)
    if name == "flip" and len(nums) <= 1:
        return FlipFinalClaim(*nums)
    if name == "degree" and 1 <= len(nums) <= 2:
        return DegreeViolation(*nums)
    if name == "adaptive" and len(nums) <= 1:
        return Adaptive(*nums)
    raise ValueError(f"cannot parse adversary {text!r}")


def prover_start(trace: Trace, params: ProtocolParams, rng: random.Random, force: bool = False) -> Header:
    """Pick q not dividing the final empty-clause count and announce ``B_q(phi_k)``."""
    mult = trace.final.empty_multiplicity
    if mult == 0 and not force:
        raise ValueError("formula is satisfiable: nothing to certify")
    if params.prime is not None:
        q = params.prime
    elif mult == 0:
        q = sample_prime(params.prime_bits, rng)
    else:
        q = pick_protocol_prime(mult, params.prime_bits, rng)[0].q
    return Header(q, trace.n, trace.order, mult % q)


def compiled_formula(trace: Trace, i: int) -> CompiledFormula:
    """The prefix-shared layout of ``phi_{i-1}``, built once per trace."""
    phi = trace.formulas[i - 1]
    got = trace.cache.get(id(phi))
    if got is None:
        pivots = [step.pivot for j, step in enumerate(trace.schedule) if trace.formulas[j] is phi]
        got = trace.cache[id(phi)] = CompiledFormula(phi, pivots)
    return got


def prover_round(trace: Trace, i: int, sigma, q: int) -> UnivariatePoly:
    """Round ``i`` message: ``B_q(phi_{i-1})`` with everything but the pivot of step ``i`` fixed."""
    pivot = trace.schedule[i - 1].pivot
    if len(trace.formulas[i - 1]) < 64:
        return partial_eval_B(trace.formulas[i - 1], sigma, pivot, q)
    return compiled_formula(trace, i).partial_eval(sigma, pivot, q)


def adversarial_round(kind: ProverKind, honest: UnivariatePoly, i: int) -> UnivariatePoly:
    if isinstance(kind, TamperRound) and kind.round == i:
        c = list(honest.coeffs)
        c[kind.index] = (c[kind.index] + kind.offset) % honest.q
        return UnivariatePoly(tuple(c), honest.q, honest.pivot)
    if isinstance(kind, DegreeViolation) and kind.round == i:
        c = list(honest.coeffs)
        c[kind.index] = (c[kind.index] + 1) % honest.q
        return UnivariatePoly(tuple(c), honest.q, honest.pivot)
    return honest


def _from_roots(roots: Sequence[int], q: int) -> list[int]:
    coeffs = [1]
    for g in roots:
        # multiply by (x - g)
        coeffs = [(a - g * b) % q for a, b in zip([0] + coeffs, coeffs + [0])]
    return coeffs


def forge_round(p: UnivariatePoly, kind: Kind, s: int, e: int, rng: random.Random) -> UnivariatePoly:
    """A shape-valid polynomial whose mapped value at ``s`` exceeds that of ``p`` by ``e``.

    For resolution rounds the difference is ``c (x^3 - g^3)``; for cleanup rounds
    it is ``c`` times a product of six distinct linear factors whose roots sum to
    zero, so the x^5 term vanishes.
    """
    q = p.q
    if q < 11:
        raise ValueError("forging needs q >= 11")
    while True:
        if kind is Kind.RESOLUTION:
            g = rng.randrange(1, q)
            v = -g * g * g % q
            denom = (v - p.coeffs[1]) % q
            if not denom:
                continue
            c = e * pow(denom, -1, q) % q
            diff = [c * v, 0, 0, c]
        else:
            roots = [rng.randrange(q) for _ in range(5)]
            roots.append(-sum(roots) % q)
            if len(set(roots)) < 6:
                continue
            base = _from_roots(roots, q)
            val = eval_poly(delta(UnivariatePoly.from_ints(base, q)), s)
            if not val:
                continue
            c = e * pow(val, -1, q) % q
            diff = [c * a for a in base]
        return p + UnivariatePoly.from_ints(diff, q, p.pivot)


def adversarial_header(kind: ProverKind, header: Header) -> Header:
    if isinstance(kind, (FlipFinalClaim, Adaptive)):
        return Header(header.q, header.n, header.order, (header.claimed_constant + kind.offset) % header.q)
    return header


# -- verifier ----------------------------------------------------------------

@dataclass
class VerifierState:
    i: int
    w: int
    sigma: list  # index 0 unused
    schedule: list
    q: int
    header: Header
    round_ops: list[int] = field(default_factory=list)
    final_ops: int = 0


def verifier_start(header: Header, rng: random.Random, sigma: Sequence[int] | None = None,
                   require_prime: bool = True) -> VerifierState:
    """Accept or refuse the header and pick the initial assignment.

    ``require_prime=False`` lets a replay run over a composite modulus; the
    message-level verifier never turns it off.
    """
    q = header.q
    if not 3 <= q < MAX_MODULUS or (require_prime and not is_prime(q)):
        raise Rejected(Reason.HEADER, f"modulus {q} is not an acceptable prime")
    if header.claimed_constant % q == 0:
        raise Rejected(Reason.HEADER, "prover claims satisfiable or refuses")
    try:
        order = check_permutation(header.order, header.n)
    except ValueError as exc:
        raise Rejected(Reason.HEADER, str(exc)) from None
    schedule = build_schedule(order)
    if sigma is None:
        values = [rng.randrange(q) for _ in range(header.n)]
    else:
        values = [int(v) % q for v in sigma]
        if len(values) != header.n:
            raise ValueError("initial assignment has the wrong length")
    return VerifierState(len(schedule), header.claimed_constant, [None] + values, schedule, q, header)


def verifier_round(state: VerifierState, p: UnivariatePoly, rng: random.Random | None = None,
                   r: int | None = None) -> int:
    """Check the round polynomial against the current claim; on success draw the challenge."""
    if state.i < 1:
        raise ValueError("no rounds left")
    step = state.schedule[state.i - 1]
    x = step.pivot
    ops = len(p.coeffs)
    if p.q != state.q or not shape_check(p, step.kind):
        state.round_ops.append(ops)
        raise Rejected(Reason.SHAPE, f"round {state.i}: polynomial out of shape for {step}")
    mapped = compatible_map(step.kind)(p)
    ops += len(p.coeffs) + len(mapped.coeffs)
    if eval_poly(mapped, state.sigma[x]) != state.w:
        state.round_ops.append(ops)
        raise Rejected(Reason.CONSISTENCY, f"round {state.i}: claim mismatch")
    if r is None:
        r = rng.randrange(state.q)
    state.w = eval_poly(p, r)
    ops += len(p.coeffs)
    state.sigma[x] = r
    state.i -= 1
    state.round_ops.append(ops)
    return r


def verifier_finalize(state: VerifierState, phi0: Formula) -> bool:
    """The verifier's own check of the last claim; the only step linear in ``|phi_0|``."""
    if state.i != 0:
        raise ValueError("rounds remain")
    state.final_ops = phi0.num_literals + len(phi0)
    return eval_B(phi0, state.sigma, state.q) == state.w


# -- message-level parties ----------------------------------------------------

class ProverParty:
    def __init__(self, trace: Trace, params: ProtocolParams, rng: random.Random,
                 kind: ProverKind = Honest(), force: bool = False):
        self.trace = trace
        self.kind = kind
        self.rng = rng
        header = prover_start(trace, params, rng, force=force)
        self.header = adversarial_header(kind, header)
        self.q = header.q
        self.claim = self.header.claimed_constant  # what the verifier currently believes
        self.sent: UnivariatePoly | None = None
        self.sigma: list | None = None
        self.i = 0
        self.done = False
        self.accepted: bool | None = None
        self.reason = Reason.NONE
        self.seconds = 0.0

    def open(self) -> list[Message]:
        return [wire.header_message(self.header)]

    def _next_poly(self) -> list[Message]:
        if self.i == 0:
            return []
        p = prover_round(self.trace, self.i, self.sigma, self.q)
        if isinstance(self.kind, Adaptive):
            step = self.trace.schedule[self.i - 1]
            s = self.sigma[step.pivot]
            e = (self.claim - eval_poly(compatible_map(step.kind)(p), s)) % self.q
            if e:
                p = forge_round(p, step.kind, s, e, self.rng)
        else:
            p = adversarial_round(self.kind, p, self.i)
        self.sent = p
        return [wire.poly_message(p.coeffs)]

    def on_message(self, msg: Message) -> list[Message]:
        t0 = time.perf_counter()
        try:
            if msg.tag == Tag.VERDICT:
                self.accepted, self.reason = wire.parse_verdict(msg)
                self.done = True
                return []
            if msg.tag == Tag.INITIAL_ASSIGNMENT:
                self.sigma = [None] + wire.parse_assignment(msg, self.trace.n, self.q)
                self.i = self.trace.k
                return self._next_poly()
            if msg.tag == Tag.CHALLENGE:
                r = wire.parse_challenge(msg, self.q)
                self.claim = eval_poly(self.sent, r)
                self.sigma[self.trace.schedule[self.i - 1].pivot] = r
                self.i -= 1
                return self._next_poly()
            raise wire.WireError(f"prover got unexpected {msg.tag.name}")
        finally:
            self.seconds += time.perf_counter() - t0


class VerifierParty:
    def __init__(self, phi0: Formula, rng: random.Random, sigma: Sequence[int] | None = None,
                 challenges: Sequence[int] | None = None):
        self.phi0 = phi0
        self.rng = rng
        self.forced_sigma = sigma
        self.challenges = list(challenges) if challenges is not None else None
        self.state: VerifierState | None = None
        self.done = False
        self.accepted: bool | None = None
        self.reason = Reason.NONE
        self.seconds = 0.0
        self.claims: list[int] = []

    def _verdict(self, accept: bool, reason: Reason = Reason.NONE) -> list[Message]:
        self.done = True
        self.accepted = accept
        self.reason = reason
        return [wire.verdict_message(accept, reason)]

    def _finish(self) -> list[Message]:
        if verifier_finalize(self.state, self.phi0):
            return self._verdict(True)
        return self._verdict(False, Reason.FINAL)

    def on_message(self, msg: Message) -> list[Message]:
        t0 = time.perf_counter()
        try:
            return self._handle(msg)
        except Rejected as exc:
            return self._verdict(False, exc.reason)
        except wire.WireError:
            # malformed prover traffic is a rejection, not a crash
            return self._verdict(False, Reason.HEADER if self.state is None else Reason.SHAPE)
        finally:
            self.seconds += time.perf_counter() - t0

    def _handle(self, msg: Message) -> list[Message]:
        if msg.tag == Tag.HEADER and self.state is None:
            header = wire.parse_header(msg)
            if header.n != self.phi0.num_vars:
                raise Rejected(Reason.HEADER, f"header has n={header.n}, formula has {self.phi0.num_vars}")
            self.state = verifier_start(header, self.rng, self.forced_sigma)
            self.claims.append(self.state.w)
            out = [wire.assignment_message(self.state.sigma[1:])]
            if self.state.i == 0:
                out += self._finish()
            return out
        if msg.tag == Tag.ROUND_POLY and self.state is not None:
            p = UnivariatePoly(wire.parse_poly(msg, self.state.q), self.state.q)
            forced = self.challenges.pop(0) if self.challenges else None
            r = verifier_round(self.state, p, self.rng, forced)
            self.claims.append(self.state.w)
            out = [wire.challenge_message(r)]
            if self.state.i == 0:
                out += self._finish()
            return out
        raise Rejected(Reason.SHAPE, f"unexpected {msg.tag.name}")


# -- drivers -----------------------------------------------------------------

@dataclass
class RunResult:
    accepted: bool
    reason: Reason
    q: int
    rounds: int
    p2v_bytes: int
    v2p_bytes: int
    prover_seconds: float
    verifier_seconds: float
    transcript: list = field(default_factory=list)
    verifier_round_ops: list = field(default_factory=list)
    verifier_final_ops: int = 0


@dataclass
class ProtocolResult:
    accepted: bool
    runs: list[RunResult]
    dp_seconds: float = 0.0

    @property
    def reason(self) -> Reason:
        for run in self.runs:
            if not run.accepted:
                return run.reason
        return Reason.NONE

    @property
    def rounds(self) -> int:
        return sum(r.rounds for r in self.runs)

    @property
    def p2v_bytes(self) -> int:
        return sum(r.p2v_bytes for r in self.runs)

    @property
    def v2p_bytes(self) -> int:
        return sum(r.v2p_bytes for r in self.runs)

    @property
    def prover_seconds(self) -> float:
        return sum(r.prover_seconds for r in self.runs)

    @property
    def verifier_seconds(self) -> float:
        return sum(r.verifier_seconds for r in self.runs)

    def error_bound(self) -> float:
        """Probability that a cheating prover survives every repetition (degree * k / q each)."""
        bound = 1.0
        for r in self.runs:
            k = max(r.rounds, 1)
            bound *= min(1.0, DEGREE * k / r.q)
        return bound


def run_inprocess(prover: ProverParty, verifier: VerifierParty) -> RunResult:
    transcript = []
    pending = collections.deque((wire.PROVER, m) for m in prover.open())
    rounds = 0
    while pending:
        direction, msg = pending.popleft()
        transcript.append((direction, msg))
        msg = wire.decode(wire.encode(msg))
        if direction == wire.PROVER:
            rounds += msg.tag == Tag.ROUND_POLY
            pending.extend((wire.VERIFIER, m) for m in verifier.on_message(msg))
        else:
            pending.extend((wire.PROVER, m) for m in prover.on_message(msg))
    if not verifier.done:
        raise ProtocolAbort("session ended without a verdict")
    p2v, v2p = wire.count_bytes(transcript)
    state = verifier.state
    return RunResult(
        bool(verifier.accepted), verifier.reason, prover.header.q, rounds, p2v, v2p,
        prover.seconds, verifier.seconds, transcript,
        list(state.round_ops) if state else [], state.final_ops if state else 0,
    )


def serve(party, reader, writer, opening: Sequence[Message] = (), transcript: list | None = None,
          outgoing: str = wire.PROVER) -> None:
    """Run one party over a byte stream until it is done."""
    incoming = wire.VERIFIER if outgoing == wire.PROVER else wire.PROVER
    try:
        for msg in opening:
            wire.write_frame(writer, msg)
            if transcript is not None:
                transcript.append((outgoing, msg))
        while not party.done:
            msg = wire.read_frame(reader)
            if transcript is not None:
                transcript.append((incoming, msg))
            for reply in party.on_message(msg):
                wire.write_frame(writer, reply)
                if transcript is not None:
                    transcript.append((outgoing, reply))
    except (EOFError, OSError, wire.WireError) as exc:
        raise ProtocolAbort(f"transport failure: {exc}") from exc


def run_stream_prover(prover: ProverParty, reader, writer) -> RunResult:
    transcript: list = []
    serve(prover, reader, writer, prover.open(), transcript)
    p2v, v2p = wire.count_bytes(transcript)
    rounds = sum(1 for d, m in transcript if m.tag == Tag.ROUND_POLY)
    return RunResult(bool(prover.accepted), prover.reason, prover.header.q, rounds, p2v, v2p,
                     prover.seconds, 0.0, transcript)


def spawn_verifier(dimacs_path: str, seed: int) -> subprocess.Popen:
    cmd = [sys.executable, "-m", "dpcert", "serve-verifier", dimacs_path, "--seed-verifier", str(seed)]
    env = dict(os.environ)
    src = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    env["PYTHONPATH"] = src + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE, env=env)


def _run_child(prover: ProverParty, dimacs_path: str, seed: int) -> RunResult:
    try:
        child = spawn_verifier(dimacs_path, seed)
    except OSError as exc:
        raise ProtocolAbort(f"could not spawn verifier: {exc}") from exc
    try:
        result = run_stream_prover(prover, child.stdout, child.stdin)
    finally:
        child.stdin.close()
        err = child.stderr.read().decode()
        child.wait()
    for line in err.splitlines():
        if line.startswith("{"):
            stats = json.loads(line)
            result.verifier_seconds = stats.get("verifier_seconds", 0.0)
            result.verifier_round_ops = stats.get("round_ops", [])
            result.verifier_final_ops = stats.get("final_ops", 0)
    return result


def run_protocol(phi: Formula, trace: Trace, params: ProtocolParams | None = None,
                 kind: ProverKind = Honest(), transport: str = "inproc",
                 dimacs_path: str | None = None, connect: str | None = None,
                 force: bool = False) -> ProtocolResult:
    """Certify ``trace`` (computed from ``phi``) with the chosen transport.

    ``transport`` is ``inproc``, ``stream`` (verifier in a child process over
    pipes) or ``socket`` (verifier already listening at ``connect``).  With
    several repetitions the verdict is the conjunction.
    """
    params = params or ProtocolParams()
    runs = []
    tmp = None
    try:
        if transport == "stream" and dimacs_path is None:
            fd, tmp = tempfile.mkstemp(suffix=".cnf")
            with os.fdopen(fd, "w") as fh:
                fh.write(phi.to_dimacs())
            dimacs_path = tmp
        for rep in range(params.repetitions):
            prover_rng = random.Random(derive_seed(params.prover_seed, rep))
            vseed = derive_seed(params.verifier_seed, rep)
            prover = ProverParty(trace, params, prover_rng, kind, force=force)
            if transport == "inproc":
                verifier = VerifierParty(phi, random.Random(vseed))
                result = run_inprocess(prover, verifier)
            elif transport == "stream":
                result = _run_child(prover, dimacs_path, vseed)
            elif transport == "socket":
                host, port = (connect or "").rsplit(":", 1)
                try:
                    sock = socket.create_connection((host, int(port)))
                except OSError as exc:
                    raise ProtocolAbort(f"cannot connect to {connect}: {exc}") from exc
                with sock, sock.makefile("rb") as rd, sock.makefile("wb") as wr:
                    result = run_stream_prover(prover, rd, wr)
            else:
                raise ValueError(f"unknown transport {transport!r}")
            runs.append(result)
    finally:
        if tmp:
            os.unlink(tmp)
    return ProtocolResult(all(r.accepted for r in runs), runs, trace.seconds)
