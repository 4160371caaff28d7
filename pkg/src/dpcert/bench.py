"""Instance generators, conventional certificates and experiment tables."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import os
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .dp import DPTimeout, Kind, Trace, choose_order, run
from .formula import Formula, canonical, is_tautology, preprocess
from .protocol import ProtocolParams, ProtocolResult, run_protocol

log = logging.getLogger(__name__)


# -- generators --------------------------------------------------------------

def gen_php(holes: int, pigeons: int | None = None) -> Formula:
    """Pigeonhole: ``pigeons`` (default ``holes + 1``) pigeons into ``holes`` holes.

    Variable ``(i - 1) * holes + j`` says pigeon i sits in hole j.
    """
    if holes < 1:
        raise ValueError("need at least one hole")
    pigeons = holes + 1 if pigeons is None else pigeons
    var = lambda i, j: (i - 1) * holes + j
    clauses = [[var(i, j) for j in range(1, holes + 1)] for i in range(1, pigeons + 1)]
    for j in range(1, holes + 1):
        for i, i2 in itertools.combinations(range(1, pigeons + 1), 2):
            clauses.append([-var(i, j), -var(i2, j)])
    return Formula.from_clauses(clauses, pigeons * holes)


def gen_random_kcnf(n: int, m: int, k: int = 3, seed: int | None = None) -> Formula:
    if k > n:
        raise ValueError(f"clause width {k} exceeds {n} variables")
    rng = random.Random(seed)
    clauses = []
    for _ in range(m):
        vs = rng.sample(range(1, n + 1), k)
        clauses.append([v if rng.random() < 0.5 else -v for v in vs])
    return Formula.from_clauses(clauses, n)


# -- resolution trace --------------------------------------------------------

class ResolutionStep(NamedTuple):
    clause: tuple[int, ...]
    antecedents: tuple[int, int] | None  # None for input clauses
    pivot: int = 0


def resolution_steps(trace: Trace) -> list[ResolutionStep]:
    """Input clauses, then one step per distinct resolving pair, stopping at the empty clause.

    Resolvents are given in cleaned-up (set) form; tautological ones are skipped
    since the following cleanups delete them.
    """
    if not trace.unsatisfiable:
        raise ValueError("trace is not a refutation")
    steps: list[ResolutionStep] = []
    ids: dict[tuple[int, ...], int] = {}

    def add(step):
        steps.append(step)
        ids.setdefault(step.clause, len(steps))

    for clause in trace.formulas[0].sorted_items():
        add(ResolutionStep(canonical(set(clause[0])), None))
    if () in ids:
        return steps
    for i, step in enumerate(trace.schedule):
        if step.kind is not Kind.RESOLUTION:
            continue
        x = step.pivot
        phi = trace.formulas[i]
        pos = [c for c in phi.clauses if x in c]
        neg = [c for c in phi.clauses if -x in c]
        for c1 in pos:
            for c2 in neg:
                lits = {l for l in c1 if l != x} | {l for l in c2 if l != -x}
                if is_tautology(lits):
                    continue
                add(ResolutionStep(canonical(lits), (ids[c1], ids[c2]), x))
                if not lits:
                    return steps
    raise AssertionError("refutation trace never produced the empty clause")


def emit_resolution_trace(trace: Trace) -> str:
    """Text certificate: ``<id> <literals> 0 [<ante1> <ante2>] 0`` per line."""
    out = ["c resolution trace\n"]
    for idx, step in enumerate(resolution_steps(trace), 1):
        ante = "" if step.antecedents is None else " %d %d" % step.antecedents
        out.append(f"{idx} {' '.join(map(str, step.clause + (0,)))}{ante} 0\n")
    return "".join(out)


class CheckResult(NamedTuple):
    ok: bool
    failed_step: int | None = None
    message: str = ""


def check_resolution_trace(phi0: Formula, text: str) -> CheckResult:
    """Replay every step independently; the last clause must be empty."""
    inputs = {canonical(set(c)) for c in phi0.clauses}
    known: dict[int, frozenset] = {}
    last = None
    for line in text.splitlines():
        if not line.strip() or line.startswith("c"):
            continue
        nums = [int(t) for t in line.split()]
        idx = nums[0]
        try:
            cut = nums.index(0, 1)
        except ValueError:
            return CheckResult(False, idx, "missing 0 after literals")
        lits = frozenset(nums[1:cut])
        ante = nums[cut + 1:]
        if not ante or ante[-1] != 0:
            return CheckResult(False, idx, "missing final 0")
        ante = ante[:-1]
        if idx in known:
            return CheckResult(False, idx, "duplicate step id")
        if not ante:
            if canonical(lits) not in inputs:
                return CheckResult(False, idx, "claimed input clause is not in the formula")
        elif len(ante) == 2:
            a, b = ante
            if a not in known or b not in known or a >= idx or b >= idx:
                return CheckResult(False, idx, "antecedent does not precede the step")
            c1, c2 = known[a], known[b]
            clash = [l for l in c1 if -l in c2]
            if len(clash) != 1:
                return CheckResult(False, idx, f"antecedents clash on {len(clash)} literals")
            lit = clash[0]
            resolved = (c1 - {lit}) | (c2 - {-lit})
            if resolved != lits:
                return CheckResult(False, idx, "resolvent mismatch")
        else:
            return CheckResult(False, idx, "need zero or two antecedents")
        known[idx] = lits
        last = lits
    if last is None or last:
        return CheckResult(False, None, "trace does not end with the empty clause")
    return CheckResult(True)


# -- DRAT --------------------------------------------------------------------

def emit_drat(trace: Trace) -> str:
    """Clause additions and deletions in DRAT text syntax, ending with the empty clause."""
    if not trace.unsatisfiable:
        raise ValueError("trace is not a refutation")
    out = []
    live = {canonical(set(c)) for c in trace.formulas[0].clauses}
    if () in live:
        return "0\n"
    for i, step in enumerate(trace.schedule):
        if step.kind is not Kind.RESOLUTION:
            continue
        x = step.pivot
        phi = trace.formulas[i]
        pos = [c for c in phi.clauses if x in c]
        neg = [c for c in phi.clauses if -x in c]
        for c1 in pos:
            for c2 in neg:
                lits = {l for l in c1 if l != x} | {l for l in c2 if l != -x}
                if is_tautology(lits):
                    continue
                if not lits:
                    out.append("0\n")
                    return "".join(out)
                key = canonical(lits)
                if key not in live:
                    live.add(key)
                    out.append(" ".join(map(str, key + (0,))) + "\n")
        for c in pos + neg:
            live.discard(c)
            out.append("d " + " ".join(map(str, c + (0,))) + "\n")
    raise AssertionError("refutation trace never produced the empty clause")


# -- experiments -------------------------------------------------------------

CSV_COLUMNS = (
    "instance", "policy", "n", "clauses", "k", "verdict", "dp_ms", "prover_ms", "verifier_ms",
    "p2v_bytes", "v2p_bytes", "res_trace_bytes", "drat_bytes", "repetitions", "q_bits", "seed",
)


@dataclass
class Metrics:
    n: int
    k: int
    dp_seconds: float
    prover_seconds: float = 0.0
    verifier_seconds: float = 0.0
    p2v_bytes: int = 0
    v2p_bytes: int = 0
    clause_counts: list[int] = field(default_factory=list)

    @property
    def peak_clauses(self) -> int:
        return max(self.clause_counts, default=0)


def collect_metrics(trace: Trace, result: ProtocolResult | None = None) -> Metrics:
    m = Metrics(trace.n, trace.k, trace.seconds, clause_counts=trace.clause_profile())
    if result is not None:
        m.prover_seconds = result.prover_seconds
        m.verifier_seconds = result.verifier_seconds
        m.p2v_bytes = result.p2v_bytes
        m.v2p_bytes = result.v2p_bytes
    return m


def default_corpus(max_holes: int = 5, seed: int = 0) -> list[tuple[str, Formula]]:
    corpus = [(f"php{p}", gen_php(p)) for p in range(1, max_holes + 1)]
    rng = random.Random(seed)
    for n in (10, 12, 14):
        s = rng.randrange(1 << 30)
        corpus.append((f"rand3_n{n}_s{s}", gen_random_kcnf(n, round(4.26 * n), 3, s)))
    return corpus


def run_experiment(instances: Iterable[tuple[str, Formula]], policies: Sequence[str] = ("lexi", "greedy"),
                   params: ProtocolParams | None = None, timeout: float = 60.0, seed: int = 0,
                   emit_dir: str | None = None) -> list[dict]:
    """One row per (instance, policy); timeouts become censored rows."""
    params = params or ProtocolParams()
    rows = []
    for name, phi in instances:
        phi = preprocess(phi)
        for policy in policies:
            row = dict.fromkeys(CSV_COLUMNS, "")
            row.update(instance=name, policy=policy, n=phi.num_vars, clauses=phi.num_clauses,
                       repetitions=params.repetitions, q_bits=params.prime_bits, seed=seed)
            t0 = time.perf_counter()
            try:
                order = choose_order(phi, policy, seed, deadline=t0 + timeout)
                trace = run(phi, order, deadline=t0 + timeout)
            except DPTimeout:
                row.update(verdict="timeout", dp_ms=round(timeout * 1000, 3))
                rows.append(row)
                log.info("%s/%s timed out", name, policy)
                continue
            dp_seconds = time.perf_counter() - t0
            row.update(k=trace.k, verdict=trace.verdict, dp_ms=round(dp_seconds * 1000, 3))
            if trace.unsatisfiable:
                result = run_protocol(phi, trace, params)
                res_text = emit_resolution_trace(trace)
                drat_text = emit_drat(trace)
                row.update(
                    verdict="accept" if result.accepted else "reject",
                    prover_ms=round(result.prover_seconds * 1000, 3),
                    verifier_ms=round(result.verifier_seconds * 1000, 3),
                    p2v_bytes=result.p2v_bytes, v2p_bytes=result.v2p_bytes,
                    res_trace_bytes=len(res_text.encode()), drat_bytes=len(drat_text.encode()),
                )
                if emit_dir:
                    os.makedirs(emit_dir, exist_ok=True)
                    stem = os.path.join(emit_dir, f"{name}.{policy}")
                    with open(stem + ".res", "w") as fh:
                        fh.write(res_text)
                    with open(stem + ".drat", "w") as fh:
                        fh.write(drat_text)
            rows.append(row)
    return rows


def write_csv(rows: Sequence[dict], fh=None) -> str:
    buf = fh or io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue() if fh is None else ""
