"""scikit-learn style front ends for solving and certifying."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dp import choose_order, run
from .formula import preprocess
from .protocol import ProtocolParams, parse_adversary, run_protocol
from .validation import check_formula, check_formulas, check_order_policy, check_prime_bits


class DavisPutnamSolver(BaseEstimator):
    """Decide satisfiability with the Davis-Putnam resolution procedure.

    ``fit`` solves one formula and keeps its trace; ``predict`` solves a batch
    and returns ``True`` for satisfiable formulas.
    """

    def __init__(self, order="lexi", random_state=None):
        self.order = order
        self.random_state = random_state

    def _solve(self, X):
        check_order_policy(self.order)
        phi = preprocess(check_formula(X))
        order = choose_order(phi, self.order, self.random_state)
        return phi, run(phi, order)

    def fit(self, X, y=None):
        self.formula_, self.trace_ = self._solve(X)
        self.order_ = self.trace_.order
        self.satisfiable_ = not self.trace_.unsatisfiable
        self.n_rounds_ = self.trace_.k
        return self

    def predict(self, X):
        return np.array([not self._solve(phi)[1].unsatisfiable for phi in check_formulas(X)], dtype=bool)


class InteractiveCertifier(BaseEstimator):
    """Solve, then certify unsatisfiability through the interactive protocol.

    After ``fit``, ``result_`` holds the protocol outcome (``None`` when the
    formula is satisfiable and there is nothing to certify).
    """

    def __init__(self, order="greedy", prime_bits=62, repetitions=1, prover_seed=0,
                 verifier_seed=1, adversary="honest", transport="inproc", prime=None, random_state=None):
        self.order = order
        self.prime_bits = prime_bits
        self.repetitions = repetitions
        self.prover_seed = prover_seed
        self.verifier_seed = verifier_seed
        self.adversary = adversary
        self.transport = transport
        self.prime = prime
        self.random_state = random_state

    def _params(self):
        bits = self.prime_bits if self.prime is not None else check_prime_bits(self.prime_bits)
        return ProtocolParams(bits, self.repetitions, self.prover_seed, self.verifier_seed, self.prime)

    def _certify(self, X):
        solver = DavisPutnamSolver(self.order, self.random_state).fit(X)
        if solver.satisfiable_:
            return solver, None
        result = run_protocol(solver.formula_, solver.trace_, self._params(),
                              parse_adversary(self.adversary), self.transport)
        return solver, result

    def fit(self, X, y=None):
        self.solver_, self.result_ = self._certify(X)
        self.trace_ = self.solver_.trace_
        self.accepted_ = bool(self.result_ and self.result_.accepted)
        return self

    def predict(self, X):
        out = []
        for phi in check_formulas(X):
            result = self._certify(phi)[1]
            out.append(bool(result and result.accepted))
        return np.array(out, dtype=bool)

    def error_bound(self):
        check_is_fitted(self, "result_")
        return None if self.result_ is None else self.result_.error_bound()
