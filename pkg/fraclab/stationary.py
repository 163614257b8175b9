"""Stationary singular problems.

Every solve in this module reduces to the nodal system

    G(u) = shift * u + scale * (A u - (u + eps)^(-q)) - rhs = 0

    regularized / limit problem    shift = 1,   scale = lambda,  rhs = g
    pure singular problem          shift = 0,   scale = 1,       rhs = 0
    monotone iteration step        shift = K0,  scale = 1,       rhs = f(x, u_prev) + K0 u_prev

G is concave and its Jacobian is an M-matrix, so a Newton step from any
point lands on a subsolution and Newton iterates started from a subsolution
increase monotonically towards the solution. The damping floor is the
largest dyadic multiple of phi1 that is itself a subsolution.
"""
import logging
from collections import namedtuple

import numpy as np
import pandas as pd
from scipy import linalg

from .discretization.fraclap import eigen_principal
from .discretization.grid import Field, values_of
from .enums import Regime, Direction
from .exceptions import ParameterError, SolverError, ConvergenceError, PositivityError, InvariantViolation
from .models.problem import StationaryProblem, Envelopes, validate_params

logger = logging.getLogger(__name__)

Tolerances = namedtuple('Tolerances', [
    'newton', 'continuation', 'iteration', 'newton_cap', 'continuation_cap', 'monotone_cap', 'eps0', 'eps_factor',
    'stagnation_window'
],
                        defaults=[1e-10, 1e-7, 1e-8, 200, 60, 10_000, 1.0, 0.5, 5])

DYADIC_EXPONENTS = (-60, 60)
MIN_DAMPING = 2.0**-30
MONOTONICITY_TOL = 1e-10


def _largest_dyadic(admissible, lo=DYADIC_EXPONENTS[0], hi=DYADIC_EXPONENTS[1]):
    """Largest 2^j, lo <= j <= hi, with `admissible(2^j)`; admissibility must be downward closed"""
    if not admissible(2.0**lo):
        return None
    if admissible(2.0**hi):
        return 2.0**hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if admissible(2.0**mid):
            lo = mid
        else:
            hi = mid
    return 2.0**lo


class SingularSystem:
    """The nodal system G(u) = shift u + scale (A u - (u + eps)^(-q)) - rhs."""
    def __init__(self, op, rhs, shift, scale, q, eps):
        self.op = op
        self.rhs = np.asarray(rhs, dtype=float)
        self.shift = float(shift)
        self.scale = float(scale)
        self.q = float(q)
        self.eps = float(eps)

    def residual(self, u, Au=None):
        Au = self.op.dot(u) if Au is None else Au
        with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
            return self.shift * u + self.scale * (Au - (u + self.eps)**(-self.q)) - self.rhs

    def jacobian(self, u):
        J = self.scale * self.op.matrix.copy()
        J[np.diag_indices_from(J)] += self.shift + self.scale * self.q * (u + self.eps)**(-self.q - 1)
        return J

    def reference(self, u):
        """Magnitude of the largest term of G, so that tolerances sit above the round-off floor"""
        abs_Au = 2 * self.op.diagonal * np.abs(u) - self.op.dot(np.abs(u))  # |A| |u|, A is an M-matrix
        with np.errstate(divide='ignore', over='ignore'):
            singular = (u + self.eps)**(-self.q)
        terms = (np.abs(self.shift * u), self.scale * abs_Au, self.scale * singular, np.abs(self.rhs))
        return max(1.0, *(float(np.max(t)) for t in terms))

    def barrier(self, phi, Aphi):
        """Largest dyadic m with G(m phi) <= 0 at every node, or None"""
        return _largest_dyadic(lambda m: np.all(self.residual(m * phi, m * Aphi) <= 0))

    def __repr__(self):
        return "SingularSystem(shift={}, scale={}, q={}, eps={})".format(self.shift, self.scale, self.q, self.eps)


class SingularSolver:
    """Stationary solver runner bound to one operator.

    Keeps a ledger of every continuation level, monotone iteration and Newton
    solve in `self.history` (see `ledger`), and the constants it chose
    (barriers, envelope multipliers, K0) in `self.constants`.
    """
    def __init__(self, op, eig=None, tolerances=None):
        self.op = op
        self.eig = eig if eig is not None else eigen_principal(op)
        self.tolerances = tolerances if tolerances is not None else Tolerances()
        self.history = []
        self.constants = {}
        self._phi = self.eig.phi1.values
        self._Aphi = op.dot(self._phi)

    @property
    def grid(self):
        return self.op.grid

    @property
    def ledger(self):
        """Returns `self.history` as a `pd.DataFrame`"""
        return pd.DataFrame(self.history)

    def _record(self, **row):
        self.history.append(row)

    # Newton

    def newton(self, system, initial=None):
        """Solves `system` by damped Newton. Returns (u, iterations, residual).

        Starts from the barrier when `initial` is None. A failed warm start is
        retried once from the barrier.
        """
        m = system.barrier(self._phi, self._Aphi)
        if m is None:
            raise SolverError('No positive subsolution of the form m * phi1 for {}'.format(system))
        floor = m * self._phi

        if initial is not None:
            try:
                return self._newton(system, np.array(initial, dtype=float), floor)
            except SolverError as err:
                logger.info('Warm-started Newton failed (%s), restarting from the barrier', err)
        return self._newton(system, floor.copy(), floor)

    def _newton(self, system, u, floor):
        tol, cap = self.tolerances.newton, self.tolerances.newton_cap
        residual = system.residual(u)
        norm = float(np.max(np.abs(residual)))

        for iteration in range(1, cap + 1):
            J = system.jacobian(u)
            try:
                d = -linalg.cho_solve(linalg.cho_factor(J, check_finite=False), residual, check_finite=False)
            except linalg.LinAlgError as err:
                raise SolverError('Newton Jacobian is singular: {}'.format(err), last_residual=norm, best=u)

            theta = 1.0
            while True:
                candidate = u + theta * d
                if np.all(candidate >= 0.5 * floor) and np.all(candidate + system.eps > 0):
                    break
                theta *= 0.5
                if theta < MIN_DAMPING:
                    raise PositivityError('Damping could not keep the iterate above the barrier',
                                          last_residual=norm,
                                          iterations=iteration,
                                          best=u)

            previous = norm
            u = candidate
            residual = system.residual(u)
            norm = float(np.max(np.abs(residual)))
            reference = system.reference(u)
            logger.debug('Newton %d: residual %.3e (reference %.3e) theta %g', iteration, norm, reference, theta)

            if norm <= tol * reference:
                if norm > 64 * np.finfo(float).eps * reference and norm < previous:
                    # One more step once inside the tolerance lands at round-off
                    u, residual, norm = self._refine(system, u, residual, norm, floor)
                return u, iteration, norm
            if theta == 1.0 and np.max(np.abs(d)) <= 1e-15 * max(1.0, np.max(np.abs(u))):
                logger.warning('Newton step below round-off with residual %.3e above tolerance %.3e', norm,
                               tol * reference)
                return u, iteration, norm

        raise ConvergenceError('Newton did not converge in {} iterations'.format(cap),
                               last_residual=norm,
                               iterations=cap,
                               best=u)

    def _refine(self, system, u, residual, norm, floor):
        J = system.jacobian(u)
        candidate = u - linalg.cho_solve(linalg.cho_factor(J, check_finite=False), residual, check_finite=False)
        if np.all(candidate >= 0.5 * floor) and np.all(candidate + system.eps > 0):
            candidate_residual = system.residual(candidate)
            candidate_norm = float(np.max(np.abs(candidate_residual)))
            if candidate_norm < norm:
                return candidate, candidate_residual, candidate_norm
        return u, residual, norm

    # Continuation in epsilon

    def continuation(self, make_system, eps_target=0.0, initial=None, stage='continuation'):
        """Walks eps down the ladder eps0 * factor^j, warm-starting each level from the last.

        With `eps_target = 0` the ladder stops once successive levels differ by
        less than the continuation tolerance and a final solve at eps = 0
        follows. With `eps_target > 0` the ladder stops exactly at the target.
        A warm start `initial` skips the ladder for the limit problem.

        Args:
            make_system (callable):     eps -> SingularSystem.
            eps_target (float):         Regularization to reach.
            initial (np.ndarray):       Optional warm start for the limit problem.
            stage (str):                Label used in the ledger.

        Returns:
            np.ndarray:                 Nodal solution.
        """
        tol = self.tolerances
        if eps_target == 0 and initial is not None:
            u, iterations, residual = self.newton(make_system(0.0), initial=initial)
            self._record(stage=stage, level=0, epsilon=0.0, gap=np.nan, newton_iterations=iterations,
                         residual=residual)
            return u

        eps = tol.eps0
        while make_system(eps).barrier(self._phi, self._Aphi) is None:
            eps *= tol.eps_factor
            if eps < 2.0**DYADIC_EXPONENTS[0]:
                raise SolverError('No regularization level admits a positive subsolution')
            logger.info('Lowering the first regularization level to %g', eps)
        if eps_target >= eps:
            eps = eps_target

        u, iterations, residual = self.newton(make_system(eps))
        self._record(stage=stage, level=0, epsilon=eps, gap=np.nan, newton_iterations=iterations, residual=residual)
        if eps == eps_target:
            return u

        stalled, previous_gap = 0, np.inf
        for level in range(1, tol.continuation_cap + 1):
            next_eps = eps * tol.eps_factor
            final = eps_target > 0 and next_eps <= eps_target
            if final:
                next_eps = eps_target
            u_next, iterations, residual = self.newton(make_system(next_eps), initial=u)
            gap = float(np.max(np.abs(u_next - u)))
            self._record(stage=stage, level=level, epsilon=next_eps, gap=gap, newton_iterations=iterations,
                         residual=residual)
            logger.info('Continuation level %d: eps=%.3e gap=%.3e', level, next_eps, gap)
            u, eps = u_next, next_eps

            if final:
                return u
            if eps_target == 0 and gap < tol.continuation:
                break
            # Gaps may grow while eps is above the solution scale; only stalls below it count
            if eps < np.min(u):
                stalled = stalled + 1 if gap >= previous_gap else 0
                if stalled >= tol.stagnation_window:
                    raise ConvergenceError('Continuation stagnated at eps={:.3e}'.format(eps),
                                           last_residual=gap,
                                           iterations=level,
                                           best=u)
            previous_gap = gap
        else:
            raise ConvergenceError('Continuation did not settle within {} levels'.format(tol.continuation_cap),
                                   last_residual=gap,
                                   iterations=tol.continuation_cap,
                                   best=u)

        u, iterations, residual = self.newton(make_system(0.0), initial=u)
        self._record(stage=stage, level='limit', epsilon=0.0, gap=np.nan, newton_iterations=iterations,
                     residual=residual)
        return u

    # Problems

    def _resolvent_system(self, problem):
        g = values_of(problem.g, self.grid)
        return lambda eps: SingularSystem(self.op, g, 1.0, problem.lam, problem.q, eps)

    def regularized(self, problem):
        if not problem.epsilon > 0:
            raise ParameterError('The regularized problem needs epsilon > 0, got {}'.format(problem.epsilon))
        self._check_order(problem.s)
        u = self.continuation(self._resolvent_system(problem), eps_target=problem.epsilon, stage='regularized')
        return Field(self.grid, u)

    def limit(self, problem, initial=None):
        self._check_order(problem.s)
        if problem.regime != Regime.STANDARD:
            raise ParameterError('q={}, s={} is in the very singular regime'.format(problem.q, problem.s))
        if initial is not None:
            initial = values_of(initial, self.grid)
        u = self.continuation(self._resolvent_system(problem), initial=initial, stage='limit')
        return Field(self.grid, u)

    def pure_singular(self, q):
        validate_params(q, self.op.s)
        zero = np.zeros(self.grid.n)
        u = self.continuation(lambda eps: SingularSystem(self.op, zero, 0.0, 1.0, q, eps), stage='pure_singular')
        return Field(self.grid, u)

    # Sub- and supersolutions

    def subsolution(self, q, bound):
        """Largest dyadic m with A(m phi1) - (m phi1)^(-q) <= -bound at every node"""
        b, Ab = self._phi, self._Aphi

        def admissible(m):
            with np.errstate(over='ignore'):
                return np.all(m * Ab - (m * b)**(-q) <= -bound)

        m = _largest_dyadic(admissible)
        if m is None:
            raise SolverError('No subsolution m * phi1 with m >= 2^{} for bound {}'.format(DYADIC_EXPONENTS[0], bound))
        return m, Field(self.grid, m * b)

    def supersolution(self, q, mu, l, w):
        """Dyadic M and M' with A u - u^(-q) >= mu u + l at every node for u = M w + M' phi1"""
        lambda1 = self.eig.lambda1
        if mu >= lambda1:
            raise ParameterError('Growth bound mu={} must be below the principal eigenvalue {}'.format(mu, lambda1))
        if l < 0:
            raise ParameterError('Lower bound l must be nonnegative, got {}'.format(l))

        w = values_of(w, self.grid)
        Aw = self.op.dot(w)
        layer = 0.1 * self.grid.length
        c1 = float(np.min(self._phi[self.grid.interior_mask(layer)]))
        w_max = float(np.max(w))

        def satisfied(M, Mprime):
            u = M * w + Mprime * self._phi
            return np.all(M * Aw + Mprime * self._Aphi - u**(-q) >= mu * u + l)

        for j in range(0, DYADIC_EXPONENTS[1] + 1):
            M = 2.0**j
            Mprime0 = (mu * M * w_max + l) / (c1 * (lambda1 - mu))
            candidates = [Mprime0 * 2.0**k for k in range(DYADIC_EXPONENTS[1] + 1)] if Mprime0 > 0 else [0.0]
            for Mprime in candidates:
                if satisfied(M, Mprime):
                    return M, Mprime, Field(self.grid, M * w + Mprime * self._phi)
        raise SolverError('No supersolution M w + M\' phi1 found for mu={}, l={}'.format(mu, l))

    def envelopes(self, q, w, bound, mu=0.0):
        """Sub/supersolution pair with A u - u^(-q) <= -bound below and >= mu u + bound above"""
        m, lower = self.subsolution(q, bound)
        M, Mprime, upper = self.supersolution(q, mu, bound, w)
        if np.any(lower.values > upper.values):
            raise InvariantViolation('Subsolution exceeds supersolution',
                                     violation=float(np.max(lower.values - upper.values)))
        return Envelopes(lower, upper, m=m, M=M, Mprime=Mprime, bound=bound, mu=mu)

    # Semilinear problem

    def monotone_step(self, nl, u, K0, q, initial=None):
        """One step of the monotone scheme A v - v^(-q) + K0 v = f(x, u) + K0 u"""
        u = np.asarray(u, dtype=float)
        rhs = nl(self.grid.nodes, u) + K0 * u
        system = SingularSystem(self.op, rhs, K0, 1.0, q, 0.0)
        return self.newton(system, initial=u if initial is None else initial)

    def semilinear(self, nl, q, direction=Direction.ASCENDING):
        s = self.op.s
        if validate_params(q, s) != Regime.STANDARD:
            raise ParameterError('q={}, s={} is in the very singular regime'.format(q, s))
        if nl.growth_mu >= self.eig.lambda1:
            raise ParameterError('Growth bound mu={} must be below the principal eigenvalue {}'.format(
                nl.growth_mu, self.eig.lambda1))

        w = self.pure_singular(q)
        env = self.envelopes(q, w, nl.lower_bound_l, nl.growth_mu)
        K0 = nl.lipschitz(0.0, env.upper.max())
        self.constants.update(env.constants, K0=K0)
        self.envelope_pair = env

        lower, upper = env.lower.values, env.upper.values
        u = (lower if direction == Direction.ASCENDING else upper).copy()
        sign = 1.0 if direction == Direction.ASCENDING else -1.0

        for iteration in range(1, self.tolerances.monotone_cap + 1):
            u_next, newton_iterations, residual = self.monotone_step(nl, u, K0, q)
            change = float(np.max(np.abs(u_next - u)))
            backwards = float(np.max(sign * (u - u_next)))
            escape = float(max(np.max(lower - u_next), np.max(u_next - upper)))
            self._record(stage='monotone_' + direction.value, level=iteration, epsilon=0.0, gap=change,
                         newton_iterations=newton_iterations, residual=residual)
            if backwards > MONOTONICITY_TOL:
                raise InvariantViolation(
                    'Monotone iteration moved the wrong way by {:.3e} at step {} (K0={} too small?)'.format(
                        backwards, iteration, K0),
                    violation=backwards)
            if escape > MONOTONICITY_TOL:
                raise InvariantViolation('Monotone iterate left the envelopes by {:.3e}'.format(escape),
                                         violation=escape)
            u = u_next
            if change < self.tolerances.iteration:
                logger.info('Monotone %s iteration converged in %d steps', direction.value, iteration)
                return Field(self.grid, u)

        raise ConvergenceError('Monotone iteration did not converge in {} steps'.format(self.tolerances.monotone_cap),
                               last_residual=change,
                               iterations=self.tolerances.monotone_cap,
                               best=u)

    def _check_order(self, s):
        if abs(s - self.op.s) > 1e-14:
            raise ParameterError('Problem order s={} does not match the operator order {}'.format(s, self.op.s))


# Functional interface


def solve_regularized(p, op, eig=None, tolerances=None):
    """Solves u + lam (A u - (u + eps)^(-q)) = g for eps > 0.

    Args:
        p (StationaryProblem):          Problem with epsilon > 0.
        op (FracOperator):              Assembled operator.
        eig (EigenPair, optional):      Principal eigenpair, computed when omitted.
        tolerances (Tolerances):        Solver tolerances. Defaults to `Tolerances()`.

    Returns:
        Field:                          The positive solution.
    """
    return SingularSolver(op, eig, tolerances).regularized(p)


def solve_S(p, op, eig=None, initial=None, tolerances=None):
    """Solves the limit problem u + lam (A u - u^(-q)) = g (standard regime only).

    The regularization is continued to zero from eps0 unless a warm start
    `initial` is given, in which case Newton runs on the limit problem directly.
    """
    return SingularSolver(op, eig, tolerances).limit(p, initial=initial)


def solve_pure_singular(q, s, op, eig=None, tolerances=None):
    """Solves A w = w^(-q)"""
    solver = SingularSolver(op, eig, tolerances)
    solver._check_order(s)
    return solver.pure_singular(q)


def resolvent_barrier(p, op, eig=None):
    """Largest dyadic m with m * phi1 a nodal subsolution of the problem `p` at its own epsilon, or None"""
    eig = eig if eig is not None else eigen_principal(op)
    phi = eig.phi1.values
    system = SingularSystem(op, values_of(p.g, op.grid), 1.0, p.lam, p.q, p.epsilon)
    return system.barrier(phi, op.dot(phi))


def build_subsolution(q, s, op, eig, bound):
    """Returns (m, m * phi1) with A(m phi1) - (m phi1)^(-q) <= -bound nodally"""
    solver = SingularSolver(op, eig)
    solver._check_order(s)
    return solver.subsolution(q, bound)


def build_supersolution(q, s, op, eig, mu, l, w):
    """Returns (M, M', M w + M' phi1) with A u - u^(-q) >= mu u + l nodally"""
    solver = SingularSolver(op, eig)
    solver._check_order(s)
    return solver.supersolution(q, mu, l, w)


def solve_Q(nl, q, s, op, eig, direction=Direction.ASCENDING, tolerances=None):
    """Solves A u - u^(-q) = f(x, u) by the monotone scheme from the sub- or supersolution"""
    solver = SingularSolver(op, eig, tolerances)
    solver._check_order(s)
    return solver.semilinear(nl, q, direction)


def operator_monotonicity_gap(u, v, lam, q, op):
    """Returns h * sum (A_lam(v) - A_lam(u)) (v - u) with A_lam(u) = u + lam (A u - u^(-q))"""
    u = values_of(u, op.grid)
    v = values_of(v, op.grid)
    if np.any(u <= 0) or np.any(v <= 0):
        raise ParameterError('Monotonicity gap needs positive fields')

    def A_lam(z):
        return z + lam * (op.dot(z) - z**(-q))

    return float(op.h * np.dot(A_lam(v) - A_lam(u), v - u))


def fit_envelopes(u0, envelopes, max_doublings=60):
    """Widens `envelopes` by dyadic factors until `u0` lies between them.

    The lower envelope is scaled down and the upper one up; both keep their
    sub/supersolution property under these scalings.

    Returns:
        (Envelopes, dict):  Widened envelopes and the factors applied.
    """
    u = values_of(u0, envelopes.grid)
    if np.any(u <= 0):
        raise ParameterError('Initial datum must be positive at every node')
    lower, upper = envelopes.lower.values, envelopes.upper.values

    shrink = _largest_dyadic(lambda t: np.all(t * lower <= u), -max_doublings, 0)
    grow = next((2.0**j for j in range(max_doublings + 1) if np.all(u <= 2.0**j * upper)), None)
    if shrink is None or grow is None:
        raise ParameterError('Initial datum cannot be enclosed by dyadic multiples of the envelopes')

    constants = dict(envelopes.constants)
    constants.update(m=constants.get('m', 1.0) * shrink,
                     M=constants.get('M', 1.0) * grow,
                     Mprime=constants.get('Mprime', 0.0) * grow)
    if shrink != 1.0 or grow != 1.0:
        logger.info('Widened envelopes by factors %g (lower) and %g (upper)', shrink, grow)
    fitted = Envelopes(Field(envelopes.grid, shrink * lower), Field(envelopes.grid, grow * upper), **constants)
    return fitted, {'lower_factor': shrink, 'upper_factor': grow}
