import json
import logging
import os
import platform
import time
from enum import Enum

import numpy as np
import pandas as pd
import scipy

from .. import __version__
from ..analysis.checks import cone_check, time_derivative_check
from ..analysis.fits import boundary_exponent_fit
from ..analysis.stats import CheckResult, failures, summary, render
from ..analysis.studies import dt_family, gap_scaling_study, energy_refinement_study, beta_threshold
from ..analysis.studies import seminorm_refinement_study
from ..discretization.fraclap import assemble, eigen_principal
from ..discretization.grid import build_grid
from ..enums import Direction, RunKind
from ..exceptions import ConfigError, ParameterError
from ..evolution import ImplicitEuler, second_energy_slack, stabilization_run
from ..models.catalog import build_nonlinearity, build_source
from ..models.problem import StationaryProblem, ConeEnvelope
from ..stationary import SingularSolver, SingularSystem
from .verify import verify_all

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
ENVELOPE_TOL = 1e-10
SOLVER_TOL = 1e-8
BRACKETING_TOL = 1e-8


def _to_json(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


class Runner:
    """Scenario runner class.

    `run` computes the configured scenario, collects `CheckResult`s in
    `self.results`, tables in `self.frames` and chosen constants in
    `self.constants`, then writes them to the output directory.
    """
    def __init__(self, config):
        self.config = config.validate()
        self.results = []
        self.frames = {}
        self.constants = {}
        self.timings = {}
        self._grid = None
        self._op = None
        self._eig = None

    @property
    def grid(self):
        if self._grid is None:
            self._grid = build_grid(self.config['domain.a'], self.config['domain.b'], self.config['n'])
        return self._grid

    @property
    def op(self):
        if self._op is None:
            self._op = assemble(self.grid, self.config['s'])
        return self._op

    @property
    def eig(self):
        if self._eig is None:
            start = time.perf_counter()
            self._eig = eigen_principal(self.op)
            self.timings['eigen'] = time.perf_counter() - start
            self.constants['lambda1'] = self._eig.lambda1
        return self._eig

    @property
    def output(self):
        return self.config['output']

    @property
    def passed(self):
        return not failures(self.results)

    @property
    def exit_code(self):
        return 0 if self.passed else 4

    def run(self):
        """Runs the configured scenario, writes the artifacts and returns the exit code"""
        scenario = self.config['scenario']
        logger.info('Running scenario %s with %r', scenario, self.config)
        start = time.perf_counter()
        getattr(self, '_' + scenario)()
        self.timings['total'] = time.perf_counter() - start
        self.write()
        logger.info('%d of %d checks failed', len(failures(self.results)), len(self.results))
        return self.exit_code

    def write(self):
        """Writes CSV tables, manifest.json and summary.txt into the output directory"""
        os.makedirs(self.output, exist_ok=True)
        files = []
        for name, frame in sorted(self.frames.items()):
            filename = name + '.csv'
            frame.to_csv(os.path.join(self.output, filename), index=False, float_format='%.17g')
            files.append(filename)

        table = summary(self.results)
        with open(os.path.join(self.output, 'summary.txt'), 'w') as fp:
            fp.write('scenario: {}\n'.format(self.config['scenario']))
            fp.write(render(table))

        manifest = {
            'manifest_version': MANIFEST_VERSION,
            'config': self.config.to_dict(),
            'versions': {
                'fraclab': __version__,
                'python': platform.python_version(),
                'numpy': np.__version__,
                'scipy': scipy.__version__,
                'pandas': pd.__version__
            },
            'timings': self.timings,
            'constants': self.constants,
            'checks': [result._asdict() for result in self.results],
            'passed': self.passed,
            'files': files + ['summary.txt']
        }
        with open(os.path.join(self.output, 'manifest.json'), 'w') as fp:
            json.dump(manifest, fp, indent=2, sort_keys=True, default=_to_json)

    def _check(self, name, passed, value=np.nan, threshold=np.nan, detail=''):
        result = CheckResult(name, bool(passed), float(value), float(threshold), detail)
        logger.info('%s: %s (value %.3e)', name, 'pass' if result.passed else 'FAIL', result.value)
        self.results.append(result)
        return result

    def _solver(self):
        return SingularSolver(self.op, self.eig, self.config.tolerances())

    def _source(self):
        cfg = self.config
        source = build_source(cfg['source.name'], cfg['source.params'])
        try:
            return source.verify(self.grid, cfg['t0'] + cfg['T'])
        except ParameterError as err:
            raise ConfigError('source {!r}: {}'.format(cfg['source.name'], err)) from err

    def _nonlinearity(self):
        domain = (self.config['domain.a'], self.config['domain.b'])
        return build_nonlinearity(self.config['nonlinearity.name'], self.config['nonlinearity.params'], domain)

    def _cone(self, name, u, q):
        env = ConeEnvelope.for_grid(q, self.config['s'], self.grid)
        report = cone_check(u, env, self.grid)
        self.constants[name + '_k1'] = report.k1_hat
        self.constants[name + '_k2'] = report.k2_hat
        self._check(name + '_cone', report.passed, report.k2_hat / report.k1_hat, detail='k2_hat / k1_hat')

    # Scenarios

    def _eigen(self):
        eig, s = self.eig, self.config['s']
        self.frames['eigenpair'] = eig.to_frame()
        residual = eig.residual(self.op)
        self._check('eigen_residual', residual <= SOLVER_TOL, residual, SOLVER_TOL)
        self._check('eigen_positive', eig.phi1.min() > 0, eig.phi1.min(), 0.0)

        # Coarser grids leave too few nodes in the boundary window for a meaningful fit
        if self.grid.n >= 512:
            fit = boundary_exponent_fit(eig.phi1, self.grid, correction=2 * s)
            self.constants['phi1_exponent'] = fit.alpha_hat
            self._check('eigen_boundary_exponent', abs(fit.alpha_hat - s) <= 0.1, fit.alpha_hat, s)

    def _stationary(self):
        cfg = self.config
        g = self._source().at(self.grid, cfg['t0'])
        problem = StationaryProblem(cfg['lambda'], cfg['q'], cfg['s'], g, cfg['epsilon'])
        solver = self._solver()
        u = solver.regularized(problem) if problem.epsilon > 0 else solver.limit(problem)

        self.frames['solution'] = u.to_frame()
        self.frames['continuation'] = solver.ledger
        self.constants['epsilon_schedule'] = solver.ledger['epsilon'].tolist()

        system = SingularSystem(self.op, g.values, 1.0, problem.lam, problem.q, problem.epsilon)
        relative = problem.residual(self.op, u) / system.reference(u.values)
        self._check('stationary_residual', relative <= SOLVER_TOL, relative, SOLVER_TOL)
        self._check('stationary_positive', u.min() > 0, u.min(), 0.0)
        if problem.epsilon == 0:
            self._cone('stationary', u, problem.q)

    def _pure_singular(self):
        q = self.config['q']
        solver = self._solver()
        w = solver.pure_singular(q)
        self.frames['pure_singular'] = w.to_frame('w')
        self.frames['continuation'] = solver.ledger

        Aw, singular = self.op.dot(w.values), w.values**(-q)
        relative = np.max(np.abs(Aw - singular)) / max(1.0, np.max(np.abs(Aw)), np.max(singular))
        self._check('pure_singular_residual', relative <= SOLVER_TOL, relative, SOLVER_TOL)
        self._cone('pure_singular', w, q)

    def _semilinear(self):
        q = self.config['q']
        nl = self._nonlinearity()
        solver = self._solver()
        ascending = solver.semilinear(nl, q, Direction.ASCENDING)
        env = solver.envelope_pair
        descending = solver.semilinear(nl, q, Direction.DESCENDING)
        self.constants.update(solver.constants)

        frame = ascending.to_frame('ascending')
        frame['descending'] = descending.values
        frame['lower'] = env.lower.values
        frame['upper'] = env.upper.values
        self.frames['semilinear'] = frame
        self.frames['monotone_ledger'] = solver.ledger

        gap = (ascending - descending).linf_norm()
        if nl.monotone_quotient:
            self._check('semilinear_uniqueness', gap <= 1e-6, gap, 1e-6)
        else:
            self._check('semilinear_uniqueness', True, gap, detail='quotient not monotone, agreement not expected')

    def _initial(self, runner):
        choice = self.config['initial']
        if choice == 'pure_singular':
            return runner.pure_singular
        envelopes = runner.build_envelopes()
        return envelopes.lower if choice == 'lower' else envelopes.upper

    def _evolve(self, kind):
        cfg = self.config
        runner = ImplicitEuler(self.op, cfg['q'], self.eig, cfg.tolerances(), cfg['progress'])
        if kind == RunKind.SOURCE:
            runner.source = self._source()
        else:
            runner.nonlinearity = self._nonlinearity()
        u0 = self._initial(runner)

        start = time.perf_counter()
        trace = runner.run(u0, cfg['T'], cfg['n_steps'], t0=cfg['t0'])
        self.timings['evolution'] = time.perf_counter() - start

        self.frames['snapshots'], self.frames['ledger'] = trace.to_frames()
        self.frames['newton_ledger'] = runner.solver.ledger
        self.constants.update(trace.envelopes.constants)
        self.constants.update(trace.metadata)

        violation = trace.envelope_violation()
        self._check('envelope_invariance', violation <= ENVELOPE_TOL, violation, ENVELOPE_TOL)

        ledger = trace.ledger
        scale = max(1.0, float(np.max(np.abs(ledger['energy']))), float(np.max(np.abs(ledger['potential']))))
        worst = float(ledger['residual'].max())
        self._check('energy_dissipation', worst <= SOLVER_TOL * scale, worst, SOLVER_TOL * scale,
                    detail='discrete energy identity holds as an inequality')
        slack = float(second_energy_slack(trace).min())
        self._check('second_energy_estimate', slack >= -SOLVER_TOL * scale, slack, -SOLVER_TOL * scale)

        margin = time_derivative_check(trace)
        tol = 1e-6 * max(1.0, float(margin.frame['bound'].max()))
        self.frames['time_derivative'] = margin.frame
        self._check('time_derivative_bound', margin.min_slack >= -tol, margin.min_slack, -tol)

    def _evolve_g(self):
        self._evolve(RunKind.SOURCE)

    def _evolve_p(self):
        self._evolve(RunKind.SEMILINEAR)

    def _stabilize(self):
        cfg = self.config
        nl = self._nonlinearity()
        runner = ImplicitEuler(self.op, cfg['q'], self.eig, cfg.tolerances())
        runner.nonlinearity = nl
        u0 = self._initial(runner)

        report = stabilization_run(u0, nl, cfg['T'], cfg['n_steps'], cfg['q'], self.op, self.eig,
                                   cfg['stabilize.threshold'], cfg['stabilize.window'], cfg.tolerances(),
                                   cfg['progress'])
        self.frames['distances'] = report.distances
        self.frames['stationary'] = report.u_hat.to_frame('u_hat')
        for name, trace in report.traces.items():
            self.frames['ledger_' + name] = trace.ledger
        self.constants.update(report.traces['main'].envelopes.constants)
        self.constants['stabilization_time'] = report.stabilization_time

        self._check('bracketing', report.bracketing_violation <= BRACKETING_TOL, report.bracketing_violation,
                    BRACKETING_TOL)
        self._check('lower_envelope_nondecreasing', report.lower_monotonicity_violation <= ENVELOPE_TOL,
                    report.lower_monotonicity_violation, ENVELOPE_TOL)
        self._check('upper_envelope_nonincreasing', report.upper_monotonicity_violation <= ENVELOPE_TOL,
                    report.upper_monotonicity_violation, ENVELOPE_TOL)
        self._check('stabilized', report.stabilized, report.distances['distance'].iloc[-1], report.threshold,
                    detail='time {}'.format(report.stabilization_time))

    def _study_gap(self):
        cfg = self.config
        src = self._source()
        runner = ImplicitEuler(self.op, cfg['q'], self.eig, cfg.tolerances())
        runner.source = src
        u0 = self._initial(runner)

        traces = dt_family(u0, src, cfg['T'], cfg['study.base_steps'], cfg['q'], self.op, self.eig,
                           cfg['study.levels'], cfg['progress'])
        gap = gap_scaling_study(traces)
        energy = energy_refinement_study(traces)
        self.frames['gap_study'] = gap.frame
        self.frames['energy_study'] = energy.frame
        self.constants.update(gap_slope=gap.slope, gap_r_squared=gap.r_squared)

        detail = 'degenerate: no increments' if gap.degenerate else 'slope of max increment against dt'
        self._check('gap_scaling', gap.passed, gap.slope, 0.4, detail=detail)
        self._check('energy_refinement', energy.passed, energy.min_ratio, 1.5,
                    detail='min second-estimate slack {:.3e}'.format(energy.min_slack))

    def _study_seminorm(self):
        cfg = self.config
        q, s = cfg['q'], cfg['s']
        beta = cfg['study.beta'] if cfg['study.beta'] is not None else 1.1 * beta_threshold(q, s)
        study = seminorm_refinement_study(q,
                                          s,
                                          beta,
                                          ns=tuple(cfg['study.ns']),
                                          domain=(cfg['domain.a'], cfg['domain.b']),
                                          epsilon=cfg['study.epsilon'],
                                          lam=cfg['lambda'],
                                          tolerances=cfg.tolerances(),
                                          progress=cfg['progress'])
        self.frames['seminorm_study'] = study.frame
        self.constants.update(beta=beta, beta_threshold=study.threshold)

        detail = 'refinement trend evidence, not a membership proof'
        self._check('seminorm_u_growing', study.u_growing, study.frame['ratio_u'].iloc[1:].min(), 1.05, detail)
        self._check('seminorm_u_beta_plateau', study.u_beta_plateau, study.frame['ratio_u_beta'].iloc[-1], 1.02,
                    detail)

    def _verify_all(self):
        cfg = self.config
        results, frames = verify_all(cfg['seed'], quick=cfg['verify.quick'], progress=cfg['progress'])
        self.results.extend(results)
        self.frames.update(frames)
