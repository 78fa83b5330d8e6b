"""
Acceptance Engine
Executes acceptance rules against the samplers and oracles and tracks results
"""

from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple
import io
import math
import sys
import time

import numpy as np
import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))

from discrepancy.flows import (
    capsule_volume, cylinder_count, cylinder_count_bruteforce, sample_geodesic, slab_ellipsoid_count,
)
from discrepancy.orbit_discrepancy import (
    resonant_reduction_profile, sample_kesten, sample_translation, sample_translation_ecdf,
)
from geometry.convex_body import ball
from geometry.fourier import herz_error_profile
from lattices.lattice_space import (
    brute_force_resonant_set, certify_reduced_basis, haar_sample, reduced_basis, resonant_set, siegel_counts,
)
from lattices.reduction import integer_det
from limit_law.limit_law import (
    LimitLawConfig, build_sample_point, doubled_value, eval_translation_nonsym, eval_translation_sym,
    evaluate, sample_limit, sample_limit_ecdf, truncation_bound,
)
from quality.acceptance_rules import AcceptanceRules
from quality.ecdf import EmpiricalCDF, cauchy_fit, ks_distance, symmetry_distance
from utils.config_loader import get_config
from utils.errors import LabError, ReductionError
from utils.logger import get_logger
from utils.parallel import parallel_map, resolve_workers
from utils.rng import master_stream, spawn_seeds

logger = get_logger(__name__)

# (measured value, side condition holds, message, details)
CheckResult = Tuple[float, bool, str, Dict[str, Any]]


def _default_ball(d: int):
    center = float(get_config().get('bodies.default_center', 0.5))
    return ball(d, 1.0, center=[center] * d)


def _tail_worker(item) -> Tuple[float, float]:
    seed_seq, cfg = item
    pt = build_sample_point(cfg, seed_seq)
    value, _ = evaluate(pt, cfg)
    return abs(doubled_value(pt, cfg) - value), truncation_bound(pt, cfg)


def _diagonal_worker(item) -> float:
    seed_seq, cfg_nonsym, cfg_sym = item
    pt = build_sample_point(cfg_nonsym, seed_seq)
    diagonal = replace(pt, b_prime=pt.b)
    return abs(eval_translation_nonsym(diagonal, cfg_nonsym) - eval_translation_sym(diagonal, cfg_sym))


class AcceptanceEngine:
    """Executes acceptance rules and collects their results"""

    def __init__(self, scale: str = "desk", max_workers: Optional[int] = None):
        self.config = get_config()
        self.scale = scale
        self.max_workers = resolve_workers(max_workers)
        self.n_haar = int(self.config.get('sampling.n_haar', 1_000_000))
        self.rules = AcceptanceRules.get_all_rules(scale)

        logger.info(f"AcceptanceEngine initialized - scale: {scale}, workers: {self.max_workers}")

    # ------------------------------------------------------------------
    # Checks: each returns (measured, side condition, message, details)
    # ------------------------------------------------------------------

    def _check_main_limit(self, params: Dict[str, Any]) -> CheckResult:
        body = _default_ball(params['d'])
        orbit = sample_translation_ecdf(body, params['a'], params['b'], 0.0, params['N'],
                                        params['samples'], params['seed'], max_workers=self.max_workers)
        coarse = sample_translation_ecdf(body, params['a'], params['b'], 0.0, params['N_coarse'],
                                         params['samples'], params['seed'] + 1, max_workers=self.max_workers)
        cfg = LimitLawConfig(variant="translation_sym", d=params['d'], body=body, M=params['M'],
                             P_max=params['P_max'], samples=params['limit_samples'],
                             seed=params['seed'] + 2, n_haar=self.n_haar)
        limit = sample_limit_ecdf(cfg, self.max_workers)

        ks_fine = ks_distance(orbit, limit)
        ks_coarse = ks_distance(coarse, limit)
        monotone = ks_coarse > ks_fine - params['slack']
        message = f"KS(N={params['N']}) = {ks_fine:.4f}, KS(N={params['N_coarse']}) = {ks_coarse:.4f}"
        return ks_fine, monotone, message, {'ks': ks_fine, 'ks_coarse': ks_coarse, 'monotone': monotone}

    def _check_kesten(self, params: Dict[str, Any]) -> CheckResult:
        frame = sample_kesten(params['r'], params['N'], params['samples'], params['seed'], self.max_workers)
        fit = cauchy_fit(EmpiricalCDF.from_samples(frame['normalized'].to_numpy()))
        if fit.degenerate:
            return math.inf, False, "degenerate sample (zero interquartile range)", fit.to_dict()
        centered = abs(fit.location) <= params['location_fraction'] * fit.scale
        message = f"location {fit.location:.4f}, scale {fit.scale:.4f}, KS to fit {fit.ks_to_fit:.4f}"
        return fit.ks_to_fit, centered, message, fit.to_dict()

    def _check_small_ball(self, params: Dict[str, Any]) -> CheckResult:
        body = _default_ball(params['d'])
        fixed = sample_translation_ecdf(body, params['a'], params['b'], 0.0, params['N'],
                                        params['samples'], params['seed'], max_workers=self.max_workers)
        shrinking = sample_translation_ecdf(body, params['a'], params['b'], params['gamma'], params['N'],
                                            params['samples'], params['seed'] + 1, max_workers=self.max_workers)
        ks = ks_distance(fixed, shrinking)
        return ks, True, f"KS(gamma=0, gamma={params['gamma']}) = {ks:.4f}", {'ks': ks}

    def _check_resonant_reduction(self, params: Dict[str, Any]) -> CheckResult:
        body = _default_ball(params['d'])
        frame = resonant_reduction_profile(body, params['a'], params['b'], params['N'], params['eps_list'],
                                           params['samples'], params['seed'], self.max_workers)
        spread = frame.groupby('eps')['residual'].std(ddof=1)
        spread = spread.reindex(params['eps_list'])
        n = params['samples']
        stderr = spread / math.sqrt(2.0 * (n - 1))

        violations = 0
        for i in range(len(spread) - 1):
            slack = params['sigmas'] * math.hypot(stderr.iloc[i], stderr.iloc[i + 1])
            if spread.iloc[i + 1] > spread.iloc[i] + slack:
                violations += 1
        details = {'std': {str(k): float(v) for k, v in spread.items()}}
        message = "residual std " + ", ".join(f"eps={k}: {v:.4g}" for k, v in spread.items())
        return float(violations), True, message, details

    def _check_diagonal_identity(self, params: Dict[str, Any]) -> CheckResult:
        body = _default_ball(params['d'])
        common = dict(d=params['d'], body=body, M=params['M'], P_max=params['P_max'],
                      samples=params['points'], seed=params['seed'], n_haar=self.n_haar)
        cfg_nonsym = LimitLawConfig(variant="translation_nonsym", **common)
        cfg_sym = LimitLawConfig(variant="translation_sym", **common)
        items = [(s, cfg_nonsym, cfg_sym) for s in spawn_seeds(params['seed'], params['points'])]
        diffs = parallel_map(_diagonal_worker, items, self.max_workers, desc="diagonal identity")
        worst = float(max(diffs))
        return worst, True, f"max |L'(b'=b) - L| = {worst:.3e} over {len(diffs)} points", {'max_difference': worst}

    def _check_tail_coverage(self, params: Dict[str, Any]) -> CheckResult:
        body = _default_ball(params['d'])
        cfg = LimitLawConfig(variant="translation_sym", d=params['d'], body=body, M=params['M'],
                             P_max=params['P_max'], samples=params['samples'], seed=params['seed'],
                             n_haar=self.n_haar)
        items = [(s, cfg) for s in spawn_seeds(params['seed'], params['samples'])]
        results = parallel_map(_tail_worker, items, self.max_workers, desc="tail coverage")
        covered = float(np.mean([change <= bound for change, bound in results]))
        return covered, True, f"{covered:.1%} of changes below the truncation bound", {'coverage': covered}

    def _check_limit_symmetry(self, params: Dict[str, Any]) -> CheckResult:
        cfg = LimitLawConfig(variant="translation_sym", d=params['d'], body=_default_ball(params['d']),
                             M=params['M'], P_max=params['P_max'], samples=params['samples'],
                             seed=params['seed'], n_haar=self.n_haar)
        ks = symmetry_distance(sample_limit_ecdf(cfg, self.max_workers))
        return ks, True, f"KS(L, -L) = {ks:.4f} over {params['samples']} samples", {'ks': ks}

    def _check_truncation_stability(self, params: Dict[str, Any]) -> CheckResult:
        cfg = LimitLawConfig(variant="translation_sym", d=params['d'], body=_default_ball(params['d']),
                             M=params['M'], P_max=params['P_max'], samples=params['samples'],
                             seed=params['seed'], n_haar=self.n_haar)
        # same seed: lattices and the phase prefix are shared between the two cutoffs
        coarse = sample_limit_ecdf(cfg, self.max_workers)
        fine = sample_limit_ecdf(replace(cfg, M=2 * params['M']), self.max_workers)
        ks = ks_distance(coarse, fine)
        return ks, True, f"KS(M={params['M']}, M={2 * params['M']}) = {ks:.4f}", {'ks': ks}

    def _check_lattice_certificates(self, params: Dict[str, Any]) -> CheckResult:
        rng = master_stream(params['seed'])
        failures = 0
        for n in params['dims']:
            for _ in range(params['lattices']):
                L = haar_sample(n, rng, method="siegel_check", n_haar=self.n_haar)
                try:
                    rb = reduced_basis(L)
                    if not certify_reduced_basis(L, rb) or abs(integer_det(rb.coeffs)) != 1:
                        failures += 1
                except ReductionError as e:
                    logger.warning(f"Reduction failed in dimension {n}: {e}")
                    failures += 1

        mismatches = 0
        for i in range(params['resonant_instances']):
            d = 2 if i % 2 == 0 else 3
            N = int(rng.integers(50, 400))
            eps = float(rng.uniform(0.2, 0.5))
            alpha = rng.random(d)
            fast = sorted(tuple(int(v) for v in h.k) for h in resonant_set(N, alpha, eps))
            if fast != brute_force_resonant_set(N, alpha, eps):
                mismatches += 1

        message = f"{failures} certificate failures, {mismatches} resonant-set mismatches"
        return float(failures + mismatches), True, message, {'certificate_failures': failures,
                                                             'resonant_mismatches': mismatches}

    def _check_siegel(self, params: Dict[str, Any]) -> CheckResult:
        counts = siegel_counts(params['n'], params['rho'], params['samples'], params['seed'],
                               n_haar=self.n_haar, max_workers=self.max_workers)
        expected = math.pi ** (params['n'] / 2.0) / math.gamma(params['n'] / 2.0 + 1) * params['rho'] ** params['n']
        stderr = float(counts.std(ddof=1) / math.sqrt(counts.size))
        sigmas = abs(float(counts.mean()) - expected) / stderr
        message = f"mean {counts.mean():.4f} vs {expected:.4f} ({sigmas:.2f} standard errors)"
        return sigmas, True, message, {'mean': float(counts.mean()), 'expected': expected, 'stderr': stderr}

    def _check_cylinder_oracle(self, params: Dict[str, Any]) -> CheckResult:
        rng = master_stream(params['seed'])
        mismatches = 0
        for _ in range(params['instances']):
            n = int(rng.choice([2, 3]))
            r = float(rng.uniform(0.05, 0.5))
            T = float(rng.uniform(0.5, params['T_max']))
            v = rng.normal(size=n)
            v /= np.linalg.norm(v)
            # the slab-clipped count needs a steep direction
            while abs(v[-1]) < 0.3:
                v = rng.normal(size=n)
                v /= np.linalg.norm(v)
            y = rng.random(n)

            count, discrepancy = cylinder_count(y, v, r, T)
            expected = count - capsule_volume(n, r, T * float(np.linalg.norm(v)))
            if count != cylinder_count_bruteforce(y, v, r, T) or abs(discrepancy - expected) > params['volume_tolerance']:
                mismatches += 1

            alpha = v[:-1] / v[-1]
            clipped, _ = cylinder_count(np.append(y[:-1], 0.0), np.append(alpha, 1.0), r, T, caps=False)
            if clipped != slab_ellipsoid_count(y[:-1], alpha, r, T):
                mismatches += 1

        return float(mismatches), True, f"{mismatches} mismatches over {params['instances']} instances", {}

    def _check_herz_slope(self, params: Dict[str, Any]) -> CheckResult:
        _, slope = herz_error_profile(params['r'], params['k_min'], params['k_max'])
        return slope, True, f"log-log slope {slope:.3f}", {'slope': slope}

    def _check_geodesic(self, params: Dict[str, Any]) -> CheckResult:
        ecdfs = []
        for i, density in enumerate(params['densities']):
            frame = sample_geodesic(params['d'], params['a'], params['b'], params['T'], params['samples'],
                                    params['seed'] + i, density=density, max_workers=self.max_workers)
            ecdfs.append(EmpiricalCDF.from_samples(frame['normalized'].to_numpy()))
        ks = ks_distance(ecdfs[0], ecdfs[1])
        return ks, True, f"KS({' vs '.join(params['densities'])}) = {ks:.4f}", {'ks': ks}

    def _check_determinism(self, params: Dict[str, Any]) -> CheckResult:
        float_format = self.config.get('outputs.float_format', '%.17g')

        def dump(frame: pd.DataFrame) -> bytes:
            buffer = io.StringIO()
            frame.to_csv(buffer, index=False, float_format=float_format, lineterminator="\n")
            return buffer.getvalue().encode()

        body = _default_ball(2)
        limit_cfg = LimitLawConfig(variant="translation_sym", d=2, body=body, M=3, P_max=8,
                                   samples=params['samples'], seed=params['seed'], n_haar=self.n_haar)
        samplers: Dict[str, Callable[[int], pd.DataFrame]] = {
            'translation': lambda w: sample_translation(body, 0.2, 0.4, params['N'], params['samples'],
                                                        params['seed'], max_workers=w),
            'kesten': lambda w: sample_kesten(math.sqrt(2.0) - 1.0, params['N'], params['samples'],
                                              params['seed'], max_workers=w),
            'limit': lambda w: sample_limit(limit_cfg, max_workers=w),
        }
        differing = [name for name, run in samplers.items() if dump(run(1)) != dump(run(params['workers']))]
        message = f"1 vs {params['workers']} workers: " + (", ".join(differing) + " differ" if differing else "identical")
        return float(len(differing)), True, message, {'differing': differing}

    # ------------------------------------------------------------------
    # Execution
    # ------------------------------------------------------------------

    def execute_rule(self, rule: Dict[str, Any]) -> Dict[str, Any]:
        """
        Execute a single acceptance rule

        Returns:
            dict with execution results
        """
        rule_name = rule['rule_name']
        logger.info(f"Executing rule: {rule_name} (criterion {rule['criterion']})")

        start_time = time.time()

        try:
            check = getattr(self, f"_check_{rule['check']}")
            measured, side_ok, message, details = check(rule['params'])

            if rule['comparison'] == 'le':
                within = measured <= rule['threshold']
            else:
                within = measured >= rule['threshold']
            test_status = 'PASSED' if within and side_ok else 'FAILED'

            result = {
                'rule_name': rule_name,
                'criterion': rule['criterion'],
                'category': rule['category'],
                'severity': rule['severity'],
                'measured': float(measured),
                'threshold': rule['threshold'],
                'comparison': rule['comparison'],
                'test_status': test_status,
                'test_message': message,
                'details': details,
                'execution_time_ms': int((time.time() - start_time) * 1000),
            }

            logger.info(f"  Status: {test_status}, {message}")
            return result

        except LabError as e:
            logger.error(f"Rule execution failed: {e}")
            return {
                'rule_name': rule_name,
                'criterion': rule['criterion'],
                'category': rule['category'],
                'severity': rule['severity'],
                'measured': float('nan'),
                'threshold': rule['threshold'],
                'comparison': rule['comparison'],
                'test_status': 'ERROR',
                'test_message': str(e),
                'details': {},
                'execution_time_ms': int((time.time() - start_time) * 1000),
            }

    def run_all_rules(self, criteria: Optional[List[int]] = None) -> Dict[str, Any]:
        """Execute all rules (or the listed criteria)"""
        logger.info("=" * 80)
        logger.info(f"STARTING ACCEPTANCE RUN ({self.scale.upper()} SCALE)")
        logger.info("=" * 80)

        selected = [r for r in self.rules if criteria is None or r['criterion'] in criteria]
        results_summary: Dict[str, Any] = {
            'scale': self.scale,
            'total_rules': len(selected),
            'passed': 0,
            'failed': 0,
            'error': 0,
            'results': [],
        }

        for rule in selected:
            result = self.execute_rule(rule)
            results_summary['results'].append(result)

            if result['test_status'] == 'PASSED':
                results_summary['passed'] += 1
            elif result['test_status'] == 'FAILED':
                results_summary['failed'] += 1
            else:
                results_summary['error'] += 1

        logger.info("=" * 80)
        logger.info("ACCEPTANCE RUN COMPLETED")
        logger.info(f"Total Rules: {results_summary['total_rules']}")
        logger.info(f"Passed: {results_summary['passed']}")
        logger.info(f"Failed: {results_summary['failed']}")
        logger.info(f"Error: {results_summary['error']}")
        logger.info("=" * 80)

        return results_summary
