"""
Acceptance Rules
Defines the convergence, oracle and determinism checks run by the acceptance engine
"""

from pathlib import Path
from typing import Any, Dict, List
import math
import sys

sys.path.append(str(Path(__file__).parent.parent))

from utils.config_loader import get_config
from utils.errors import DomainError
from utils.logger import get_logger

logger = get_logger(__name__)

SCALES = ("smoke", "desk")


class AcceptanceRules:
    """Centralized repository of acceptance rules"""

    @staticmethod
    def get_all_rules(scale: str = "desk") -> List[Dict[str, Any]]:
        """
        Returns all acceptance rules resolved for one scale

        Rule Structure:
        {
            'rule_name': str,
            'rule_description': str,
            'category': str,  # Convergence, Oracle, Identity, Asymptotics, Determinism
            'criterion': int,
            'check': str,  # AcceptanceEngine check method suffix
            'params': dict,  # sampler sizes for the scale
            'threshold': float,
            'comparison': str,  # 'le' (measured <= threshold) or 'ge'
            'severity': str,  # CRITICAL, WARNING
            'scale': str
        }
        """
        if scale not in SCALES:
            raise DomainError(f"unknown acceptance scale: {scale} (expected one of {SCALES})")
        config = get_config()
        desk = scale == "desk"
        seed = int(config.get('sampling.seed', 42))

        rules = []

        # =====================================================
        # CONVERGENCE RULES
        # =====================================================

        rules.append({
            'rule_name': 'Main Limit KS',
            'rule_description': 'Normalized translation discrepancies (d=2 ball) match the limit-law ECDF',
            'category': 'Convergence',
            'criterion': 1,
            'check': 'main_limit',
            'params': {
                'd': 2, 'a': 0.2, 'b': 0.4,
                'N': 100_000 if desk else 5_000,
                'N_coarse': 10_000 if desk else 500,
                'samples': 2000 if desk else 300,
                'limit_samples': 4000 if desk else 600,
                'M': 8 if desk else 4,
                'P_max': 64 if desk else 16,
                'slack': float(config.get('acceptance.main_limit_monotone_slack', 0.01)),
                'seed': seed,
            },
            'threshold': float(config.get('acceptance.main_limit_ks', 0.05)) if desk else 0.15,
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        rules.append({
            'rule_name': 'Kesten Cauchy Fit',
            'rule_description': 'D_N / ln N of the interval [0, sqrt(2)-1] is Cauchy with location near 0',
            'category': 'Convergence',
            'criterion': 2,
            'check': 'kesten',
            'params': {
                'r': math.sqrt(2.0) - 1.0,
                'N': 1_000_000 if desk else 10_000,
                'samples': 2000 if desk else 400,
                'location_fraction': float(config.get('acceptance.kesten_location_fraction', 0.1)) if desk else 0.3,
                'seed': seed,
            },
            'threshold': float(config.get('acceptance.kesten_ks', 0.05)) if desk else 0.12,
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        rules.append({
            'rule_name': 'Small Ball Invariance',
            'rule_description': 'Shrinking balls (gamma=0.2) share the fixed-scale limit law',
            'category': 'Convergence',
            'criterion': 3,
            'check': 'small_ball',
            'params': {
                'd': 2, 'a': 0.2, 'b': 0.4, 'gamma': 0.2,
                'N': 1_000_000 if desk else 10_000,
                'samples': 2000 if desk else 300,
                'seed': seed,
            },
            'threshold': float(config.get('acceptance.small_ball_ks', 0.06)) if desk else 0.15,
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        rules.append({
            'rule_name': 'Resonant Reduction',
            'rule_description': 'Spread of (direct - resonant Fourier sum) shrinks as eps decreases',
            'category': 'Convergence',
            'criterion': 4,
            'check': 'resonant_reduction',
            'params': {
                'd': 2, 'a': 0.2, 'b': 0.4,
                'N': 100_000 if desk else 2_000,
                'eps_list': [0.4, 0.2, 0.1],
                'samples': 200 if desk else 40,
                'sigmas': 2.0,
                'seed': seed,
            },
            'threshold': 0.0,
            'comparison': 'le',
            'severity': 'WARNING',
        })

        rules.append({
            'rule_name': 'Geodesic Direction Independence',
            'rule_description': 'Normalized geodesic ball times (d=4) do not depend on the direction density',
            'category': 'Convergence',
            'criterion': 10,
            'check': 'geodesic',
            'params': {
                'd': 4, 'a': 0.2, 'b': 0.4,
                'T': 10_000.0 if desk else 200.0,
                'samples': 1500 if desk else 300,
                'densities': ['box:0.5,1.5', 'box:1,2'],
                'seed': seed,
            },
            'threshold': float(config.get('acceptance.geodesic_ks', 0.07)) if desk else 0.15,
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        # =====================================================
        # IDENTITY RULES
        # =====================================================

        rules.append({
            'rule_name': 'Diagonal Identity',
            'rule_description': "General-body series with b' = b equals the symmetric series pointwise",
            'category': 'Identity',
            'criterion': 5,
            'check': 'diagonal_identity',
            'params': {
                'd': 2,
                'points': 100 if desk else 10,
                'M': 8 if desk else 4,
                'P_max': 64 if desk else 16,
                'seed': seed,
            },
            'threshold': float(config.get('acceptance.diagonal_tolerance', 1e-12)),
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        rules.append({
            'rule_name': 'Tail Coverage',
            'rule_description': 'Change under (M, P) -> (2M, 2P) stays below the reported truncation bound',
            'category': 'Identity',
            'criterion': 11,
            'check': 'tail_coverage',
            'params': {
                'd': 2,
                'samples': 1000 if desk else 40,
                'M': 8 if desk else 3,
                'P_max': 64 if desk else 8,
                'seed': seed,
            },
            'threshold': float(config.get('acceptance.tail_coverage', 0.95)),
            'comparison': 'ge',
            'severity': 'WARNING',
        })

        rules.append({
            'rule_name': 'Limit Symmetry',
            'rule_description': 'For a symmetric body the limit law of -L equals that of L',
            'category': 'Identity',
            'criterion': 13,
            'check': 'limit_symmetry',
            'params': {
                'd': 2,
                'samples': 4000 if desk else 400,
                'M': 8 if desk else 3,
                'P_max': 64 if desk else 8,
                'seed': seed,
            },
            'threshold': float(config.get('acceptance.symmetry_ks', 0.03)) if desk else 0.12,
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        rules.append({
            'rule_name': 'Truncation Stability',
            'rule_description': 'Doubling the cutoff M barely moves the limit-law ECDF',
            'category': 'Identity',
            'criterion': 14,
            'check': 'truncation_stability',
            'params': {
                'd': 2,
                'samples': 4000 if desk else 300,
                'M': 8 if desk else 2,
                'P_max': 64 if desk else 8,
                'seed': seed,
            },
            'threshold': float(config.get('acceptance.truncation_ks', 0.03)) if desk else 0.12,
            'comparison': 'le',
            'severity': 'WARNING',
        })

        # =====================================================
        # ORACLE RULES
        # =====================================================

        rules.append({
            'rule_name': 'Lattice Certificates',
            'rule_description': 'Reduced bases certify and are unimodular; resonant sets match the brute-force scan',
            'category': 'Oracle',
            'criterion': 6,
            'check': 'lattice_certificates',
            'params': {
                'dims': [3, 4, 5],
                'lattices': 100 if desk else 10,
                'resonant_instances': 50 if desk else 10,
                'seed': seed,
            },
            'threshold': 0.0,
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        rules.append({
            'rule_name': 'Siegel Mean',
            'rule_description': 'Mean nonzero-vector count in the radius-2 ball of R^3 equals 32 pi / 3',
            'category': 'Oracle',
            'criterion': 7,
            'check': 'siegel',
            'params': {
                'n': 3, 'rho': 2.0,
                'samples': 10_000 if desk else 1000,
                'seed': seed,
            },
            'threshold': float(config.get('acceptance.siegel_sigmas', 3.0)),
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        rules.append({
            'rule_name': 'Cylinder Oracle',
            'rule_description': 'Capsule counts match bounding-box scans; discrepancy is count minus capsule volume',
            'category': 'Oracle',
            'criterion': 9,
            'check': 'cylinder_oracle',
            'params': {
                'instances': 100 if desk else 20,
                'T_max': 20.0,
                'volume_tolerance': float(config.get('acceptance.cylinder_volume_tolerance', 1e-10)),
                'seed': seed,
            },
            'threshold': 0.0,
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        # =====================================================
        # ASYMPTOTICS RULES
        # =====================================================

        rules.append({
            'rule_name': 'Herz Slope',
            'rule_description': 'Log-log slope of the d=2 ball Herz coefficient error over |k| in [4, 256]',
            'category': 'Asymptotics',
            'criterion': 8,
            'check': 'herz_slope',
            'params': {'r': 0.25, 'k_min': 4, 'k_max': 256},
            'threshold': float(config.get('acceptance.herz_slope', -0.9)),
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        # =====================================================
        # DETERMINISM RULES
        # =====================================================

        rules.append({
            'rule_name': 'Thread Determinism',
            'rule_description': 'Sample dumps are byte-identical for one worker and for several',
            'category': 'Determinism',
            'criterion': 12,
            'check': 'determinism',
            'params': {
                'N': 10_000 if desk else 1_000,
                'samples': 200 if desk else 24,
                'workers': max(2, int(config.get('sampling.max_workers', 2))),
                'seed': seed,
            },
            'threshold': 0.0,
            'comparison': 'le',
            'severity': 'CRITICAL',
        })

        for rule in rules:
            rule['scale'] = scale

        logger.info(f"Loaded {len(rules)} acceptance rules ({scale} scale)")
        return sorted(rules, key=lambda rule: rule['criterion'])
