"""
Acceptance Reports Generator
Scorecard JSON and plain-text summary for an acceptance run
"""

from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional
import sys

import pandas as pd

sys.path.append(str(Path(__file__).parent.parent))

from utils.logger import get_logger
from utils.output_manager import OutputManager, get_output_manager

logger = get_logger(__name__)

CATEGORIES = ['Convergence', 'Identity', 'Oracle', 'Asymptotics', 'Determinism']


class AcceptanceReportGenerator:
    """Generate acceptance scorecards and summaries"""

    def __init__(self, output_manager: Optional[OutputManager] = None):
        self.outputs = output_manager or get_output_manager()

        logger.info(f"AcceptanceReportGenerator initialized - Output: {self.outputs.output_dir}")

    @staticmethod
    def results_frame(summary: Dict[str, Any]) -> pd.DataFrame:
        """One row per executed rule"""
        columns = ['criterion', 'rule_name', 'category', 'severity', 'test_status',
                   'measured', 'threshold', 'comparison', 'execution_time_ms', 'test_message']
        return pd.DataFrame(summary['results'], columns=columns)

    def build_scorecard(self, summary: Dict[str, Any]) -> Dict[str, Any]:
        """Pass rates per category plus the overall score"""
        results = self.results_frame(summary)
        category_scores = {}
        for category in CATEGORIES:
            cat_data = results[results['category'] == category]
            if len(cat_data) > 0:
                score = (cat_data['test_status'] == 'PASSED').mean() * 100
                category_scores[category.lower() + '_score'] = round(float(score), 2)

        total = summary['total_rules']
        critical_failed = int(((results['severity'] == 'CRITICAL') & (results['test_status'] != 'PASSED')).sum())
        return {
            'scale': summary['scale'],
            'report_date': f"{datetime.now():%Y-%m-%d}",
            'total_rules_executed': total,
            'rules_passed': summary['passed'],
            'rules_failed': summary['failed'],
            'rules_error': summary['error'],
            'critical_failed': critical_failed,
            'overall_score': round(100.0 * summary['passed'] / total, 2) if total else 100.0,
            **category_scores,
        }

    def generate_scorecard(self, summary: Dict[str, Any], filename: str = "acceptance_scorecard.json") -> Path:
        """Write the scorecard with the per-rule results"""
        scorecard = self.build_scorecard(summary)
        path = self.outputs.write_json({'scorecard': scorecard, 'results': summary['results']}, filename)
        logger.info(f"✓ Acceptance scorecard generated - Overall score: {scorecard['overall_score']:.2f}%")
        return path

    def generate_summary(self, summary: Dict[str, Any]) -> Path:
        """Generate the plain-text summary"""
        logger.info("Generating acceptance summary...")

        scorecard = self.build_scorecard(summary)
        results = self.results_frame(summary)
        summary_file = self.outputs.path_for(f"acceptance_summary_{datetime.now():%Y%m%d}.txt")

        with open(summary_file, 'w') as f:
            f.write("=" * 80 + "\n")
            f.write(f"ACCEPTANCE SUMMARY ({scorecard['scale'].upper()} SCALE)\n")
            f.write(f"Report Date: {datetime.now():%B %d, %Y}\n")
            f.write("=" * 80 + "\n\n")

            f.write(f"OVERALL SCORE: {scorecard['overall_score']:.1f}%\n\n")

            f.write("KEY METRICS:\n")
            f.write(f"  • Total Rules Executed: {scorecard['total_rules_executed']}\n")
            f.write(f"  • Rules Passed: {scorecard['rules_passed']}\n")
            f.write(f"  • Rules Failed: {scorecard['rules_failed']}\n")
            f.write(f"  • Rules with Errors: {scorecard['rules_error']}\n\n")

            f.write("CATEGORIES:\n")
            for category in CATEGORIES:
                key = category.lower() + '_score'
                if key in scorecard:
                    f.write(f"  • {category}: {scorecard[key]:.1f}%\n")
            f.write("\n")

            f.write("RULES:\n")
            for _, row in results.iterrows():
                op = '<=' if row['comparison'] == 'le' else '>='
                f.write(f"  [{row['test_status']:<6}] {row['criterion']:>2}. {row['rule_name']}: "
                        f"{row['measured']:.4g} (need {op} {row['threshold']:.4g}) - {row['test_message']}\n")
            f.write("\n")

            f.write("RECOMMENDATIONS:\n")
            if scorecard['critical_failed'] > 0:
                f.write("  • IMMEDIATE ACTION: Investigate failed critical criteria\n")
            if scorecard['rules_error'] > 0:
                f.write("  • Check the error log for rules that could not run\n")
            if scorecard['scale'] == 'smoke' and scorecard['rules_failed'] == 0:
                f.write("  • Smoke run clean - schedule the desk-scale run\n")
            if scorecard['overall_score'] >= 100:
                f.write("  • All criteria met\n")

            f.write("\n" + "=" * 80 + "\n")

        logger.info(f"✓ Acceptance summary generated: {summary_file}")
        return summary_file
