import pytest

from quality.acceptance_engine import AcceptanceEngine
from quality.acceptance_rules import AcceptanceRules
from quality.reports import AcceptanceReportGenerator
from utils.errors import DomainError
from utils.output_manager import OutputManager


class TestRules:

    def test_all_criteria_present(self):
        rules = AcceptanceRules.get_all_rules("smoke")
        assert [rule["criterion"] for rule in rules] == list(range(1, 15))
        assert all(rule["scale"] == "smoke" for rule in rules)
        assert {rule["comparison"] for rule in rules} <= {"le", "ge"}

    def test_smoke_scale_is_smaller(self):
        smoke = {r["criterion"]: r for r in AcceptanceRules.get_all_rules("smoke")}
        desk = {r["criterion"]: r for r in AcceptanceRules.get_all_rules("desk")}
        assert smoke[1]["params"]["N"] < desk[1]["params"]["N"]
        assert smoke[1]["threshold"] == pytest.approx(0.15)
        assert desk[1]["threshold"] == pytest.approx(0.05)
        assert desk[5]["threshold"] == pytest.approx(1e-12)
        assert desk[13]["threshold"] == pytest.approx(0.03)
        assert desk[13]["params"]["samples"] == 4000

    def test_unknown_scale(self):
        with pytest.raises(DomainError):
            AcceptanceRules.get_all_rules("nightly")


class TestEngine:

    @pytest.fixture
    def engine(self):
        return AcceptanceEngine(scale="smoke", max_workers=1)

    def rule(self, engine, criterion):
        return next(r for r in engine.rules if r["criterion"] == criterion)

    def test_herz_slope(self, engine):
        result = engine.execute_rule(self.rule(engine, 8))
        assert result["test_status"] == "PASSED"
        assert result["measured"] <= -0.9

    def test_cylinder_oracle(self, engine):
        result = engine.execute_rule(self.rule(engine, 9))
        assert result["test_status"] == "PASSED"
        assert result["measured"] == 0.0

    def test_diagonal_identity(self, engine):
        result = engine.execute_rule(self.rule(engine, 5))
        assert result["test_status"] == "PASSED"

    @pytest.mark.slow
    def test_limit_symmetry(self, engine):
        result = engine.execute_rule(self.rule(engine, 13))
        assert result["test_status"] == "PASSED"
        assert result["measured"] <= 0.12

    def test_failing_check_is_reported_as_error(self, engine, monkeypatch):
        def broken(params):
            raise DomainError("broken check")
        monkeypatch.setattr(engine, "_check_herz_slope", broken)
        result = engine.execute_rule(self.rule(engine, 8))
        assert result["test_status"] == "ERROR"
        assert result["test_message"] == "broken check"

    def test_run_selected_criteria(self, engine):
        summary = engine.run_all_rules(criteria=[8, 9])
        assert summary["total_rules"] == 2
        assert summary["passed"] + summary["failed"] + summary["error"] == 2
        assert [r["criterion"] for r in summary["results"]] == [8, 9]


def make_summary():
    results = [
        {"rule_name": "Herz Slope", "criterion": 8, "category": "Asymptotics", "severity": "CRITICAL",
         "measured": -1.4, "threshold": -0.9, "comparison": "le", "test_status": "PASSED",
         "test_message": "log-log slope -1.400", "details": {}, "execution_time_ms": 5},
        {"rule_name": "Siegel Mean", "criterion": 7, "category": "Oracle", "severity": "CRITICAL",
         "measured": 4.2, "threshold": 3.0, "comparison": "le", "test_status": "FAILED",
         "test_message": "mean off", "details": {}, "execution_time_ms": 12},
    ]
    return {"scale": "smoke", "total_rules": 2, "passed": 1, "failed": 1, "error": 0, "results": results}


class TestReports:

    def test_scorecard(self, tmp_path):
        generator = AcceptanceReportGenerator(OutputManager(str(tmp_path)))
        scorecard = generator.build_scorecard(make_summary())
        assert scorecard["overall_score"] == pytest.approx(50.0)
        assert scorecard["critical_failed"] == 1
        assert scorecard["asymptotics_score"] == pytest.approx(100.0)
        assert scorecard["oracle_score"] == pytest.approx(0.0)
        assert "identity_score" not in scorecard

    def test_written_files(self, tmp_path):
        outputs = OutputManager(str(tmp_path))
        generator = AcceptanceReportGenerator(outputs)
        path = generator.generate_scorecard(make_summary())
        document = outputs.read_json(path.name)
        assert document["schema_version"] == "1.0"
        assert len(document["results"]) == 2

        text = generator.generate_summary(make_summary()).read_text()
        assert "OVERALL SCORE: 50.0%" in text
        assert "IMMEDIATE ACTION" in text
