"""Command line surface: exit codes and printed output."""

import medclaim.envelope as ev
from medclaim.cli import main


def write_envelope(path) -> bytes:
    env = ev.Envelope(
        message_id="11111111-2222-3333-4444-555555555555",
        correlation_id="aaaaaaaa-bbbb-cccc-dddd-eeeeeeeeeeee",
        timestamp=ev.parse_instant("2024-03-01T00:00:00Z"),
        service="Settlement",
        operation="settle",
        body=ev.SettleRequest(claim_id="99999999-8888-7777-6666-555555555555"),
    )
    data = ev.serialize(env)
    path.write_bytes(data)
    return data


class TestValidate:
    def test_valid_document(self, tmp_path, capsys):
        doc = tmp_path / "doc.xml"
        write_envelope(doc)
        assert main(["validate", str(doc)]) == 0
        assert capsys.readouterr().out == "valid\n"

    def test_violations_print_path_rule_detail(self, tmp_path, capsys):
        doc = tmp_path / "doc.xml"
        text = write_envelope(doc).decode()
        doc.write_text(text.replace("aaaaaaaa", "ZZZZZZZZ"))
        assert main(["validate", str(doc)]) == 1
        lines = capsys.readouterr().out.splitlines()
        assert lines, "expected at least one violation line"
        for line in lines:
            path, rule, detail = line.split("\t")
            assert path.startswith("/")
            assert rule and detail

    def test_missing_file(self, tmp_path, capsys):
        assert main(["validate", str(tmp_path / "ghost.xml")]) == 2
        assert "cannot read" in capsys.readouterr().err


class TestSimulate:
    def test_bundled_scenario_census(self, capsys):
        assert main(["simulate"]) == 0
        out = capsys.readouterr().out
        assert "SETTLED 3" in out
        assert "ID_REJECTED 1" in out
        assert "SCRUTINY_DENIED 2" in out

    def test_scenario_file(self, tmp_path, capsys):
        scenario = tmp_path / "one.scenario"
        scenario.write_text(
            "claim a submit INS-ACME-0001 HOSP-001 5000000\n"
            "claim a event ScrutinyApprove\n")
        assert main(["simulate", "--scenario", str(scenario)]) == 0
        out = capsys.readouterr().out
        assert "a preauth_submit -> UNDER_SCRUTINY" in out
        assert "a scrutinize -> SCRUTINY_APPROVED" in out
        assert "a SCRUTINY_APPROVED" in out

    def test_fault_steps_are_marked(self, tmp_path, capsys):
        scenario = tmp_path / "bad.scenario"
        scenario.write_text(
            "claim a submit INS-ACME-0001 HOSP-001 5000000\n"
            "claim a event Settle\n")
        assert main(["simulate", "--scenario", str(scenario)]) == 0
        out = capsys.readouterr().out
        assert "a settle !! wrong-state" in out

    def test_parse_error_exits_nonzero(self, tmp_path, capsys):
        scenario = tmp_path / "broken.scenario"
        scenario.write_text("claim a submit\n")
        assert main(["simulate", "--scenario", str(scenario)]) == 1
        assert "scenario error" in capsys.readouterr().err


class TestCompare:
    def test_table_for_five_types(self, capsys):
        assert main(["compare", "--policy-types", "5"]) == 0
        out = capsys.readouterr().out
        assert "policy types: 5" in out
        for name in ("PreAuth", "Scrutiny", "CashAuth"):
            row = next(line for line in out.splitlines() if line.startswith(name))
            assert row.split()[1:] == ["1", "5"]
        total = next(line for line in out.splitlines()
                     if line.startswith("total instances"))
        assert total.split()[2:] == ["3", "15"]

    def test_rejects_zero(self, capsys):
        assert main(["compare", "--policy-types", "0"]) == 1
        assert "positive" in capsys.readouterr().err


class TestSeed:
    def test_reports_counts(self, tmp_path, capsys):
        fixtures = tmp_path / "ref.fixtures"
        fixtures.write_text(
            "company|ACME\n"
            "policy|ACME|INS-1|hospitalization|100000|INR|active\n"
            "tpa|TPA-X|Example TPA\n"
            "hospital|HOSP-X|Example Hospital|TPA-X\n")
        assert main(["seed", "--fixtures", str(fixtures)]) == 0
        out = capsys.readouterr().out
        assert "companies 1" in out
        assert "policies  1" in out

    def test_bad_fixture_line(self, tmp_path, capsys):
        fixtures = tmp_path / "ref.fixtures"
        fixtures.write_text("spaceship|X\n")
        assert main(["seed", "--fixtures", str(fixtures)]) == 1
        assert "fixture error: line 1" in capsys.readouterr().err
