import json

import pytest

from zlens.cli import EXIT_INPUT, EXIT_OK, EXIT_VIOLATIONS, build_parser, main
from zlens.fixtures import write_fixture_suite


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixtures")
    write_fixture_suite(root)
    return root


def test_fixtures_suite_has_manifesto(tmp_path):
    out = tmp_path / "fx"
    assert main(["fixtures", "--out", str(out)]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "fixtures"
    for rel in manifest["artifacts"]:
        assert (out / rel).exists()


def test_check_clean_fixture_exits_zero(suite, tmp_path):
    out = tmp_path / "chk"
    rc = main(["check",
               "--geometry", str(suite / "footer/geometry.txt"),
               "--extents", str(suite / "footer/clean_extents.txt"),
               "--segments", str(suite / "footer/clean_segments.txt"),
               "--out", str(out)])
    assert rc == EXIT_OK
    assert (out / "reports.jsonl").read_text() == ""
    assert "no findings" in (out / "summary.txt").read_text()


def test_check_footer_fixture_exits_three(suite, tmp_path):
    out = tmp_path / "chk"
    rc = main(["check",
               "--geometry", str(suite / "footer/geometry.txt"),
               "--extents", str(suite / "footer/extents.txt"),
               "--segments", str(suite / "footer/segments.txt"),
               "--trace", str(suite / "footer/trace.jsonl"),
               "--out", str(out)])
    assert rc == EXIT_VIOLATIONS
    reports = [json.loads(l) for l in
               (out / "reports.jsonl").read_text().splitlines()]
    assert len(reports) == 1
    assert reports[0]["rule_id"] == "R2_GROUPING_HOTNESS_MIX"
    assert reports[0]["evidence"]["pattern"] == "FOOTER"


def test_trace_report_artifacts(suite, tmp_path):
    out = tmp_path / "tr"
    rc = main(["trace-report",
               "--geometry", str(suite / "fig3/geometry.txt"),
               "--trace", str(suite / "fig3/trace.jsonl"),
               "--out", str(out), "--window", "1000000"])
    assert rc == EXIT_OK
    for name in ("zones.csv", "resets.csv", "histogram.csv", "heatmap.svg",
                 "histogram.svg", "heatmap.png", "histogram.png",
                 "windows.csv", "report.txt", "manifest.json"):
        assert (out / name).exists(), name
    resets = dict(
        line.split(",") for line in
        (out / "resets.csv").read_text().splitlines()[1:])
    assert resets["2"] == "40"


def test_usage_error_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["trace-report", "--out", "/tmp/x"])  # missing required flags
    assert exc.value.code == 2


def test_missing_input_exits_one(tmp_path, capsys):
    rc = main(["fiemap", "--geometry", str(tmp_path / "nope.txt"),
               "--extents", str(tmp_path / "nope2.txt"),
               "--out", str(tmp_path / "o")])
    assert rc == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_help_documents_flags():
    parser = build_parser()
    sub = {a.dest: a for a in parser._actions
           if isinstance(a, type(parser._subparsers._group_actions[0]))}
    helps = {
        "fiemap": ("--geometry", "--extents", "--out"),
        "segmap": ("--segments", "--main-start", "--image"),
        "imap": ("--nids", "--manifest"),
        "trace-report": ("--window", "--scale", "--columns", "--png"),
        "timeline": ("--snapshot", "--filter-trivial"),
        "check": ("--thresholds", "--trace", "--snapshot"),
        "simulate": ("--script",),
        "fixtures": ("--out",),
    }
    chosen = parser._subparsers._group_actions[0].choices
    for name, flags in helps.items():
        text = chosen[name].format_help()
        for flag in flags:
            assert flag in text, (name, flag)


def test_no_writes_outside_out_dir(suite, tmp_path, monkeypatch):
    workdir = tmp_path / "cwd"
    workdir.mkdir()
    monkeypatch.chdir(workdir)
    out = tmp_path / "only_here"
    rc = main(["timeline",
               "--geometry", str(suite / "fig4/geometry.txt"),
               "--trace", str(suite / "fig4/events.jsonl"),
               "--out", str(out), "--filter-trivial"])
    assert rc == EXIT_OK
    assert list(workdir.iterdir()) == []
    manifest = json.loads((out / "manifest.json").read_text())
    produced = {p.relative_to(out).as_posix() for p in out.rglob("*")
                if p.is_file()}
    assert produced == set(manifest["artifacts"]) | {"manifest.json"}


def test_imap_with_manifest(suite, tmp_path):
    out = tmp_path / "im"
    rc = main(["imap",
               "--image", str(suite / "f2fs/image.img"),
               "--geometry", str(suite / "f2fs/geometry.txt"),
               "--manifest", str(suite / "f2fs/manifest.json"),
               "--out", str(out)])
    assert rc == EXIT_OK
    lines = (out / "imap.csv").read_text().splitlines()
    manifest = json.loads((suite / "f2fs/manifest.json").read_text())
    assert len(lines) == 1 + len(manifest["nids"])
    assert any("STALE_NAT" in l for l in lines)  # nid 6 is planted stale


def test_simulate_round_trip(suite, tmp_path):
    out = tmp_path / "sim"
    rc = main(["simulate",
               "--geometry", str(suite / "fig3/geometry.txt"),
               "--script", str(suite / "fig3/script.txt"),
               "--out", str(out)])
    assert rc == EXIT_OK
    assert (out / "trace.jsonl").read_text() \
        == (suite / "fig3/trace.jsonl").read_text()
    state = json.loads((out / "state.json").read_text())
    assert state["zones"][2]["reset_count"] == 40


def test_segmap_cli(suite, tmp_path):
    out = tmp_path / "sm"
    rc = main(["segmap",
               "--geometry", str(suite / "footer/geometry.txt"),
               "--extents", str(suite / "footer/extents.txt"),
               "--segments", str(suite / "footer/segments.txt"),
               "--out", str(out)])
    assert rc == EXIT_OK
    assert "sst31" in (out / "report.txt").read_text()
