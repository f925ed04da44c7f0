import itertools
import json

import pytest

from helpers import MUTATIONS, delete_send, golden_doc, load, misplace_backward
from wavepipe import generate, validate
from wavepipe.validator import (
    check_completeness,
    check_deadlock_free,
    check_dependencies,
    check_flush,
)

SCHEMES = ["gpipe", "dapple", "chimera", "chimera-wave", "hanayo"]


def grid():
    for scheme, P, W, mult in itertools.product(SCHEMES, [1, 2, 4, 8], [1, 2, 4], [1, 2]):
        if scheme in ("gpipe", "dapple", "chimera") and W > 1:
            continue
        if scheme in ("chimera", "chimera-wave") and P % 2:
            continue
        yield scheme, P, P * mult, W


@pytest.mark.parametrize("args", list(grid()), ids=lambda a: "-".join(map(str, a)))
def test_generated_schedules_validate(args):
    report = validate(generate(*args))
    assert report.ok, report.render()


@pytest.mark.parametrize("check", sorted(MUTATIONS))
def test_mutation_rejected_by_target(check):
    report = validate(load(MUTATIONS[check]()))
    assert check in report.checks_failed()


def test_golden_fixtures_are_clean():
    for name in ["gpipe_P2_B2", "gpipe_P4_B4", "dapple_P4_B4", "hanayo_P4_B4_W2"]:
        assert validate(load(golden_doc(name))).ok


class TestCompleteness:
    def test_pass(self):
        assert check_completeness(generate("hanayo", 4, 4, 2)).ok

    def test_deleted_forward_named(self):
        report = check_completeness(load(MUTATIONS["completeness"]()))
        assert any("missing forward (mb 2, slice 1)" in d.message for d in report.errors)

    def test_misplaced(self):
        report = check_completeness(load(misplace_backward(golden_doc("gpipe_P4_B4"), 1, 0, 0)))
        assert any(d.message.startswith("misplaced") for d in report.errors)


class TestDependencies:
    def test_pass(self):
        assert check_dependencies(generate("dapple", 4, 4)).ok

    def test_cycle(self):
        report = check_dependencies(load(MUTATIONS["dependencies"]()))
        assert any("cycle" in d.message for d in report.errors)

    def test_unmatched_receive(self):
        report = check_dependencies(load(delete_send(golden_doc("gpipe_P2_B2"))))
        assert any("unmatched receive" in d.message for d in report.errors)


class TestDeadlock:
    def test_pass(self):
        assert check_deadlock_free(generate("hanayo", 4, 4, 2)).ok

    def test_defused_exchange(self):
        report = check_deadlock_free(load(MUTATIONS["deadlock"]()))
        assert not report.ok
        assert report.errors[0].device in (0, 1)

    def test_single_device(self):
        assert check_deadlock_free(generate("hanayo", 1, 3, 2)).ok


class TestFlush:
    def test_pass(self):
        for scheme in SCHEMES:
            assert check_flush(generate(scheme, 4, 4)).ok

    def test_premature(self):
        report = check_flush(load(MUTATIONS["flush"]()))
        assert "premature" in report.errors[0].message

    def test_missing(self):
        doc = golden_doc("gpipe_P2_B2")
        doc["actions"][1].pop()
        report = check_flush(load(doc))
        assert "missing flush" in report.errors[0].message


def test_report_json_shape():
    report = validate(load(MUTATIONS["flush"]()))
    rows = json.loads(report.to_json())
    assert rows and set(rows[0]) == {"check", "severity", "device", "position", "message"}
    assert report.render().startswith("ERROR flush")
