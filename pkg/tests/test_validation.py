import numpy as np

from softcc.robot import FixedBase, Material, RobotDescription, Segment, paper_arm
from softcc.validation import CHECKS, validate


def test_reference_arm_passes():
    report = validate(paper_arm(5))
    assert report.passed
    assert [c.name for c in report.checks] == [c[0] for c in CHECKS]
    assert "9/9 checks passed" in report.format()


def test_single_segment_passes():
    assert validate(paper_arm(1)).passed


def test_floating_and_material_robots_pass(floating2):
    assert validate(floating2).passed
    robot = RobotDescription((Segment(0.05, 0.02, material=Material(500.0, 50.0, 0.01)),) * 3, (0.0, -9.81),
                             FixedBase((0.0, 0.0, -np.pi / 2)))
    assert validate(robot).passed


def test_failing_check_is_reported():
    checks = CHECKS + (("always_fails", lambda robot: 1.0, 0.5, "le"),)
    report = validate(paper_arm(1), checks)
    assert not report.passed
    assert report.checks[-1].line().startswith("FAIL")
