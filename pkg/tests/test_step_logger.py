import json

from comprestore.core.step_logger import StepLogger


def test_records_are_json_lines(tmp_path):
    with StepLogger(tmp_path, "restoration-full") as steps:
        steps.log({"step": 0, "total": 0.5})
        steps.log({"step": 1, "total": 0.25})
        path = steps.log_path
    lines = path.read_text(encoding="utf-8").splitlines()
    assert [json.loads(l)["step"] for l in lines] == [0, 1]
    assert path.name.startswith("restoration-full-")


def test_rotates_when_file_is_full(tmp_path):
    steps = StepLogger(tmp_path, "perception", max_bytes=10)
    first = steps.log_path
    steps.log({"step": 0, "payload": "x" * 20})
    steps.log({"step": 1})
    assert steps.log_path != first
    steps.close()
    assert len(list(tmp_path.glob("perception-*.jsonl"))) == 2


def test_unsafe_title_is_sanitised(tmp_path):
    with StepLogger(tmp_path, "a/b c") as steps:
        assert "/" not in steps.log_path.name
