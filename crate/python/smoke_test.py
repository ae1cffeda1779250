"""Smoke test for the `mimosa` Python extension.

Build and install it first:

    pip install --no-build-isolation -e crates/python

then run `python3 python/smoke_test.py` from the repository root.
"""

from pathlib import Path

import mimosa

PROGRAMS = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "programs"


def fibonacci():
    source = (PROGRAMS / "fib.mim").read_text()
    assert mimosa.check(source) == []
    result = mimosa.run(source, "200ms")
    d = [value for (_, channel, value, _) in result["trace"] if channel == "d"]
    assert d == [0, 1, 1, 2, 3, 5, 8, 13, 21, 34], d
    assert result["output"][:3] == ["10ms: 0", "30ms: 1", "50ms: 1"]
    assert mimosa.confluence(source, "200ms", runs=20) is None


def edge_detector():
    source = (PROGRAMS / "edge_system.mim").read_text()
    levels = [False, False, True, True, False, False]
    result = mimosa.run(source, 700_000, stubs={"pin": levels})
    b = [(t, v) for (t, channel, v, _) in result["trace"] if channel == "b"]
    assert b == [(400_000, True), (600_000, False)], b

    # a callable stub sees the activation time and the (unit) argument
    calls = []

    def pin(time_us, arg):
        calls.append((time_us, arg))
        return time_us >= 300_000

    result = mimosa.run(source, "700ms", stubs={"pin": pin})
    assert calls[0] == (0, ())
    assert result["output"] == ["500ms: true"], result["output"]


def evaluation():
    assert mimosa.eval_expression("0 -> pre x", {"x": 1}) == ("0", "1 -> pre x")
    assert mimosa.eval_expression("pre x", {"x": 5}) == ("⊥", "5 -> pre x")
    assert mimosa.eval_expression("either o otherwise 3", {"o": None})[0] == "3"


def errors():
    diags = mimosa.check("step s () --> x { x = 0 -> 0 -> pre pre x }")
    assert len(diags) == 1 and "pre x" in diags[0], diags
    try:
        mimosa.run((PROGRAMS / "edge.mim").read_text(), "1s")
    except mimosa.MimosaError as e:
        assert "no writing node" in str(e)
    else:
        raise AssertionError("open network was simulated")
    assert mimosa.format("step  f x-->y{y=x}") == "step f x --> y {\n    y = x;\n}\n"


if __name__ == "__main__":
    for check in (fibonacci, edge_detector, evaluation, errors):
        check()
        print(f"ok {check.__name__}")
