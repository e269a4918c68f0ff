"""Smoke test for the omni_infer Python module.

Build and install it first:

    pip install --no-build-isolation ./crates/python
"""

import omni_infer

PRELUDE = """
type point = { x : int; y : int }
type gray_point = { x : int; y : int; color : int }
"""


def main():
    report = omni_infer.check(PRELUDE + "let ex_3 r = (r.x, (r : point).y)\nlet ex_1 r = r.x\n", oracle_depth=2)
    ex_3, ex_1 = report.bindings
    assert ex_3.outcome == "accepted", ex_3
    assert ex_3.scheme == "point -> int * int", ex_3.scheme
    assert ex_3.oracle == "agrees", ex_3.oracle
    assert ex_1.outcome == "ambiguous", ex_1
    assert ex_1.line == "ex_1 : ambiguous record projection .x", ex_1.line
    assert report.exit_code == 2, report.exit_code

    types = omni_infer.infer("let id x = x\nlet pair = (id 1, id true)\n")
    assert types == {"id": "'a -> 'a", "pair": "int * bool"}, types

    assert omni_infer.schemes_equal("'a. 'a -> 'a", "'b -> 'b")
    assert not omni_infer.schemes_equal("'a -> 'b", "'a -> 'a")

    left = omni_infer.check("let pid = [ fun x -> x : 'a. 'a -> 'a ]\nlet e = app (fun p -> <p>) pid", order="left")
    right = omni_infer.check("let pid = [ fun x -> x : 'a. 'a -> 'a ]\nlet e = app (fun p -> <p>) pid", order="right")
    assert left.bindings[1].scheme == right.bindings[1].scheme == "'a -> 'a"

    try:
        omni_infer.check("let = 1")
    except ValueError:
        pass
    else:
        raise AssertionError("parse error not raised")
    print("smoke test passed")


if __name__ == "__main__":
    main()
