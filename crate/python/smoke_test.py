"""Smoke test for the `ptss` extension module.

Build the library first:

    cargo build --release -p ptss-python

then run `python3 python/smoke_test.py`. The script copies the shared
library into a temporary directory as `ptss.so` and imports it from there,
unless `ptss` is already importable.
"""

import importlib
import shutil
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
SPECS = ROOT / "specs"


def import_ptss():
    try:
        return importlib.import_module("ptss")
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libptss.so"
        if lib.exists():
            tmp = Path(tempfile.mkdtemp(prefix="ptss-"))
            shutil.copy(lib, tmp / "ptss.so")
            sys.path.insert(0, str(tmp))
            return importlib.import_module("ptss")
    sys.exit("libptss.so not found; run `cargo build --release -p ptss-python`")


def main():
    ptss = import_ptss()

    pa = ptss.Spec.load(str(SPECS / "pa.ptss"))
    assert pa.name == "pa"
    assert set(pa.defs) == {"t1", "t2", "t3", "t4", "t5", "t6"}
    assert all(e["verdict"] == "conforms" for e in pa.check())

    eq1 = ptss.Spec.load(str(SPECS / "counterexamples" / "eq1.ptss"))
    bad = [e for e in eq1.check("convex") if e["verdict"] == "violates"]
    assert [(e["rule"], e["condition"]) for e in bad] == [("f_eq1", "7")], bad

    table = pa.derive("t5")
    assert table["complete"] and table["iterations"] == 1
    (a_step,) = [t for t in table["certain"] if t[1] == "a"]
    assert a_step[2] == {"b.dirac(0)": Fraction(1, 2), "c.dirac(0)": Fraction(1, 2)}

    model = pa.model()
    matrix = {
        rel: [model.equivalent(l, r, rel) for l, r in (("t1", "t2"), ("t3", "t4"), ("t5", "t6"))]
        for rel in ("strong", "convex", "abstracted", "obliterated")
    }
    assert matrix == {
        "strong": [False, False, False],
        "convex": [True, False, False],
        "abstracted": [False, True, False],
        "obliterated": [True, True, True],
    }, matrix

    phi = model.distinguish("t5", "t6", "abstracted")
    assert phi is not None and "abstracted" in ptss.fragment(phi)
    assert model.sat("t5", phi) != model.sat("t6", phi)
    assert model.distinguish("t1", "t2", "convex") is None
    assert model.sat("t3", "<a>[<c>tt]_1/2") is False
    assert model.sat("t4", "<a>[<c>tt]_1/2") is True

    again = ptss.Model.from_text(model.to_text())
    assert again.states == model.states
    assert len(again.quotient("strong")) == len(model.quotient("strong"))

    report = eq1.probe("convex", trials=200, seed=0)
    assert report["found"], report
    clean = ptss.Spec.load(str(SPECS / "conforming" / "convex.ptss")).probe("convex", trials=50)
    assert not clean["found"]

    cycle = ptss.Spec.load(str(SPECS / "negative_cycle.ptss"))
    assert not cycle.derive("root")["complete"]
    try:
        cycle.model()
    except ptss.PtssError as e:
        assert "incomplete" in str(e)
    else:
        raise AssertionError("incomplete model accepted")

    try:
        ptss.Spec("spec broken\nrule r: => ((")
    except ptss.PtssError:
        pass
    else:
        raise AssertionError("malformed spec accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
