"""Smoke test for the Python bindings.

Build and install first:
    pip install maturin
    pip install --no-build-isolation -e crates/python
"""

import json

import cpcompress


def main():
    ring = cpcompress.gen("ring", 100)
    assert cpcompress.size(ring) == (100, 100)
    assert len(cpcompress.classes(ring)) == 100

    report, files = cpcompress.compress(ring, jobs=4, ec="10.0.7.0/24")
    assert report.count("\n") == 1 and "51 nodes / 50 edges" in report, report
    assert sorted(files) == ["ec7_r7.json", "ec7_r7.map.json"]
    abstract = files["ec7_r7.json"]
    assert cpcompress.size(abstract) == (51, 50)
    res = cpcompress.check(ring, abstract, files["ec7_r7.map.json"])
    assert res.passed and res.equivalent is None, res

    gadget = cpcompress.gen("lp-gadget", 0)
    report, files = cpcompress.compress(gadget)
    assert "-> 4 nodes / 4 edges" in report, report
    res = cpcompress.check(gadget, files["ec0_d.json"], files["ec0_d.map.json"])
    assert res.passed and res.equivalent and res.mode == "ForallForall", res

    sols = cpcompress.simulate(gadget, "10.0.0.0/24", enumerate=True)
    assert len(sols) == 3
    for sol in sols:
        direct = [name for name, _, fwd in sol if fwd == ["d"]]
        assert len(direct) == 1, sol

    mapping = json.loads(files["ec0_d.map.json"])
    assert set(mapping["f"]) == {"d", "a", "b1", "b2", "b3"}

    try:
        cpcompress.size("{")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed spec accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
