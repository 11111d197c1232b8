"""Smoke test for the `idla` extension module.

Imports an installed `idla` if there is one; otherwise builds the cdylib
with cargo and loads it from the target directory.
"""

import importlib.util
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import idla
        return idla
    except ImportError:
        pass
    subprocess.run(["cargo", "build", "--release", "-p", "idla-py"], cwd=ROOT, check=True)
    lib = ROOT / "target" / "release" / "libidla.so"
    if not lib.exists():
        lib = ROOT / "target" / "release" / "libidla.dylib"
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "idla.so")
    spec = importlib.util.spec_from_file_location("idla", tmp / "idla.so")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    idla = load()

    c = idla.grow(2, n=10, seed=42)
    assert len(c) == 305, len(c)
    assert [0, 0] in c
    assert len({tuple(s) for s in c.sites()}) == len(c)
    inner, outer = c.error_radii(10)
    assert 0 <= inner <= 10 and outer >= 0
    again = idla.grow(2, n=10, seed=42)
    assert again.settle_order() == c.settle_order()
    dump = json.loads(c.to_json())
    assert dump["schema"] == "idla.cluster/1" and dump["occupied"] == 305

    stopped = idla.grow(3, count=300, stop_radius=3, seed=1)
    assert len(stopped) + sum(k for _, k in stopped.stopped_on_boundary()) == 300

    waves, table = idla.grow_by_waves(2, 8, seed=3)
    assert table[0][0] == 1 and table[-1][2] + table[-1][3] == len(waves)

    run = idla.flashing_run(2, 8, seed=5)
    assert run["order_violations"] == 0

    assert abs(idla.green_function(2, 1.5, [0, 0], [0, 0]) - 1.5) < 1e-9
    p = idla.hitting_probability(2, [1, 0], [0, 0], 3)
    assert 0 < p < 1

    lam, bound, log_bound = idla.lower_tail_bound(100, 50, 0, 2, 10)
    assert abs(lam - 5 / 12) < 1e-12
    assert abs(log_bound + 2500 / 240) < 1e-9
    lam, _, _ = idla.upper_tail_bound(10, 30, 0)
    assert lam <= math.log(2)
    try:
        idla.upper_tail_bound(10, 30, 0, lambda_=0.9)
    except ValueError:
        pass
    else:
        raise AssertionError("lambda above ln 2 accepted")

    heights, counts, l = idla.subdivide(40, 1.0, 100, lambda k, h: math.floor(h[k]))
    assert l == len(counts) and len(heights) == l + 2
    assert 20 <= sum(heights[1 : l + 1]) <= 30

    try:
        idla.subdivide(8, 1.0, 5, lambda k, h: 2)
    except idla.IdlaError:
        pass
    else:
        raise AssertionError("precondition not enforced")

    try:
        idla.grow(1, n=3)
    except ValueError:
        pass
    else:
        raise AssertionError("d = 1 accepted")

    hits, trials = idla.probe_origin_hit(2, 1, 2.0, 400, seed=1)
    assert trials == 400 and 0 < hits < 400
    flash, plain, violations, _ = idla.probe_traps(2, 4, 1.0, 200, seed=2)
    assert violations == 0 and flash >= plain

    print("python smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
