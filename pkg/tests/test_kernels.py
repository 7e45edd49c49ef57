"""Compiled-kernel / pure-Python parity: identical outputs on the same inputs."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from dhjlab import kernels
from dhjlab._rng import GENERATOR_NAME, make_rng
from dhjlab import _kernels_py

WORKLOAD = r"""
import json, sys
import numpy as np
from dhjlab import kernels

rng = np.random.default_rng(7)
out = {"impl": kernels.IMPLEMENTATION}

bits = np.ascontiguousarray(rng.random(81) < 0.7)
cnt, wits = kernels.scan_lines(bits, 4, 5)
out["scan"] = [int(cnt), [list(w) for w in wits]]

digit_vals = np.array([[0,0,0],[1,1,1],[2,2,2],[0,1,2]], dtype=np.int64)
bases = np.array([3,3,3], dtype=np.int64)
sets = [np.ascontiguousarray(rng.random(27) < 0.6) for _ in range(3)]
cc = kernels.class_counts(sets, digit_vals, bases, 3)
out["class_counts"] = [int(x) for x in cc]

lines = np.array(sorted({tuple(sorted(rng.choice(20, 3, replace=False).tolist()))
                         for _ in range(25)}), dtype=np.int64)
size, member, nodes, proven = kernels.bb_max_independent(lines, 20, 10**6)
out["bb"] = [int(size), [int(x) for x in np.asarray(member)],
             bool(proven)]
print(json.dumps(out))
"""


def _run_workload(force_py: bool) -> dict:
    env = dict(os.environ)
    if force_py:
        env["DHJLAB_FORCE_PY"] = "1"
    else:
        env.pop("DHJLAB_FORCE_PY", None)
    res = subprocess.run([sys.executable, "-c", WORKLOAD], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


class TestImplementationSelection:
    def test_active_implementation_named(self):
        assert kernels.IMPLEMENTATION in ("cython", "python-numpy")

    def test_force_py_selects_fallback(self):
        out = _run_workload(force_py=True)
        assert out["impl"] == "python-numpy"

    def test_rng_generator_name(self):
        assert GENERATOR_NAME == "numpy-PCG64"
        a = make_rng(5, "path").random(4)
        b = make_rng(5, "path").random(4)
        assert np.array_equal(a, b)
        c = make_rng(5, "other").random(4)
        assert not np.array_equal(a, c)


@pytest.fixture(scope="module")
def outputs():
    return _run_workload(force_py=False), _run_workload(force_py=True)


class TestParity:
    def test_scan_lines_parity(self, outputs):
        compiled, fallback = outputs
        assert compiled["scan"] == fallback["scan"]

    def test_class_counts_parity(self, outputs):
        compiled, fallback = outputs
        assert compiled["class_counts"] == fallback["class_counts"]

    def test_bb_parity(self, outputs):
        compiled, fallback = outputs
        assert compiled["bb"] == fallback["bb"]


class TestPurePythonContracts:
    def test_scan_lines_full_cube(self):
        bits = np.ones(9, dtype=bool)
        cnt, wits = _kernels_py.scan_lines(bits, 2, 3)
        assert cnt == 7  # every wildcard word at n = 2 minus the all-fixed ones
        assert len(wits) == 3
        assert all(3 in w for w in wits)

    def test_scan_lines_empty(self):
        bits = np.zeros(9, dtype=bool)
        assert _kernels_py.scan_lines(bits, 2, 3) == (0, [])

    def test_class_counts_total(self):
        # summed over classes, every atom word of the full-support sets counts
        digit_vals = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2], [0, 1, 2]],
                              dtype=np.int64)
        bases = np.array([3, 3, 3], dtype=np.int64)
        sets = [np.ones(9, dtype=bool)] * 3
        out = _kernels_py.class_counts(sets, digit_vals, bases, 2)
        assert int(out.sum()) == 4**2

    def test_class_counts_size_guard(self):
        digit_vals = np.zeros((40, 1), dtype=np.int64)
        bases = np.array([3], dtype=np.int64)
        with pytest.raises(ValueError):
            _kernels_py.class_counts([np.ones(3, dtype=bool)], digit_vals,
                                     bases, 30)

    def test_bb_trivial_instances(self):
        empty = np.zeros((0, 3), dtype=np.int64)
        size, member, nodes, proven = _kernels_py.bb_max_independent(empty, 5, 100)
        assert size == 5 and proven
        one = np.array([[0, 1, 2]], dtype=np.int64)
        size, member, nodes, proven = _kernels_py.bb_max_independent(one, 3, 100)
        assert size == 2 and proven
        m = np.asarray(member, dtype=bool)
        assert m.sum() == 2
