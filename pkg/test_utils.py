# test_utils.py

import numpy as np
import pandas as pd
import pytest

from utils import atomic_write, child_int_seed, child_rng, write_csv


def test_child_seeds_are_deterministic_and_distinct():
    assert child_int_seed(7, 1, 2) == child_int_seed(7, 1, 2)
    seeds = {child_int_seed(7, phase, idx) for phase in (1, 2) for idx in range(1, 50)}
    assert len(seeds) == 98
    a = child_rng(3, 1).standard_normal(4)
    np.testing.assert_array_equal(a, child_rng(3, 1).standard_normal(4))
    assert not np.array_equal(a, child_rng(3, 2).standard_normal(4))


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    target = tmp_path / "nested" / "table.csv"
    with atomic_write(target) as f:
        f.write("old\n")
    with pytest.raises(RuntimeError):
        with atomic_write(target) as f:
            f.write("partial")
            raise RuntimeError("boom")
    assert target.read_text() == "old\n"
    assert [p.name for p in target.parent.iterdir()] == ["table.csv"]


def test_write_csv_enforces_column_order(tmp_path):
    frame = pd.DataFrame({"b": [2.0], "a": [1]})
    path = write_csv(frame, tmp_path / "t.csv", ["a", "b"])
    assert path.read_text() == "a,b\n1,2.0\n"
    empty = write_csv(pd.DataFrame(), tmp_path / "e.csv", ["x_0", "y_0"])
    assert empty.read_text() == "x_0,y_0\n"
    with pytest.raises(KeyError):
        write_csv(frame, tmp_path / "bad.csv", ["a", "c"])
