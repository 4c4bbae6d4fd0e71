import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavelimit import ConfigurationError, ParabolicState, integrate, zero
from wavelimit.io import MAGIC, field_csv, read_snapshots, table_csv, trajectory_csv, write_snapshots


@settings(max_examples=20, deadline=None)
@given(S=st.integers(1, 5), N=st.integers(1, 7), with_v=st.booleans(), seed=st.integers(0, 1000))
def test_snapshot_round_trip(tmp_path_factory, S, N, with_v, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((S, N))
    v = rng.standard_normal((S, N)) if with_v else None
    p = tmp_path_factory.mktemp("snap") / "s.bin"
    write_snapshots(p, "0123456789abcdef", 0.25, 1e-3, u, v)
    s = read_snapshots(p)
    assert p.stat().st_size == 68 + 8 * S * N * (2 if with_v else 1)
    np.testing.assert_array_equal(s.u, u)
    if with_v:
        np.testing.assert_array_equal(s.v, v)
    else:
        assert s.v is None
    assert (s.grid_hash, s.eps, s.dt) == ("0123456789abcdef", 0.25, 1e-3)


def test_snapshot_rejects_corruption(tmp_path):
    p = tmp_path / "s.bin"
    write_snapshots(p, "0123456789abcdef", 0.0, 1.0, np.ones((2, 3)))
    data = p.read_bytes()
    assert data[:8] == MAGIC
    (tmp_path / "short.bin").write_bytes(data[:-8])
    with pytest.raises(ConfigurationError, match="expected"):
        read_snapshots(tmp_path / "short.bin")
    (tmp_path / "magic.bin").write_bytes(b"X" + data[1:])
    with pytest.raises(ConfigurationError, match="magic"):
        read_snapshots(tmp_path / "magic.bin")
    with pytest.raises(ValueError):
        write_snapshots(p, "short", 0.0, 1.0, np.ones((2, 3)))


def test_csv_writers(line32):
    u = np.arange(line32.size, dtype=float)
    text = field_csv(u, line32.grid)
    lines = text.splitlines()
    assert lines[0] == "node,x0,value" and len(lines) == line32.size + 1
    assert table_csv({"a": [1.0, 2.0], "b": [3, 4]}) == "a,b\n1.0,3\n2.0,4\n"
    with pytest.raises(ValueError):
        table_csv({"a": [1.0], "b": [1.0, 2.0]})
    tr = integrate(line32, zero(line32.grid), ParabolicState(np.sin(line32.grid.coordinates[:, 0])), 0.1, 0.05)
    assert trajectory_csv(tr).splitlines()[0].startswith("t,u0,u1")
    assert trajectory_csv(tr, {"max": lambda u, v: np.max(u)}).splitlines()[0] == "t,max"
    assert trajectory_csv(tr) == trajectory_csv(tr)
