import numpy as np
import pytest

from ddgcn.errors import ConfigError
from ddgcn.windows import WindowSpec, relative_position_index, split_windows


def test_window_count_default_config():
    layout = split_windows(64, 25, WindowSpec(4, 25))
    assert layout.num_windows == 16
    assert layout.padded_frames == 64


def test_single_window():
    layout = split_windows(4, 25, WindowSpec(4, 25))
    assert layout.num_windows == 1


def test_padding_rule():
    layout = split_windows(5, 25, WindowSpec(4, 25))
    assert layout.padded_frames == 8
    assert layout.num_windows == 2
    assert np.array_equal(layout.pad_frames, [0, 1, 2, 3, 4, 4, 4, 4])


@pytest.mark.parametrize("frames", [4, 5, 63, 64])
@pytest.mark.parametrize("m", [1, 4, 8])
@pytest.mark.parametrize("v", [5, 25])
def test_window_count_law(frames, m, v):
    layout = split_windows(frames, v, WindowSpec(m, v))
    assert layout.padded_frames % m == 0
    assert layout.padded_frames - frames < m
    assert layout.num_windows == (layout.padded_frames // m) * (v // v)


def test_joint_blocks():
    layout = split_windows(4, 6, WindowSpec(2, 3))
    assert layout.num_windows == 4
    # first window: frames 0-1, joints 0-2, frame-major
    first = layout.gather[:6]
    assert np.array_equal(first, [0, 1, 2, 6, 7, 8])


def test_indivisible_joint_count():
    with pytest.raises(ConfigError):
        split_windows(8, 25, WindowSpec(4, 10))


def test_tokens_cover_grid_exactly():
    for frames, m in [(4, 4), (5, 4), (7, 8), (6, 2)]:
        layout = split_windows(frames, 5, WindowSpec(m, 5))
        assert sorted(layout.gather.tolist()) == list(range(layout.padded_frames * 5))
        assert np.array_equal(layout.gather[layout.scatter], np.arange(layout.padded_frames * 5))


def test_split_merge_round_trip():
    rng = np.random.default_rng(0)
    layout = split_windows(5, 5, WindowSpec(4, 5))
    grid = rng.standard_normal((layout.padded_frames * 5, 3))
    assert np.array_equal(grid[layout.gather][layout.scatter], grid)


def test_relative_position_center():
    for m, n in [(1, 2), (4, 5), (4, 25), (3, 3)]:
        spec = WindowSpec(m, n)
        idx = relative_position_index(spec)
        center = (m - 1) * (2 * n - 1) + (n - 1)
        assert np.all(np.diag(idx) == center)
        assert idx.min() >= 0 and idx.max() < spec.bias_table_size


def test_relative_position_1x2():
    idx = relative_position_index(WindowSpec(1, 2))
    assert idx[0, 1] == 2
    assert idx[1, 0] == 0


def test_relative_position_depends_only_on_offsets():
    spec = WindowSpec(3, 4)
    idx = relative_position_index(spec)
    n = spec.joints
    tokens = spec.tokens
    coords = [(p // n, p % n) for p in range(tokens)]
    seen = {}
    for p in range(tokens):
        for q in range(tokens):
            off = (coords[q][0] - coords[p][0], coords[q][1] - coords[p][1])
            if off in seen:
                assert idx[p, q] == seen[off]
            else:
                seen[off] = idx[p, q]
    # negated offsets map to the mirrored table entry
    for (dt, dv), value in seen.items():
        mirrored = seen[(-dt, -dv)]
        assert mirrored == (-dt + spec.frames - 1) * (2 * n - 1) + (-dv + n - 1)
        assert value + mirrored == 2 * ((spec.frames - 1) * (2 * n - 1) + (n - 1))
