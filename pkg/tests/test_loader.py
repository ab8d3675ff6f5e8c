"""
Unit tests for tree files
"""
import struct
import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from coevotree.errors import BadMagic, InvariantViolation, TruncatedFile
from coevotree.loader import HEADER, MAGIC, load_tree, serialize_tree, tree_from_bytes, tree_to_bytes
from coevotree.simulator import GrowthConfig, grow
from coevotree.streams import seeded_rng


@pytest.fixture(scope="module")
def trees():
    return {
        "discrete": grow(GrowthConfig(pmf="geometric:0.3", n=1000, seed=3), seeded_rng(3)),
        "continuous": grow(GrowthConfig(pmf="geometric:0.3", horizon=4.0, variant="continuous", seed=4),
                           seeded_rng(4)),
    }


class TestBinary:
    """Binary tree files"""

    def test_layout(self, trees):
        data = tree_to_bytes(trees["discrete"])
        magic, version, flags, n = HEADER.unpack_from(data)
        assert magic == MAGIC
        assert version == 1
        assert flags == 0
        assert n == 1000
        assert data[HEADER.size:HEADER.size + 8] == b"\xff" * 8, "root stored as all-ones"
        assert len(data) == HEADER.size + 8 * 1000

    def test_birth_times_survive(self, trees, tmp_path):
        tree = trees["continuous"]
        path = serialize_tree(tree, tmp_path / "tree.bin")
        loaded = load_tree(path)
        assert np.array_equal(loaded.parent, tree.parent)
        assert np.array_equal(loaded.depth, tree.depth)
        assert np.array_equal(loaded.birth_time, tree.birth_time)

    def test_bad_magic(self, trees):
        data = tree_to_bytes(trees["discrete"])
        with pytest.raises(BadMagic):
            tree_from_bytes(b"XXXX" + data[4:])

    def test_truncated(self, trees):
        data = tree_to_bytes(trees["discrete"])
        with pytest.raises(TruncatedFile):
            tree_from_bytes(data[:-8])
        with pytest.raises(TruncatedFile):
            tree_from_bytes(data[:8])

    def test_forward_parent_rejected(self):
        parents = np.array([0xFFFFFFFFFFFFFFFF, 0, 5], dtype="<u8")
        data = HEADER.pack(MAGIC, 1, 0, 3) + parents.tobytes()
        with pytest.raises(InvariantViolation):
            tree_from_bytes(data)

    def test_second_root_rejected(self):
        parents = np.array([0xFFFFFFFFFFFFFFFF, 0xFFFFFFFFFFFFFFFF], dtype="<u8")
        with pytest.raises(InvariantViolation):
            tree_from_bytes(HEADER.pack(MAGIC, 1, 0, 2) + parents.tobytes())

    def test_unknown_version(self):
        with pytest.raises(BadMagic):
            tree_from_bytes(struct.pack("<4sBBQ", MAGIC, 9, 0, 0))


class TestTsv:
    """Tab-separated tree files"""

    def test_tsv(self, trees, tmp_path):
        tree = trees["discrete"]
        path = serialize_tree(tree, tmp_path / "tree.tsv")
        lines = path.read_text().splitlines()
        assert lines[0] == "index\tparent\tdepth"
        assert lines[1] == "0\t-1\t0"
        loaded = load_tree(path)
        assert np.array_equal(loaded.parent, tree.parent)

    def test_depth_mismatch(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("index\tparent\tdepth\n0\t-1\t0\n1\t0\t2\n")
        with pytest.raises(InvariantViolation):
            load_tree(path)

    def test_unknown_format(self, trees, tmp_path):
        with pytest.raises(ValueError):
            serialize_tree(trees["discrete"], tmp_path / "tree.json")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
