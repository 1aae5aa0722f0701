import os

import numpy as np
import pytest

from rollguard._exceptions import PadError, TamperDetected
from rollguard._merkle import (
    EMPTY_ROOT,
    MerkleTree,
    PersistentPad,
    leaf_hash,
    verify_consistency,
    verify_consistency_path,
    verify_inclusion,
    verify_inclusion_path,
)
from rollguard.constants import PAD_HEADER_SIZE
from rollguard.models.leaves import LeafKind, PadLeaf
from rollguard.models.proofs import PadRoot, max_path_length

from ..oracles import naive_consistency, naive_inclusion, naive_root


def _leaves(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    return [rng.bytes(int(rng.integers(1, 40))) for _ in range(n)]


def _tree(leaves):
    return MerkleTree([leaf_hash(leaf) for leaf in leaves])


def _flip(digest: bytes, position: int = 0) -> bytes:
    mutated = bytearray(digest)
    mutated[position % len(mutated)] ^= 0x01
    return bytes(mutated)


# =============================================================================
# In-memory tree against the naive oracle
# =============================================================================


def test_empty_tree_root():

    assert MerkleTree().root() == EMPTY_ROOT
    assert naive_root([]) == EMPTY_ROOT


@pytest.mark.parametrize("n", range(1, 65))
def test_exhaustive_oracle_equivalence(n):

    leaves = _leaves(n, seed=n)
    tree = _tree(leaves)

    root = naive_root(leaves)
    assert tree.root() == root

    for index in range(n):
        path = tree.inclusion_path(index, n)
        assert path == naive_inclusion(index, leaves)
        assert len(path) <= max_path_length(n)
        assert verify_inclusion_path(leaf_hash(leaves[index]), index, n, path, root)

    for old in range(0, n + 1):
        proof = tree.consistency_path(old, n)
        assert proof == naive_consistency(old, leaves)
        old_root = tree.root(old)
        assert old_root == naive_root(leaves[:old])
        assert verify_consistency_path(old, n, old_root, root, proof)


@pytest.mark.parametrize("seed", range(8))
def test_random_trees_up_to_256_leaves(seed):

    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(65, 257))
    leaves = _leaves(n, seed=seed)
    tree = _tree(leaves)
    root = naive_root(leaves)
    assert tree.root() == root

    for index in rng.choice(n, size=16, replace=False):
        index = int(index)
        path = tree.inclusion_path(index, n)
        assert path == naive_inclusion(index, leaves)
        assert verify_inclusion_path(leaf_hash(leaves[index]), index, n, path, root)

    for old in rng.choice(np.arange(1, n), size=16, replace=False):
        old = int(old)
        proof = tree.consistency_path(old, n)
        assert proof == naive_consistency(old, leaves)
        assert verify_consistency_path(old, n, naive_root(leaves[:old]), root, proof)


@pytest.mark.parametrize("n", [2, 3, 5, 8, 13, 31, 64])
def test_single_byte_mutation_breaks_inclusion(n):

    leaves = _leaves(n, seed=n)
    tree = _tree(leaves)
    root = tree.root()

    for index in range(n):
        path = tree.inclusion_path(index, n)
        leaf = leaf_hash(leaves[index])

        assert not verify_inclusion_path(_flip(leaf), index, n, path, root)
        assert not verify_inclusion_path(leaf, index, n, path, _flip(root))
        for position in range(len(path)):
            mutated = list(path)
            mutated[position] = _flip(mutated[position], position)
            assert not verify_inclusion_path(leaf, index, n, mutated, root)

        # wrong position, truncated path
        assert not verify_inclusion_path(leaf, (index + 1) % n, n, path, root)
        assert not verify_inclusion_path(leaf, index, n, path[:-1], root)


@pytest.mark.parametrize("n", [3, 7, 16, 33])
def test_single_byte_mutation_breaks_consistency(n):

    leaves = _leaves(n, seed=n)
    tree = _tree(leaves)
    root = tree.root()

    for old in range(1, n):
        proof = tree.consistency_path(old, n)
        old_root = tree.root(old)
        assert not verify_consistency_path(old, n, _flip(old_root), root, proof)
        assert not verify_consistency_path(old, n, old_root, _flip(root), proof)
        for position in range(len(proof)):
            mutated = list(proof)
            mutated[position] = _flip(mutated[position], position)
            assert not verify_consistency_path(old, n, old_root, root, mutated)


def test_appends_match_rebuilt_tree():

    leaves = _leaves(40)
    tree = MerkleTree()
    for i, leaf in enumerate(leaves):
        tree.append(leaf_hash(leaf))
        assert tree.root() == naive_root(leaves[: i + 1])


def test_truncate_restores_earlier_root():

    leaves = _leaves(20)
    tree = _tree(leaves)
    tree.truncate(11)
    assert tree.size == 11
    assert tree.root() == naive_root(leaves[:11])

    with pytest.raises(PadError):
        tree.truncate(12)


def test_out_of_range_requests_are_refused():

    tree = _tree(_leaves(5))
    with pytest.raises(PadError):
        tree.root(6)
    with pytest.raises(PadError):
        tree.inclusion_path(5, 5)
    with pytest.raises(PadError):
        tree.consistency_path(3, 6)


def test_hash_ops_grow_logarithmically():

    tree = _tree(_leaves(1000))
    before = tree.hash_ops
    tree.inclusion_path(0, 1000)
    # one node hash per non-cached subtree along the path
    assert 0 < tree.hash_ops - before <= 2 * max_path_length(1000)


# =============================================================================
# Persistent PAD
# =============================================================================


def _pad_leaf(index: int, text: str = "x") -> PadLeaf:
    return PadLeaf(kind=LeafKind.VERSION_ENTRY, index=index, payload=text.encode())


@pytest.fixture
def pad(tmp_path):
    return PersistentPad("catalog", str(tmp_path / "catalog.pad"))


def test_pad_append_and_reload(tmp_path, pad):

    leaves = [_pad_leaf(i, f"leaf-{i}") for i in range(9)]
    for leaf in leaves:
        pad.append(leaf)

    reopened = PersistentPad("catalog", str(tmp_path / "catalog.pad"))
    assert reopened.size == 9
    assert reopened.root() == pad.root()
    assert reopened.root().digest == naive_root([leaf.encode() for leaf in leaves]).hex()
    assert reopened.read_leaf(4) == leaves[4].encode()


def test_pad_rejects_out_of_order_index(pad):

    pad.append(_pad_leaf(0))
    with pytest.raises(PadError):
        pad.append(_pad_leaf(2))


def test_pad_proofs_verify_against_committed_root(pad):

    leaves = [_pad_leaf(i, f"leaf-{i}") for i in range(12)]
    for leaf in leaves:
        pad.append(leaf)
    old_root = pad.root(7)
    new_root = pad.root()

    for index in range(7):
        proof = pad.prove_inclusion(index, at_size=7)
        assert verify_inclusion(proof, leaves[index], old_root)
        assert not verify_inclusion(proof, leaves[index], new_root)

    proof = pad.prove_consistency(7)
    assert verify_consistency(proof, old_root, new_root)
    assert not verify_consistency(proof, PadRoot(digest=old_root.digest, size=6), new_root)


def test_pad_torn_tail_is_reported_and_blocks_appends(tmp_path, pad):

    for i in range(3):
        pad.append(_pad_leaf(i))
    with open(pad.path, "ab") as file:
        file.write(b"\x40\x00")

    reopened = PersistentPad("catalog", pad.path)
    assert reopened.size == 3
    assert reopened.torn_bytes == 2
    with pytest.raises(PadError):
        reopened.append(_pad_leaf(3))

    assert reopened.truncate(3) == 0
    assert reopened.torn_bytes == 0
    reopened.append(_pad_leaf(3))
    assert PersistentPad("catalog", pad.path).size == 4


def test_pad_truncate_drops_leaves(pad):

    for i in range(6):
        pad.append(_pad_leaf(i))
    root = pad.root(4)

    assert pad.truncate(4) == 2
    assert pad.size == 4
    assert pad.root() == root
    assert os.path.getsize(pad.path) == PAD_HEADER_SIZE + 4 * (4 + len(_pad_leaf(0).encode()))


def test_pad_corrupt_header_is_tamper(tmp_path):

    path = tmp_path / "log.pad"
    path.write_bytes(b"NOTAPAD!" + bytes(8))
    with pytest.raises(TamperDetected):
        PersistentPad("log", str(path))


def test_pad_scan_flags_undecodable_leaf(pad):

    pad.append(_pad_leaf(0))
    with open(pad.path, "r+b") as file:
        file.truncate(PAD_HEADER_SIZE)
        file.write((3).to_bytes(4, "little") + b"abc")
    pad.rebuild()

    with pytest.raises(TamperDetected) as exc_info:
        pad.scan(0, 1)
    assert exc_info.value.pad == "catalog"
    assert exc_info.value.index == 0
