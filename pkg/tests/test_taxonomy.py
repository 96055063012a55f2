import pytest

from blockworld.taxonomy import (
    EmptyStructure,
    classify,
    has_hidden_blocks,
    is_diagonal,
    is_flat,
    is_flying,
    is_tall,
)
from blockworld.world import BlockGrid


def grid(*cells, block=50):
    return BlockGrid({c: block for c in cells})


def column(height, x=0, z=0):
    return grid(*[(x, y, z) for y in range(height)])


def plate(n, y=0):
    return grid(*[(x, y, z) for x in range(n) for z in range(n)])


def solid_cube(n):
    return grid(*[(x, y, z) for x in range(n) for y in range(n) for z in range(n)])


class TestFlat:
    def test_single_ground_block(self):
        assert is_flat(grid((0, 0, 0)))

    def test_two_layers(self):
        assert not is_flat(grid((0, 0, 0), (0, 1, 0)))

    def test_ground_plate(self):
        assert is_flat(plate(3))

    def test_empty_raises(self):
        with pytest.raises(EmptyStructure):
            is_flat(BlockGrid())


class TestFlying:
    def test_detached_block(self):
        assert is_flying(grid((0, 3, 0)))

    def test_grounded_column(self):
        assert not is_flying(column(5))

    def test_arch_keystone_connected_is_grounded(self):
        legs_and_keystone = grid(
            (0, 0, 0), (0, 1, 0), (2, 0, 0), (2, 1, 0), (1, 2, 0), (0, 2, 0), (2, 2, 0)
        )
        assert not is_flying(legs_and_keystone)

    def test_keystone_alone_flies(self):
        assert is_flying(grid((1, 2, 0)))

    def test_grounding_a_column_flips_the_label(self):
        floating = [(0, 3, 0), (1, 3, 0)]
        g = grid(*floating)
        assert is_flying(g)
        for y in (2, 1, 0):
            g = g.with_block((0, y, 0), 50)
        assert not is_flying(g)


class TestDiagonal:
    def test_edge_contact_only(self):
        assert is_diagonal(grid((0, 0, 0), (1, 1, 0)))

    def test_plate_has_face_neighbors(self):
        assert not is_diagonal(plate(2))

    def test_face_touching_staircase(self):
        steps = grid((0, 0, 0), (1, 0, 0), (1, 1, 0), (2, 1, 0), (2, 2, 0))
        assert not is_diagonal(steps)

    def test_corner_contact_counts(self):
        assert is_diagonal(grid((0, 0, 0), (1, 1, 1)))


class TestTall:
    def test_full_height_tower(self):
        assert is_tall(column(9))

    def test_single_ground_block(self):
        assert not is_tall(grid((0, 0, 0)))

    def test_threshold_boundary(self):
        assert not is_tall(column(4))  # max y == 3
        assert is_tall(column(5))  # max y == 4


class TestHidden:
    def test_solid_cube_center(self):
        assert has_hidden_blocks(solid_cube(3))

    def test_hollow_ring(self):
        ring = grid((0, 0, 0), (1, 0, 0), (2, 0, 0), (2, 0, 1), (2, 0, 2),
                    (1, 0, 2), (0, 0, 2), (0, 0, 1))
        assert not has_hidden_blocks(ring)

    def test_plus_sign_enclosure(self):
        g = grid((0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 0, 1), (0, 0, -1), (0, 1, 0))
        assert has_hidden_blocks(g)

    def test_buried_only_by_ground_needs_all_faces(self):
        assert not has_hidden_blocks(plate(3))


class TestClassify:
    def test_single_ground_block(self):
        assert classify(grid((0, 0, 0))).names() == ["flat"]

    def test_floating_bar_high_up(self):
        labels = classify(grid((0, 5, 0), (1, 5, 0)))
        assert labels.names() == ["flying", "tall"]

    def test_solid_cube(self):
        assert classify(solid_cube(3)).names() == ["tricky"]

    def test_flat_never_flying_or_tall(self):
        labels = classify(plate(4))
        assert labels.flat and not labels.flying and not labels.tall

    def test_translation_invariance(self):
        base = grid((0, 0, 0), (1, 1, 0), (0, 4, 0))
        moved = BlockGrid({(c.x + 2, c.y, c.z - 3): b for c, b in base.items()})
        assert classify(base) == classify(moved)

    def test_rotation_invariance(self):
        base = grid((0, 0, 0), (1, 1, 0), (2, 0, 1), (0, 4, 0))
        rotated = BlockGrid({(-c.z, c.y, c.x): b for c, b in base.items()})
        assert classify(base) == classify(rotated)
