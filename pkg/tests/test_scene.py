import json

import numpy as np
import pytest

from rubbleforge.geometry import ConvexPolyhedron
from rubbleforge.scene import (
    ARCHETYPES,
    GRID_CELL_SIZE,
    OverlapError,
    RoomInstance,
    Scene,
    SceneSyntaxError,
    SceneValidationError,
    UnknownKeyError,
    UnknownNameError,
    ValueRangeError,
    instantiate,
    parse_scene,
    room_seed,
    rotate_quarter_y,
    scene_to_dict,
    serialize_scene,
)


class TestParsing:
    def test_sample_scene(self, sample_scene_bytes):
        scene = parse_scene(sample_scene_bytes)
        assert len(scene.rooms) == 4
        assert len(scene.events) == 3
        assert len(scene.cameras) == 2
        assert scene.seed == 20240917

    def test_minimal_scene(self):
        scene = parse_scene(b'{"rooms": []}')
        assert scene.rooms == [] and scene.grid_cell_size == GRID_CELL_SIZE

    def test_syntax_error_reports_location(self):
        with pytest.raises(SceneSyntaxError) as exc:
            parse_scene(b'{"rooms": [\n  {"archetype": }\n]}')
        assert exc.value.line == 2

    def test_non_object_document(self):
        with pytest.raises(SceneSyntaxError):
            parse_scene(b"[1, 2, 3]")

    def test_unknown_top_level_key(self):
        with pytest.raises(UnknownKeyError):
            parse_scene(b'{"rooms": [], "weather": {}}')

    def test_unknown_room_key(self):
        with pytest.raises(UnknownKeyError) as exc:
            parse_scene(b'{"rooms": [{"archetype": "simple_door", '
                        b'"position": [0, 0], "colour": "red"}]}')
        assert "colour" in str(exc.value)

    def test_unknown_archetype(self):
        with pytest.raises(UnknownNameError):
            parse_scene(b'{"rooms": [{"archetype": "castle", "position": [0, 0]}]}')

    def test_unknown_material(self):
        with pytest.raises(UnknownNameError):
            parse_scene(b'{"rooms": [{"archetype": "simple_door", '
                        b'"position": [0, 0], "material": "adamantium"}]}')

    def test_unknown_event_type(self):
        with pytest.raises(UnknownNameError):
            parse_scene(b'{"events": [{"type": "meteor"}]}')

    def test_unknown_weather(self):
        with pytest.raises(UnknownNameError):
            parse_scene(b'{"environment": {"weather": {"type": "snow"}}}')

    def test_bad_rotation(self):
        with pytest.raises(ValueRangeError):
            parse_scene(b'{"rooms": [{"archetype": "simple_door", '
                        b'"position": [0, 0], "rotation": 45}]}')

    def test_bad_time_of_day(self):
        with pytest.raises(ValueRangeError):
            parse_scene(b'{"environment": {"time_of_day": 25.0}}')

    def test_bad_camera(self):
        with pytest.raises(ValueRangeError):
            parse_scene(b'{"cameras": [{"position": [0, 0, 0], '
                        b'"look_at": [1, 0, 0], "near": 2.0, "far": 1.0}]}')

    def test_bad_event_value(self):
        with pytest.raises(ValueRangeError):
            parse_scene(b'{"events": [{"type": "universal_strain", '
                        b'"magnitude": -1.0}]}')

    def test_overlap_names_both_rooms(self):
        doc = (b'{"rooms": ['
               b'{"archetype": "simple_door", "position": [0, 0]},'
               b'{"archetype": "pillar_room", "position": [0, 0]}]}')
        with pytest.raises(OverlapError) as exc:
            parse_scene(doc)
        msg = str(exc.value)
        assert "0" in msg and "1" in msg

    def test_error_hierarchy(self):
        # all semantic errors are distinguishable yet share one base
        for cls in (UnknownKeyError, UnknownNameError, ValueRangeError,
                    OverlapError):
            assert issubclass(cls, SceneValidationError)
        assert not issubclass(SceneSyntaxError, SceneValidationError)


class TestRoundtrip:
    def test_sample_scene_identity(self, sample_scene_bytes):
        scene = parse_scene(sample_scene_bytes)
        again = parse_scene(serialize_scene(scene))
        assert scene == again

    def test_serialization_stable(self, sample_scene_bytes):
        scene = parse_scene(sample_scene_bytes)
        text = serialize_scene(scene)
        assert serialize_scene(parse_scene(text)) == text

    def test_dict_is_json_safe(self, sample_scene_bytes):
        scene = parse_scene(sample_scene_bytes)
        json.dumps(scene_to_dict(scene))  # would raise on numpy leakage

    def test_all_pattern_kinds_roundtrip(self):
        doc = b'''{
          "rooms": [
            {"archetype": "simple_door", "position": [0, 0],
             "pattern": {"type": "uniform_voronoi", "site_count": 4, "seed": 2}},
            {"archetype": "simple_door", "position": [1, 0],
             "pattern": {"type": "brick", "brick_dims": [0.6, 0.3, 0.6]}},
            {"archetype": "simple_door", "position": [2, 0],
             "pattern": {"type": "planar", "jitter_amplitude": 0.1,
                         "planes": [{"normal": [1, 0, 0], "offset": 2.5}]}}
          ]
        }'''
        scene = parse_scene(doc)
        assert parse_scene(serialize_scene(scene)) == scene


class TestRotation:
    def test_four_quarters_is_identity(self):
        poly = ARCHETYPES["l_shaped_window"].solids[5]
        out = poly
        for _ in range(4):
            out = rotate_quarter_y(out, 1)
        assert np.array_equal(out.vertices, poly.vertices)

    def test_rotation_is_exact_coordinate_swap(self):
        poly = ConvexPolyhedron.box((1, 0, 2), (3, 1, 5))
        rot = rotate_quarter_y(poly, 1)
        # (x, z) -> (z, -x): no floating-point error at all
        assert set(map(tuple, rot.vertices)) == {
            (z, y, -x) for x, y, z in map(tuple, poly.vertices)
        }

    def test_volume_preserved(self):
        for name, arch in ARCHETYPES.items():
            for solid in arch.solids:
                for k in (1, 2, 3):
                    assert rotate_quarter_y(solid, k).volume() == \
                        pytest.approx(solid.volume(), rel=1e-12)


class TestArchetypes:
    def test_solids_are_valid_and_grounded(self):
        for name, arch in ARCHETYPES.items():
            assert arch.solids
            lows = []
            for solid in arch.solids:
                solid.validate()
                lo, hi = solid.aabb()
                lows.append(lo[1])
                assert hi[1] <= 3.0 + 1e-9
            assert min(lows) == 0.0  # every room stands on the ground plane

    def test_solids_fit_inside_grid_cell(self):
        half = GRID_CELL_SIZE / 2
        for arch in ARCHETYPES.values():
            for solid in arch.solids:
                lo, hi = solid.aabb()
                assert lo[0] >= -half and hi[0] <= half
                assert lo[2] >= -half and hi[2] <= half


class TestInstantiate:
    def test_empty_scene(self):
        world = instantiate(Scene())
        assert world.collections == []

    def test_one_collection_per_room(self, sample_scene_bytes):
        scene = parse_scene(sample_scene_bytes)
        scene.events = []
        scene.cameras = []
        world = instantiate(scene)
        assert len(world.collections) == 4
        assert [gc.room_id for gc in world.collections] == [0, 1, 2, 3]

    def test_fragment_ids_globally_unique(self, tiny_scene_bytes):
        scene = parse_scene(tiny_scene_bytes)
        scene.rooms.append(RoomInstance("simple_door", (1, 0), material="wood"))
        world = instantiate(scene)
        ids = [fid for gc in world.collections for fid in gc.fragments]
        assert len(ids) == len(set(ids))

    def test_rooms_land_in_their_grid_cells(self, tiny_scene_bytes):
        scene = parse_scene(tiny_scene_bytes)
        world = instantiate(scene)
        lo, hi = world.bounds()
        assert lo[0] >= 0 and hi[0] <= GRID_CELL_SIZE
        assert lo[2] >= 0 and hi[2] <= GRID_CELL_SIZE
        assert lo[1] >= -1e-9

    def test_volume_matches_archetype(self, tiny_scene_bytes):
        scene = parse_scene(tiny_scene_bytes)
        world = instantiate(scene)
        total = sum(
            f.polyhedron.volume()
            for gc in world.collections for f in gc.fragments.values()
        )
        expected = sum(s.volume() for s in ARCHETYPES["simple_door"].solids)
        assert total == pytest.approx(expected, rel=1e-6)

    def test_floor_fragments_anchored(self, tiny_scene_bytes):
        world = instantiate(parse_scene(tiny_scene_bytes))
        anchored = [
            f for gc in world.collections
            for f in gc.fragments.values() if f.anchored
        ]
        assert anchored
        for f in anchored:
            assert f.polyhedron.aabb()[0][1] == pytest.approx(0.0, abs=1e-9)

    def test_deterministic(self, tiny_scene_bytes):
        a = instantiate(parse_scene(tiny_scene_bytes))
        b = instantiate(parse_scene(tiny_scene_bytes))
        fa = [f.polyhedron.vertices for gc in a.collections
              for f in gc.fragments.values()]
        fb = [f.polyhedron.vertices for gc in b.collections
              for f in gc.fragments.values()]
        assert len(fa) == len(fb)
        for va, vb in zip(fa, fb):
            assert np.array_equal(va, vb)

    def test_scene_seed_changes_fracture(self, tiny_scene_bytes):
        a = parse_scene(tiny_scene_bytes)
        b = parse_scene(tiny_scene_bytes)
        b.seed = a.seed + 1
        wa, wb = instantiate(a), instantiate(b)
        va = np.concatenate([f.polyhedron.vertices for gc in wa.collections
                             for f in gc.fragments.values()])
        vb = np.concatenate([f.polyhedron.vertices for gc in wb.collections
                             for f in gc.fragments.values()])
        assert va.shape != vb.shape or not np.array_equal(va, vb)


class TestSeeds:
    def test_explicit_room_seed_wins(self):
        scene = Scene(seed=1)
        room = RoomInstance("simple_door", (0, 0), seed=777)
        assert room_seed(scene, room) == 777

    def test_derived_seed_depends_on_position(self):
        scene = Scene(seed=1)
        a = RoomInstance("simple_door", (0, 0))
        b = RoomInstance("simple_door", (1, 0))
        assert room_seed(scene, a) != room_seed(scene, b)


class TestFootprint:
    def test_single_cell(self):
        room = RoomInstance("simple_door", (2, 3), rotation=90)
        assert room.cells() == {(2, 3)}

    def test_overlap_detected_in_constructor(self):
        with pytest.raises(OverlapError):
            Scene(rooms=[
                RoomInstance("simple_door", (0, 0)),
                RoomInstance("beam_room", (0, 0)),
            ])
