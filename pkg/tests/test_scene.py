"""Boxes, IoU, detection merging, naming, spatial features."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sceneground.pddl import parse_domain
from sceneground.scene import (
    Box,
    Detection,
    Scene,
    SceneError,
    SceneObject,
    SceneObservation,
    assign_names,
    binary_feature,
    iou,
    merge_detections,
    observation_from_json,
    unary_feature,
)

TOY_DOMAIN = parse_domain(
    """
    (define (domain toy)
      (:types block - object vegetable - object tool - object)
      (:predicates (on ?a - block ?b - block)))
    """
)


def test_iou_oracle_values():
    # Worked by hand: overlap 2x1 = 2, union 4 + 4 - 2 = 6.
    assert iou(Box(0, 0, 2, 2), Box(0, 1, 2, 3)) == pytest.approx(1 / 3)
    # Spec'd pair: inter 50, union 150.
    assert iou(Box(0, 0, 10, 10), Box(5, 0, 15, 10)) == pytest.approx(1 / 3)
    assert iou(Box(0, 0, 2, 2), Box(0, 0, 2, 2)) == 1.0
    assert iou(Box(0, 0, 10, 10), Box(20, 20, 30, 30)) == 0.0
    # Shared edge only: zero-area intersection.
    assert iou(Box(0, 0, 1, 1), Box(1, 0, 2, 1)) == 0.0


def _random_box(rng):
    x0, y0 = rng.uniform(0, 50), rng.uniform(0, 50)
    return Box(x0, y0, x0 + rng.uniform(0.1, 30), y0 + rng.uniform(0.1, 30))


def test_iou_is_symmetric_and_bounded():
    rng = random.Random(7)
    for _ in range(200):
        a = _random_box(rng)
        b = _random_box(rng)
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0 + 1e-12


def test_degenerate_box_rejected():
    with pytest.raises(SceneError):
        Box(5, 0, 1, 1)
    with pytest.raises(SceneError):
        Box(0, 0, 1, 0)
    with pytest.raises(SceneError):
        Box(0, 0, 0, 0)


def test_binary_feature_oracle():
    a = Box(0, 0, 10, 10)
    b = Box(10, 0, 20, 10)
    assert binary_feature(a, b, 100, 100) == pytest.approx((-0.1, 0.0, -0.1, 0.0))
    assert binary_feature(b, a, 100, 100) == pytest.approx((0.1, 0.0, 0.1, 0.0))
    assert binary_feature(a, a, 100, 100) == (0.0, 0.0, 0.0, 0.0)


def test_binary_feature_antisymmetric():
    rng = random.Random(11)
    for _ in range(100):
        a, b = _random_box(rng), _random_box(rng)
        fab = binary_feature(a, b, 80, 60)
        fba = binary_feature(b, a, 80, 60)
        assert fab == pytest.approx(tuple(-v for v in fba))


def test_binary_feature_translation_invariant():
    a = Box(3, 4, 9, 11)
    b = Box(20, 5, 28, 14)
    before = binary_feature(a, b, 64, 48)
    after = binary_feature(a.shifted(7, -2), b.shifted(7, -2), 64, 48)
    assert after == pytest.approx(before)


def test_unary_feature_oracle():
    assert unary_feature(Box(0, 0, 1, 1), 1, 1) == pytest.approx((0, 1, 1, 1, 1, 0))
    # Flat wide box: c = (0, 0, 1, 0.5).
    assert unary_feature(Box(0, 0, 10, 5), 10, 10) == pytest.approx(
        (0.0, 1.0, 0.5, 1.0, 0.5, -0.5)
    )


def test_unary_feature_proportional_diagonal_shift_is_invariant():
    box = Box(5, 5, 15, 20)
    w, h = 100, 50
    before = unary_feature(box, w, h)
    # dx/w == dy/h moves every normalized coordinate by the same amount.
    after = unary_feature(box.shifted(10, 5), w, h)
    assert after == pytest.approx(before)


def test_unary_feature_horizontal_shift_changes_mixed_terms():
    box = Box(5, 5, 15, 20)
    before = unary_feature(box, 100, 100)
    after = unary_feature(box.shifted(10, 0), 100, 100)
    # Same-axis differences (shape) hold; mixed-axis terms move by dx/w.
    assert after[1] == pytest.approx(before[1])  # x_max - x_min
    assert after[0] - before[0] == pytest.approx(-0.1)  # y_min/h - x_min/w
    assert after[3] - before[3] == pytest.approx(0.1)  # x_max/w - y_min/h


def test_unary_feature_widening_grows_width_component():
    base = 10.0
    widths = [5, 10, 20, 40]
    values = [unary_feature(Box(0, 0, w, base), 100, 100)[1] for w in widths]
    assert values == sorted(values)
    assert len(set(values)) == len(values)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0, 100, allow_nan=False),
    st.floats(0, 100, allow_nan=False),
    st.floats(0.5, 40, allow_nan=False),
    st.floats(0.5, 40, allow_nan=False),
)
def test_unary_feature_components_are_consistent(x, y, w, h):
    # The six differences are projections of one coordinate vector, so
    # chained sums must agree: (c2-c1) + (c3-c2) == (c3-c1) and so on.
    f = unary_feature(Box(x, y, x + w, y + h), 200, 200)
    assert f[0] + f[3] == pytest.approx(f[1])
    assert f[1] + f[5] == pytest.approx(f[2])
    assert f[3] + f[5] == pytest.approx(f[4])


def _class(label, x, y, w=10.0, h=10.0):
    return Detection(label, Box(x, y, x + w, y + h), suggested_type=label)


def _obs(class_dets, phrase_dets=(), w=100.0, h=100.0):
    return SceneObservation(w, h, tuple(class_dets), tuple(phrase_dets))


def test_merge_names_in_raster_order():
    obs = _obs(
        [_class("block", 30, 50), _class("block", 10, 10), _class("block", 40, 10)]
    )
    scene = merge_detections(obs, TOY_DOMAIN)
    assert [(o.name, o.box.x_min, o.box.y_min) for o in scene.objects] == [
        ("block1", 10, 10),
        ("block2", 40, 10),
        ("block3", 30, 50),
    ]


def test_merge_is_input_order_independent():
    dets = [_class("block", 30, 50), _class("vegetable", 10, 10), _class("block", 40, 10)]
    rng = random.Random(3)
    scenes = set()
    for _ in range(10):
        shuffled = dets[:]
        rng.shuffle(shuffled)
        scenes.add(merge_detections(_obs(shuffled), TOY_DOMAIN))
    assert len(scenes) == 1


def test_phrase_renames_best_overlap():
    obs = _obs(
        [_class("vegetable", 10, 10), _class("vegetable", 40, 10)],
        [Detection("the cucumber", Box(39, 9, 51, 21), referent_name="cucumber")],
    )
    scene = merge_detections(obs, TOY_DOMAIN)
    assert sorted(o.name for o in scene.objects) == ["cucumber", "vegetable1"]
    assert scene.object("cucumber").box.x_min == 40
    assert scene.object("cucumber").type == "vegetable"


def test_phrase_below_threshold_creates_new_object():
    obs = _obs(
        [_class("vegetable", 10, 10)],
        [
            Detection(
                "a knife",
                Box(60, 60, 80, 80),
                suggested_type="tool",
                referent_name="knife",
            )
        ],
    )
    scene = merge_detections(obs, TOY_DOMAIN)
    assert scene.object("knife").type == "tool"
    assert scene.object("vegetable1") is not None
    assert len(scene.objects) == 2


def test_phrase_without_suggestion_defaults_to_root_type():
    obs = _obs([_class("block", 10, 10)], [Detection("something", Box(60, 60, 65, 65))])
    scene = merge_detections(obs, TOY_DOMAIN)
    assert scene.object("object1").type == "object"


def test_match_threshold_is_inclusive():
    # IoU of these two boxes is exactly 0.5.
    obs = _obs(
        [_class("block", 0, 0)],
        [Detection("it", Box(0, 0, 10, 5), referent_name="it")],
    )
    assert iou(obs.class_detections[0].box, obs.phrase_detections[0].box) == 0.5
    scene = merge_detections(obs, TOY_DOMAIN)
    assert [o.name for o in scene.objects] == ["it"]


def test_empty_scene_rejected():
    with pytest.raises(SceneError) as err:
        merge_detections(_obs([]), TOY_DOMAIN)
    assert "empty scene" in str(err.value)


def test_unknown_class_type_rejected():
    with pytest.raises(SceneError):
        merge_detections(_obs([_class("spaceship", 0, 0)]), TOY_DOMAIN)


def test_duplicate_referents_rejected():
    obs = _obs(
        [_class("block", 0, 0), _class("block", 40, 40)],
        [
            Detection("a", Box(0, 0, 10, 10), referent_name="same"),
            Detection("b", Box(40, 40, 50, 50), referent_name="same"),
        ],
    )
    with pytest.raises(SceneError):
        merge_detections(obs, TOY_DOMAIN)


def test_bad_referent_name_rejected():
    obs = _obs(
        [_class("block", 0, 0)],
        [Detection("x", Box(0, 0, 5, 5), referent_name="Bad Name")],
    )
    with pytest.raises(SceneError):
        merge_detections(obs, TOY_DOMAIN)


def test_object_count_accounting():
    # |objects| = |class detections| + |unmatched phrases|.
    obs = _obs(
        [_class("block", 0, 0), _class("block", 30, 0)],
        [
            Detection("p1", Box(0, 0, 10, 10), referent_name="left"),
            Detection("p2", Box(60, 60, 70, 70), referent_name="far"),
        ],
    )
    scene = merge_detections(obs, TOY_DOMAIN)
    assert len(scene.objects) == 3


def test_assign_names_permutation_invariant():
    entries = [
        ("block", Box(10, 10, 20, 20)),
        ("block", Box(50, 10, 60, 20)),
        ("disk", Box(10, 40, 20, 50)),
    ]
    baseline = assign_names(entries)
    rng = random.Random(5)
    for _ in range(8):
        shuffled = entries[:]
        rng.shuffle(shuffled)
        assert assign_names(shuffled) == baseline
    assert [o.name for o in baseline] == ["block1", "block2", "disk1"]


def test_assign_names_forced_name_skips_index():
    entries = [
        ("container", Box(10, 10, 20, 20), "white_bowl"),
        ("container", Box(50, 10, 60, 20), None),
    ]
    named = assign_names(entries)
    assert [o.name for o in named] == ["white_bowl", "container1"]


def test_scene_json_round_trip():
    obs = _obs(
        [_class("block", 0, 0)],
        [
            Detection(
                "the thing",
                Box(30, 30, 40, 40),
                score=0.75,
                suggested_type="tool",
                referent_name="thing",
            )
        ],
    )
    again = observation_from_json(obs.to_json())
    assert again == obs


def test_scene_json_rejects_garbage():
    with pytest.raises(SceneError):
        observation_from_json("{not json")
    with pytest.raises(SceneError):
        observation_from_json("[1, 2, 3]")
    with pytest.raises(SceneError):
        observation_from_json('{"image_width": 10}')
    with pytest.raises(SceneError):
        observation_from_json(
            '{"image_width": 10, "image_height": 10,'
            ' "class_detections": [{"query": "b", "box": [0, 0, 99, 5]}]}'
        )


def test_detection_score_validated():
    with pytest.raises(SceneError):
        Detection("x", Box(0, 0, 1, 1), score=1.5)


def test_scene_lookup_and_typed_objects():
    scene = Scene(
        100,
        100,
        (
            SceneObject("disk1", "disk", Box(0, 0, 10, 10)),
            SceneObject("peg1", "peg", Box(20, 0, 30, 10)),
        ),
    )
    assert scene.typed_objects() == (("disk1", "disk"), ("peg1", "peg"))
    assert scene.object("nope") is None


def test_feature_values_are_finite():
    f = unary_feature(Box(0, 0, 1280, 960), 1280, 960)
    assert all(math.isfinite(v) for v in f)
