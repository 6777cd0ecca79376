"""Detector-side pipeline: visibility, matching, association, gating."""
import itertools
import math
import random

import pytest

from sgupdate.geometry import BBox3, Pose, pose_distance
from sgupdate.graph import SceneGraph
from sgupdate.perception import (
    AssociationResult,
    CameraModel,
    ConfirmationStore,
    Observation,
    associate,
    confirm,
    expected_visible,
    geometric_match,
    point_in_frustum,
    semantic_match,
)
from sgupdate.records import UpdateAction

from conftest import make_room, put, two_room_graph, yaw_pose

CAM = CameraModel(fov_h=math.pi / 2, fov_v=math.pi / 2, min_range=0.5, max_range=5.0)


def obs(label, t, extents=(0.2, 0.2, 0.2)):
    return Observation(label=label, pose=Pose.identity(t), bbox=BBox3(extents))


# -- camera model ------------------------------------------------------------


def test_camera_model_validation():
    with pytest.raises(ValueError):
        CameraModel(fov_h=0.0, fov_v=1.0, min_range=0.1, max_range=1.0)
    with pytest.raises(ValueError):
        CameraModel(fov_h=1.0, fov_v=math.pi + 0.2, min_range=0.1, max_range=1.0)
    with pytest.raises(ValueError):
        CameraModel(fov_h=1.0, fov_v=1.0, min_range=1.0, max_range=0.5)


def test_frustum_basics_facing_plus_x():
    robot = Pose.identity((0.0, 0.0, 0.0))
    assert point_in_frustum(robot, CAM, (1.0, 0.0, 0.0))
    assert not point_in_frustum(robot, CAM, (-1.0, 0.0, 0.0))  # behind
    assert not point_in_frustum(robot, CAM, (0.0, 1.0, 0.0))  # exactly sideways
    assert not point_in_frustum(robot, CAM, (0.4, 0.0, 0.0))  # inside min range
    assert not point_in_frustum(robot, CAM, (5.5, 0.0, 0.0))  # beyond max range


def test_frustum_boundaries_are_strict():
    robot = Pose.identity((0.0, 0.0, 0.0))
    # horizontal: atan2(1,1) == fov_h/2 exactly
    assert not point_in_frustum(robot, CAM, (1.0, 1.0, 0.0))
    assert point_in_frustum(robot, CAM, (1.0, 0.999, 0.0))
    # vertical boundary likewise
    assert not point_in_frustum(robot, CAM, (1.0, 0.0, 1.0))
    assert point_in_frustum(robot, CAM, (1.0, 0.0, 0.999))
    # range boundaries: exactly min/max are out
    assert not point_in_frustum(robot, CAM, (0.5, 0.0, 0.0))
    assert not point_in_frustum(robot, CAM, (5.0, 0.0, 0.0))
    assert point_in_frustum(robot, CAM, (4.999, 0.0, 0.0))


def test_frustum_follows_robot_yaw():
    robot = yaw_pose((2.0, 0.35, 1.0), math.pi / 2)  # facing +y
    assert point_in_frustum(robot, CAM, (2.0, 2.0, 1.0))
    assert not point_in_frustum(robot, CAM, (2.0, -1.0, 1.0))  # now behind
    # the left axis now points along -x
    assert point_in_frustum(robot, CAM, (1.0, 2.0, 1.0))


def test_expected_visible_filters_and_sorts(house2):
    robot = Pose.identity((0.5, 2.0, 1.0))  # in the kitchen facing +x
    put(house2, "kitchen", "cup", (2.0, 2.0, 1.0))
    put(house2, "kitchen", "counter", (2.5, 2.5, 1.0), rate=0.0)  # immovable: skipped
    held = put(house2, "kitchen", "plate", (2.0, 1.5, 1.0))
    house2.detach(held)  # held: skipped
    put(house2, "kitchen", "apple", (0.6, 2.0, 1.0))  # inside min range: skipped
    put(house2, "living room", "vase", (9.0, 2.0, 1.0))  # out of range
    assert expected_visible(house2, robot, CAM) == ["cup-1"]


# -- label matching ----------------------------------------------------------


def test_semantic_match_normalizes_and_uses_synonyms():
    assert semantic_match("Cup", "  cup ")
    assert semantic_match("TV   Remote", "remote control")
    assert semantic_match("remote control", "tv remote")  # symmetric
    assert semantic_match("sofa", "couch")
    assert not semantic_match("cup", "mug")


def test_semantic_match_custom_matcher_wins():
    assert semantic_match("cup", "mug", matcher=lambda a, b: True)
    assert not semantic_match("cup", "cup", matcher=lambda a, b: False)


def test_geometric_match_is_strict():
    a = Pose.identity((0.0, 0.0, 0.0))
    assert geometric_match(a, Pose.identity((0.2499, 0.0, 0.0)), epsilon=0.25)
    assert not geometric_match(a, Pose.identity((0.25, 0.0, 0.0)), epsilon=0.25)
    with pytest.raises(ValueError):
        geometric_match(a, a, epsilon=0.0)


# -- association -------------------------------------------------------------


def big_room_graph():
    g = SceneGraph()
    g.add_room(make_room("hall", (20.0, 20.0, 1.5), (40.0, 3.0, 40.0)))
    return g


def test_associate_partitions_everything(house2):
    c1 = put(house2, "kitchen", "cup", (1.0, 1.0, 1.0))
    c2 = put(house2, "kitchen", "cup", (3.0, 3.0, 1.0))
    b1 = put(house2, "kitchen", "banana", (1.0, 3.0, 1.0))
    observed = [
        obs("cup", (1.05, 1.0, 1.0)),  # static for c1
        obs("cup", (3.0, 2.5, 1.0)),  # moved for c2 (0.5 > eps)
        obs("book", (2.0, 2.0, 1.0)),  # unknown: addition candidate
    ]
    res = associate([c1, c2, b1], observed, house2, epsilon=0.25)
    assert res.static_pairs == [(c1, observed[0])]
    assert res.moved_pairs == [(c2, observed[1])]
    assert res.remove_candidates == [b1]
    assert res.add_candidates == [observed[2]]
    # nothing lost, nothing duplicated
    n = len(res.static_pairs) + len(res.moved_pairs) + len(res.remove_candidates)
    assert n == 3 and len(res.add_candidates) == 1


def test_associate_never_pairs_across_labels(house2):
    c = put(house2, "kitchen", "cup", (1.0, 1.0, 1.0))
    o = obs("banana", (1.0, 1.0, 1.0))  # geometrically perfect, semantically wrong
    res = associate([c], [o], house2, epsilon=0.25)
    assert res.remove_candidates == [c]
    assert res.add_candidates == [o]


def test_associate_pairs_synonyms(house2):
    r = put(house2, "kitchen", "tv remote", (1.0, 1.0, 1.0))
    res = associate([r], [obs("remote control", (1.02, 1.0, 1.0))], house2, epsilon=0.25)
    assert res.static_pairs and res.static_pairs[0][0] == r


def test_associate_is_order_invariant_for_distinct_distances(house2):
    ids = [
        put(house2, "kitchen", "cup", (1.0, 1.0, 1.0)),
        put(house2, "kitchen", "cup", (3.0, 1.0, 1.0)),
    ]
    observed = [obs("cup", (1.1, 1.0, 1.0)), obs("cup", (2.8, 1.0, 1.0))]
    a = associate(ids, observed, house2, epsilon=0.25)
    b = associate(ids, list(reversed(observed)), house2, epsilon=0.25)
    assert [(oid, o.pose) for oid, o in a.static_pairs] == [
        (oid, o.pose) for oid, o in b.static_pairs
    ]


def test_associate_greedy_takes_nearest_first_even_when_suboptimal(house2):
    # classic chain: greedy gives B->O1 then A->O2; a min-cost matching
    # would prefer A->O1, B->O2. This documents the intended behavior.
    a = put(house2, "kitchen", "cup", (1.0, 1.0, 1.0))
    b = put(house2, "kitchen", "cup", (1.6, 1.0, 1.0))
    o1, o2 = obs("cup", (1.5, 1.0, 1.0)), obs("cup", (2.3, 1.0, 1.0))
    res = associate([a, b], [o1, o2], house2, epsilon=0.25)
    assert res.static_pairs == [(b, o1)]
    assert res.moved_pairs == [(a, o2)]


def test_associate_requires_positive_epsilon(house2):
    with pytest.raises(ValueError):
        associate([], [], house2, epsilon=0.0)


# -- greedy vs exhaustive matching oracle -------------------------------------
#
# Inside the margins a real tracker enforces (well-separated objects, noise
# well under the gate, displacement capped by frame rate), the greedy
# matching is provably the unique min-cost matching. The generator below
# samples exactly that regime; the oracle enumerates every maximal matching.

EPS = 0.25


def min_cost_matching(dist):
    """Exhaustive min-cost maximal matching. dist: {(i, j): d}."""
    rows = sorted({i for i, _ in dist})
    cols = sorted({j for _, j in dist})
    if not rows or not cols:
        return set()
    r = min(len(rows), len(cols))
    best_cost, best_pairs = None, set()
    for chosen_rows in itertools.combinations(rows, r):
        for chosen_cols in itertools.permutations(cols, r):
            pairs = set(zip(chosen_rows, chosen_cols))
            cost = sum(dist[p] for p in pairs)
            if best_cost is None or cost < best_cost - 1e-12:
                best_cost, best_pairs = cost, pairs
    return best_pairs


def sample_regime_instance(rng, graph, label):
    """One label group in the provable regime.

    Returns (expected ids, observations, expected category per id).
    """
    n = rng.randint(0, 4)
    base_x = rng.uniform(2.0, 30.0)
    base_y = rng.uniform(2.0, 30.0)
    ids, fates = [], {}
    slots = [(base_x + 1.6 * i, base_y + 1.6 * ((i * 7) % 3)) for i in range(n)]
    for x, y in slots:
        oid = put(graph, "hall", label, (x, y, 1.0))
        ids.append(oid)
    has_removed = False
    observations = []
    for oid in ids:
        x, y, _ = graph.objects[oid].pose.t
        fate = rng.choice(["static", "moved", "removed"])
        fates[oid] = fate
        if fate == "static":
            radius = rng.uniform(0.0, 0.44 * EPS)
            theta = rng.uniform(0.0, 2 * math.pi)
            observations.append(
                obs(label, (x + radius * math.cos(theta), y + radius * math.sin(theta), 1.0))
            )
        elif fate == "moved":
            radius = rng.uniform(1.06 * EPS, 1.5 * EPS)
            theta = rng.uniform(0.0, 2 * math.pi)
            observations.append(
                obs(label, (x + radius * math.cos(theta), y + radius * math.sin(theta), 1.0))
            )
        else:
            has_removed = True
    if not has_removed:
        for _ in range(rng.randint(0, 2)):
            # far from every same-label expected object
            ox = base_x + rng.choice([-1, 1]) * rng.uniform(2.5 * EPS + 6.0, 8.0)
            oy = base_y + rng.uniform(-1.0, 1.0)
            observations.append(obs(label, (ox, oy, 1.0)))
    rng.shuffle(observations)
    return ids, observations, fates


def check_instance_against_oracle(rng, n_groups=3):
    graph = big_room_graph()
    all_ids, all_obs, fates = [], [], {}
    for gi in range(rng.randint(1, n_groups)):
        ids, observations, f = sample_regime_instance(rng, graph, label=f"thing{gi}")
        all_ids += ids
        all_obs += observations
        fates.update(f)
    rng.shuffle(all_obs)
    res = associate(all_ids, all_obs, graph, epsilon=EPS)

    dist = {}
    for oid in all_ids:
        node = graph.objects[oid]
        for j, o in enumerate(all_obs):
            if node.label == o.label:
                dist[(oid, j)] = pose_distance(node.pose, o.pose)
    # per-label-group exhaustive matching (groups are independent)
    oracle_pairs = set()
    for label in {graph.objects[i].label for i in all_ids}:
        sub = {k: v for k, v in dist.items() if graph.objects[k[0]].label == label}
        oracle_pairs |= min_cost_matching(sub)

    greedy_pairs = {
        (oid, all_obs.index(o)) for oid, o in res.static_pairs + res.moved_pairs
    }
    assert greedy_pairs == oracle_pairs

    # categories follow the scripted fates
    static_ids = {oid for oid, _ in res.static_pairs}
    moved_ids = {oid for oid, _ in res.moved_pairs}
    for oid, fate in fates.items():
        if fate == "static":
            assert oid in static_ids
        elif fate == "moved":
            assert oid in moved_ids
        else:
            assert oid in res.remove_candidates


def test_greedy_equals_min_cost_oracle_in_regime():
    rng = random.Random(440)
    for _ in range(120):
        check_instance_against_oracle(rng)


# -- confirmation gating -----------------------------------------------------


def removal_result(oid):
    return AssociationResult(remove_candidates=[oid])


def test_removal_requires_k_consecutive_frames(house2):
    oid = put(house2, "kitchen", "cup", (1, 1, 1))
    store = ConfirmationStore()
    out0 = confirm(store, house2, removal_result(oid), frame=0, now=10.0, k=2)
    assert out0.records == []
    out1 = confirm(store, house2, removal_result(oid), frame=1, now=11.0, k=2)
    assert [r.action for r in out1.records] == [UpdateAction.REMOVED]
    rec = out1.records[0]
    assert rec.target_object == "cup" and rec.source_room == "kitchen"
    assert store.removal == {}  # counter consumed


def test_removal_counter_resets_after_frame_gap(house2):
    oid = put(house2, "kitchen", "cup", (1, 1, 1))
    store = ConfirmationStore()
    confirm(store, house2, removal_result(oid), frame=0, now=0.0, k=2)
    out = confirm(store, house2, removal_result(oid), frame=2, now=2.0, k=2)  # gap at 1
    assert out.records == []
    out = confirm(store, house2, removal_result(oid), frame=3, now=3.0, k=2)
    assert len(out.records) == 1


def test_contrary_evidence_clears_removal_counter(house2):
    oid = put(house2, "kitchen", "cup", (1.0, 1.0, 1.0))
    store = ConfirmationStore()
    confirm(store, house2, removal_result(oid), frame=0, now=0.0, k=2)
    seen = AssociationResult(static_pairs=[(oid, obs("cup", (1.02, 1.0, 1.0)))])
    out = confirm(store, house2, seen, frame=1, now=1.0, k=2)
    assert out.records == [] and len(out.touched) == 1
    assert house2.objects[oid].last_seen == 1.0
    out = confirm(store, house2, removal_result(oid), frame=2, now=2.0, k=2)
    assert out.records == []  # count restarted at 1


def test_k_equals_one_confirms_immediately(house2):
    oid = put(house2, "kitchen", "cup", (1, 1, 1))
    out = confirm(ConfirmationStore(), house2, removal_result(oid), frame=0, now=0.0, k=1)
    assert len(out.records) == 1
    with pytest.raises(ValueError):
        confirm(ConfirmationStore(), house2, removal_result(oid), frame=0, now=0.0, k=0)


def test_addition_requires_consistent_consecutive_observations(house2):
    store = ConfirmationStore()
    first = AssociationResult(add_candidates=[obs("book", (1.0, 1.0, 1.0))])
    out = confirm(store, house2, first, frame=0, now=0.0, k=2)
    assert out.records == [] and len(store.additions) == 1
    again = AssociationResult(add_candidates=[obs("book", (1.05, 1.0, 1.0))])
    out = confirm(store, house2, again, frame=1, now=1.0, k=2)
    assert [r.action for r in out.records] == [UpdateAction.ADDED]
    rec = out.records[0]
    assert rec.target_object == "book" and rec.target_room == "kitchen"
    assert rec.pose is not None and rec.bbox is not None


def test_addition_with_wandering_pose_never_confirms(house2):
    store = ConfirmationStore()
    for frame, x in enumerate([1.0, 1.6, 2.2, 2.8]):  # hops > epsilon
        out = confirm(
            store,
            house2,
            AssociationResult(add_candidates=[obs("book", (x, 1.0, 1.0))]),
            frame=frame,
            now=float(frame),
            k=2,
        )
        assert out.records == []


def test_addition_tracker_dies_on_missed_frame(house2):
    store = ConfirmationStore()
    cand = AssociationResult(add_candidates=[obs("book", (1.0, 1.0, 1.0))])
    confirm(store, house2, cand, frame=0, now=0.0, k=2)
    confirm(store, house2, AssociationResult(), frame=1, now=1.0, k=2)
    assert store.additions == []
    out = confirm(store, house2, cand, frame=2, now=2.0, k=2)
    assert out.records == []  # starting over


def test_moved_pair_emits_immediately_and_clears_removal_counter(house2):
    oid = put(house2, "kitchen", "cup", (1.0, 1.0, 1.0))
    store = ConfirmationStore()
    confirm(store, house2, removal_result(oid), frame=0, now=0.0, k=2)
    moved = AssociationResult(moved_pairs=[(oid, obs("cup", (8.0, 2.0, 1.0)))])
    out = confirm(store, house2, moved, frame=1, now=1.0, k=2)
    assert len(out.records) == 1
    rec = out.records[0]
    assert rec.action is UpdateAction.MOVED
    assert (rec.source_room, rec.target_room) == ("kitchen", "living room")
    assert not rec.refines_geometry
    assert store.removal == {}


def test_moved_pair_same_room_provisional_is_geometry_refinement(house2):
    oid = put(house2, "kitchen", "cup", (2.0, 2.0, 1.5), pose_provisional=True)
    moved = AssociationResult(moved_pairs=[(oid, obs("cup", (1.0, 1.0, 1.0)))])
    out = confirm(ConfirmationStore(), house2, moved, frame=0, now=0.0, k=2)
    assert out.records[0].refines_geometry


def test_moved_provisional_across_rooms_is_a_real_move(house2):
    oid = put(house2, "kitchen", "cup", (2.0, 2.0, 1.5), pose_provisional=True)
    moved = AssociationResult(moved_pairs=[(oid, obs("cup", (8.0, 2.0, 1.0)))])
    out = confirm(ConfirmationStore(), house2, moved, frame=0, now=0.0, k=2)
    assert not out.records[0].refines_geometry


def test_observations_outside_every_room_are_skipped_not_applied(house2):
    oid = put(house2, "kitchen", "cup", (1.0, 1.0, 1.0))
    moved = AssociationResult(moved_pairs=[(oid, obs("cup", (99.0, 99.0, 99.0)))])
    out = confirm(ConfirmationStore(), house2, moved, frame=0, now=0.0, k=2)
    assert out.records == [] and len(out.skipped) == 1

    store = ConfirmationStore()
    floating = AssociationResult(add_candidates=[obs("book", (99.0, 99.0, 99.0))])
    confirm(store, house2, floating, frame=0, now=0.0, k=2)
    out = confirm(store, house2, floating, frame=1, now=1.0, k=2)
    assert out.records == [] and len(out.skipped) == 1
    assert len(store.additions) == 1  # evidence retained, not applied
