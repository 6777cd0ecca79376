import math

import pytest

from sgupdate.geometry import BBox3, Pose
from sgupdate.graph import RoomNode, SceneGraph


def make_room(rid, center, extents=(4.0, 3.0, 4.0), label=None):
    return RoomNode(id=rid, label=label or rid, pose=Pose.identity(center), bbox=BBox3(extents))


def two_room_graph():
    """kitchen x:[0,4] and living room x:[4,10], both y:[0,4] z:[0,3]."""
    g = SceneGraph(epoch=0.0)
    g.add_room(make_room("kitchen", (2.0, 2.0, 1.5), (4.0, 3.0, 4.0)))
    g.add_room(make_room("living room", (7.0, 2.0, 1.5), (6.0, 3.0, 4.0)))
    g.add_access("kitchen", "living room")
    return g


def put(g, room, label, t, extents=(0.2, 0.2, 0.2), rate=0.05, now=0.0, **kw):
    return g.add_object(room, label, Pose.identity(t), BBox3(extents), rate, now, **kw)


def yaw_pose(t, yaw):
    """Pose at t facing `yaw` radians counterclockwise from +x."""
    return Pose((math.cos(yaw / 2.0), 0.0, 0.0, math.sin(yaw / 2.0)), t)


@pytest.fixture
def house2():
    return two_room_graph()
