"""Regenerate src/sgupdate/data/house.json from the layout table below.

The fixture is a four-room single-floor home whose geometry the test suite
depends on (camera waypoints in the packaged scenario were chosen so each
room's movable objects sit strictly inside the detector frustum). Edit the
tables, rerun this script, and the canonical serialized form is rewritten
in place.
"""
from __future__ import annotations

import sys
from pathlib import Path

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from sgupdate.decay import DecayTable, lambda_for  # noqa: E402
from sgupdate.geometry import BBox3, Pose  # noqa: E402
from sgupdate.graph import RoomNode, SceneGraph, check_invariants, serialize  # noqa: E402

# room id/label -> (centroid xyz, extents (width_x, height_z, depth_y))
ROOMS = {
    "kitchen": ((2.0, 2.0, 1.5), (4.0, 3.0, 4.0)),
    "living room": ((7.0, 2.0, 1.5), (6.0, 3.0, 4.0)),
    "bathroom": ((2.0, 5.5, 1.5), (4.0, 3.0, 3.0)),
    "bedroom": ((7.0, 5.5, 1.5), (6.0, 3.0, 3.0)),
}

ACCESS = [
    ("kitchen", "living room"),
    ("kitchen", "bathroom"),
    ("living room", "bedroom"),
    ("bathroom", "bedroom"),
]

# label, room, centroid xyz, extents (w, h, d)
OBJECTS = [
    ("refrigerator", "kitchen", (3.4, 3.5, 0.9), (0.9, 1.8, 0.7)),
    ("pantry", "kitchen", (0.6, 3.5, 0.9), (0.8, 1.8, 0.5)),
    ("counter", "kitchen", (0.9, 2.2, 0.45), (1.6, 0.9, 0.6)),
    ("banana", "kitchen", (0.9, 2.2, 0.93), (0.22, 0.05, 0.06)),
    ("mug", "kitchen", (1.5, 2.3, 0.95), (0.12, 0.2, 0.12)),
    ("cup", "kitchen", (2.7, 2.5, 0.95), (0.09, 0.21, 0.09)),
    ("plate", "kitchen", (2.1, 2.4, 0.92), (0.26, 0.03, 0.26)),
    ("sofa", "living room", (7.6, 1.2, 0.45), (2.0, 0.9, 0.9)),
    ("table", "living room", (6.2, 2.8, 0.4), (1.2, 0.8, 0.8)),
    ("tv", "living room", (8.2, 3.6, 1.1), (1.2, 0.7, 0.1)),
    ("bookshelf", "living room", (8.6, 0.5, 0.9), (1.6, 1.8, 0.35)),
    ("tv remote", "living room", (6.3, 2.95, 0.83), (0.15, 0.03, 0.05)),
    ("vase", "living room", (5.9, 2.7, 0.95), (0.12, 0.3, 0.12)),
    ("bed", "bedroom", (7.0, 5.9, 0.35), (1.8, 0.7, 1.6)),
    ("pillow", "bedroom", (7.0, 6.4, 0.78), (0.5, 0.15, 0.3)),
    ("wardrobe", "bedroom", (9.3, 6.4, 1.05), (1.2, 2.1, 0.6)),
    ("nightstand", "bedroom", (8.4, 5.5, 0.4), (0.5, 0.8, 0.45)),
    ("lamp", "bedroom", (8.4, 5.65, 1.0), (0.2, 0.4, 0.2)),
    ("alarm clock", "bedroom", (8.25, 5.35, 0.9), (0.2, 0.2, 0.08)),
    ("sink", "bathroom", (0.9, 6.3, 0.45), (0.6, 0.9, 0.5)),
    ("bathtub", "bathroom", (2.9, 6.3, 0.3), (1.7, 0.6, 0.8)),
    ("towel", "bathroom", (0.9, 6.0, 1.1), (0.5, 0.6, 0.02)),
    ("hairbrush", "bathroom", (2.0, 6.2, 0.87), (0.22, 0.04, 0.07)),
    ("laundry basket", "bathroom", (3.1, 5.3, 0.3), (0.45, 0.6, 0.45)),
]


def build() -> SceneGraph:
    graph = SceneGraph(epoch=0.0)
    for rid, (centroid, extents) in ROOMS.items():
        graph.add_room(RoomNode(id=rid, label=rid, pose=Pose.identity(centroid), bbox=BBox3(extents)))
    for a, b in ACCESS:
        graph.add_access(a, b)
    table = DecayTable.default()
    for label, room, centroid, extents in OBJECTS:
        graph.add_object(
            room, label, Pose.identity(centroid), BBox3(extents),
            lambda_for(label, table), now=0.0,
        )
    problems = check_invariants(graph)
    if problems:
        raise SystemExit("fixture violates graph invariants: " + "; ".join(problems))
    return graph


def main() -> None:
    out = SRC / "sgupdate" / "data" / "house.json"
    out.write_bytes(serialize(build()))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
