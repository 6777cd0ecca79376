"""Ground-truth world simulation for driving and scoring the pipeline.

The world owns the true scene graph, a clock, and a queue of scripted
changes (objects vanishing, moving, appearing). A synthetic detector renders
the truth into observations using the same visibility rule the perception
module applies to the estimated graph, with configurable failure injection
(small objects below a detectable size, label corruption, per-object
dropout) so detector pathologies are reproducible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Optional, Sequence

from .decay import DecayTable, lambda_for
from .geometry import BBox3, Pose
from .graph import SceneGraph, SceneGraphError, deserialize
from .perception import CameraModel, Observation, point_in_frustum
from .records import AmbiguousTarget, TargetNotFound, UpdateRecord, UpdateAction, resolve_target

__all__ = [
    "InconsistentAction",
    "ActionKind",
    "VirtualAction",
    "DetectorFailureConfig",
    "World",
    "load_house",
]


class InconsistentAction(SceneGraphError):
    """A scripted action cannot be applied to the current ground truth."""


class ActionKind(str, Enum):
    REMOVE = "remove"
    MOVE = "move"
    ADD = "add"


@dataclass(frozen=True)
class VirtualAction:
    """One scripted ground-truth change at time ``at``."""

    at: float
    kind: ActionKind
    label: str
    room: Optional[str] = None  # remove/add: the room acted on; move: source room
    pose: Optional[Pose] = None  # move: destination pose; add: spawn pose
    bbox: Optional[BBox3] = None  # add only

    @classmethod
    def from_dict(cls, data: dict) -> "VirtualAction":
        kind = ActionKind(data["action"])
        if kind is ActionKind.REMOVE:
            return cls(at=float(data["at"]), kind=kind, label=data["label"], room=data["room"])
        if kind is ActionKind.MOVE:
            return cls(
                at=float(data["at"]),
                kind=kind,
                label=data["label"],
                room=data["from_room"],
                pose=Pose.from_dict(data["to_pose"]),
            )
        return cls(
            at=float(data["at"]),
            kind=kind,
            label=data["label"],
            room=data["room"],
            pose=Pose.from_dict(data["pose"]),
            bbox=BBox3(tuple(data["bbox"])),
        )


@dataclass(frozen=True)
class DetectorFailureConfig:
    """Deterministic detector degradation knobs. All-zero means ideal."""

    min_detectable_extent: float = 0.0  # suppress when max box extent is below this
    label_noise: dict = field(default_factory=dict)  # true label -> reported label
    dropout_ids: frozenset = frozenset()  # ground-truth ids never reported

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorFailureConfig":
        return cls(
            min_detectable_extent=float(data.get("min_detectable_extent", 0.0)),
            label_noise=dict(data.get("label_noise", {})),
            dropout_ids=frozenset(data.get("dropout_ids", [])),
        )


def load_house() -> SceneGraph:
    """The packaged four-room house fixture as a fresh graph."""
    text = resources.files("sgupdate.data").joinpath("house.json").read_text("utf-8")
    return deserialize(text)


class World:
    """Ground-truth graph plus a clock and a scripted action queue."""

    def __init__(
        self,
        graph: SceneGraph,
        actions: Sequence[VirtualAction] = (),
        decay_table: Optional[DecayTable] = None,
    ) -> None:
        self.graph = graph
        self.clock = graph.epoch
        # Stable order: time first, file order breaks ties.
        self._queue = sorted(
            ((a.at, i, a) for i, a in enumerate(actions)), key=lambda t: (t[0], t[1])
        )
        self._cursor = 0
        self.decay_table = decay_table if decay_table is not None else DecayTable.default()
        self._held: dict[str, str] = {}  # held object id -> source room label

    # ------------------------------------------------------------------

    def _resolve_single(self, label: str, room: str, at: float) -> str:
        probe = UpdateRecord(action=UpdateAction.REMOVED, target_object=label, source_room=room)
        try:
            return resolve_target(self.graph, probe)
        except (TargetNotFound, AmbiguousTarget) as exc:
            raise InconsistentAction(f"t={at}: {exc}") from exc

    def _apply(self, action: VirtualAction) -> None:
        try:
            if action.kind is ActionKind.REMOVE:
                oid = self._resolve_single(action.label, action.room, action.at)
                self.graph.remove_object(action.room, oid)
            elif action.kind is ActionKind.MOVE:
                oid = self._resolve_single(action.label, action.room, action.at)
                target_room = self.graph.rooms[self.graph.assign_room(action.pose)].label
                self.graph.move_object(action.room, target_room, oid, action.pose, action.at)
            else:
                rate = lambda_for(action.label, self.decay_table)
                self.graph.add_object(
                    action.room, action.label, action.pose, action.bbox, rate, action.at
                )
        except SceneGraphError as exc:
            raise InconsistentAction(f"t={action.at}: {exc}") from exc

    def step(self, until: float) -> list[VirtualAction]:
        """Advance the clock, applying every queued action with ``at <= until``.

        Actions apply in time order (file order on equal stamps); an
        inconsistent action aborts the step with the truth left at the state
        just before it.
        """
        applied = []
        while self._cursor < len(self._queue) and self._queue[self._cursor][0] <= until:
            action = self._queue[self._cursor][2]
            self._apply(action)
            self._cursor += 1
            self.clock = max(self.clock, action.at)
            applied.append(action)
        self.clock = max(self.clock, until)
        return applied

    # ------------------------------------------------------------------
    # the robot physically manipulating the world

    def pick(self, label: str, room: str, at: float) -> str:
        oid = self._resolve_single(label, room, at)
        self.graph.detach(oid)
        self._held[oid] = room
        return oid

    def place(self, oid: str, room_label: str, pose: Pose, at: float) -> None:
        if oid not in self._held:
            raise InconsistentAction(f"t={at}: object {oid!r} is not being held")
        self.graph.reattach(oid, room_label, pose, at)
        del self._held[oid]

    # ------------------------------------------------------------------

    def synthetic_detect(
        self,
        robot_pose: Pose,
        cam: CameraModel,
        failures: DetectorFailureConfig = DetectorFailureConfig(),
    ) -> list[Observation]:
        """Observations of the true world from a robot pose.

        Applies the same visibility rule as the perception module (attached,
        movable, centroid strictly inside frustum and range) and then the
        failure knobs: size suppression, dropout, label corruption. Detached
        and removed objects are never reported. Output order follows sorted
        ground-truth ids, so frames are deterministic.
        """
        out = []
        for oid in sorted(self.graph.objects):
            node = self.graph.objects[oid]
            if not node.attached or node.decay_rate <= 0.0:
                continue
            if not point_in_frustum(robot_pose, cam, node.pose.t):
                continue
            if node.bbox.max_extent < failures.min_detectable_extent:
                continue
            if oid in failures.dropout_ids:
                continue
            label = failures.label_noise.get(node.label, node.label)
            out.append(Observation(label=label, pose=node.pose, bbox=node.bbox))
        return out
