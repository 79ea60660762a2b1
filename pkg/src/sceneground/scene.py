"""Scene observations: boxes, detection merging, naming, spatial features.

A scene observation is what a detector hands us: class-query boxes (one per
hypothesized object, labeled with a domain type) and phrase-query boxes
("the cucumber") that can pin a name onto one of them.  Merging fuses both
streams into uniquely named, typed scene objects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from sceneground.pddl.model import ROOT_TYPE, Domain, valid_name

MATCH_THRESHOLD = 0.5


class SceneError(ValueError):
    """Raised for malformed boxes, names, or detection streams."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in pixel coordinates, corners (x_min, y_min), (x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise SceneError(f"degenerate box {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def shifted(self, dx: float, dy: float) -> "Box":
        return Box(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0.0 for disjoint boxes."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    """One detector hit.

    For class queries, ``query`` is the type name being searched and
    ``suggested_type`` repeats it.  For phrase queries, ``query`` is the
    phrase, ``referent_name`` is the object name the phrase introduces, and
    ``suggested_type`` types the object if no class box matches.
    """

    query: str
    box: Box
    score: float = 1.0
    suggested_type: str | None = None
    referent_name: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise SceneError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class SceneObservation:
    """Raw detector output for one image: canvas size plus both query streams."""

    image_width: float
    image_height: float
    class_detections: tuple[Detection, ...] = ()
    phrase_detections: tuple[Detection, ...] = ()

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise SceneError(f"bad canvas {self.image_width}x{self.image_height}")
        for det in (*self.class_detections, *self.phrase_detections):
            b = det.box
            if b.x_min < 0 or b.y_min < 0 or b.x_max > self.image_width or b.y_max > self.image_height:
                raise SceneError(f"box {b} outside {self.image_width}x{self.image_height} canvas")

    def as_dict(self) -> dict:
        return {
            "image_width": self.image_width,
            "image_height": self.image_height,
            "class_detections": [_det_dict(d) for d in self.class_detections],
            "phrase_detections": [_det_dict(d) for d in self.phrase_detections],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def _det_dict(det: Detection) -> dict:
    out = {"query": det.query, "box": det.box.as_list(), "score": det.score}
    if det.suggested_type is not None:
        out["suggested_type"] = det.suggested_type
    if det.referent_name is not None:
        out["referent_name"] = det.referent_name
    return out


def _det_from_dict(raw: dict) -> Detection:
    try:
        box = Box(*(float(v) for v in raw["box"]))
        return Detection(
            query=str(raw["query"]),
            box=box,
            score=float(raw.get("score", 1.0)),
            suggested_type=raw.get("suggested_type"),
            referent_name=raw.get("referent_name"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneError):
            raise
        raise SceneError(f"bad detection entry {raw!r}: {exc}") from None


def observation_from_json(text: str | bytes | dict) -> SceneObservation:
    if not isinstance(text, dict):
        try:
            raw = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SceneError(f"bad scene JSON: {exc}") from None
    else:
        raw = text
    if not isinstance(raw, dict):
        raise SceneError("scene JSON must be an object")
    try:
        return SceneObservation(
            image_width=float(raw["image_width"]),
            image_height=float(raw["image_height"]),
            class_detections=tuple(
                _det_from_dict(d) for d in raw.get("class_detections", [])
            ),
            phrase_detections=tuple(
                _det_from_dict(d) for d in raw.get("phrase_detections", [])
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneError):
            raise
        raise SceneError(f"bad scene JSON: {exc}") from None


@dataclass(frozen=True)
class SceneObject:
    name: str
    type: str
    box: Box


@dataclass(frozen=True)
class Scene:
    """Named, typed objects on a canvas, in raster order (top-left first)."""

    width: float
    height: float
    objects: tuple[SceneObject, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise SceneError(f"bad canvas {self.width}x{self.height}")
        seen = set()
        for obj in self.objects:
            if obj.name in seen:
                raise SceneError(f"duplicate object name {obj.name!r}")
            seen.add(obj.name)

    def object(self, name: str) -> SceneObject | None:
        for obj in self.objects:
            if obj.name == name:
                return obj
        return None

    def typed_objects(self) -> tuple[tuple[str, str], ...]:
        return tuple((obj.name, obj.type) for obj in self.objects)


def _raster_key(box: Box) -> tuple[float, float, float, float]:
    return (box.y_min, box.x_min, box.y_max, box.x_max)


def assign_names(entries) -> tuple[SceneObject, ...]:
    """Name (type, box[, forced_name]) entries in raster order.

    Entries are sorted by (y_min, x_min); unnamed ones become
    ``<type><index>`` with per-type 1-based indices.  Forced (phrase-derived)
    names win and do not consume an index.  The result is independent of the
    input order.
    """
    rows = []
    for entry in entries:
        typ, box = entry[0], entry[1]
        forced = entry[2] if len(entry) > 2 else None
        rows.append((typ, box, forced))
    rows.sort(key=lambda r: _raster_key(r[1]))
    counters: dict[str, int] = {}
    objects = []
    for typ, box, forced in rows:
        if forced is None:
            counters[typ] = counters.get(typ, 0) + 1
            name = f"{typ}{counters[typ]}"
        else:
            name = forced
        objects.append(SceneObject(name, typ, box))
    seen = set()
    for obj in objects:
        if obj.name in seen:
            raise SceneError(f"duplicate object name {obj.name!r}")
        seen.add(obj.name)
    return tuple(objects)


def merge_detections(
    obs: SceneObservation,
    domain: Domain,
    threshold: float = MATCH_THRESHOLD,
) -> Scene:
    """Fuse class and phrase detections into one named scene.

    Each phrase claims the class detection it overlaps most, provided the
    overlap reaches ``threshold``; the claimed object is renamed to the
    phrase's referent.  A phrase that matches nothing becomes a new object
    of its suggested type (the root type when none is given).
    """
    if not obs.class_detections and not obs.phrase_detections:
        raise SceneError("empty scene: no detections at all")
    entries: list[dict] = []
    for det in sorted(obs.class_detections, key=lambda d: _raster_key(d.box)):
        typ = det.suggested_type or det.query
        if not domain.hierarchy.contains(typ):
            raise SceneError(f"class detection type {typ!r} not in domain")
        entries.append({"type": typ, "box": det.box, "name": None})
    for det in obs.phrase_detections:
        if det.referent_name is not None and not valid_name(det.referent_name):
            raise SceneError(
                f"bad referent name {det.referent_name!r} for phrase {det.query!r}"
            )
        best = None
        best_iou = 0.0
        for entry in entries:
            overlap = iou(det.box, entry["box"])
            if overlap > best_iou:
                best = entry
                best_iou = overlap
        if best is not None and best_iou >= threshold:
            if det.referent_name is not None:
                best["name"] = det.referent_name
        else:
            typ = det.suggested_type or ROOT_TYPE
            if typ != ROOT_TYPE and not domain.hierarchy.contains(typ):
                raise SceneError(f"suggested type {typ!r} not in domain")
            entries.append({"type": typ, "box": det.box, "name": det.referent_name})
    objects = assign_names((e["type"], e["box"], e["name"]) for e in entries)
    return Scene(obs.image_width, obs.image_height, objects)


def binary_feature(a: Box, b: Box, width: float, height: float) -> tuple[float, ...]:
    """Corner differences of two boxes, normalized by the canvas size."""
    return (
        (a.x_min - b.x_min) / width,
        (a.y_min - b.y_min) / height,
        (a.x_max - b.x_max) / width,
        (a.y_max - b.y_max) / height,
    )


def unary_feature(box: Box, width: float, height: float) -> tuple[float, ...]:
    """Ordered pairwise differences of the normalized box coordinates.

    With c = (x_min/w, y_min/h, x_max/w, y_max/h) the feature is
    (c2-c1, c3-c1, c4-c1, c3-c2, c4-c2, c4-c3), which captures the box's
    shape and the mixed-axis offsets but not its position along the
    proportional diagonal.
    """
    c = (box.x_min / width, box.y_min / height, box.x_max / width, box.y_max / height)
    return (
        c[1] - c[0],
        c[2] - c[0],
        c[3] - c[0],
        c[2] - c[1],
        c[3] - c[1],
        c[3] - c[2],
    )
