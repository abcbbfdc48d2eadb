"""Road geometry and conversion between Cartesian and path (Frenet) coordinates.

Conventions: the lateral offset ``e_cg`` is positive to the LEFT of the
direction of travel, ``bound_1 = +w/2`` is the left boundary, and the heading
error is ``theta_e = theta - theta_p(s)``.
"""

import bisect
import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

PROJECTION_SINGULARITY = 1e-9  # m, distance to arc centre treated as ambiguous


def wrap_angle(angle: float) -> float:
    """Map an angle to ``(-pi, pi]``."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


@dataclass(frozen=True)
class ArcPath:
    """Constant-curvature reference path (a straight line when ``curvature == 0``)."""

    origin: tuple[float, float]
    heading: float
    curvature: float
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"path length must be positive, got {self.length}")

    @property
    def center(self) -> np.ndarray:
        if self.curvature == 0.0:
            raise ValueError("a straight path has no centre")
        radius = 1.0 / self.curvature
        return np.array(
            [
                self.origin[0] - radius * math.sin(self.heading),
                self.origin[1] + radius * math.cos(self.heading),
            ]
        )

    def heading_at(self, s: float) -> float:
        return self.heading + self.curvature * s

    def curvature_at(self, s: float) -> float:
        return self.curvature

    def point(self, s: float) -> np.ndarray:
        if self.curvature == 0.0:
            return np.array(
                [
                    self.origin[0] + s * math.cos(self.heading),
                    self.origin[1] + s * math.sin(self.heading),
                ]
            )
        radius = 1.0 / self.curvature
        angle = self.heading_at(s)
        return self.center + radius * np.array([math.sin(angle), -math.cos(angle)])

    def normal(self, s: float) -> np.ndarray:
        angle = self.heading_at(s)
        return np.array([-math.sin(angle), math.cos(angle)])

    def project(self, x: float, y: float) -> float:
        """Arc length of the path point nearest to ``(x, y)``.

        Raises:
            ValueError: If the point sits on the arc centre
        """
        if self.curvature == 0.0:
            return (x - self.origin[0]) * math.cos(self.heading) + (y - self.origin[1]) * math.sin(
                self.heading
            )

        dx, dy = x - self.center[0], y - self.center[1]
        if math.hypot(dx, dy) < PROJECTION_SINGULARITY:
            raise ValueError("point at the arc centre has no unique projection")
        if self.curvature > 0:
            angle = math.atan2(dx, -dy)
        else:
            angle = math.atan2(-dx, dy)

        turn = 2.0 * math.pi / abs(self.curvature)
        base = wrap_angle(angle - self.heading) / self.curvature
        candidates = [base + k * turn for k in (0, -1, 1)]
        return min(candidates, key=lambda s: max(-s, s - self.length, 0.0))


@dataclass(frozen=True, eq=False)
class PolylinePath:
    """Piecewise-straight reference path through ``vertices``."""

    vertices: np.ndarray

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 2:
            raise ValueError("a polyline needs at least two (x, y) vertices")
        deltas = np.diff(vertices, axis=0)
        lengths = np.hypot(deltas[:, 0], deltas[:, 1])
        if np.any(lengths == 0.0):
            raise ValueError("polyline vertices must be distinct")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "_lengths", lengths)
        object.__setattr__(self, "_tangents", deltas / lengths[:, None])
        object.__setattr__(self, "_starts", np.concatenate([[0.0], np.cumsum(lengths)]))

    @property
    def length(self) -> float:
        return float(self._starts[-1])

    @property
    def segment_starts(self) -> np.ndarray:
        return self._starts

    def segment_index(self, s: float) -> int:
        index = bisect.bisect_right(self._starts, s) - 1
        return int(min(max(index, 0), len(self._lengths) - 1))

    def heading_at(self, s: float) -> float:
        tangent = self._tangents[self.segment_index(s)]
        return math.atan2(tangent[1], tangent[0])

    def curvature_at(self, s: float) -> float:
        return 0.0

    def point(self, s: float) -> np.ndarray:
        index = self.segment_index(s)
        return self.vertices[index] + (s - self._starts[index]) * self._tangents[index]

    def normal(self, s: float) -> np.ndarray:
        tangent = self._tangents[self.segment_index(s)]
        return np.array([-tangent[1], tangent[0]])

    def project(self, x: float, y: float) -> float:
        """Arc length of the nearest foot point; ties go to the smaller arc length."""
        point = np.array([x, y])
        best_s, best_distance = 0.0, math.inf
        last = len(self._lengths) - 1
        for index, (start, tangent, length) in enumerate(
            zip(self.vertices[:-1], self._tangents, self._lengths, strict=True)
        ):
            along = float((point - start) @ tangent)
            lower = -math.inf if index == 0 else 0.0
            upper = math.inf if index == last else length
            along = min(max(along, lower), upper)
            foot = start + along * tangent
            distance = float(np.sum((point - foot) ** 2))
            if distance < best_distance:
                best_s, best_distance = self._starts[index] + along, distance
        return float(best_s)


ReferencePath = ArcPath | PolylinePath


@dataclass(frozen=True)
class RoadGeometry:
    """Reference path with width and constant grade."""

    path: ReferencePath
    width: float
    grade: float = 0.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"road width must be positive, got {self.width}")
        if isinstance(self.path, ArcPath) and abs(self.path.curvature) * self.width / 2 >= 1:
            raise ValueError("road boundaries are not defined: |kappa| * w/2 >= 1")

    def bound(self, side: int) -> float:
        """Signed lateral position of boundary 1 (left, +w/2) or 2 (right, -w/2)."""
        if side not in (1, 2):
            raise ValueError(f"boundary side must be 1 or 2, got {side}")
        return self.width / 2 if side == 1 else -self.width / 2

    def curvature_at(self, s: float) -> float:
        return self.path.curvature_at(s)


def cartesian_to_path(x: float, y: float, theta: float, road: RoadGeometry) -> tuple[float, float, float]:
    """Convert a Cartesian pose to ``(s, e_cg, theta_e)``.

    ``theta_e`` is wrapped to ``(-pi, pi]`` here, at the conversion boundary only;
    predictions started from it propagate heading errors unwrapped.
    """
    path = road.path
    s = path.project(x, y)
    offset = np.array([x, y]) - path.point(s)
    e_cg = float(offset @ path.normal(s))
    return s, e_cg, wrap_angle(theta - path.heading_at(s))


def path_to_cartesian(s: float, e_cg: float, theta_e: float, road: RoadGeometry) -> tuple[float, float, float]:
    """Convert ``(s, e_cg, theta_e)`` to a Cartesian pose.

    Raises:
        ValueError: If the lateral offset reaches the curvature singularity
    """
    path = road.path
    if abs(e_cg * path.curvature_at(s)) >= 1:
        raise ValueError(f"lateral offset {e_cg} beyond the path's radius of curvature")
    point = path.point(s) + e_cg * path.normal(s)
    return float(point[0]), float(point[1]), path.heading_at(s) + theta_e


def boundary_polylines(road: RoadGeometry, resolution: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Left (+w/2) and right (-w/2) boundaries sampled every ``resolution`` metres of arc."""
    if not resolution > 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    path = road.path
    half = road.width / 2

    if isinstance(path, PolylinePath):
        stations = []
        for start, end in zip(path.segment_starts, path.segment_starts[1:], strict=False):
            grid = np.arange(start, end, resolution)
            # Endpoints of each segment use that segment's normal
            stations.extend((s, start) for s in grid)
            stations.append((end, start))
        points = [path.point(reference) + (s - reference) * _tangent(path, reference) for s, reference in stations]
        normals = [path.normal(reference) for _, reference in stations]
    else:
        grid = np.append(np.arange(0.0, path.length, resolution), path.length)
        points = [path.point(s) for s in grid]
        normals = [path.normal(s) for s in grid]

    points = np.array(points)
    normals = np.array(normals)
    return points + half * normals, points - half * normals


def _tangent(path: PolylinePath, s: float) -> np.ndarray:
    angle = path.heading_at(s)
    return np.array([math.cos(angle), math.sin(angle)])
