"""CSV and snapshot plot-data emission for run records."""

import json
import logging
from collections.abc import Mapping
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.patches import Circle  # noqa: E402

from src.collision import QueryKind, circle_centres  # noqa: E402
from src.frenet import boundary_polylines  # noqa: E402
from src.predictor import Evaluation, WorldSnapshot, sampled_poses  # noqa: E402
from src.runner import RunRecord  # noqa: E402
from src.scenario import Scenario  # noqa: E402

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "T_r",
    "query_id",
    "method",
    "t_c_star",
    "n_roots",
    "e_tc_star",
    "t_c_star_numeric",
    "n_roots_numeric",
]
COLOUR_MAP = "Reds"
BOUNDARY_RESOLUTION = 1.0  # metres between boundary samples


def _rows(record: RunRecord) -> list[dict]:
    rows = []
    for time, evaluations in zip(record.times, record.evaluations, strict=True):
        for query_id in record.query_ids:
            evaluation = evaluations[query_id]
            result, numeric = evaluation.result, evaluation.numeric
            rows.append(
                {
                    "T_r": time,
                    "query_id": query_id,
                    "method": result.method.value,
                    "t_c_star": result.t_c_star,
                    "n_roots": len(result.roots),
                    "e_tc_star": evaluation.error,
                    "t_c_star_numeric": None if numeric is None else numeric.t_c_star,
                    "n_roots_numeric": None if numeric is None else len(numeric.roots),
                }
            )
    return rows


def emit_csv(record: RunRecord, path: str | Path) -> Path:
    """Write one row per (T_r, query).

    ``t_c_star`` and ``n_roots`` come from the analytic route when it ran and from
    the numeric route otherwise; the ``*_numeric`` columns always hold the numeric
    route and stay empty when it did not run. Times are in seconds with six
    decimals; missing collision times and errors are left empty.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(_rows(record), columns=CSV_COLUMNS)
    for column in ("n_roots", "n_roots_numeric"):
        frame[column] = pd.to_numeric(frame[column], errors="coerce").astype("Int64")
    for column in ("T_r", "t_c_star", "e_tc_star", "t_c_star_numeric"):
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    frame.to_csv(path, index=False, float_format="%.6f", na_rep="", lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def risk_colour(t_c_star: float, horizon: float) -> tuple[float, float, float, float]:
    """Colour for a collision time: darker for smaller ``t_c*``."""
    level = min(max(1.0 - t_c_star / horizon, 0.0), 1.0)
    return tuple(float(channel) for channel in matplotlib.colormaps[COLOUR_MAP](level))


def _hex(colour: tuple[float, ...]) -> str:
    return matplotlib.colors.to_hex(colour)


def snapshot_plotdata(
    snapshot: WorldSnapshot, evaluations: Mapping[str, Evaluation], queries: Mapping
) -> dict:
    """Structured description of one snapshot: shapes plus per-query ``t_c*`` colours."""
    vehicles = []
    for vehicle in snapshot.vehicles.values():
        pose = sampled_poses(vehicle, vehicle.x, snapshot.road)
        circles = [
            {"centre": [float(centre[0, 0]), float(centre[0, 1])], "radius": radius}
            for centre, radius in circle_centres(pose, vehicle.geometry)
        ]
        vehicles.append({"id": vehicle.vehicle_id, "circles": circles})

    obstacles = [
        {"id": obstacle.obstacle_id, "centre": list(obstacle.centre), "radius": obstacle.radius}
        for obstacle in snapshot.obstacles.values()
    ]

    boundaries = {}
    if snapshot.road is not None:
        left, right = boundary_polylines(snapshot.road, BOUNDARY_RESOLUTION)
        boundaries = {"1": left.round(6).tolist(), "2": right.round(6).tolist()}

    risks = []
    for query_id, evaluation in evaluations.items():
        result = evaluation.result
        if result is None or result.t_c_star is None:
            continue
        query = queries[query_id]
        risks.append(
            {
                "query_id": query_id,
                "kind": query.kind.value,
                "ego": query.ego,
                "target": query.target,
                "side": query.side,
                "t_c_star": result.t_c_star,
                "horizon": result.horizon,
                "colour": _hex(risk_colour(result.t_c_star, result.horizon)),
            }
        )

    return {
        "time": snapshot.time,
        "colour_map": COLOUR_MAP,
        "vehicles": vehicles,
        "obstacles": obstacles,
        "boundaries": boundaries,
        "risks": risks,
    }


def _draw(data: dict, path: Path) -> None:
    figure, axes = plt.subplots(figsize=(10, 5))
    fills: dict[tuple[str, str], str] = {}
    for risk in data["risks"]:
        if risk["kind"] == QueryKind.VEHICLE_BOUNDARY.value:
            fills[("boundary", str(risk["side"]))] = risk["colour"]
        elif risk["kind"] == QueryKind.VEHICLE_OBSTACLE.value:
            fills[("obstacle", risk["target"])] = risk["colour"]
        else:
            fills[("vehicle", risk["target"])] = risk["colour"]

    for side, points in data["boundaries"].items():
        if points:
            xs, ys = zip(*points, strict=True)
            colour = fills.get(("boundary", side), "black")
            width = 3.0 if ("boundary", side) in fills else 1.0
            axes.plot(xs, ys, color=colour, linewidth=width)

    for vehicle in data["vehicles"]:
        face = fills.get(("vehicle", vehicle["id"]), "none")
        for circle in vehicle["circles"]:
            axes.add_patch(Circle(circle["centre"], circle["radius"], facecolor=face, edgecolor="black"))
        axes.annotate(vehicle["id"], vehicle["circles"][0]["centre"], ha="center", va="center")

    for obstacle in data["obstacles"]:
        face = fills.get(("obstacle", obstacle["id"]), "grey")
        axes.add_patch(Circle(obstacle["centre"], obstacle["radius"], facecolor=face, edgecolor="black"))

    axes.set_aspect("equal")
    axes.autoscale_view()
    axes.set_title(f"T_r = {data['time']:.2f} s")
    axes.set_xlabel("x (m)")
    axes.set_ylabel("y (m)")
    figure.savefig(path, format="svg", bbox_inches="tight")
    plt.close(figure)


def emit_snapshot_plotdata(
    snapshot: WorldSnapshot,
    evaluations: Mapping[str, Evaluation],
    queries: Mapping,
    path: str | Path,
) -> tuple[Path, Path]:
    """Write ``<stem>.json`` and ``<stem>.svg`` for one snapshot.

    Args:
        snapshot: World state at T_r
        evaluations: Evaluations at T_r keyed by query id
        queries: Query definitions keyed by id
        path: Output stem; ``.json`` and ``.svg`` are appended

    Returns:
        Paths of the JSON and SVG files
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = snapshot_plotdata(snapshot, evaluations, queries)
    json_path = path.with_name(f"{path.name}.json")
    svg_path = path.with_name(f"{path.name}.svg")
    json_path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    _draw(data, svg_path)
    logger.info(f"Wrote snapshot T_r={snapshot.time:.2f}s to {json_path} and {svg_path}")
    return json_path, svg_path


def emit_record(record: RunRecord, scenario: Scenario, out_dir: str | Path) -> list[Path]:
    """CSV of the whole record plus plot data for every kept snapshot."""
    out_dir = Path(out_dir)
    queries = {query.query_id: query for query in scenario.queries}
    written = [emit_csv(record, out_dir / f"{record.scenario}.csv")]
    for time, snapshot in sorted(record.snapshots.items()):
        stem = out_dir / f"{record.scenario}_snapshot_{round(time * 1000):06d}ms"
        written.extend(emit_snapshot_plotdata(snapshot, record.at(time), queries, stem))
    return written
