"""
FFZ boundary points from blockage events and obstacle tracks.

When a blockage starts the board has just entered the FFZ, so its leading edge e⁺ sits on the boundary;
when it ends the trailing edge e⁻ has just left it. Each event therefore yields two boundary points, which
are labelled left/right of the anchor→transmitter line (positive y′ is left) for split-curve fitting.
"""

from typing import List, Optional, Sequence, Tuple

from src.core.entities import (
    BlockageEvent,
    BoundaryPoint,
    BoundaryPointSet,
    ObstacleTrack,
    Point2,
    PointKind,
    Side,
)
from src.core.geometry import region_edges

from utils.logging_setup import get_logger
logger = get_logger(__name__, log_file="core.log")


def boundary_point_start(track: ObstacleTrack, t_s: float, event_index: int = 0) -> BoundaryPoint:
    """f^s(O(t^s)) = e⁺(t^s)."""
    plus, _ = region_edges(track, t_s)
    return BoundaryPoint(position=Point2(x=plus[0, 0], y=plus[0, 1]), kind=PointKind.START, event_index=event_index)


def boundary_point_end(track: ObstacleTrack, t_e: float, event_index: int = 0) -> BoundaryPoint:
    """f^e(O(t^e)) = e⁻(t^e)."""
    _, minus = region_edges(track, t_e)
    return BoundaryPoint(position=Point2(x=minus[0, 0], y=minus[0, 1]), kind=PointKind.END, event_index=event_index)


def split_sides(p_s: BoundaryPoint, p_e: BoundaryPoint) -> Tuple[BoundaryPoint, BoundaryPoint]:
    """Label the start/end points of one event against the centre line through the anchor and their bisection.

    With p^b the bisection point and g(x) = (p^b_y / p^b_x)·x, the start point is left and the end point right
    when g(p^e_x) > p^e_y, otherwise the reverse. The test is evaluated as the sign of p^b × p^e, which is the
    same inequality multiplied through by p^b_x; it stays defined for a vertical centre line and keeps
    "left" meaning positive y′ when p^b_x < 0.
    """
    bx = 0.5 * (p_s.position.x + p_e.position.x)
    by = 0.5 * (p_s.position.y + p_e.position.y)
    cross = bx * p_e.position.y - by * p_e.position.x
    if cross < 0.0:
        start_side, end_side = Side.LEFT, Side.RIGHT
    else:
        start_side, end_side = Side.RIGHT, Side.LEFT
    return p_s.model_copy(update={"side": start_side}), p_e.model_copy(update={"side": end_side})


def _covering_track(tracks: Sequence[ObstacleTrack], event: BlockageEvent) -> Optional[ObstacleTrack]:
    for track in tracks:
        if track.covers(event.t_start) and track.covers(event.t_end):
            return track
    return None


def collect_boundary_points(tracks: Sequence[ObstacleTrack], events: Sequence[BlockageEvent]) -> BoundaryPointSet:
    """Two side-labelled boundary points per event whose start and end fall inside one track's span.

    Events in track gaps are dropped rather than extrapolated.
    """
    if isinstance(tracks, ObstacleTrack):
        tracks = [tracks]
    points: List[BoundaryPoint] = []
    dropped = 0
    for index, event in enumerate(events):
        track = _covering_track(tracks, event)
        if track is None:
            dropped += 1
            logger.warning(f"⚠️ Event {index} [{event.t_start:.3f}, {event.t_end:.3f}] s is outside every track span, dropping")
            continue
        start = boundary_point_start(track, event.t_start, event_index=index)
        end = boundary_point_end(track, event.t_end, event_index=index)
        points.extend(split_sides(start, end))
    logger.info(f"📍 Collected {len(points)} boundary points from {len(events)} events ({dropped} dropped)")
    return BoundaryPointSet(points=points, dropped_events=dropped)
