"""Stateful edge service: sessions, estimation positions, accumulation.

The service is in-memory. Each estimation position keeps an accumulated
unit-sphere cloud; incoming packets merge into it with overwrite
semantics before the estimator runs, so later requests benefit from
everything observed earlier (extrapolation). Concurrency: the session
map takes a short lock for structural changes, each position serializes
its own estimate requests, and the estimator runs outside the map lock.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import codec
from .estimator import EstimatorInterface, ShCoefficients, project_sh
from .geometry import AnchorSet, generate_anchors
from .sampling import UnitSphereCloud, merge

MIN_ANCHOR_COUNT = 512
MAX_ANCHOR_COUNT = 4096


class ServiceError(Exception):
    pass


class SessionNotFoundError(ServiceError, KeyError):
    pass


class PositionNotFoundError(ServiceError, KeyError):
    pass


class UnsupportedAnchorCountError(ServiceError, ValueError):
    pass


@dataclass
class PositionState:
    position_id: str
    world_position: np.ndarray
    accumulated: UnitSphereCloud
    last_estimate: ShCoefficients | None = None
    updated_at: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class Session:
    session_id: str
    created_at: float
    anchor_count: int
    anchors: AnchorSet
    positions: dict[str, PositionState] = field(default_factory=dict)
    next_position: int = 0


def fan_out_positions(placement, object_extent, count: int) -> np.ndarray:
    """Estimation positions derived from an object placement and extent.

    count=1: the placement itself. count=2: +-x half extent. count=4: the
    four horizontal half-extent corners (+-x, +-z).
    """
    p = np.asarray(placement, dtype=np.float64).reshape(3)
    e = np.asarray(object_extent, dtype=np.float64).reshape(3)
    if np.any(e < 0):
        raise ValueError("object extent must be nonnegative")
    hx, hz = e[0] / 2.0, e[2] / 2.0
    if count == 1:
        offsets = [(0.0, 0.0, 0.0)]
    elif count == 2:
        offsets = [(-hx, 0.0, 0.0), (hx, 0.0, 0.0)]
    elif count == 4:
        offsets = [(-hx, 0.0, -hz), (-hx, 0.0, hz), (hx, 0.0, -hz), (hx, 0.0, hz)]
    else:
        raise ValueError(f"count must be 1, 2 or 4, got {count}")
    return p + np.asarray(offsets)


class EdgeService:
    """Session store plus the estimate entry point.

    ``estimator`` defaults to the analytic SH projector; any callable
    honoring EstimatorInterface works. ``share_observations`` additionally
    merges each incoming packet into sibling positions registered at the
    exact same world coordinates.
    """

    def __init__(
        self,
        estimator: EstimatorInterface | None = None,
        share_observations: bool = False,
        min_anchor_count: int = MIN_ANCHOR_COUNT,
        max_anchor_count: int = MAX_ANCHOR_COUNT,
    ):
        self._estimator = estimator if estimator is not None else project_sh
        self._share = share_observations
        self._min_anchors = min_anchor_count
        self._max_anchors = max_anchor_count
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._anchor_cache: dict[int, AnchorSet] = {}

    def _anchor_set(self, count: int) -> AnchorSet:
        with self._lock:
            cached = self._anchor_cache.get(count)
        if cached is not None:
            return cached
        built = generate_anchors(count)
        with self._lock:
            return self._anchor_cache.setdefault(count, built)

    def _session(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFoundError(session_id)
        return session

    def create_session(self, anchor_count: int) -> str:
        if not self._min_anchors <= anchor_count <= self._max_anchors:
            raise UnsupportedAnchorCountError(
                f"anchor_count {anchor_count} outside supported range "
                f"[{self._min_anchors}, {self._max_anchors}]"
            )
        anchors = self._anchor_set(anchor_count)
        session_id = secrets.token_hex(16)
        session = Session(
            session_id=session_id,
            created_at=time.time(),
            anchor_count=anchor_count,
            anchors=anchors,
        )
        with self._lock:
            self._sessions[session_id] = session
        return session_id

    def join_session(self, session_id: str) -> dict:
        session = self._session(session_id)
        with self._lock:
            position_ids = sorted(session.positions)
        return {
            "session_id": session.session_id,
            "anchor_count": session.anchor_count,
            "created_at": session.created_at,
            "position_ids": position_ids,
        }

    def register_position(self, session_id: str, world_position) -> str:
        session = self._session(session_id)
        world = np.asarray(world_position, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(world)):
            raise ValueError("world position must be finite")
        with self._lock:
            position_id = f"p{session.next_position}"
            session.next_position += 1
            session.positions[position_id] = PositionState(
                position_id=position_id,
                world_position=world,
                accumulated=UnitSphereCloud.empty(session.anchor_count),
                updated_at=time.time(),
            )
        return position_id

    def _position(self, session: Session, position_id: str) -> PositionState:
        with self._lock:
            state = session.positions.get(position_id)
        if state is None:
            raise PositionNotFoundError(position_id)
        return state

    def estimate(self, session_id: str, position_id: str, packet: bytes) -> ShCoefficients:
        session = self._session(session_id)
        state = self._position(session, position_id)
        incoming = codec.decode(packet)
        if incoming.anchor_count != session.anchor_count:
            raise codec.CorruptPacketError(
                f"packet anchor_count {incoming.anchor_count} does not match "
                f"session anchor_count {session.anchor_count}"
            )
        with state.lock:
            merged = merge(state.accumulated, incoming)
            estimate = self._estimator(merged, session.anchors)
            state.accumulated = merged
            state.last_estimate = estimate
            state.updated_at = time.time()
        if self._share:
            self._share_with_siblings(session, state, incoming)
        return estimate

    def _share_with_siblings(
        self, session: Session, origin: PositionState, incoming: UnitSphereCloud
    ) -> None:
        with self._lock:
            siblings = [
                s
                for s in session.positions.values()
                if s.position_id != origin.position_id
                and np.array_equal(s.world_position, origin.world_position)
            ]
        for sibling in siblings:
            with sibling.lock:
                sibling.accumulated = merge(sibling.accumulated, incoming)
                sibling.updated_at = time.time()

    def position_snapshot(self, session_id: str, position_id: str) -> dict:
        """Introspection for tests and the HTTP layer: counts, not buffers."""
        session = self._session(session_id)
        state = self._position(session, position_id)
        with state.lock:
            return {
                "position_id": state.position_id,
                "world_position": state.world_position.tolist(),
                "initialized_count": state.accumulated.initialized_count,
                "has_estimate": state.last_estimate is not None,
                "updated_at": state.updated_at,
            }
