"""Live preference-elicitation sessions over HTTP.

A session holds a box domain and a growing duel dataset; the service proposes
comparisons, accepts a human's choices, and reports the current best
estimate. All state changes append to a per-session JSONL event log, and the
in-memory state is the fold of those events, so restarting the service on the
same state directory reconstructs every session exactly.

True utilities never enter this module: the only signal is submitted
feedback.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .acquisitions import AcqOptions, DuelQuery, argmax_posterior_mean, next_duel
from .gp import KernelHypers, default_hypers, default_priors
from .laplace import LaplacePosterior, PrefDataset, fit_hypers, fit_map
from .stats import BoxDomain, RandomSource, sobol_sample

__all__ = ["Session", "SessionStore", "ServiceError", "create_app"]

MAX_DIM = 10
COLD_START_DUELS = 2
HYPERFIT_EVERY = 5
GRID_RES = 24

STATE_READY = "ready"
STATE_AWAITING = "awaiting_feedback"
STATE_FITTING = "fitting"


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class Session:
    """One elicitation session; mutated only under its store lock."""

    id: str
    domain: BoxDomain
    labels: list[str]
    method: str
    seed: int
    created: float
    updated: float
    state: str = STATE_READY
    dataset: PrefDataset = None  # set in __post_init__
    pending: DuelQuery | None = None
    history: list[dict] = field(default_factory=list)
    duel_count: int = 0
    hypers: KernelHypers = None
    posterior: LaplacePosterior | None = None
    estimate: np.ndarray | None = None
    estimate_value: float = 0.0

    def __post_init__(self):
        if self.dataset is None:
            self.dataset = PrefDataset.empty(self.domain)
        if self.hypers is None:
            self.hypers = default_hypers(self.domain.dim)

    @property
    def rng(self) -> RandomSource:
        return RandomSource(self.seed)

    def state_dict(self) -> dict:
        """Serializable snapshot used for crash-recovery comparisons."""
        return {
            "id": self.id,
            "domain": {"lower": self.domain.lower.tolist(), "upper": self.domain.upper.tolist()},
            "labels": self.labels,
            "method": self.method,
            "seed": self.seed,
            "created": self.created,
            "updated": self.updated,
            "state": self.state,
            "points": self.dataset.points.tolist(),
            "duels": self.dataset.duels.tolist(),
            "pending": None
            if self.pending is None
            else {"x1": self.pending.x1.tolist(), "x2": self.pending.x2.tolist()},
            "history": self.history,
            "estimate": None if self.estimate is None else self.estimate.tolist(),
            "estimate_value": self.estimate_value,
        }


def _parse_domain(payload: dict) -> BoxDomain:
    try:
        domain = BoxDomain(payload["lower"], payload["upper"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ServiceError(422, "invalid_domain", f"invalid domain: {exc}") from exc
    if domain.dim > MAX_DIM:
        raise ServiceError(
            422, "invalid_domain", f"at most {MAX_DIM} dimensions are supported"
        )
    return domain


class SessionStore:
    """All live sessions plus their append-only event logs."""

    def __init__(self, state_dir: str | Path, acq: AcqOptions | None = None):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.acq = acq or AcqOptions()
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._replay_all()

    # -- event log ---------------------------------------------------------

    def _log_path(self, session_id: str) -> Path:
        return self.state_dir / f"{session_id}.jsonl"

    def _append_event(self, session_id: str, event: dict) -> None:
        line = json.dumps(event, sort_keys=True, separators=(",", ":"))
        with self._log_path(session_id).open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def _replay_all(self) -> None:
        for path in sorted(self.state_dir.glob("*.jsonl")):
            events = [
                json.loads(ln)
                for ln in path.read_text(encoding="utf-8").splitlines()
                if ln.strip()
            ]
            if not events:
                continue
            session = self._fold(events)
            self._sessions[session.id] = session
            self._locks[session.id] = threading.Lock()

    def _fold(self, events: list[dict]) -> Session:
        head = events[0]
        assert head["event"] == "created"
        session = Session(
            id=head["id"],
            domain=BoxDomain(head["domain"]["lower"], head["domain"]["upper"]),
            labels=head["labels"],
            method=head["method"],
            seed=head["seed"],
            created=head["ts"],
            updated=head["ts"],
        )
        for ev in events[1:]:
            session.updated = ev["ts"]
            if ev["event"] == "next":
                session.pending = DuelQuery(np.array(ev["x1"]), np.array(ev["x2"]))
                session.state = STATE_AWAITING
            elif ev["event"] == "feedback":
                self._apply_feedback(session, int(ev["winner"]), ev["ts"])
        return session

    # -- model updates -----------------------------------------------------

    def _apply_feedback(self, session: Session, winner: int, ts: float) -> None:
        q = session.pending
        x_w, x_l = (q.x1, q.x2) if winner == 1 else (q.x2, q.x1)
        session.dataset = session.dataset.add_duel(x_w, x_l)
        session.history.append(
            {
                "index": session.duel_count,
                "duel": {"x1": q.x1.tolist(), "x2": q.x2.tolist()},
                "winner": winner,
                "ts": ts,
            }
        )
        session.duel_count += 1
        session.pending = None
        session.state = STATE_FITTING
        self._refit(session)
        session.state = STATE_READY
        session.updated = ts

    def _refit(self, session: Session) -> None:
        n = session.duel_count
        if n == 0 or session.dataset.n_duels == 0:
            return
        if n % HYPERFIT_EVERY == 0 or n == COLD_START_DUELS:
            session.hypers = fit_hypers(
                session.dataset,
                default_priors(),
                session.rng.child(1, n),
                current=session.hypers,
            )
        f0 = None
        if session.posterior is not None:
            f0 = session.posterior.f_map
            if f0.size != session.dataset.n_points:
                f0 = np.concatenate([f0, np.zeros(session.dataset.n_points - f0.size)])
        session.posterior = fit_map(session.dataset, session.hypers, f0=f0)
        session.estimate = argmax_posterior_mean(
            session.posterior, session.domain, session.rng.child(2, n), self.acq
        )
        session.estimate_value = float(session.posterior.predict_mean(session.estimate[None, :])[0])

    def _propose(self, session: Session) -> DuelQuery:
        rng = session.rng.child(3, session.duel_count)
        if session.duel_count < COLD_START_DUELS or session.posterior is None:
            pts = sobol_sample(2, session.domain, rng)
            return DuelQuery(pts[0], pts[1])
        return next_duel(session.posterior, session.method, session.domain, rng, self.acq)

    # -- public operations -------------------------------------------------

    def _get(self, session_id: str) -> tuple[Session, threading.Lock]:
        with self._registry_lock:
            if session_id not in self._sessions:
                raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
            return self._sessions[session_id], self._locks[session_id]

    def create_session(
        self,
        domain_payload: dict,
        labels: list[str] | None,
        method: str,
        config: dict | None,
    ) -> Session:
        domain = _parse_domain(domain_payload)
        if method not in ("kg", "eubo", "logei", "random"):
            raise ServiceError(422, "invalid_method", f"unknown method {method!r}")
        labels = labels or [f"x{i + 1}" for i in range(domain.dim)]
        if len(labels) != domain.dim:
            raise ServiceError(422, "invalid_labels", "one label per dimension required")
        config = config or {}
        seed = int(config.get("seed", uuid.uuid4().int % 2**63))
        sid = uuid.uuid4().hex
        ts = time.time()
        session = Session(
            id=sid,
            domain=domain,
            labels=list(labels),
            method=method,
            seed=seed,
            created=ts,
            updated=ts,
        )
        with self._registry_lock:
            self._sessions[sid] = session
            self._locks[sid] = threading.Lock()
        self._append_event(
            sid,
            {
                "event": "created",
                "id": sid,
                "ts": ts,
                "domain": {"lower": domain.lower.tolist(), "upper": domain.upper.tolist()},
                "labels": session.labels,
                "method": method,
                "seed": seed,
            },
        )
        return session

    def next_duel(self, session_id: str) -> dict:
        session, lock = self._get(session_id)
        with lock:
            if session.state == STATE_AWAITING and session.pending is not None:
                q = session.pending  # idempotent while awaiting
            else:
                q = self._propose(session)
                ts = time.time()
                session.pending = q
                session.state = STATE_AWAITING
                session.updated = ts
                self._append_event(
                    session_id,
                    {"event": "next", "ts": ts, "x1": q.x1.tolist(), "x2": q.x2.tolist()},
                )
            return {
                "session": session_id,
                "x1": q.x1.tolist(),
                "x2": q.x2.tolist(),
                "labels": session.labels,
                "duel_index": session.duel_count,
            }

    def submit_feedback(self, session_id: str, winner) -> dict:
        session, lock = self._get(session_id)
        with lock:
            if winner not in (1, 2):
                raise ServiceError(422, "invalid_winner", "winner must be 1 or 2")
            if session.state != STATE_AWAITING or session.pending is None:
                raise ServiceError(409, "no_pending_duel", "no duel awaiting feedback")
            ts = time.time()
            self._append_event(session_id, {"event": "feedback", "ts": ts, "winner": winner})
            self._apply_feedback(session, winner, ts)
            return {
                "session": session_id,
                "accepted": True,
                "n_feedback": session.duel_count,
                "estimate": self._estimate_payload(session, include_grid=False),
            }

    def _estimate_payload(self, session: Session, include_grid: bool) -> dict:
        flat = session.posterior is None or session.dataset.n_duels == 0
        if session.estimate is None:
            xhat = 0.5 * (session.domain.lower + session.domain.upper)
            value = 0.0
        else:
            xhat = session.estimate
            value = session.estimate_value
        payload = {
            "xhat": xhat.tolist(),
            "value": value,
            "flat": flat,
        }
        if include_grid and session.domain.dim <= 2:
            payload["grid"] = self._grid_payload(session)
        return payload

    def _grid_payload(self, session: Session) -> dict:
        d = session.domain.dim
        xs = np.linspace(session.domain.lower[0], session.domain.upper[0], GRID_RES)
        if d == 1:
            nodes = xs[:, None]
            shape = [GRID_RES]
            axes = {"xs": xs.tolist()}
        else:
            ys = np.linspace(session.domain.lower[1], session.domain.upper[1], GRID_RES)
            gx, gy = np.meshgrid(xs, ys, indexing="ij")
            nodes = np.column_stack([gx.ravel(), gy.ravel()])
            shape = [GRID_RES, GRID_RES]
            axes = {"xs": xs.tolist(), "ys": ys.tolist()}
        if session.posterior is None:
            mean = np.zeros(nodes.shape[0])
        else:
            mean = session.posterior.predict_mean(nodes)
        return {**axes, "shape": shape, "mean": mean.tolist()}

    def get_estimate(self, session_id: str) -> dict:
        session, lock = self._get(session_id)
        with lock:
            payload = self._estimate_payload(session, include_grid=True)
            payload["session"] = session_id
            payload["history"] = list(session.history)
            payload["state"] = session.state
            return payload

    def get_history(self, session_id: str) -> dict:
        session, lock = self._get(session_id)
        with lock:
            return {"session": session_id, "history": list(session.history)}

    def session_payload(self, session: Session) -> dict:
        return {
            "session": session.id,
            "domain": {
                "lower": session.domain.lower.tolist(),
                "upper": session.domain.upper.tolist(),
            },
            "labels": session.labels,
            "method": session.method,
            "seed": session.seed,
            "state": session.state,
        }


def create_app(state_dir: str | Path, acq: AcqOptions | None = None) -> FastAPI:
    """FastAPI application over a session store rooted at ``state_dir``."""
    app = FastAPI(title="prefbo session service")
    # the duel UI may be served from a different origin; the API is open
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(state_dir, acq)
    app.state.store = store

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "message": exc.message}
        )

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "sessions": len(store._sessions)}

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict):
        if "domain" not in payload:
            raise ServiceError(422, "invalid_domain", "request body needs a domain")
        session = store.create_session(
            payload["domain"],
            payload.get("labels"),
            payload.get("method", "kg"),
            payload.get("config"),
        )
        return store.session_payload(session)

    @app.get("/sessions/{session_id}/next")
    def get_next(session_id: str):
        return store.next_duel(session_id)

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, payload: dict):
        if "winner" not in payload:
            raise ServiceError(422, "invalid_winner", "request body needs a winner")
        return store.submit_feedback(session_id, payload["winner"])

    @app.get("/sessions/{session_id}/estimate")
    def get_estimate(session_id: str):
        return store.get_estimate(session_id)

    @app.get("/sessions/{session_id}/history")
    def get_history(session_id: str):
        return store.get_history(session_id)

    return app
