"""Rating-study protocol: sessions of ten tasks, MOS and head-to-head
activities, skip handling, Glicko-2 tournament updates, and the REST API.

All state mutations go through the event log (single writer); replaying the
log rebuilds identical state, including completion codes and Glicko ratings.
Hidden model labels live only server-side and are never serialized to
clients.
"""

from __future__ import annotations

import random
import secrets
import zlib
from dataclasses import dataclass, field
from typing import Optional

from capcommittee.humaneval.glicko import GlickoState, glicko_update
from capcommittee.humaneval.stats import H2HJudgment, h2h_test, welch_t_one_sided
from capcommittee.humaneval.store import EventLog

SESSION_TASKS = 10

HELPFULNESS_LABELS = [
    "Not helpful at all",
    "Slightly helpful",
    "Moderately helpful",
    "Helpful",
    "Very helpful",
]
CORRECTNESS_LABELS = [
    "Completely wrong",
    "Mostly wrong",
    "Slightly wrong",
    "Slightly right",
    "Mostly right",
    "Completely right",
]
SKIP_REASONS = ("cant_tell", "not_visible")


class ProtocolError(ValueError):
    pass


class PoolExhaustedError(ProtocolError):
    pass


@dataclass
class Session:
    session_id: str
    activity: str
    rater_id: str
    tasks: list[dict] = field(default_factory=list)  # full tasks, hidden labels included
    answered: dict = field(default_factory=dict)  # task_id -> payload
    skipped: set = field(default_factory=set)
    remaining: int = SESSION_TASKS
    completion_code: Optional[str] = None

    def task_by_id(self, task_id: str) -> dict:
        for task in self.tasks:
            if task["task_id"] == task_id:
                return task
        raise ProtocolError(f"task {task_id!r} not in session")

    def next_task(self) -> Optional[dict]:
        for task in self.tasks:
            if task["task_id"] not in self.answered and task["task_id"] not in self.skipped:
                return task
        return None


def task_view(task: dict, activity: str) -> dict:
    """Client-facing payload; hidden model labels are stripped here."""
    if activity == "mos":
        return {
            "task_id": task["task_id"],
            "image_uri": task["image_uri"],
            "caption": task["caption"],
        }
    caption_a, caption_b = task["caption_a"], task["caption_b"]
    if task.get("swap"):
        caption_a, caption_b = caption_b, caption_a
    return {
        "task_id": task["task_id"],
        "image_uri": task["image_uri"],
        "caption_a": caption_a,
        "caption_b": caption_b,
    }


def _pair_models(task: dict) -> tuple[str, str]:
    return task["model_a"], task["model_b"]


class Study:
    """Event-sourced study state over a fixed task pool.

    The pool is a list of task dicts: MOS tasks carry
    ``{task_id, image_uri, caption, model}`` and head-to-head tasks
    ``{task_id, image_uri, caption_a, caption_b, model_a, model_b}``.
    """

    def __init__(self, pool: list[dict], log: EventLog, tau: float = 0.5):
        self.pool = {t["task_id"]: dict(t) for t in pool}
        if len(self.pool) != len(pool):
            raise ProtocolError("duplicate task_id in pool")
        self.log = log
        self.sessions: dict[str, Session] = {}
        self._session_counter = 0
        models = set()
        for task in pool:
            for key in ("model", "model_a", "model_b"):
                if key in task:
                    models.add(task[key])
        self.glicko = GlickoState(ratings={}, tau=tau)
        for model in sorted(models):
            self.glicko = self.glicko.register(model)
        self._meetings: dict[frozenset, int] = {}
        for event in log.read_all():
            self._apply(event)

    # -- pairing ------------------------------------------------------------

    def _pairing_score(self, task: dict) -> tuple:
        """Sort key for adaptive pairing: most-informative pairs first
        (largest combined RD^2), then fewest prior meetings, then lexical
        pair id, then task id."""
        a, b = _pair_models(task)
        ra = self.glicko.ratings[a]
        rb = self.glicko.ratings[b]
        info = ra.rd**2 + rb.rd**2
        meetings = self._meetings.get(frozenset((a, b)), 0)
        return (-info, meetings, tuple(sorted((a, b))), task["task_id"])

    def _eligible(self, activity: str, exclude: set) -> list[dict]:
        def is_activity(task: dict) -> bool:
            return ("caption_a" in task) == (activity == "head2head")

        return [
            t
            for t in self.pool.values()
            if is_activity(t) and t["task_id"] not in exclude
        ]

    def _draw_tasks(self, activity: str, count: int, rng: random.Random, exclude: set) -> list[dict]:
        eligible = self._eligible(activity, exclude)
        if len(eligible) < count:
            raise PoolExhaustedError(
                f"pool has {len(eligible)} eligible {activity} tasks, need {count}"
            )
        if activity == "head2head":
            chosen = sorted(eligible, key=self._pairing_score)[:count]
        else:
            chosen = rng.sample(sorted(eligible, key=lambda t: t["task_id"]), count)
        rng.shuffle(chosen)
        out = []
        for task in chosen:
            task = dict(task)
            if activity == "head2head":
                task["swap"] = rng.random() < 0.5
            out.append(task)
        return out

    # -- commands -------------------------------------------------------------

    def create_session(self, activity: str, rater_id: str, seed: int = 0) -> Session:
        if activity not in ("mos", "head2head"):
            raise ProtocolError(f"unknown activity: {activity!r}")
        rng = random.Random(seed)
        tasks = self._draw_tasks(activity, SESSION_TASKS, rng, exclude=set())
        self._session_counter += 1
        session_id = f"s{self._session_counter:06d}"
        event = self.log.append(
            "session_created",
            {
                "session_id": session_id,
                "activity": activity,
                "rater_id": rater_id,
                "seed": seed,
                "tasks": tasks,
            },
        )
        self._apply(event, from_log=False)
        return self.sessions[session_id]

    def submit_rating(self, session_id: str, task_id: str, payload: dict) -> dict:
        session = self.sessions.get(session_id)
        if session is None:
            raise ProtocolError(f"unknown session: {session_id!r}")
        if session.completion_code is not None:
            raise ProtocolError("session already complete")
        task = session.task_by_id(task_id)
        if task_id in session.answered or task_id in session.skipped:
            raise ProtocolError(f"task {task_id!r} already submitted")

        if "skip" in payload:
            if payload["skip"] not in SKIP_REASONS:
                raise ProtocolError(f"unknown skip reason: {payload['skip']!r}")
            replacement = None
            in_session = {t["task_id"] for t in session.tasks}
            eligible = self._eligible(session.activity, exclude=in_session)
            if eligible:
                rng = random.Random(zlib.crc32(f"{session_id}/{task_id}".encode()))
                if session.activity == "head2head":
                    replacement = dict(sorted(eligible, key=self._pairing_score)[0])
                    replacement["swap"] = rng.random() < 0.5
                else:
                    replacement = dict(min(eligible, key=lambda t: t["task_id"]))
            event = self.log.append(
                "task_skipped",
                {
                    "session_id": session_id,
                    "task_id": task_id,
                    "reason": payload["skip"],
                    "replacement": replacement,
                },
            )
            self._apply(event, from_log=False)
            return self._progress(session)

        self._validate_rating(session.activity, payload)
        event = self.log.append(
            "rating_submitted",
            {"session_id": session_id, "task_id": task_id, "payload": payload},
        )
        self._apply(event, from_log=False)
        if session.remaining == 0 and session.completion_code is None:
            code = secrets.token_hex(8)
            done = self.log.append(
                "session_completed", {"session_id": session_id, "completion_code": code}
            )
            self._apply(done, from_log=False)
        return self._progress(session)

    @staticmethod
    def _validate_rating(activity: str, payload: dict) -> None:
        if activity == "mos":
            try:
                helpfulness = int(payload["helpfulness"])
                correctness = int(payload["correctness"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"malformed MOS payload: {payload!r}") from exc
            if not (0 <= helpfulness <= 4):
                raise ProtocolError(f"helpfulness {helpfulness} out of range 0..4")
            if not (0 <= correctness <= 5):
                raise ProtocolError(f"correctness {correctness} out of range 0..5")
        else:
            winner = payload.get("winner")
            axis = payload.get("axis")
            if winner not in ("A", "B", "tie"):
                raise ProtocolError(f"winner must be A, B, or tie; got {winner!r}")
            if axis not in ("helpfulness", "correctness"):
                raise ProtocolError(f"unknown axis: {axis!r}")

    def _progress(self, session: Session) -> dict:
        out = {"remaining": session.remaining}
        if session.completion_code is not None:
            out["completion_code"] = session.completion_code
        else:
            nxt = session.next_task()
            out["next_task"] = task_view(nxt, session.activity) if nxt else None
        return out

    # -- event application ----------------------------------------------------

    def _apply(self, event: dict, from_log: bool = True) -> None:
        kind = event["type"]
        if kind == "session_created":
            session = Session(
                session_id=event["session_id"],
                activity=event["activity"],
                rater_id=event["rater_id"],
                tasks=[dict(t) for t in event["tasks"]],
            )
            self.sessions[session.session_id] = session
            if from_log:
                number = int(event["session_id"].lstrip("s"))
                self._session_counter = max(self._session_counter, number)
        elif kind == "rating_submitted":
            session = self.sessions[event["session_id"]]
            session.answered[event["task_id"]] = event["payload"]
            session.remaining -= 1
        elif kind == "task_skipped":
            session = self.sessions[event["session_id"]]
            session.skipped.add(event["task_id"])
            if event.get("replacement"):
                session.tasks.append(dict(event["replacement"]))
        elif kind == "session_completed":
            session = self.sessions[event["session_id"]]
            session.completion_code = event["completion_code"]
            self._apply_glicko_period(session)
        else:
            raise ProtocolError(f"unknown event type: {kind!r}")

    def _apply_glicko_period(self, session: Session) -> None:
        """Batch the session's head-to-head results into one rating period."""
        if session.activity != "head2head":
            return
        results = []
        for task_id, payload in session.answered.items():
            task = session.task_by_id(task_id)
            model, score = self._judgment(task, payload)
            if model is None:
                results.append((task["model_a"], task["model_b"], 0.5))
            else:
                a, b = _pair_models(task)
                results.append((a, b, 1.0 if model == a else 0.0))
            pair = frozenset(_pair_models(task))
            self._meetings[pair] = self._meetings.get(pair, 0) + 1
        if results:
            self.glicko = glicko_update(self.glicko, results)

    @staticmethod
    def _judgment(task: dict, payload: dict) -> tuple[Optional[str], float]:
        """Map a presented A/B winner back to the hidden model label."""
        if payload["winner"] == "tie":
            return None, 0.5
        first, second = _pair_models(task)
        if task.get("swap"):
            first, second = second, first
        winner = first if payload["winner"] == "A" else second
        return winner, 1.0

    # -- reports ---------------------------------------------------------------

    def glicko_report(self) -> dict:
        return {
            "tau": self.glicko.tau,
            "models": {
                m: {"rating": r.rating, "rd": r.rd, "volatility": r.volatility}
                for m, r in sorted(self.glicko.ratings.items())
            },
        }

    def judgments(self) -> list[H2HJudgment]:
        out = []
        for session in self.sessions.values():
            if session.activity != "head2head":
                continue
            for task_id, payload in session.answered.items():
                task = session.task_by_id(task_id)
                winner, _ = self._judgment(task, payload)
                a, b = _pair_models(task)
                out.append(
                    H2HJudgment(
                        rater_id=session.rater_id, model_a=a, model_b=b, winner=winner
                    )
                )
        return out

    def mos_scores(self) -> dict[str, dict[str, list[float]]]:
        """Per model: per-rater mean helpfulness and correctness."""
        per: dict[str, dict[str, dict[str, list[float]]]] = {}
        for session in self.sessions.values():
            if session.activity != "mos":
                continue
            for task_id, payload in session.answered.items():
                task = session.task_by_id(task_id)
                model = task["model"]
                bucket = per.setdefault(model, {}).setdefault(
                    session.rater_id, {"helpfulness": [], "correctness": []}
                )
                bucket["helpfulness"].append(float(payload["helpfulness"]))
                bucket["correctness"].append(float(payload["correctness"]))
        out: dict[str, dict[str, list[float]]] = {}
        for model, raters in per.items():
            out[model] = {
                axis: [
                    sum(v[axis]) / len(v[axis])
                    for _, v in sorted(raters.items())
                    if v[axis]
                ]
                for axis in ("helpfulness", "correctness")
            }
        return out

    def pair_tests(self, model_a: str, model_b: str) -> dict:
        report: dict = {"pair": [model_a, model_b]}
        try:
            report["head2head"] = h2h_test(self.judgments(), (model_a, model_b))
        except ValueError as exc:
            report["head2head"] = {"error": str(exc)}
        mos = self.mos_scores()
        mos_report = {}
        for axis in ("helpfulness", "correctness"):
            a = mos.get(model_a, {}).get(axis, [])
            b = mos.get(model_b, {}).get(axis, [])
            if len(a) >= 2 and len(b) >= 2:
                t, p = welch_t_one_sided(a, b)
                mos_report[axis] = {
                    "mean_a": sum(a) / len(a),
                    "mean_b": sum(b) / len(b),
                    "t": t,
                    "p_value": p,
                }
        report["mos"] = mos_report or {"error": "insufficient MOS data"}
        return report


def create_app(study: Study, static_dir: Optional[str] = None):
    """FastAPI app exposing the study protocol plus the static rating UI."""
    from fastapi import FastAPI, HTTPException
    from fastapi.staticfiles import StaticFiles

    app = FastAPI(title="caption rating service")

    def _session_or_404(session_id: str) -> Session:
        session = study.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    @app.post("/api/sessions")
    def create_session(body: dict):
        try:
            session = study.create_session(
                activity=body.get("activity", "mos"),
                rater_id=str(body.get("rater_id", "anonymous")),
                seed=int(body.get("seed", secrets.randbits(31))),
            )
        except PoolExhaustedError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ProtocolError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        nxt = session.next_task()
        return {
            "session_id": session.session_id,
            "activity": session.activity,
            "remaining": session.remaining,
            "task": task_view(nxt, session.activity) if nxt else None,
            "option_labels": {
                "helpfulness": HELPFULNESS_LABELS,
                "correctness": CORRECTNESS_LABELS,
            },
        }

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        session = _session_or_404(session_id)
        nxt = session.next_task()
        out = {
            "session_id": session.session_id,
            "activity": session.activity,
            "remaining": session.remaining,
            "task": task_view(nxt, session.activity) if nxt else None,
        }
        if session.completion_code is not None:
            out["completion_code"] = session.completion_code
        return out

    @app.post("/api/sessions/{session_id}/ratings")
    def submit(session_id: str, body: dict):
        _session_or_404(session_id)
        try:
            return study.submit_rating(
                session_id, str(body.get("task_id", "")), body.get("payload", {})
            )
        except ProtocolError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/api/reports/glicko")
    def glicko_report():
        return study.glicko_report()

    @app.get("/api/reports/tests")
    def tests(pair: str):
        parts = pair.split(",")
        if len(parts) != 2:
            raise HTTPException(status_code=422, detail="pair must be 'modelA,modelB'")
        return study.pair_tests(parts[0], parts[1])

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
