"""HTTP service hosting interactive pairwise-comparison sessions.

Each session wraps one optimization engine over a named parameter space; the
human supplies choices while the service evaluates a registered computable
constraint.  Sessions persist as one JSON snapshot file each (written via
temp-file + rename), so a restarted service resumes the identical pending
pair and accepts the same nonce.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from cpbo.acquisition import _feas_factor
from cpbo.constraints import CONSTRAINTS
from cpbo.engine import Engine
from cpbo.gp import gp_marginals

log = logging.getLogger("cpbo.service")


class ParameterDef(BaseModel):
    name: str
    lo: float
    hi: float
    label: str | None = None


class DesignSpace(BaseModel):
    parameters: list[ParameterDef]
    render_template: str = "banner-colors"
    constraint: str = "contrast"
    lam: float | None = None


class CreateSessionRequest(BaseModel):
    design_space: DesignSpace
    budget: int | None = None
    warm_points: int = 200
    seed: int = 0


class ChoiceRequest(BaseModel):
    nonce: str
    winner: str = Field(pattern="^[ij]$")


class SessionState:
    def __init__(self, sid, space, budget, seed, engine, nonce):
        self.sid = sid
        self.space = space
        self.budget = budget
        self.seed = seed
        self.engine = engine
        self.nonce = nonce
        self.status = "active"
        self.created = time.time()
        self.updated = self.created
        self.last_choice = None  # (nonce, winner, response dict)
        self.lock = threading.Lock()

    @property
    def lam(self):
        if self.space.lam is not None:
            return self.space.lam
        return CONSTRAINTS[self.space.constraint]["default_lambda"]


def _to_native(space: DesignSpace, u: np.ndarray) -> dict:
    return {
        p.name: float(p.lo + u[k] * (p.hi - p.lo)) for k, p in enumerate(space.parameters)
    }


def _native_vector(space: DesignSpace, u: np.ndarray) -> np.ndarray:
    lo = np.array([p.lo for p in space.parameters])
    hi = np.array([p.hi for p in space.parameters])
    return lo + u * (hi - lo)


def create_app(data_dir: str = "./sessions", default_budget: int = 50) -> FastAPI:
    app = FastAPI(title="pairwise design sessions")
    os.makedirs(data_dir, exist_ok=True)
    sessions: dict[str, SessionState] = {}
    registry_lock = threading.Lock()

    def snapshot_path(sid: str) -> str:
        return os.path.join(data_dir, f"{sid}.json")

    def persist(st: SessionState):
        data = {
            "sid": st.sid,
            "space": st.space.model_dump(),
            "budget": st.budget,
            "seed": st.seed,
            "status": st.status,
            "nonce": st.nonce,
            "created": st.created,
            "updated": time.time(),
            "last_choice": st.last_choice,
            "engine": st.engine.snapshot(),
        }
        path = snapshot_path(st.sid)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(data, fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def load_session(sid: str) -> SessionState:
        path = snapshot_path(sid)
        if not os.path.exists(path):
            raise HTTPException(status_code=404, detail="unknown session")
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        engine = Engine.restore(data["engine"])
        st = SessionState(
            sid=data["sid"],
            space=DesignSpace(**data["space"]),
            budget=data["budget"],
            seed=data["seed"],
            engine=engine,
            nonce=data["nonce"],
        )
        st.status = data["status"]
        st.created = data["created"]
        st.last_choice = (
            tuple(data["last_choice"]) if data.get("last_choice") else None
        )
        return st

    def get_session(sid: str) -> SessionState:
        with registry_lock:
            if sid not in sessions:
                sessions[sid] = load_session(sid)
            return sessions[sid]

    def feasibility_factors(st: SessionState, pair):
        model = st.engine.constraint_model
        out = []
        for u in pair:
            mu, sd = gp_marginals(model, u[None, :])
            out.append(float(_feas_factor(mu, sd, st.lam)[0]))
        return out

    def pair_payload(st: SessionState) -> dict:
        xi, xj = st.engine.pending
        feas = feasibility_factors(st, (xi, xj))
        log.info(
            "session %s pair %d feasibility factors: i=%.4f j=%.4f",
            st.sid, st.engine.iteration + 1, feas[0], feas[1],
        )
        return {
            "session_id": st.sid,
            "nonce": st.nonce,
            "iteration": st.engine.iteration,
            "budget": st.budget,
            "render_template": st.space.render_template,
            "candidates": [
                {"side": "i", "params": _to_native(st.space, xi), "feasibility_prob": feas[0]},
                {"side": "j", "params": _to_native(st.space, xj), "feasibility_prob": feas[1]},
            ],
        }

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        space = req.design_space
        if space.constraint not in CONSTRAINTS:
            raise HTTPException(status_code=404, detail="unknown constraint id")
        entry = CONSTRAINTS[space.constraint]
        dim = len(space.parameters)
        if dim == 0 or dim != entry["dim"]:
            raise HTTPException(
                status_code=400,
                detail=f"constraint {space.constraint!r} needs {entry['dim']} parameters",
            )
        for p in space.parameters:
            if not (np.isfinite(p.lo) and np.isfinite(p.hi) and p.lo < p.hi):
                raise HTTPException(status_code=400, detail=f"bad range for {p.name}")
        if req.warm_points < 0 or (req.budget is not None and req.budget < 1):
            raise HTTPException(status_code=400, detail="bad budget or warm_points")

        budget = req.budget if req.budget is not None else default_budget
        lam = space.lam if space.lam is not None else entry["default_lambda"]
        engine = Engine(dim, "euboc", lam=lam, seed=req.seed)
        cfun = entry["fn"]

        def unit_constraint(u):
            return cfun(_native_vector(space, u))

        if req.warm_points > 0:
            engine.warm_start(unit_constraint, req.warm_points)
        sid = uuid.uuid4().hex
        st = SessionState(sid, space, budget, req.seed, engine, nonce=uuid.uuid4().hex)
        engine.propose_pair()
        with registry_lock:
            sessions[sid] = st
        with st.lock:
            persist(st)
            return pair_payload(st)

    @app.get("/sessions/{sid}/pair")
    def get_pair(sid: str):
        st = get_session(sid)
        with st.lock:
            if st.status == "completed":
                raise HTTPException(status_code=409, detail="session completed")
            return pair_payload(st)

    @app.post("/sessions/{sid}/choice")
    def submit_choice(sid: str, req: ChoiceRequest):
        st = get_session(sid)
        with st.lock:
            if st.last_choice and req.nonce == st.last_choice[0]:
                if req.winner != st.last_choice[1]:
                    raise HTTPException(status_code=409, detail="nonce already resolved")
                return st.last_choice[2]
            if st.status == "completed":
                raise HTTPException(status_code=409, detail="session completed")
            if req.nonce != st.nonce:
                raise HTTPException(status_code=409, detail="stale or unknown nonce")

            xi, xj = st.engine.pending
            cfun = CONSTRAINTS[st.space.constraint]["fn"]
            ci = cfun(_native_vector(st.space, xi))
            cj = cfun(_native_vector(st.space, xj))
            st.engine.apply_feedback(req.winner, ci, cj)
            done = st.engine.iteration >= st.budget
            if done:
                st.status = "completed"
                resp = {
                    "session_id": sid,
                    "status": "completed",
                    "iteration": st.engine.iteration,
                    "budget": st.budget,
                }
            else:
                st.nonce = uuid.uuid4().hex
                st.engine.propose_pair()
                resp = {"status": "active", **pair_payload(st)}
            st.last_choice = (req.nonce, req.winner, resp)
            persist(st)
            return resp

    @app.get("/sessions/{sid}/best")
    def get_best(sid: str):
        st = get_session(sid)
        with st.lock:
            inc = st.engine.incumbent()
            if inc is None:
                return {"session_id": sid, "best": None}
            u, mean = inc
            return {
                "session_id": sid,
                "best": {
                    "params": _to_native(st.space, u),
                    "render_template": st.space.render_template,
                    "posterior_mean": mean,
                },
            }

    @app.get("/sessions/{sid}/history", response_class=PlainTextResponse)
    def get_history(sid: str):
        st = get_session(sid)
        with st.lock:
            return st.engine.history_jsonl()

    return app
