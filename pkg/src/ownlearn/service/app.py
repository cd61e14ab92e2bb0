"""FastAPI wrapper around the session manager.

Endpoints: create session, submit command, query state, list/subscribe
events. Events stream over a WebSocket (backlog first, then live); plain
GET polling works too.
"""

from __future__ import annotations

import asyncio
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from ..session import PROTOCOL_VERSION, SessionError, SessionManager
from .schemas import (CommandRequest, CommandResponse, CreateSessionRequest,
                      CreateSessionResponse)


def create_app(manager: SessionManager | None = None,
               ui_dir: str | None = None) -> FastAPI:
    manager = manager or SessionManager()
    app = FastAPI(title="ownlearn session service")
    app.state.manager = manager

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "protocol": PROTOCOL_VERSION}

    @app.post("/sessions", response_model=CreateSessionResponse)
    def create_session(request: CreateSessionRequest):
        try:
            session = manager.create(request.to_config())
        except (SessionError, ValueError) as err:
            raise HTTPException(status_code=400, detail=str(err))
        return CreateSessionResponse(sessionId=session.id, snapshot=session.snapshot())

    @app.get("/sessions/{session_id}/state")
    def query_state(session_id: str):
        try:
            return manager.query_state(session_id)
        except SessionError as err:
            raise HTTPException(status_code=404, detail=str(err))

    @app.post("/sessions/{session_id}/commands", response_model=CommandResponse)
    def submit_command(session_id: str, request: CommandRequest):
        try:
            result = manager.submit(session_id, request.to_payload())
        except SessionError as err:
            status = 404 if "unknown session" in str(err) else 400
            raise HTTPException(status_code=status, detail=str(err))
        return CommandResponse(ok=True, result=result)

    @app.get("/sessions/{session_id}/events")
    def list_events(session_id: str, after: int = 0):
        try:
            return {"events": manager.events_since(session_id, after)}
        except SessionError as err:
            raise HTTPException(status_code=404, detail=str(err))

    @app.websocket("/sessions/{session_id}/events/ws")
    async def event_stream(websocket: WebSocket, session_id: str):
        await websocket.accept()
        try:
            manager.get(session_id)
        except SessionError:
            await websocket.close(code=4404)
            return
        last = 0
        try:
            while True:
                events = manager.events_since(session_id, last)
                for event in events:
                    await websocket.send_json(event)
                    last = event["seq"]
                await asyncio.sleep(0.05)
        except WebSocketDisconnect:
            return

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
