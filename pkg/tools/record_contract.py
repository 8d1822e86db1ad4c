"""Record the session-service request/response contract fixture.

Runs a short scripted session against an in-process service and writes the
exchange to frontend/fixtures/session-contract.json with volatile fields
(session id, timestamps) normalized to placeholders. Both the Python and the
frontend test suites consume this file.

Usage: python tools/record_contract.py
"""

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from prefbo.acquisitions import AcqOptions
from prefbo.service import create_app

SEED = 42
SESSION_PLACEHOLDER = "SESSION_ID"
TS_PLACEHOLDER = 0.0

CREATE_BODY = {
    "domain": {"lower": [0.0, 0.0], "upper": [1.0, 1.0]},
    "labels": ["temperature", "pressure"],
    "method": "random",
    "config": {"seed": SEED},
}


def normalize(obj, session_id):
    if isinstance(obj, dict):
        return {
            k: TS_PLACEHOLDER if k == "ts" else normalize(v, session_id)
            for k, v in obj.items()
        }
    if isinstance(obj, list):
        return [normalize(v, session_id) for v in obj]
    if isinstance(obj, str):
        return obj.replace(session_id, SESSION_PLACEHOLDER)
    return obj


def record():
    app = create_app(tempfile.mkdtemp(), acq=AcqOptions(n_raw=256, max_evals=60))
    exchanges = []
    with TestClient(app) as client:
        def call(name, method, path, body=None):
            if method == "GET":
                resp = client.get(path)
            else:
                resp = client.post(path, json=body)
            exchanges.append(
                {
                    "name": name,
                    "request": {"method": method, "path": path, "body": body},
                    "response": {"status": resp.status_code, "body": resp.json()},
                }
            )
            return resp.json()

        created = call("create", "POST", "/sessions", CREATE_BODY)
        sid = created["session"]
        call("next_1", "GET", f"/sessions/{sid}/next")
        call("next_1_repeat", "GET", f"/sessions/{sid}/next")
        call("feedback_1", "POST", f"/sessions/{sid}/feedback", {"winner": 1})
        call("next_2", "GET", f"/sessions/{sid}/next")
        call("feedback_2", "POST", f"/sessions/{sid}/feedback", {"winner": 2})
        call("estimate", "GET", f"/sessions/{sid}/estimate")
        call("history", "GET", f"/sessions/{sid}/history")
        call("feedback_conflict", "POST", f"/sessions/{sid}/feedback", {"winner": 1})
        call("unknown_session", "GET", "/sessions/unknown/estimate")

    fixture = {
        "seed": SEED,
        "session_placeholder": SESSION_PLACEHOLDER,
        "exchanges": [normalize(e, sid) for e in exchanges],
    }
    out = Path(__file__).resolve().parent.parent / "frontend" / "fixtures" / "session-contract.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixture, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(fixture['exchanges'])} exchanges)")


if __name__ == "__main__":
    sys.exit(record())
