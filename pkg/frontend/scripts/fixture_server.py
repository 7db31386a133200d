"""Run the triage service against the synthetic study corpus.

Harness for the frontend integration tests: builds the corpus in a temp
directory, starts the HTTP service on a free port, uploads three studies,
waits until the pipeline settles, prints one READY line as JSON on stdout,
then serves until the process is killed. The tests themselves speak to the
service exclusively over HTTP.
"""
import dataclasses
import json
import socket
import sys
import tempfile
import threading
import time
import urllib.request
from pathlib import Path

PKG_ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(PKG_ROOT / "tests"))

import uvicorn  # noqa: E402

from conftest import build_corpus  # noqa: E402
from cxr_triage.service.app import create_app  # noqa: E402

UPLOADS = {
    "critical": "abnormal-critical-1",
    "routine": "abnormal-routine-0",
    "normal": "normal-0",
}


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def get_json(base: str, path: str) -> dict:
    with urllib.request.urlopen(base + path, timeout=10) as resp:
        return json.loads(resp.read())


def wait_for(predicate, what: str, timeout: float = 120.0, interval: float = 0.2) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return
        time.sleep(interval)
    raise TimeoutError(f"timed out waiting for {what}")


def healthy(base: str) -> bool:
    try:
        get_json(base, "/healthz")
        return True
    except Exception:
        return False


def main() -> None:
    tmp = Path(tempfile.mkdtemp(prefix="review-desk-it-"))
    corpus_dir = tmp / "corpus"
    corpus_dir.mkdir()
    store_dir = tmp / "store"
    store_dir.mkdir()
    corpus = build_corpus(corpus_dir)
    cfg = dataclasses.replace(corpus.config, store_dir=str(store_dir))

    port = free_port()
    server = uvicorn.Server(
        uvicorn.Config(create_app(cfg), host="127.0.0.1", port=port, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()

    base = f"http://127.0.0.1:{port}"
    wait_for(lambda: healthy(base), "service startup")

    ids = {}
    for key, name in UPLOADS.items():
        blob = corpus.by_name(name).blob
        req = urllib.request.Request(base + "/studies", data=blob, method="POST")
        with urllib.request.urlopen(req, timeout=30) as resp:
            ids[key] = json.loads(resp.read())["study_id"]

    def settled() -> bool:
        return all(
            get_json(base, f"/studies/{sid}")["status"] in ("AwaitingReview", "Rejected")
            for sid in ids.values()
        )

    wait_for(settled, "pipeline to settle")
    print("READY " + json.dumps({"port": port, "studies": ids}), flush=True)
    thread.join()


if __name__ == "__main__":
    main()
