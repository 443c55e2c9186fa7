"""The correction workflow over the HTTP service.

Starts the service in-process, ingests a synthetic sequence, propagates
from frame 0, then "corrects" frame 6 with its true mask and
re-propagates. The per-frame `run=latest` resolution means frames before
the correction keep their original masks while frames at/after it pick
up the corrected run.

Run with:  python3 demos/correct_and_resume.py
"""

import base64
import io
import json
import tempfile
import threading
import time
import urllib.request
from pathlib import Path

import uvicorn

import memseg
from memseg.seqio import read_mask, write_mask, write_sequence
from memseg.service import create_app

BASE = "http://127.0.0.1:8377"


def api(method: str, path: str, body: dict | None = None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(BASE + path, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        raw = resp.read()
    return json.loads(raw) if raw else None


def fetch_mask(path: str) -> memseg.MaskMap:
    with urllib.request.urlopen(BASE + path) as resp:
        return read_mask(io.BytesIO(resp.read()))


def b64_mask(mask: memseg.MaskMap) -> str:
    buf = io.BytesIO()
    write_mask(buf, mask.labels)
    return base64.b64encode(buf.getvalue()).decode("ascii")


def wait_done(seq: str, run_id: str) -> dict:
    while True:
        meta = api("GET", f"/sequences/{seq}/runs/{run_id}")
        if meta["status"] in ("done", "error"):
            return meta
        time.sleep(0.05)


def main() -> None:
    scene = memseg.SceneSpec(
        height=48, width=48, num_frames=12, seed=7,
        objects=(memseg.ObjectSpec(shape="disk", center=(24.0, 14.0), size=6.0,
                                   intensity=200.0, velocity=(0.0, 0.8)),))
    frames, gt = memseg.generate(scene)

    with tempfile.TemporaryDirectory(prefix="memseg-demo-") as tmp:
        seq_dir = write_sequence(Path(tmp) / "seq", frames, gt)
        server = uvicorn.Server(uvicorn.Config(
            create_app(Path(tmp) / "data"), host="127.0.0.1", port=8377,
            log_level="warning"))
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        while not server.started:
            time.sleep(0.02)
        try:
            seq = api("POST", "/sequences", {"path": str(seq_dir)})["id"]
            print(f"ingested sequence {seq} ({len(frames)} frames)")

            api("PUT", f"/sequences/{seq}/annotations/0",
                {"mask": b64_mask(gt[0])})
            first = api("POST", f"/sequences/{seq}/propagate",
                        {"from": 0, "direction": "forward"})["run_id"]
            meta = wait_done(seq, first)
            print(f"run {first}: {meta['status']}, "
                  f"{len(meta['frames_done'])} masks")

            report = api("GET", f"/sequences/{seq}/report")
            print(f"before correction: mean J {report['mean']['j']:.4f}")

            # correct frame 6 with its true mask and propagate onward
            api("PUT", f"/sequences/{seq}/annotations/6",
                {"mask": b64_mask(gt[6])})
            second = api("POST", f"/sequences/{seq}/propagate",
                         {"from": 6, "direction": "forward"})["run_id"]
            meta = wait_done(seq, second)
            print(f"run {second}: {meta['status']}, corrected frames "
                  f"{meta['frames_done'][0]}..{meta['frames_done'][-1]}")

            # `latest` resolves per frame: early frames still come from run
            # 1, frames >= 6 from run 2
            changed = []
            for i in range(len(frames)):
                latest = fetch_mask(f"/sequences/{seq}/masks/{i}")
                original = fetch_mask(f"/sequences/{seq}/masks/{i}?run={first}")
                if not (latest.labels == original.labels).all():
                    changed.append(i)
            print(f"frames whose served mask changed: {changed or 'none'} "
                  f"(all >= 6: {all(i >= 6 for i in changed)})")

            report = api("GET", f"/sequences/{seq}/report")
            print(f"after correction:  mean J {report['mean']['j']:.4f}")
        finally:
            server.should_exit = True
            thread.join(timeout=5)


if __name__ == "__main__":
    main()
