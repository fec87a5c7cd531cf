"""Shared TCP client helpers and the scripted golden bridge session.

Run as a script to regenerate tests/golden/bridge_session.jsonl after an
intentional protocol change:

    python3 tests/bridge_session.py
"""
import json
import os
import socket

GOLDEN_PATH = os.path.join(os.path.dirname(__file__), "golden",
                           "bridge_session.jsonl")

SESSION_SCENE = b"""{
  "seed": 5,
  "rooms": [{"archetype": "simple_door", "position": [0, 0], "material": "wood"}]
}
"""


class Client:
    """Minimal newline-delimited JSON client."""

    def __init__(self, port: int, timeout: float = 20.0):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=timeout)
        self.buf = b""

    def send_line(self, line: str):
        self.sock.sendall(line.encode("utf-8") + b"\n")

    def send(self, obj: dict):
        self.send_line(json.dumps(obj, sort_keys=True))

    def recv_line(self) -> str:
        while b"\n" not in self.buf:
            data = self.sock.recv(65536)
            if not data:
                raise ConnectionError("server closed the connection")
            self.buf += data
        line, self.buf = self.buf.split(b"\n", 1)
        return line.decode("utf-8")

    def recv(self) -> dict:
        return json.loads(self.recv_line())

    def close(self):
        self.sock.close()


def run_session(port: int) -> list[dict]:
    """Scripted session: subscribe depth, pose the robot, step, apply a
    below-threshold event, step again.  Returns the full transcript."""
    client = Client(port)
    transcript: list[dict] = []

    def send(obj):
        line = json.dumps(obj, sort_keys=True)
        client.send_line(line)
        transcript.append({"send": line})

    def recv(count):
        for _ in range(count):
            transcript.append({"recv": client.recv_line()})

    send({"op": "subscribe", "topic": "/camera/depth"})
    recv(1)
    send({"op": "call_service", "service": "/robot/set_pose", "id": "pose-1",
          "args": {"pose": {"position": [2.5, 1.5, 9.0],
                            "orientation": [1.0, 0.0, 0.0, 0.0]}}})
    recv(1)
    send({"op": "call_service", "service": "/sim/step", "id": "step-1",
          "args": {"n": 2}})
    recv(2)  # service_response + depth publish
    send({"op": "call_service", "service": "/sim/apply_event", "id": "event-1",
          "args": {"event": {"type": "universal_strain", "magnitude": 0.5}}})
    recv(1)
    send({"op": "call_service", "service": "/sim/step", "id": "step-2",
          "args": {"n": 0}})
    recv(2)
    client.close()
    return transcript


def start_session_server():
    from rubbleforge.bridge import BridgeServer
    from rubbleforge.scene import instantiate, parse_scene

    scene = parse_scene(SESSION_SCENE)
    world = instantiate(scene)
    return BridgeServer(world, port=0, scene=scene).start()


def load_golden() -> list[dict]:
    with open(GOLDEN_PATH) as f:
        return [json.loads(line) for line in f if line.strip()]


def main():
    with start_session_server() as server:
        transcript = run_session(server.port)
    os.makedirs(os.path.dirname(GOLDEN_PATH), exist_ok=True)
    with open(GOLDEN_PATH, "w") as f:
        for entry in transcript:
            f.write(json.dumps(entry, sort_keys=True) + "\n")
    print(f"wrote {len(transcript)} transcript entries to {GOLDEN_PATH}")


if __name__ == "__main__":
    main()
