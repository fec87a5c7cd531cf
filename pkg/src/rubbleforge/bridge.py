"""Message-passing endpoint: newline-delimited JSON over TCP.

The wire format follows the rosbridge v2 op vocabulary (advertise /
subscribe / unsubscribe / publish / call_service / service_response /
status).  Binary rasters travel base64-encoded inside publish payloads.
The server owns the world: every mutation goes through one command queue,
so observable state is a pure function of the ordered command sequence.

Supported services:
  /sim/step {"n": int}          advance physics, then publish sensor topics
  /sim/apply_event {"event": {...scene event object...}}
  /robot/set_pose {"pose": {"position": [x,y,z], "orientation": [w,x,y,z]}}
  /sim/reset {}                 reinstantiate the world from its scene

Topics: /camera/color, /camera/depth, /camera/seg, /robot/pose,
/sim/released_count.
"""
from __future__ import annotations

import base64
import json
import logging
import queue
import socket
import threading
from dataclasses import dataclass, field

import numpy as np

from . import physics, sensors
from .events import apply_event
from .geometry import Transform, quat_identity
from .scene import (
    CameraIntrinsics,
    EnvironmentConfig,
    Scene,
    _parse_event,
    instantiate,
)

log = logging.getLogger(__name__)

DEFAULT_PORT = 9090

SENSOR_TOPICS = ("/camera/color", "/camera/depth", "/camera/seg")
ALL_TOPICS = SENSOR_TOPICS + ("/robot/pose", "/sim/released_count")


@dataclass
class RobotBody:
    """Kinematic camera carrier: a pose plus one mounted camera."""
    pose: Transform = field(default_factory=Transform.identity)
    camera: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(160, 120, np.deg2rad(70.0), 0.1, 50.0)
    )
    camera_offset: Transform = field(default_factory=Transform.identity)

    def camera_pose(self) -> Transform:
        return self.pose.compose(self.camera_offset)


class _Client:
    def __init__(self, conn: socket.socket, addr):
        self.conn = conn
        self.addr = addr
        self.send_lock = threading.Lock()
        self.subs: set[str] = set()
        self.subs_lock = threading.Lock()
        self.alive = True

    def send(self, message: dict):
        data = (json.dumps(message, sort_keys=True) + "\n").encode("utf-8")
        try:
            with self.send_lock:
                self.conn.sendall(data)
        except OSError:
            self.alive = False

    def subscribed(self, topic: str) -> bool:
        with self.subs_lock:
            return topic in self.subs


class BridgeServer:
    """TCP server owning a world; start() binds, stop() shuts down."""

    def __init__(self, world: physics.WorldState, host: str = "127.0.0.1",
                 port: int = DEFAULT_PORT, scene: Scene | None = None,
                 environment: EnvironmentConfig | None = None):
        self.world = world
        self.scene = scene
        self.environment = environment or (
            scene.environment if scene else EnvironmentConfig()
        )
        if world.robot is None:
            world.robot = RobotBody()
        self.host = host
        self.port = port
        self._sock: socket.socket | None = None
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._commands: queue.Queue = queue.Queue()
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()

    # -- lifecycle -------------------------------------------------------

    def start(self):
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, self.port))
        sock.listen()
        self._sock = sock
        self.port = sock.getsockname()[1]
        for target in (self._accept_loop, self._worker_loop):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self):
        self._stopping.set()
        self._commands.put(None)
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        with self._clients_lock:
            for c in self._clients:
                try:
                    c.conn.close()
                except OSError:
                    pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    # -- socket handling ---------------------------------------------------

    def _accept_loop(self):
        while not self._stopping.is_set():
            try:
                conn, addr = self._sock.accept()
            except OSError:
                return
            client = _Client(conn, addr)
            with self._clients_lock:
                self._clients.append(client)
            t = threading.Thread(target=self._reader_loop, args=(client,), daemon=True)
            t.start()
            self._threads.append(t)

    def _reader_loop(self, client: _Client):
        try:
            with client.conn.makefile("rb") as stream:
                for line in stream:
                    line = line.strip()
                    if not line:
                        continue
                    self._handle_line(client, line)
                    if self._stopping.is_set():
                        return
        except OSError:
            pass
        finally:
            client.alive = False
            with self._clients_lock:
                if client in self._clients:
                    self._clients.remove(client)

    def _handle_line(self, client: _Client, line: bytes):
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            client.send({"op": "status", "level": "error",
                         "msg": f"malformed message: {exc}"})
            return
        if not isinstance(msg, dict) or "op" not in msg:
            client.send({"op": "status", "level": "error",
                         "msg": "message must be an object with an 'op' field"})
            return
        op = msg["op"]
        if op in ("subscribe", "unsubscribe", "advertise"):
            topic = msg.get("topic")
            if not isinstance(topic, str):
                client.send({"op": "status", "level": "error",
                             "msg": f"{op} requires a 'topic' string"})
                return
            if op != "advertise" and topic not in ALL_TOPICS:
                client.send({"op": "status", "level": "error",
                             "msg": f"unknown topic {topic!r}"})
                return
            with client.subs_lock:
                if op == "subscribe":
                    client.subs.add(topic)
                elif op == "unsubscribe":
                    client.subs.discard(topic)
            client.send({"op": "status", "level": "none",
                         "msg": f"{op} {topic} ok"})
        elif op == "call_service":
            service = msg.get("service")
            if not isinstance(service, str):
                client.send({"op": "status", "level": "error",
                             "msg": "call_service requires a 'service' string"})
                return
            self._commands.put((client, msg))
        else:
            client.send({"op": "status", "level": "error",
                         "msg": f"unsupported op {op!r}"})

    # -- command execution (single worker: serialized world mutation) -----

    def _worker_loop(self):
        while True:
            item = self._commands.get()
            if item is None:
                return
            client, msg = item
            try:
                self._execute(client, msg)
            except Exception as exc:  # never let one command kill the server
                log.exception("command failed")
                self._respond(client, msg, False, {"error": str(exc)})

    def _respond(self, client, msg, result: bool, values: dict):
        response = {
            "op": "service_response",
            "service": msg.get("service"),
            "result": result,
            "values": values,
        }
        if "id" in msg:
            response["id"] = msg["id"]
        client.send(response)

    def _execute(self, client: _Client, msg: dict):
        service = msg["service"]
        args = msg.get("args") or {}
        if service == "/sim/step":
            n = int(args.get("n", 1))
            if n < 0:
                self._respond(client, msg, False, {"error": "n must be >= 0"})
                return
            for _ in range(n):
                physics.step(self.world, physics.DEFAULT_DT)
            self._respond(client, msg, True, {
                "steps": n, "released_count": self._released_count(),
            })
            self._publish_sensors()
            self._publish_state()
        elif service == "/sim/apply_event":
            try:
                event = _parse_event(args.get("event") or {})
            except Exception as exc:
                self._respond(client, msg, False, {"error": f"bad event: {exc}"})
                return
            report = apply_event(self.world, event)
            self._respond(client, msg, True, {
                "released": sorted(report.released),
                "broken_joints": report.broken_joints,
                "applied": report.applied,
            })
            self._publish_state()
        elif service == "/robot/set_pose":
            pose = args.get("pose") or {}
            position = pose.get("position", list(self.world.robot.pose.translation))
            orientation = pose.get("orientation",
                                   list(self.world.robot.pose.rotation))
            try:
                self.world.robot.pose = Transform(
                    np.asarray(orientation, float), np.asarray(position, float)
                )
            except Exception as exc:
                self._respond(client, msg, False, {"error": str(exc)})
                return
            self._respond(client, msg, True, {"pose": self._pose_dict()})
            self._publish_robot_pose()
        elif service == "/sim/reset":
            if self.scene is None:
                self._respond(client, msg, False,
                              {"error": "no scene attached; cannot reset"})
                return
            robot = self.world.robot
            self.world = instantiate(self.scene)
            self.world.robot = robot
            self._respond(client, msg, True, {"released_count": 0})
            self._publish_state()
        else:
            self._respond(client, msg, False,
                          {"error": f"unknown service {service!r}"})

    # -- publishing ---------------------------------------------------------

    def _released_count(self) -> int:
        return sum(
            1 for gc in self.world.collections
            for f in gc.fragments.values() if f.released
        )

    def _pose_dict(self) -> dict:
        robot = self.world.robot
        return {
            "position": list(robot.pose.translation),
            "orientation": list(robot.pose.rotation),
        }

    def _clients_for(self, topic: str) -> list[_Client]:
        with self._clients_lock:
            return [c for c in self._clients if c.alive and c.subscribed(topic)]

    def _publish_sensors(self):
        wanted = [t for t in SENSOR_TOPICS if self._clients_for(t)]
        if not wanted:
            return
        robot = self.world.robot
        frame = sensors.render(
            self.world, robot.camera_pose(), robot.camera, self.environment
        )
        intr = robot.camera
        if "/camera/color" in wanted:
            self._publish("/camera/color", {
                "width": intr.width, "height": intr.height, "encoding": "rgb8",
                "data": base64.b64encode(frame.color.tobytes()).decode(),
            })
        if "/camera/depth" in wanted:
            q = sensors.quantize_depth(frame.depth, intr.near, intr.far)
            self._publish("/camera/depth", {
                "width": intr.width, "height": intr.height, "encoding": "16UC1",
                "near": intr.near, "far": intr.far,
                "data": base64.b64encode(q.astype(">u2").tobytes()).decode(),
            })
        if "/camera/seg" in wanted:
            self._publish("/camera/seg", {
                "width": intr.width, "height": intr.height, "encoding": "16UC1",
                "data": base64.b64encode(
                    frame.segmentation.astype(">u2").tobytes()).decode(),
            })

    def _publish_robot_pose(self):
        self._publish("/robot/pose", self._pose_dict())

    def _publish_state(self):
        self._publish("/sim/released_count", {"count": self._released_count()})
        self._publish_robot_pose()

    def _publish(self, topic: str, payload: dict):
        for client in self._clients_for(topic):
            client.send({"op": "publish", "topic": topic, "msg": payload})


def serve(world: physics.WorldState, address: tuple[str, int] | int = DEFAULT_PORT,
          scene: Scene | None = None,
          environment: EnvironmentConfig | None = None) -> BridgeServer:
    """Start a bridge server for a world; returns the running handle."""
    if isinstance(address, int):
        host, port = "127.0.0.1", address
    else:
        host, port = address
    return BridgeServer(world, host, port, scene, environment).start()
