import json
import socket

import pytest

from conftest import TINY_SCENE
from rubbleforge.cli import EXIT_BIND, EXIT_OK, EXIT_SEMANTIC, EXIT_SYNTAX, main

OVERLAP_SCENE = b"""{
  "rooms": [
    {"archetype": "simple_door", "position": [0, 0]},
    {"archetype": "beam_room", "position": [0, 0]}
  ]
}
"""


@pytest.fixture()
def tiny_scene_path(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_bytes(TINY_SCENE)
    return str(path)


class TestValidate:
    def test_valid_scene(self, tiny_scene_path, capsys):
        assert main(["validate", "--scene", tiny_scene_path]) == EXIT_OK
        assert "valid scene" in capsys.readouterr().out

    def test_json_output(self, tiny_scene_path, capsys):
        assert main(["validate", "--scene", tiny_scene_path, "--json"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload == {"valid": True, "rooms": 1, "events": 0, "cameras": 1}

    def test_syntax_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_bytes(b'{"rooms": [')
        assert main(["validate", "--scene", str(path)]) == EXIT_SYNTAX
        assert "invalid" in capsys.readouterr().err

    def test_overlap_is_semantic_error(self, tmp_path, capsys):
        path = tmp_path / "overlap.json"
        path.write_bytes(OVERLAP_SCENE)
        assert main(["validate", "--scene", str(path)]) == EXIT_SEMANTIC
        err = capsys.readouterr().err
        assert "0" in err and "1" in err  # both offending rooms named

    def test_unknown_key_is_semantic_error(self, tmp_path):
        path = tmp_path / "key.json"
        path.write_bytes(b'{"rooms": [], "wind": 3}')
        assert main(["validate", "--scene", str(path)]) == EXIT_SEMANTIC

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--scene", str(tmp_path / "gone.json")]) == \
            EXIT_SYNTAX

    def test_stdin(self, monkeypatch, capsys):
        import io
        import sys
        monkeypatch.setattr(
            sys, "stdin",
            type("S", (), {"buffer": io.BytesIO(b'{"rooms": []}')})(),
        )
        assert main(["validate", "--stdin"]) == EXIT_OK


class TestGenerate:
    def test_writes_frames_and_manifest(self, tiny_scene_path, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["generate", "--scene", tiny_scene_path,
                     "--out", str(out), "--json"])
        assert code == EXIT_OK
        manifest = json.loads(capsys.readouterr().out)
        assert manifest["fragment_count"] > 0
        target = out / "tiny"
        assert (target / "manifest.json").exists()
        assert (target / "color_000000.ppm").exists()
        assert (target / "depth_000000.pgm").exists()
        assert (target / "seg_000000.pgm").exists()

    def test_frames_limit(self, tiny_scene_path, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["generate", "--scene", tiny_scene_path,
                     "--out", str(out), "--frames", "0", "--json"])
        assert code == EXIT_OK
        assert json.loads(capsys.readouterr().out)["frames"] == []

    def test_seed_override_recorded(self, tiny_scene_path, tmp_path, capsys):
        out = tmp_path / "out"
        main(["generate", "--scene", tiny_scene_path, "--out", str(out),
              "--frames", "0", "--seed", "99", "--json"])
        assert json.loads(capsys.readouterr().out)["seed"] == 99

    def test_bad_scene(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_bytes(OVERLAP_SCENE)
        assert main(["generate", "--scene", str(path),
                     "--out", str(tmp_path / "o")]) == EXIT_SEMANTIC


class TestFractureStats:
    def test_table_output(self, tiny_scene_path, capsys):
        assert main(["fracture-stats", "--scene", tiny_scene_path]) == EXIT_OK
        out = capsys.readouterr().out
        assert "room 0" in out and "fragments" in out

    def test_json_rows(self, tiny_scene_path, capsys):
        assert main(["fracture-stats", "--scene", tiny_scene_path,
                     "--json"]) == EXIT_OK
        rows = json.loads(capsys.readouterr().out)
        assert len(rows) == 1
        assert rows[0]["material"] == "wood"
        assert rows[0]["fragments"] > 0

    def test_report_files(self, tiny_scene_path, tmp_path):
        out = tmp_path / "report"
        assert main(["fracture-stats", "--scene", tiny_scene_path,
                     "--out", str(out)]) == EXIT_OK
        csv = out / "fracture_stats.csv"
        assert csv.exists()
        header = csv.read_text().splitlines()[0]
        assert "fragments" in header
        pngs = sorted(p.name for p in out.glob("*.png"))
        assert pngs == ["fragment_volumes.png", "room_counts.png"]
        for p in out.glob("*.png"):
            assert p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestServe:
    def test_bind_failure(self, tiny_scene_path, capsys):
        blocker = socket.socket()
        blocker.bind(("0.0.0.0", 0))
        port = blocker.getsockname()[1]
        try:
            code = main(["serve", "--scene", tiny_scene_path,
                         "--port", str(port)])
        finally:
            blocker.close()
        assert code == EXIT_BIND
        assert "cannot bind" in capsys.readouterr().err

    def test_bad_scene(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_bytes(b"nope")
        assert main(["serve", "--scene", str(path), "--port", "0"]) == EXIT_SYNTAX
