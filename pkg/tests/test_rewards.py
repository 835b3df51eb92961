import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from mdm_lab.core import ConfigError, GuidanceError
from mdm_lab.rewards import (
    ENDPOINT_ENV_VAR,
    ConstantReward,
    KeywordCoverageReward,
    RemoteReward,
    RewardStats,
    UNIT_STATS,
    load_stats_table,
    normalize,
)


class TestNormalize:
    def test_z_score(self):
        stats = RewardStats(mean=-4.95, std=11.18)
        assert normalize(-4.95, stats) == 0.0
        assert normalize(6.23, stats) == pytest.approx(1.0)

    def test_unit_stats_identity(self):
        assert normalize(1.7, UNIT_STATS) == 1.7

    def test_std_must_be_positive(self):
        with pytest.raises(ConfigError):
            RewardStats(mean=0.0, std=0.0)


class TestStatsTable:
    def test_bundled_table_loads(self):
        table = load_stats_table()
        assert "Unit" in table and table["Unit"] == UNIT_STATS
        assert "KeywordCoverage" in table
        assert all(s.std > 0 for s in table.values())

    def test_explicit_path(self, tmp_path):
        path = tmp_path / "stats.json"
        path.write_text(json.dumps({"Toy": {"mean": 1.0, "std": 2.0}}))
        table = load_stats_table(path)
        assert table["Toy"] == RewardStats(mean=1.0, std=2.0)


class TestKeywordCoverageReward:
    def test_counts_distinct_hits(self):
        r = KeywordCoverageReward(("carbon emissions", "trade"))
        assert r.hits("carbon emissions drive trade and more trade") == 2
        assert r.raw_reward("p", "carbon emissions drive trade") == 2.0

    def test_case_insensitive(self):
        r = KeywordCoverageReward(("Carbon Emissions",))
        assert r.hits("CARBON emissions fell") == 1

    def test_token_boundaries(self):
        r = KeywordCoverageReward(("art",))
        assert r.hits("the artful dodger") == 0
        assert r.hits("modern art thrives") == 1

    def test_multiword_must_be_contiguous(self):
        r = KeywordCoverageReward(("carbon emissions",))
        assert r.hits("carbon heavy emissions") == 0

    def test_per_hit_scaling(self):
        r = KeywordCoverageReward(("a", "b"), per_hit=2.5)
        assert r.raw_reward("p", "a and b") == 5.0

    def test_empty_keywords_rejected(self):
        with pytest.raises(ConfigError):
            KeywordCoverageReward(())


class TestConstantReward:
    def test_ignores_inputs(self):
        r = ConstantReward(3.5)
        assert r.raw_reward("x", "y") == 3.5


class _Handler(BaseHTTPRequestHandler):
    behavior = "ok"

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        if self.path != "/reward":
            self.send_response(404)
            self.end_headers()
            return
        if self.behavior == "error":
            self.send_response(500)
            self.end_headers()
            return
        if self.behavior == "malformed":
            payload = b"not json"
        elif self.behavior == "non_numeric":
            payload = json.dumps({"reward": "high"}).encode()
        else:
            payload = json.dumps({"reward": float(len(body["response"]))}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def scorer():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Handler.behavior = "ok"
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
    thread.join()


class TestRemoteReward:
    def test_round_trip(self, scorer):
        r = RemoteReward(scorer)
        assert r.raw_reward("prompt", "four") == 4.0

    def test_env_var_overrides_endpoint(self, scorer, monkeypatch):
        monkeypatch.setenv(ENDPOINT_ENV_VAR, scorer)
        r = RemoteReward("http://example.invalid:1")
        assert r.endpoint == scorer
        assert r.raw_reward("p", "ab") == 2.0

    def test_http_error_is_guidance_error(self, scorer):
        _Handler.behavior = "error"
        with pytest.raises(GuidanceError, match="status 500"):
            RemoteReward(scorer).raw_reward("p", "x")

    def test_malformed_body_is_guidance_error(self, scorer):
        _Handler.behavior = "malformed"
        with pytest.raises(GuidanceError, match="malformed"):
            RemoteReward(scorer).raw_reward("p", "x")

    def test_non_numeric_reward_rejected(self, scorer):
        _Handler.behavior = "non_numeric"
        with pytest.raises(GuidanceError, match="not numeric"):
            RemoteReward(scorer).raw_reward("p", "x")

    def test_unreachable_is_guidance_error(self):
        r = RemoteReward("http://127.0.0.1:9", timeout=0.2)
        with pytest.raises(GuidanceError, match="unreachable"):
            r.raw_reward("p", "x")
