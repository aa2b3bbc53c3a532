import json
import time

import numpy as np
import pytest

from linkspace.nldr import Embedding
from linkspace.session import (
    SessionError,
    SessionManager,
    canonical_settings,
    headless_run,
)


def fixture_csv(n=24, seed=0, n_clustering=8, n_linked=6, flags=False):
    rng = np.random.default_rng(seed)
    names = [f"A{i+1}" for i in range(n_clustering)] + [f"x{i+1}" for i in range(n_linked)] + ["res"]
    rows = rng.normal(size=(n, n_clustering + n_linked + 1))
    rows[: n // 2, 0] += 8.0  # two separated blobs along A1
    lines = [",".join(names) + ("" if not flags else ",season")]
    for i in range(n):
        line = ",".join(repr(float(v)) for v in rows[i])
        if flags:
            line += "," + ("summer" if i % 2 else "winter")
        lines.append(line)
    return "\n".join(lines)


ROLES = {
    "clustering": [f"A{i+1}" for i in range(8)],
    "linked": [f"x{i+1}" for i in range(6)],
}


@pytest.fixture
def manager():
    return SessionManager()


@pytest.fixture
def loaded(manager):
    s = manager.create_session()
    s.upload_data(fixture_csv(), ROLES)
    return s


class TestLifecycle:
    def test_distinct_ids(self, manager):
        assert manager.create_session().id != manager.create_session().id

    def test_fresh_session(self, manager):
        s = manager.create_session()
        assert s.selection == set()
        assert s.revision == 0

    def test_unknown_session(self, manager):
        with pytest.raises(SessionError):
            manager.get("nope")


class TestUpload:
    def test_summary(self, loaded):
        s = loaded
        summary = s.upload_data(fixture_csv(), ROLES)
        assert summary["p_clustering"] == 8
        assert summary["p_linked"] == 6
        assert summary["p_extras"] == 1

    def test_second_upload_replaces(self, manager):
        s = manager.create_session()
        s.upload_data(fixture_csv(n=24), ROLES)
        s.upload_data(fixture_csv(n=30), ROLES)
        assert s.spaced.n == 30

    def test_flag_groups(self, manager):
        s = manager.create_session()
        summary = s.upload_data(fixture_csv(flags=True), {**ROLES, "flags": ["season"]})
        assert summary["n_groups"] == 2


class TestConfig:
    def test_k_change_reuses_tree(self, loaded):
        loaded.set_config({"k": 3})
        before = loaded.merge_tree_hash()
        result = loaded.set_config({"k": 4})
        assert result["merge_tree_reused"]
        assert loaded.merge_tree_hash() == before

    def test_linkage_change_recomputes(self, loaded):
        loaded.set_config({"linkage": "ward"})
        before = loaded.merge_tree_hash()
        result = loaded.set_config({"linkage": "single"})
        assert not result["merge_tree_reused"]
        assert loaded.merge_tree_hash() != before

    def test_invalid_k(self, loaded):
        with pytest.raises(SessionError):
            loaded.set_config({"k": 0})

    def test_unknown_display_variable(self, loaded):
        with pytest.raises(SessionError, match="display variable"):
            loaded.set_config({"display_pair": ["x1", "nope"]})

    def test_revision_increases(self, loaded):
        r0 = loaded.revision
        loaded.set_config({"k": 3})
        assert loaded.revision > r0


class TestViews:
    def test_overview_shapes(self, loaded):
        loaded.set_config({"k": 4})
        view = loaded.get_overview()
        assert view["k"] == 4
        assert sorted(view["heatmap"]["row_order"]) == list(range(24))
        assert len(set(view["scatter"]["cluster_of"])) == 4

    def test_overview_hulls(self, loaded):
        loaded.set_config({"k": 2, "hulls": True})
        view = loaded.get_overview()
        assert set(view["hulls"]) == {"1", "2"}

    def test_overview_without_data(self, manager):
        with pytest.raises(SessionError):
            manager.create_session().get_overview()

    def test_stats_default_range(self, loaded):
        rows = loaded.get_stats()
        assert [r["k"] for r in rows] == list(range(2, 9))

    def test_stats_clamped(self, manager):
        s = manager.create_session()
        s.upload_data(fixture_csv(n=5), ROLES)
        assert [r["k"] for r in s.get_stats()] == [2, 3, 4]

    def test_benchmarks(self, loaded):
        loaded.set_config({"k": 3, "score": {"type": "external", "name": "res",
                                             "values": list(range(24))}})
        payload = loaded.get_benchmarks()
        assert len(payload["clusters"]) == 3
        for row in payload["clusters"]:
            assert row["radius"] <= row["diameter"] + 1e-12
            assert "score" in row
            assert set(row["linked_coords"]) == set(ROLES["linked"])

    def test_group_benchmarks(self, manager):
        s = manager.create_session()
        s.upload_data(fixture_csv(flags=True), {**ROLES, "flags": ["season"]})
        payload = s.get_benchmarks()
        assert {g["group"] for g in payload["groups"]} == {"summer", "winter"}

    def test_coordinate_view(self, loaded):
        loaded.set_config({"k": 3})
        view = loaded.get_coordinate_view("A4", center=False, scale=False)
        assert view["gradient"]["variable"] == "A4"
        assert len(view["pcp"]["rows"]) == 24
        flagged = [r for r in view["pcp"]["rows"] if r["benchmark"]]
        assert len(flagged) == 3

    def test_coordinate_view_hide_cluster(self, loaded):
        loaded.set_config({"k": 3})
        full = loaded.get_coordinate_view("A1")
        hidden = loaded.get_coordinate_view("A1", hidden_clusters={2})
        assert not any(r["cluster"] == 2 for r in hidden["pcp"]["rows"])
        assert len(hidden["pcp"]["rows"]) < len(full["pcp"]["rows"])

    def test_breakdown(self, loaded):
        loaded.set_config({"k": 2})
        out = loaded.get_breakdown(1)
        assert len(out["edges"]) == 31

    def test_comparison_identical(self, loaded):
        loaded.set_config({"k": 3, "comparison": {"a": {}, "b": {}}})
        table = np.array(loaded.get_comparison()["table"])
        assert (table - np.diag(np.diag(table)) == 0).all()

    def test_comparison_nested_split(self, loaded):
        loaded.set_config({"k": 3, "comparison": {"a": {"k": 3}, "b": {"k": 4}}})
        table = np.array(loaded.get_comparison()["table"])
        assert sum(1 for row in table if (row > 0).sum() == 2) == 1


class TestJobs:
    def wait(self, job, timeout=30):
        job.thread.join(timeout)
        return job

    def test_embedding_job(self, loaded):
        job = self.wait(loaded.compute_embedding("a", "mds"))
        assert job.status == "done"
        assert len(job.result["Y"]) == 24

    def test_embedding_cache_hit(self, loaded):
        self.wait(loaded.compute_embedding("a", "tsne"))
        t0 = time.time()
        job = self.wait(loaded.compute_embedding("b", "tsne"))
        assert job.status == "done"
        assert time.time() - t0 < 0.5

    def test_unknown_method(self, loaded):
        with pytest.raises(SessionError, match="tsne"):
            loaded.compute_embedding("a", "nope")

    def test_cancel(self, loaded):
        def slow(coords, dist, seed=0, callback=None):
            for i in range(10_000):
                if callback:
                    callback(i, 10_000)
                time.sleep(0.001)
            return Embedding(method_id="slow", Y=np.zeros((dist.n, 2)))

        loaded.registry.register("slow", slow)
        job = loaded.compute_embedding("a", "slow")
        time.sleep(0.05)
        cancelled = loaded.cancel_job(job.id)
        assert cancelled.status == "cancelled"

    def test_supersede(self, loaded):
        def slow(coords, dist, seed=0, callback=None):
            for i in range(10_000):
                if callback:
                    callback(i, 10_000)
                time.sleep(0.001)
            return Embedding(method_id="slow2", Y=np.zeros((dist.n, 2)))

        loaded.registry.register("slow2", slow)
        first = loaded.compute_embedding("a", "slow2")
        second = loaded.compute_embedding("a", "mds")
        self.wait(second)
        assert first.status == "cancelled"
        assert second.status == "done"

    def test_grand_tour_job(self, loaded):
        job = self.wait(loaded.compute_tour("a", {"kind": "grand", "seed": 5}))
        assert job.status == "done"
        assert job.result["kind"] == "grand"
        again = self.wait(loaded.compute_tour("a", {"kind": "grand", "seed": 5}))
        assert again.result == job.result

    def test_guided_tour_requires_groups(self, loaded):
        job = self.wait(loaded.compute_tour("a", {"kind": "guided", "groups": "flags"}))
        assert job.status == "error"
        assert "flags" in job.error

    def test_copy_path(self, loaded):
        self.wait(loaded.compute_tour("a", {"kind": "grand", "seed": 1}))
        doc = loaded.copy_path("a", "b")
        assert loaded.tours["b"] is loaded.tours["a"]
        assert doc["kind"] == "grand"

    def test_radial_from_held_frame(self, loaded):
        self.wait(loaded.compute_tour("a", {"kind": "grand", "seed": 2}))
        job = self.wait(loaded.compute_tour("b", {"kind": "radial", "variable": 1, "start_panel": "a"}))
        assert job.status == "done"

    def test_invalid_dimension(self, loaded):
        with pytest.raises(SessionError):
            loaded.compute_tour("a", {"kind": "grand", "d": 4})


class TestSelection:
    def test_broadcast(self, loaded):
        q1 = loaded.subscribe()
        q2 = loaded.subscribe()
        loaded.set_selection([1, 2, 3], origin="tour:a")
        for q in (q1, q2):
            event = q.get(timeout=1)
            assert event["type"] == "selection"
            assert event["selected"] == [1, 2, 3]
            assert event["origin"] == "tour:a"

    def test_clear(self, loaded):
        loaded.set_selection([4, 5])
        loaded.set_selection([])
        assert loaded.selection == set()

    def test_out_of_range(self, loaded):
        with pytest.raises(SessionError):
            loaded.set_selection([999])

    def test_monotone_revisions(self, loaded):
        q = loaded.subscribe()
        for i in range(5):
            loaded.set_selection([i + 1])
        revisions = [q.get(timeout=1)["revision"] for _ in range(5)]
        assert revisions == sorted(revisions)
        assert np.diff(revisions).tolist() == [1] * 4


class TestExport:
    def test_csv_columns(self, loaded):
        loaded.set_config({"k": 3})
        text = loaded.export_csv()
        header = text.splitlines()[0]
        assert header == "id,cluster,group,score,bin"
        assert len(text.splitlines()) == 25

    def test_empty_score_column(self, loaded):
        row = loaded.export_csv().splitlines()[1].split(",")
        assert row[3] == ""

    def test_export_without_data(self, manager):
        with pytest.raises(SessionError):
            manager.create_session().export_csv()

    def test_headless_roundtrip(self, loaded, tmp_path):
        loaded.set_config({"k": 4})
        csv_text = fixture_csv()
        settings = loaded.export_settings()
        out = headless_run(csv_text, settings, tmp_path)
        assert (tmp_path / "assignments.csv").read_text() == loaded.export_csv()
        assert json.loads((tmp_path / "settings.json").read_text()) == settings

    def test_headless_deterministic(self, tmp_path):
        csv_text = fixture_csv()
        settings = {
            "roles": ROLES,
            "k": 3,
            "tour": {"a": {"kind": "guided", "seed": 1, "space": "clustering"}},
        }
        r1 = headless_run(csv_text, settings, tmp_path / "r1")
        r2 = headless_run(csv_text, settings, tmp_path / "r2")
        assert (tmp_path / "r1" / "assignments.csv").read_bytes() == (
            tmp_path / "r2" / "assignments.csv"
        ).read_bytes()
        assert (tmp_path / "r1" / "plots.json").read_bytes() == (
            tmp_path / "r2" / "plots.json"
        ).read_bytes()
        frame = np.array(r1["plots"]["tour_a"]["final_frame"])
        assert np.abs(frame.T @ frame - np.eye(frame.shape[1])).max() < 1e-9

    def test_headless_unknown_variable(self, tmp_path):
        with pytest.raises(ValueError):
            headless_run(fixture_csv(), {"roles": {"clustering": ["zz"], "linked": ["x1"]}}, tmp_path)

    def test_headless_malformed_settings(self, tmp_path):
        with pytest.raises(SessionError, match="invalid settings"):
            headless_run(fixture_csv(), {"roles": ROLES, "metric": "cosine"}, tmp_path)

    def test_canonical_settings_sorted(self):
        doc = canonical_settings({"b": 1, "a": {"z": 1, "y": 2}})
        assert doc == '{"a":{"y":2,"z":1},"b":1}'
