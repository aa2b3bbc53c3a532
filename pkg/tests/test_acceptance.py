"""End-to-end acceptance checks, one per headline guarantee.

Each test prints a single PASS/FAIL line so the suite doubles as an
acceptance report when run with `pytest tests/test_acceptance.py -v -s`.
"""

import json
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from linkspace.cluster import (
    ClusterSolution,
    DistanceMatrix,
    LINKAGES,
    benchmark_points,
    ch_index,
    cluster_diameter,
    cluster_radius,
    compare_solutions,
    cut_tree,
    hclust,
    pairwise_distances,
    silhouette,
    stats_sweep,
    wb_ratio,
)
from linkspace.data import CovarianceSpec, chi2_score, pull_coords
from linkspace.nldr import classical_mds, perplexity_calibration, tsne
from linkspace.service import create_app
from linkspace.session import SessionManager, headless_run
from linkspace.tour import (
    geodesic_point,
    grand_tour,
    guided_tour,
    orthonormalize,
    radial_tour,
)

from tests import oracles
from tests.test_session import ROLES, fixture_csv


def report(name: str, ok: bool) -> None:
    print(f"{'PASS' if ok else 'FAIL'}: {name}")
    assert ok, name


class TestAcceptance:
    def test_clustering_matches_bruteforce_oracle(self):
        start = time.time()
        rng = np.random.default_rng(0)
        ok = True
        for trial in range(200):
            n = int(rng.integers(4, 11))
            p = int(rng.integers(1, 5))
            pts = rng.normal(size=(n, p))
            d = pairwise_distances(pts)
            for linkage in LINKAGES:
                tree = hclust(d, linkage)
                expected = oracles.naive_hclust(pts, linkage=linkage)
                got_heights = [h for _, _, h in tree.merges]
                exp_heights = [h for _, _, h in expected]
                ok &= np.allclose(got_heights, exp_heights, rtol=1e-9, atol=1e-12)
                ok &= [(a, b) for a, b, _ in tree.merges] == [(a, b) for a, b, _ in expected]
                for k in (2, max(2, n // 2)):
                    got = cut_tree(tree, k).cluster_of
                    ok &= np.array_equal(got, oracles.naive_cut(expected, n, k))
            if not ok:
                break
        elapsed = time.time() - start
        report(f"clustering equals brute-force agglomeration oracle, 200 fixtures x 4 linkages ({elapsed:.1f}s < 10s)", ok and elapsed < 10.0)

    def test_benchmarks_match_exhaustive_search(self):
        rng = np.random.default_rng(1)
        ok = True
        for trial in range(100):
            n = int(rng.integers(5, 51))
            pts = rng.normal(size=(n, 3))
            if trial % 3 == 0:          # duplicated rows exercise the tie rule
                pts[: n // 2] = pts[0]
            d = pairwise_distances(pts)
            k = int(rng.integers(2, min(6, n)))
            sol = cut_tree(hclust(d, "ward"), k)
            bm = benchmark_points(sol, d)
            ok &= bm.tolist() == oracles.exhaustive_benchmark(d.d, sol.cluster_of)
            ok &= np.allclose(cluster_radius(sol, d, bm), oracles.exhaustive_radius(d.d, sol.cluster_of, bm))
            ok &= np.allclose(cluster_diameter(sol, d), oracles.exhaustive_diameter(d.d, sol.cluster_of))
            if not ok:
                break
        report("benchmark point, radius and diameter equal exhaustive search with exact tie rule, 100 fixtures", ok)

    def test_cluster_statistics_closed_forms(self):
        pts = np.array([[0.0], [1.0], [10.0], [11.0]])
        d = pairwise_distances(pts)
        sol = ClusterSolution(k=2, cluster_of=np.array([1, 1, 2, 2]))
        ok = abs(ch_index(pts, sol) - 200.0) < 1e-10
        ok &= abs(wb_ratio(d, sol) - 0.1) < 1e-10
        ok &= abs(silhouette(d, sol)[0][0] - (1.0 - 1.0 / 10.5)) < 1e-10
        rng = np.random.default_rng(2)
        for n in (9, 20, 50):
            rows = stats_sweep(hclust(pairwise_distances(rng.normal(size=(n, 3)))), pairwise_distances(rng.normal(size=(n, 3))), rng.normal(size=(n, 3)))
            ok &= [r["k"] for r in rows] == list(range(2, 9))
        report("cluster statistics hit closed forms within 1e-10; sweep spans k=2..8", ok)

    def test_pull_coordinates_match_quadratic_score(self):
        rng = np.random.default_rng(3)
        m = rng.normal(size=(30, 4))
        identity = CovarianceSpec(matrix=np.eye(4), reference_point=np.zeros(4))
        ok = np.array_equal(pull_coords(m, identity).values, m)
        for _ in range(20):
            p = int(rng.integers(2, 7))
            pts = rng.normal(size=(25, p))
            cov = CovarianceSpec(matrix=np.diag(rng.uniform(0.2, 4.0, p)), reference_point=rng.normal(size=p))
            row_sq = (pull_coords(pts, cov).values ** 2).sum(axis=1)
            ok &= np.abs(row_sq - chi2_score(pts, cov).values).max() < 1e-10
        report("pull coordinates: identity exact; squared row norm equals quadratic score within 1e-10 for diagonal covariance", ok)

    def test_tour_frames_orthonormal_and_midpoint(self):
        rng = np.random.default_rng(4)
        frames = []
        for seed in range(4):
            frames += grand_tour(6, 2, seed=seed).interpolated
            frames += radial_tour(orthonormalize(rng.normal(size=(6, 2))), int(rng.integers(1, 7))).interpolated
        pts = np.vstack([rng.normal(size=(20, 5)), rng.normal(size=(20, 5)) + [4, 0, 0, 0, 0]])
        labels = np.repeat([1, 2], 20)
        frames += guided_tour(pts, labels, seed=0, max_iter=200).interpolated
        while len(frames) < 10_000:
            frames += grand_tour(5, 2, seed=len(frames)).interpolated
        frames = frames[:10_000]
        worst = max(np.abs(f.basis.T @ f.basis - np.eye(f.basis.shape[1])).max() for f in frames)
        e1 = orthonormalize(np.array([[1.0], [0.0]]))
        e2 = orthonormalize(np.array([[0.0], [1.0]]))
        mid = geodesic_point(e1, e2, 0.5).basis.ravel()
        mid_err = np.abs(mid - np.sqrt(2.0) / 2.0).max()
        report(f"10,000 tour frames orthonormal (worst {worst:.1e} < 1e-9); axis-to-axis geodesic midpoint exact to 1e-9", worst < 1e-9 and mid_err < 1e-9)

    def test_guided_tour_recovers_planted_direction(self):
        start = time.time()
        hits = 0
        all_increasing = True
        rng = np.random.default_rng(123)
        pts = rng.normal(size=(60, 6))
        pts[:30, 0] += 10.0
        labels = np.repeat([1, 2], 30)
        for seed in range(100):
            path = guided_tour(pts, labels, index="lda", d=2, seed=seed)
            final = path.base_frames[-1].basis
            if np.linalg.norm(final[0]) > 0.9:
                hits += 1
            trace = np.asarray(path.index_trace)
            all_increasing &= bool(np.all(np.diff(trace) > 0))
        elapsed = time.time() - start
        report(f"guided tour recovers the planted separating axis in {hits}/100 seeds (>=95), strictly increasing traces ({elapsed:.1f}s < 60s)", hits >= 95 and all_increasing and elapsed < 60.0)

    def test_tsne_calibration_separation_determinism(self):
        rng = np.random.default_rng(5)
        ok = True
        for _ in range(50):
            row = rng.uniform(0.1, 5.0, 20)
            target = rng.uniform(1.5, 12.0)
            p = perplexity_calibration(row, target)
            entropy = -(p[p > 0] * np.log2(p[p > 0])).sum()
            ok &= abs(2**entropy - target) < 1e-4
        separated = 0
        for seed in range(20):
            blob_rng = np.random.default_rng([20, seed])
            pts = np.vstack([0.3 * blob_rng.normal(size=(5, 4)), [20.0] * 4 + 0.3 * blob_rng.normal(size=(5, 4))])
            d = pairwise_distances(pts)
            y = tsne(d, seed=seed).Y
            c0, c1 = y[:5].mean(0), y[5:].mean(0)
            spread = max(np.linalg.norm(y[:5] - c0, axis=1).mean(), np.linalg.norm(y[5:] - c1, axis=1).mean())
            if np.linalg.norm(c0 - c1) > 3 * spread:
                separated += 1
        d = pairwise_distances(np.random.default_rng(6).normal(size=(12, 3)))
        deterministic = np.array_equal(tsne(d, seed=9).Y, tsne(d, seed=9).Y)
        report(f"embedding: calibration error < 1e-4; blobs separate in {separated}/20 seeds (>=18); same-seed runs bit-identical", ok and separated >= 18 and deterministic)

    def test_classical_scaling_recovers_planar_distances(self):
        rng = np.random.default_rng(7)
        ok = True
        for _ in range(10):
            pts = rng.normal(size=(25, 2)) * rng.uniform(0.5, 3.0)
            d = pairwise_distances(pts)
            y = classical_mds(d).Y
            got = pairwise_distances(y).d
            ok &= np.abs(got - d.d).max() < 1e-8
        report("classical scaling reproduces planar distances within 1e-8", ok)

    def test_export_reproducible_and_nested_comparison(self, tmp_path):
        manager = SessionManager()
        s = manager.create_session()
        s.upload_data(fixture_csv(), ROLES)
        s.set_config({"k": 4, "score": {"type": "external", "name": "res", "values": list(np.linspace(0, 1, 24))}, "n_bins": 4})
        settings = s.export_settings()
        result = headless_run(fixture_csv(), settings, tmp_path)
        byte_identical = (tmp_path / "assignments.csv").read_bytes() == s.export_csv().encode()
        tree = s.merge_tree()
        table = compare_solutions(cut_tree(tree, 3), cut_tree(tree, 4)).counts
        split_rows = sum(1 for row in table if (row > 0).sum() == 2)
        single_rows = sum(1 for row in table if (row > 0).sum() == 1)
        report("export + headless rerun reproduce assignments byte-identically; cutting 3->4 splits exactly one cluster", byte_identical and split_rows == 1 and single_rows == 2 and result["assignments"])

    def test_service_contract_and_selection_broadcast(self):
        manager = SessionManager()
        client = TestClient(create_app(manager))
        sid = client.post("/sessions").json()["id"]
        ok = client.post(f"/sessions/{sid}/data", json={"csv": fixture_csv(), "roles": ROLES}).status_code == 200
        ok &= client.patch(f"/sessions/{sid}/config", json={"k": 3}).status_code == 200
        ok &= client.get(f"/sessions/{sid}/config").json()["k"] == 3
        ok &= client.get(f"/sessions/{sid}/overview").json()["k"] == 3
        ok &= len(client.get(f"/sessions/{sid}/stats").json()["rows"]) == 7
        ok &= len(client.get(f"/sessions/{sid}/benchmarks").json()["clusters"]) == 3
        ok &= client.get(f"/sessions/{sid}/coordinates", params={"variable": "A1"}).status_code == 200
        ok &= client.get(f"/sessions/{sid}/breakdown", params={"cluster": 1}).status_code == 200
        ok &= client.get(f"/sessions/{sid}/comparison").status_code == 200
        job = client.post(f"/sessions/{sid}/jobs/embedding", json={"panel": "a", "method": "mds"}).json()
        deadline = time.time() + 30
        while client.get(f"/sessions/{sid}/jobs/{job['id']}").json()["status"] in ("pending", "running"):
            assert time.time() < deadline
            time.sleep(0.02)
        ok &= client.get(f"/sessions/{sid}/jobs/{job['id']}").json()["status"] == "done"
        tjob = client.post(f"/sessions/{sid}/jobs/tour", json={"panel": "a", "spec": {"kind": "grand"}}).json()
        while client.get(f"/sessions/{sid}/jobs/{tjob['id']}").json()["status"] in ("pending", "running"):
            assert time.time() < deadline
            time.sleep(0.02)
        ok &= client.post(f"/sessions/{sid}/tours/copy", json={"from_panel": "a", "to_panel": "b"}).status_code == 200
        ok &= client.get(f"/sessions/{sid}/export").json()["assignments_csv"].startswith("id,cluster,group,score,bin")

        session = manager.get(sid)
        seen = {0: [], 1: []}
        queues = [session.subscribe(), session.subscribe()]

        def drain(idx):
            while len(seen[idx]) < 8:
                event = queues[idx].get(timeout=5)
                if event.get("type") == "selection":
                    seen[idx].append(event["revision"])

        threads = [threading.Thread(target=drain, args=(i,)) for i in (0, 1)]
        for t in threads:
            t.start()
        for i in range(8):
            ok &= client.post(f"/sessions/{sid}/selection", json={"selected": [i + 1], "origin": "tour:a"}).status_code == 200
        for t in threads:
            t.join(timeout=10)
            ok &= not t.is_alive()
        monotone = all(seen[idx] == sorted(seen[idx]) and len(set(seen[idx])) == 8 for idx in (0, 1))
        gapless = all(np.diff(seen[idx]).tolist() == [1] * 7 for idx in (0, 1))
        report("full endpoint suite passes headlessly; selection broadcast delivers monotone gapless revisions to two concurrent subscribers", ok and monotone and gapless)
