"""Analysis sessions: state, caching, computation jobs, selection, export.

A session owns one dataset plus a validated settings document.  Results are
cached by the canonical hash of the settings slice they depend on, so
changing k reuses the merge tree while a transform change invalidates
everything.  Tour and embedding computations run as cancellable background
jobs; selection changes broadcast to subscribers in revision order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import queue
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import jsonschema

from . import cluster as ce
from . import data as cd
from . import nldr as ne
from . import tour as te


class SessionError(ValueError):
    """Raised for unknown sessions, invalid settings or bad requests."""


SETTINGS_SCHEMA = {
    "type": "object",
    "properties": {
        "roles": {
            "type": "object",
            "properties": {
                "clustering": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "linked": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "label": {"type": ["string", "null"]},
                "flags": {"type": "array", "items": {"type": "string"}},
            },
            "required": ["clustering", "linked"],
            "additionalProperties": False,
        },
        "transform": {
            "type": "object",
            "patternProperties": {
                "^(clustering|linked)$": {
                    "type": "object",
                    "properties": {
                        "type": {"enum": ["center_scale", "pull", "raw"]},
                        "center": {"type": "boolean"},
                        "scale": {"type": "boolean"},
                        "covariance": {"type": "array"},
                        "reference": {"type": "array"},
                    },
                    "required": ["type"],
                    "additionalProperties": False,
                }
            },
            "additionalProperties": False,
        },
        "metric": {"enum": list(ce.METRICS) + ["precomputed"]},
        "linkage": {"enum": list(ce.LINKAGES)},
        "k": {"type": "integer", "minimum": 1},
        "display_pair": {
            "type": ["array", "null"],
            "items": {"type": "string"},
            "minItems": 2,
            "maxItems": 2,
        },
        "score": {
            "type": ["object", "null"],
            "properties": {
                "type": {"enum": ["chi2", "external"]},
                "name": {"type": "string"},
                "values": {"type": "array", "items": {"type": "number"}},
            },
            "required": ["type"],
            "additionalProperties": False,
        },
        "n_bins": {"type": ["integer", "null"], "minimum": 2},
        "hulls": {"type": "boolean"},
        "tour": {"type": "object"},
        "nldr": {"type": "object"},
        "comparison": {
            "type": ["object", "null"],
            "properties": {"a": {"type": "object"}, "b": {"type": "object"}},
            "required": ["a", "b"],
        },
    },
    "additionalProperties": False,
}

DEFAULT_SETTINGS = {
    "roles": None,
    "transform": {
        "clustering": {"type": "center_scale", "center": True, "scale": True},
        "linked": {"type": "center_scale", "center": True, "scale": True},
    },
    "metric": "euclidean",
    "linkage": "ward",
    "k": 2,
    "display_pair": None,
    "score": None,
    "n_bins": None,
    "hulls": False,
    "tour": {},
    "nldr": {},
    "comparison": None,
}


def canonical_settings(doc: dict) -> str:
    """Key-sorted canonical JSON text; its hash keys the result cache."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def settings_hash(doc) -> str:
    return hashlib.sha256(canonical_settings(doc).encode()).hexdigest()


def validate_settings(doc: dict) -> None:
    try:
        jsonschema.validate(doc, SETTINGS_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SessionError(f"invalid settings at {exc.json_path}: {exc.message}") from exc


@dataclass
class Job:
    id: str
    kind: str
    panel: str
    status: str = "pending"           # pending | running | done | cancelled | error
    progress: float = 0.0
    result: dict | None = None
    error: str | None = None
    cancel_event: threading.Event = field(default_factory=threading.Event)
    thread: threading.Thread | None = None

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "panel": self.panel,
            "status": self.status,
            "progress": self.progress,
            "result": self.result,
            "error": self.error,
        }


class Session:
    """Single-writer analysis session with cached, settings-keyed results."""

    def __init__(self, sid: str):
        self.id = sid
        self.lock = threading.RLock()
        self.revision = 0
        self.raw_csv: bytes | None = None
        self.dataset: cd.Dataset | None = None
        self.spaced: cd.SpacedDataset | None = None
        self.precomputed_dist: ce.DistanceMatrix | None = None
        self.settings: dict = json.loads(json.dumps(DEFAULT_SETTINGS))
        self.selection: set[int] = set()
        self.selection_origin = ""
        self.selection_revision = 0
        self._cache: dict[str, object] = {}
        self.registry = ne.NldrRegistry()
        self.jobs: dict[str, Job] = {}
        self._active: dict[tuple[str, str], Job] = {}   # (panel, kind) -> job
        self.tours: dict[str, te.TourPath] = {}
        self.embeddings: dict[str, ne.Embedding] = {}
        self._subscribers: list[queue.Queue] = []

    # -- lifecycle ---------------------------------------------------------

    def _bump(self):
        self.revision += 1

    def require_data(self) -> cd.SpacedDataset:
        if self.spaced is None:
            raise SessionError("no data uploaded")
        return self.spaced

    def upload_data(self, raw: bytes | str, roles: dict, precomputed_dist: np.ndarray | None = None) -> dict:
        with self.lock:
            ds = cd.parse_dataset(raw)
            spaced = cd.assign_roles(
                ds,
                clustering=list(roles["clustering"]),
                linked=list(roles["linked"]),
                label=roles.get("label"),
                flags=list(roles.get("flags", [])),
            )
            self.raw_csv = raw.encode() if isinstance(raw, str) else raw
            self.dataset = ds
            self.spaced = spaced
            if precomputed_dist is not None:
                self.precomputed_dist = ce.DistanceMatrix.from_square(np.asarray(precomputed_dist, dtype=float))
            self.settings["roles"] = {
                "clustering": list(roles["clustering"]),
                "linked": list(roles["linked"]),
                "label": roles.get("label"),
                "flags": list(roles.get("flags", [])),
            }
            if self.settings["display_pair"] is None and spaced.linked.shape[1] >= 2:
                self.settings["display_pair"] = list(spaced.linked_names[:2])
            self._cache.clear()
            self.tours.clear()
            self.embeddings.clear()
            self._bump()
            groups = self._groups()
            return {
                "n": spaced.n,
                "p_clustering": spaced.clustering.shape[1],
                "p_linked": spaced.linked.shape[1],
                "p_extras": spaced.extras.shape[1],
                "n_groups": len(groups.group_names) if groups else 0,
            }

    def set_config(self, patch: dict) -> dict:
        with self.lock:
            merged = json.loads(json.dumps(self.settings))
            merged.update(json.loads(json.dumps(patch)))
            validate_settings({k: v for k, v in merged.items() if not (k == "roles" and v is None)})
            self._validate_against_data(merged)
            tree_before = self.merge_tree_hash() if self.spaced is not None else None
            self.settings = merged
            self._bump()
            tree_after = self.merge_tree_hash() if self.spaced is not None else None
            return {
                "revision": self.revision,
                "merge_tree_reused": tree_before == tree_after,
            }

    def _validate_against_data(self, settings: dict) -> None:
        if self.spaced is None:
            return
        sp = self.spaced
        if settings["k"] > sp.n:
            raise SessionError(f"k={settings['k']} exceeds n={sp.n}")
        pair = settings.get("display_pair")
        if pair:
            for name in pair:
                if name not in sp.linked_names:
                    raise SessionError(f"display variable {name!r} not in the linked space")
        score = settings.get("score")
        if score and score["type"] == "external":
            vals = score.get("values", [])
            if len(vals) != sp.n:
                raise SessionError(f"external score length {len(vals)} does not match n={sp.n}")

    # -- derived results, cached by settings slice -------------------------

    def _memo(self, key_doc, builder):
        key = settings_hash(key_doc)
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    def _transform_doc(self, space: str) -> dict:
        return {"space": space, "transform": self.settings["transform"].get(space, {"type": "raw"})}

    def coords(self, space: str) -> cd.CoordinateMatrix:
        sp = self.require_data()
        matrix = sp.clustering if space == "clustering" else sp.linked
        spec = self.settings["transform"].get(space, {"type": "raw"})

        def build():
            if spec["type"] == "raw":
                return cd.CoordinateMatrix(values=matrix, transform_id="raw", space=space)
            if spec["type"] == "center_scale":
                return cd.center_scale_coords(
                    matrix, center=spec.get("center", True), scale=spec.get("scale", True), space=space
                )
            cov = cd.CovarianceSpec(
                matrix=np.asarray(spec["covariance"], dtype=float),
                reference_point=np.asarray(spec["reference"], dtype=float),
            )
            return cd.pull_coords(matrix, cov, space=space)

        return self._memo({"what": "coords", **self._transform_doc(space)}, build)

    def distances(self, space: str = "clustering") -> ce.DistanceMatrix:
        metric = self.settings["metric"]
        if metric == "precomputed":
            if self.precomputed_dist is None:
                raise SessionError("no precomputed distance matrix uploaded")
            return self.precomputed_dist

        def build():
            return ce.pairwise_distances(self.coords(space), metric)

        return self._memo({"what": "dist", "metric": metric, **self._transform_doc(space)}, build)

    def merge_tree(self) -> ce.MergeTree:
        doc = {
            "what": "tree",
            "metric": self.settings["metric"],
            "linkage": self.settings["linkage"],
            **self._transform_doc("clustering"),
        }
        return self._memo(doc, lambda: ce.hclust(self.distances(), self.settings["linkage"]))

    def merge_tree_hash(self) -> str:
        try:
            tree = self.merge_tree()
        except SessionError:
            return ""
        return hashlib.sha256(repr(tree.merges).encode()).hexdigest()

    def solution(self, k: int | None = None) -> ce.ClusterSolution:
        k = self.settings["k"] if k is None else k
        sol = ce.cut_tree(self.merge_tree(), k)
        settings = (self.settings["metric"], self.settings["linkage"],
                    self.settings["transform"]["clustering"]["type"], k)
        return ce.ClusterSolution(k=sol.k, cluster_of=sol.cluster_of, settings=settings)

    def _groups(self) -> cd.GroupAssignment | None:
        if self.spaced is None or not self.spaced.flag_columns:
            return None
        return cd.cross_groups([list(col) for col in self.spaced.flag_columns])

    def _score(self) -> cd.ScoreVector | None:
        spec = self.settings.get("score")
        if not spec:
            return None
        sp = self.require_data()
        if spec["type"] == "external":
            return cd.external_score(np.asarray(spec["values"], dtype=float), spec.get("name", "score"), n=sp.n)
        tf = self.settings["transform"]["clustering"]
        if tf["type"] != "pull":
            raise SessionError("chi2 score requires the pull transform with a covariance")
        cov = cd.CovarianceSpec(
            matrix=np.asarray(tf["covariance"], dtype=float),
            reference_point=np.asarray(tf["reference"], dtype=float),
        )
        return cd.chi2_score(sp.clustering, cov)

    def _bins(self) -> cd.BinAssignment | None:
        score = self._score()
        n_bins = self.settings.get("n_bins")
        if score is None or not n_bins:
            return None
        return cd.quantile_bins(score, n_bins)

    # -- view payloads -----------------------------------------------------

    def get_overview(self, settings_override: dict | None = None) -> dict:
        sp = self.require_data()
        saved = self.settings
        if settings_override:
            self.settings = {**json.loads(json.dumps(saved)), **settings_override}
        try:
            sol = self.solution()
            tree = self.merge_tree()
            order = ce.dendrogram_order(tree)
            coords = self.coords("clustering")
            pair = self.settings["display_pair"] or list(sp.linked_names[: min(2, len(sp.linked_names))])
            cols = [sp.linked_names.index(name) for name in pair]
            groups = self._groups()
            bins = self._bins()
            score = self._score()
            payload = {
                "heatmap": {
                    "row_order": order.tolist(),
                    "values": coords.values[order].tolist(),
                    "variables": list(sp.clustering_names),
                    "cluster_of": sol.cluster_of[order].tolist(),
                },
                "scatter": {
                    "variables": pair,
                    "x": sp.linked[:, cols[0]].tolist(),
                    "y": sp.linked[:, cols[1]].tolist() if len(cols) > 1 else sp.linked[:, cols[0]].tolist(),
                    "cluster_of": sol.cluster_of.tolist(),
                    "group_of": groups.group_of.tolist() if groups else None,
                    "bin_of": bins.bin_of.tolist() if bins else None,
                    "score": score.values.tolist() if score is not None else None,
                },
                "k": sol.k,
            }
            if self.settings.get("hulls"):
                pts = np.column_stack([payload["scatter"]["x"], payload["scatter"]["y"]])
                hulls = ce.group_hulls(pts, sol.cluster_of)
                payload["hulls"] = {str(c): h.tolist() for c, h in hulls.items()}
            return payload
        finally:
            self.settings = saved

    def get_stats(self, k_max: int = 8) -> list[dict]:
        return ce.stats_sweep(self.merge_tree(), self.distances(), self.coords("clustering"), k_max)

    def get_benchmarks(self) -> dict:
        sp = self.require_data()
        sol = self.solution()
        d = self.distances()
        bm = ce.benchmark_points(sol, d)
        radii = ce.cluster_radius(sol, d, bm)
        diam = ce.cluster_diameter(sol, d)
        score = self._score()
        clusters = []
        for c in range(sol.k):
            row = {
                "cluster": c + 1,
                "benchmark": int(bm[c]),
                "label": sp.labels[bm[c]] if sp.labels else str(bm[c] + 1),
                "linked_coords": dict(zip(sp.linked_names, sp.linked[bm[c]].tolist())),
                "radius": float(radii[c]),
                "diameter": float(diam[c]),
                "size": int(sol.members(c + 1).size),
            }
            if score is not None:
                row["score"] = float(score.values[bm[c]])
            clusters.append(row)
        payload = {"clusters": clusters}
        groups = self._groups()
        if groups is not None:
            gsol = ce.ClusterSolution(k=len(groups.group_names), cluster_of=groups.group_of)
            gbm = ce.benchmark_points(gsol, d)
            gradii = ce.cluster_radius(gsol, d, gbm)
            gdiam = ce.cluster_diameter(gsol, d)
            payload["groups"] = [
                {
                    "group": groups.group_names[g],
                    "benchmark": int(gbm[g]),
                    "linked_coords": dict(zip(sp.linked_names, sp.linked[gbm[g]].tolist())),
                    "radius": float(gradii[g]),
                    "diameter": float(gdiam[g]),
                    "size": int(gsol.members(g + 1).size),
                    **({"score": float(score.values[gbm[g]])} if score is not None else {}),
                }
                for g in range(gsol.k)
            ]
        return payload

    def get_coordinate_view(
        self,
        variable: str,
        center: bool = True,
        scale: bool = False,
        hidden_clusters: set[int] | None = None,
    ) -> dict:
        sp = self.require_data()
        if variable not in sp.clustering_names:
            raise SessionError(f"{variable!r} is not a clustering-space variable")
        hidden = hidden_clusters or set()
        sol = self.solution()
        d = self.distances()
        bm = set(ce.benchmark_points(sol, d).tolist())
        coords = self.coords("clustering")
        col = sp.clustering_names.index(variable)
        pair = self.settings["display_pair"] or list(sp.linked_names[:2])
        cols = [sp.linked_names.index(name) for name in pair]

        pcp_values = sp.clustering
        if center or scale:
            pcp_values = cd.center_scale_coords(sp.clustering, center=center, scale=scale).values
        rows = [
            {
                "id": i + 1,
                "cluster": int(sol.cluster_of[i]),
                "values": pcp_values[i].tolist(),
                "benchmark": i in bm,
            }
            for i in range(sp.n)
            if int(sol.cluster_of[i]) not in hidden
        ]
        return {
            "gradient": {
                "variable": variable,
                "x": sp.linked[:, cols[0]].tolist(),
                "y": sp.linked[:, cols[1]].tolist(),
                "values": coords.values[:, col].tolist(),
            },
            "pcp": {"variables": list(sp.clustering_names), "rows": rows},
        }

    def get_breakdown(self, cluster_id: int) -> dict:
        result = ce.distance_breakdown(self.distances(), self.solution(), cluster_id)
        return {k: v.tolist() for k, v in result.items()}

    def _solution_for(self, spec: dict) -> ce.ClusterSolution:
        saved = self.settings
        merged = json.loads(json.dumps(saved))
        merged.update({k: spec[k] for k in ("metric", "linkage", "k") if k in spec})
        self.settings = merged
        try:
            return self.solution()
        finally:
            self.settings = saved

    def get_comparison(self) -> dict:
        spec = self.settings.get("comparison")
        if spec is None:
            spec = {"a": {}, "b": {}}
        sol_a = self._solution_for(spec["a"])
        sol_b = self._solution_for(spec["b"])
        table = ce.compare_solutions(sol_a, sol_b)
        return {
            "a": self.get_overview(settings_override={k: spec["a"][k] for k in spec["a"]}),
            "b": self.get_overview(settings_override={k: spec["b"][k] for k in spec["b"]}),
            "table": table.counts.tolist(),
        }

    # -- jobs --------------------------------------------------------------

    def _publish(self, event: dict) -> None:
        for q in list(self._subscribers):
            q.put(event)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self.lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _start_job(self, kind: str, panel: str, work) -> Job:
        with self.lock:
            old = self._active.get((panel, kind))
            if old is not None and old.status in ("pending", "running"):
                self.cancel_job(old.id)
            job = Job(id=uuid.uuid4().hex, kind=kind, panel=panel)
            self.jobs[job.id] = job
            self._active[(panel, kind)] = job

        def run():
            job.status = "running"
            self._publish({"type": "job", "job_id": job.id, "status": "running", "progress": 0.0})
            try:
                job.result = work(job)
                if job.cancel_event.is_set():
                    job.status = "cancelled"
                else:
                    job.status = "done"
                    job.progress = 1.0
            except ne.CancelledError:
                job.status = "cancelled"
            except Exception as exc:  # surfaced through the job document
                job.status = "error"
                job.error = str(exc)
            self._publish(
                {"type": "job", "job_id": job.id, "status": job.status, "progress": job.progress}
            )

        job.thread = threading.Thread(target=run, daemon=True)
        job.thread.start()
        return job

    def compute_embedding(self, panel: str, method: str, space: str = "clustering", seed: int = 0) -> Job:
        if method not in self.registry.names():
            raise SessionError(
                f"unknown method {method!r}; registered: {', '.join(self.registry.names())}"
            )
        self.require_data()
        cache_doc = {
            "what": "embedding",
            "method": method,
            "seed": seed,
            "metric": self.settings["metric"],
            **self._transform_doc(space),
        }
        key = settings_hash(cache_doc)

        def work(job: Job) -> dict:
            if key in self._cache:
                emb = self._cache[key]
            else:
                def callback(it, total):
                    if job.cancel_event.is_set():
                        raise ne.CancelledError()
                    job.progress = it / total

                emb = self.registry.run(
                    method, self.coords(space).values, self.distances(space), seed=seed, callback=callback
                )
                self._cache[key] = emb
            self.embeddings[panel] = emb
            return emb.to_doc()

        return self._start_job("embedding", panel, work)

    def compute_tour(self, panel: str, spec: dict) -> Job:
        self.require_data()
        kind = spec.get("kind", "grand")
        space = spec.get("space", "clustering")
        d = int(spec.get("d", 2))
        if d not in (2, 3):
            raise SessionError("tour dimension must be 2 or 3")
        seed = int(spec.get("seed", 0))
        coords = self.coords(space).values
        p = coords.shape[1]

        def work(job: Job) -> dict:
            def callback(it, total):
                if job.cancel_event.is_set():
                    raise ne.CancelledError()
                job.progress = it / total

            if kind == "grand":
                path = te.grand_tour(p, d, n_bases=int(spec.get("n_bases", te.DEFAULT_N_BASES)), seed=seed)
            elif kind == "guided":
                groups = self._tour_groups(spec)
                path = te.guided_tour(
                    coords,
                    groups,
                    index=spec.get("index", "lda"),
                    d=d,
                    seed=seed,
                    lam=float(spec.get("lambda", 0.1)),
                    callback=callback,
                )
            elif kind == "radial":
                start = self.tours.get(spec.get("start_panel", panel))
                frame = (
                    te.ProjectionFrame(basis=np.asarray(spec["start"], dtype=float))
                    if "start" in spec
                    else (start.interpolated[-1] if start else te.orthonormalize(np.eye(p)[:, :d]))
                )
                path = te.radial_tour(frame, int(spec["variable"]))
            else:
                raise SessionError(f"unknown tour kind {kind!r}")
            self.tours[panel] = path
            return te.serialize_path(path, inline_frames=True)

        return self._start_job("tour", panel, work)

    def _tour_groups(self, spec: dict):
        by = spec.get("groups", "cluster")
        if by == "cluster":
            return self.solution()
        groups = self._groups()
        if groups is None:
            raise SessionError("no grouping flags configured")
        return groups

    def copy_path(self, from_panel: str, to_panel: str) -> dict:
        if from_panel not in self.tours:
            raise SessionError(f"no tour on panel {from_panel!r}")
        self.tours[to_panel] = self.tours[from_panel]
        return te.serialize_path(self.tours[to_panel], inline_frames=True)

    def get_job(self, job_id: str) -> Job:
        if job_id not in self.jobs:
            raise SessionError(f"unknown job {job_id}")
        return self.jobs[job_id]

    def cancel_job(self, job_id: str) -> Job:
        job = self.get_job(job_id)
        job.cancel_event.set()
        if job.thread is not None:
            job.thread.join(timeout=30)
        if job.status in ("pending", "running"):
            job.status = "cancelled"
        return job

    # -- selection ---------------------------------------------------------

    def set_selection(self, ids, origin: str = "") -> int:
        sp = self.require_data()
        ids = set(int(i) for i in ids)
        bad = [i for i in ids if not 1 <= i <= sp.n]
        if bad:
            raise SessionError(f"observation id {bad[0]} out of range 1..{sp.n}")
        with self.lock:
            self.selection = ids
            self.selection_origin = origin
            self.selection_revision += 1
            self._bump()
            self._publish(
                {
                    "type": "selection",
                    "revision": self.selection_revision,
                    "selected": sorted(ids),
                    "origin": origin,
                }
            )
            return self.selection_revision

    # -- export ------------------------------------------------------------

    def export_settings(self) -> dict:
        doc = json.loads(json.dumps(self.settings))
        return doc

    def export_assignments(self) -> list[dict]:
        sp = self.require_data()
        sol = self.solution()
        groups = self._groups()
        score = self._score()
        bins = self._bins()
        rows = []
        for i in range(sp.n):
            rows.append(
                {
                    "id": sp.labels[i] if sp.labels else str(i + 1),
                    "cluster": str(int(sol.cluster_of[i])),
                    "group": groups.group_names[groups.group_of[i] - 1] if groups else "",
                    "score": repr(float(score.values[i])) if score is not None else "",
                    "bin": str(int(bins.bin_of[i])) if bins else "",
                }
            )
        return rows

    def export_csv(self) -> str:
        out = io.StringIO()
        writer = csv.DictWriter(out, fieldnames=["id", "cluster", "group", "score", "bin"], lineterminator="\n")
        writer.writeheader()
        for row in self.export_assignments():
            writer.writerow(row)
        return out.getvalue()


class SessionManager:
    """In-memory session store; one logical writer per session."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create_session(self) -> Session:
        with self._lock:
            sid = uuid.uuid4().hex
            session = Session(sid)
            self._sessions[sid] = session
            return session

    def get(self, sid: str) -> Session:
        if sid not in self._sessions:
            raise SessionError(f"unknown session {sid}")
        return self._sessions[sid]


def headless_run(data_csv: bytes | str, settings: dict, out_dir: str | Path) -> dict:
    """Recompute an exported analysis without the service and write artifacts.

    Writes assignments.csv, settings.json and plot-data documents (overview,
    stats, and the final guided-tour frame projection when a tour is
    configured) into out_dir.
    """
    roles = settings.get("roles")
    if not roles:
        raise SessionError("settings document must include roles")
    validate_settings(settings)
    session = Session("headless")
    session.upload_data(data_csv, roles)
    patch = {k: v for k, v in settings.items() if k != "roles"}
    if patch:
        session.set_config(patch)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "assignments.csv").write_text(session.export_csv())
    (out / "settings.json").write_text(canonical_settings(session.export_settings()))

    plots = {"overview": session.get_overview(), "stats": session.get_stats()}
    for panel, spec in (settings.get("tour") or {}).items():
        job = session.compute_tour(panel, spec)
        job.thread.join()
        if job.status == "error":
            raise SessionError(f"tour job failed: {job.error}")
        path = session.tours[panel]
        final = path.interpolated[-1]
        space = spec.get("space", "clustering")
        plots[f"tour_{panel}"] = {
            "final_frame": final.basis.tolist(),
            "projection": te.project(session.coords(space).values, final).tolist(),
            "index_trace": list(path.index_trace) if path.index_trace else None,
        }
    (out / "plots.json").write_text(json.dumps(plots, sort_keys=True))
    return {
        "assignments": session.export_assignments(),
        "settings": session.export_settings(),
        "plots": plots,
    }
