"""
Micro-benchmarks: grow a history release by release and, at evenly spaced catalog
sizes, time one operation, count the Merkle hash work it caused and record storage
split into metadata and payload bytes.
"""

import gc
import os
import time
import timeit
from typing import Callable, Dict, List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from sklearn.linear_model import HuberRegressor, LinearRegression
from tqdm import tqdm

from rollguard._exceptions import TamperDetected
from rollguard._merkle import verify_inclusion
from rollguard._monitor import ReferenceMonitor
from rollguard.constants import CATALOG, CHECKPOINT_DIR, PAD_DIR
from rollguard.logger_conf import get_logger
from rollguard.models.leaves import PruneReason
from rollguard.models.proofs import PadRoot
from rollguard.models.requests import PruneRequest, RollbackMode, RollbackRequest, Target
from rollguard.utils import directory_size

logger = get_logger(__name__)

BenchOperation = Literal["update", "snapshot", "rollback", "prune", "query", "lineage"]
BENCH_ACTOR = "bench"
MIN_SCALE_LEAVES = 16
VERIFY_LOOPS = 2000
VERIFY_REPEATS = 5


class BenchPlan(BaseModel):
    model_config = ConfigDict(extra="forbid")

    operation: BenchOperation = "query"
    objects: int = Field(default=1, ge=1, description="Objects touched per release.")
    until_leaves: int = Field(default=2700, ge=1)
    scales: int = Field(default=10, ge=1, description="Measurement points up to the target.")
    samples: int = Field(default=5, ge=1)
    payload_bytes: int = Field(default=256, ge=1)
    retention: Optional[int] = Field(default=None, ge=1)
    seed: int = 0


class BenchRecord(BaseModel):
    operation: BenchOperation
    pad_leaves: int
    objects: int
    samples: int
    latency_mean_ms: float
    latency_p50_ms: float
    latency_p95_ms: float
    hash_ops_mean: float
    proof_hashes: int
    lineage_events: int
    verify_latency_us: float
    metadata_bytes: int
    content_bytes: int


class FitResult(BaseModel):
    intercept: float
    slope: float
    r2: float
    method: str

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(x, dtype=float)


def _fit(x: np.ndarray, y: np.ndarray, method: str) -> FitResult:
    if method not in ("ols", "huber"):
        raise ValueError("The 'method' argument must be either 'ols' or 'huber'.")
    if len(x) != len(y):
        raise ValueError("The inputs must have equal length.")
    if len(x) < 2:
        raise ValueError("At least two points are needed for a fit.")

    models = {"ols": LinearRegression, "huber": HuberRegressor}
    features = np.asarray(x, dtype=float).reshape(-1, 1)
    target = np.asarray(y, dtype=float)
    model = models[method](fit_intercept=True)
    model.fit(features, target)
    return FitResult(
        intercept=float(model.intercept_),
        slope=float(model.coef_[0]),
        r2=float(model.score(features, target)),
        method=method,
    )


def fit_log_curve(leaves, values, method: str = "ols") -> FitResult:
    """Fit values ~ a + b * log2(leaves)."""
    return _fit(np.log2(np.asarray(leaves, dtype=float)), values, method)


def fit_k_log_n(k, leaves, values, method: str = "ols") -> FitResult:
    """Fit values ~ a + b * k * log2(leaves)."""
    x = np.asarray(k, dtype=float) * np.log2(np.asarray(leaves, dtype=float))
    return _fit(x, values, method)


# =============================================================================
# Runner
# =============================================================================


class BenchRunner:

    def __init__(self, monitor: ReferenceMonitor, plan: BenchPlan):
        self.monitor = monitor
        self.plan = plan
        self.rng = np.random.default_rng(plan.seed)
        self.object_ids = [f"obj-{i:03d}" for i in range(plan.objects)]
        self.releases = 0

    # -------------------------------------------------------------------------
    # History growth
    # -------------------------------------------------------------------------

    def _payload(self) -> bytes:
        return self.rng.bytes(self.plan.payload_bytes)

    def release(self) -> None:
        self.releases += 1
        self.monitor.update(
            {obj: self._payload() for obj in self.object_ids},
            actor=BENCH_ACTOR,
            justification=f"release {self.releases}",
            snapshot_tag=f"release-{self.releases}",
        )
        if self.plan.retention is not None:
            self.monitor.enforce_retention(BENCH_ACTOR, keep=self.plan.retention)

    def catalog_leaves(self) -> int:
        return self.monitor.state.pads[CATALOG].size

    def storage(self) -> Dict[str, int]:
        untrusted = self.monitor.config.untrusted_dir
        return {
            "metadata_bytes": directory_size(os.path.join(untrusted, PAD_DIR))
            + directory_size(os.path.join(untrusted, CHECKPOINT_DIR)),
            "content_bytes": self.monitor.content.total_bytes(),
        }

    # -------------------------------------------------------------------------
    # Measured operations
    # -------------------------------------------------------------------------

    def _heads(self) -> Dict[str, int]:
        at = self.monitor.checkpoint
        heads = {}
        for obj in self.object_ids:
            head = self.monitor.state.current_head(obj, at)
            if head is not None:
                heads[obj] = head[0]
        return heads

    def _older_live_versions(self) -> List[Target]:
        at = self.monitor.checkpoint
        heads = self._heads()
        targets = []
        for obj in self.object_ids:
            versions = sorted(
                version
                for (name, version), index in self.monitor.state.index.versions.items()
                if name == obj
                and index < at.catalog_size
                and version != heads.get(obj)
                and self.monitor.state.tombstone(obj, version, at) is None
            )
            if versions:
                targets.append(Target(object=obj, version=versions[-1]))
        return targets

    def _operation(self) -> Callable[[], Dict[str, int]]:
        operation = self.plan.operation
        monitor = self.monitor

        def update():
            monitor.update({obj: self._payload() for obj in self.object_ids}, actor=BENCH_ACTOR)
            return {}

        def snapshot():
            tag = f"bench-{monitor.checkpoint.counter}"
            monitor.take_snapshot(tag, list(self._heads()), BENCH_ACTOR)
            return {}

        def rollback():
            targets = [Target(object=obj, version=v) for obj, v in self._heads().items()]
            monitor.rollback(
                RollbackRequest(mode=RollbackMode.SELECTIVE, targets=targets, actor=BENCH_ACTOR)
            )
            return {}

        def prune():
            targets = self._older_live_versions()
            if targets:
                monitor.prune(
                    PruneRequest(
                        mode=RollbackMode.SELECTIVE,
                        targets=targets,
                        reason=PruneReason.OTHER,
                        actor=BENCH_ACTOR,
                    )
                )
            return {}

        # oldest and newest version of every object: both ends of the catalog
        first = {}
        for obj, version in monitor.state.index.versions:
            if obj in self.object_ids:
                first[obj] = min(version, first.get(obj, version))
        queried = list(first.items()) + list(self._heads().items())

        def query():
            proof_hashes = 0
            for obj, version in queried:
                report = monitor.auditor.check_eligibility((obj, version))
                if report.catalog_proof is not None:
                    proof_hashes = max(proof_hashes, len(report.catalog_proof.path))
            return {"proof_hashes": proof_hashes}

        def lineage():
            events = 0
            for obj in self.object_ids:
                events += len(monitor.auditor.reconstruct_lineage(obj))
            return {"lineage_events": events}

        return {
            "update": update,
            "snapshot": snapshot,
            "rollback": rollback,
            "prune": prune,
            "query": query,
            "lineage": lineage,
        }[operation]

    def verify_latency_us(self) -> float:
        """
        Client-side cost of checking one query answer: the inclusion proof of catalog
        leaf 0 against the sealed catalog root. Timed as `timeit` does, with garbage
        collection off, best of several repeats.
        """
        at = self.monitor.checkpoint
        if at.catalog_size == 0:
            return 0.0
        pad = self.monitor.state.pads[CATALOG]
        root = PadRoot(digest=at.pad_roots[0], size=at.catalog_size)
        proof = pad.prove_inclusion(0, at.catalog_size)
        [(_, raw)] = list(pad.iter_raw(0, 1))
        if not verify_inclusion(proof, raw, root):
            raise TamperDetected("Catalog leaf 0 fails inclusion under the sealed root.")

        timer = timeit.Timer(lambda: verify_inclusion(proof, raw, root))
        best = min(timer.repeat(repeat=VERIFY_REPEATS, number=VERIFY_LOOPS))
        return best / VERIFY_LOOPS * 1_000_000

    def measure(self) -> BenchRecord:
        run = self._operation()
        pad_leaves = self.catalog_leaves()
        latencies = []
        hash_ops = []
        extra: Dict[str, int] = {}
        collecting = gc.isenabled()
        gc.disable()
        try:
            for _ in range(self.plan.samples):
                ops_before = self.monitor.state.hash_ops()
                start = time.perf_counter()
                extra = run()
                latencies.append((time.perf_counter() - start) * 1_000)
                hash_ops.append(self.monitor.state.hash_ops() - ops_before)
        finally:
            if collecting:
                gc.enable()

        latencies = np.array(latencies)
        return BenchRecord(
            operation=self.plan.operation,
            pad_leaves=pad_leaves,
            objects=self.plan.objects,
            samples=self.plan.samples,
            latency_mean_ms=float(np.mean(latencies)),
            latency_p50_ms=float(np.percentile(latencies, 50)),
            latency_p95_ms=float(np.percentile(latencies, 95)),
            hash_ops_mean=float(np.mean(hash_ops)),
            proof_hashes=extra.get("proof_hashes", 0),
            lineage_events=extra.get("lineage_events", 0),
            verify_latency_us=self.verify_latency_us() if self.plan.operation == "query" else 0.0,
            **self.storage(),
        )

    def run(self, progress: bool = False) -> pd.DataFrame:
        """Grow to `until_leaves` catalog leaves, measuring at geometrically spaced sizes."""
        marks = np.unique(
            np.geomspace(
                min(self.plan.until_leaves, MIN_SCALE_LEAVES), self.plan.until_leaves, self.plan.scales
            ).round()
        )
        records = []
        with tqdm(total=self.plan.until_leaves, desc="leaves", disable=not progress) as bar:
            for mark in marks:
                while self.catalog_leaves() < mark:
                    before = self.catalog_leaves()
                    self.release()
                    bar.update(self.catalog_leaves() - before)
                records.append(self.measure())
                logger.info(
                    "Measured %s at %s leaves.",
                    self.plan.operation,
                    records[-1].pad_leaves,
                    extra={"counter": self.monitor.checkpoint.counter},
                )
        return pd.DataFrame([record.model_dump() for record in records])


def run_bench(
    monitor: ReferenceMonitor, plan: BenchPlan, progress: bool = False
) -> pd.DataFrame:
    return BenchRunner(monitor, plan).run(progress=progress)


def plot_bench(df: pd.DataFrame, path: str, column: str = "latency_mean_ms") -> None:
    """Static plot of one column against PAD size, with the fitted log curve."""
    # pylint: disable=import-outside-toplevel
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for operation, group in df.groupby("operation"):
        group = group.sort_values("pad_leaves")
        ax.plot(group["pad_leaves"], group[column], marker="o", label=str(operation))
        if len(group) >= 2:
            fit = fit_log_curve(group["pad_leaves"], group[column])
            ax.plot(
                group["pad_leaves"],
                fit.predict(np.log2(group["pad_leaves"].to_numpy(dtype=float))),
                linestyle="--",
                label=f"{operation} fit (R² {fit.r2:.2f})",
            )
    ax.set_xlabel("Leaves in the catalog PAD")
    ax.set_ylabel(column)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
