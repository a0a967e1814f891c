"""Chunk decomposition, halo exchange, and wavefront scheduling.

The image is tiled into chunks padded by the PSF half support. Each chunk
owns its interior exclusively; boundary strips of object, expected-image,
and latent-count data are exchanged with edge-sharing neighbors after
every MCMC iteration, tagged with the iteration they belong to. A chunk
may run iteration t only once every neighbor has completed t - 1 and its
tagged strips have arrived, so adjacent chunks are never more than one
iteration apart (the moving wavefront) and no global barrier is needed.

Corner halo blocks travel through the edge strips of the shared neighbor
and are therefore one iteration older than the edge halos; the PSF
coupling across a corner is correspondingly weak.

Results are a function of (layout, seed) only: each chunk consumes its own
deterministic RNG stream and all cross-chunk data is iteration-tagged, so
worker count and scheduling order never change the output.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .camera import CameraMap, adu_to_photon_estimate
from .grids import ImageGrid
from .optics import PSFKernel, otf_from_psf
from .sampler import (
    ChainState,
    PosteriorSummary,
    PriorTables,
    SamplerConfig,
    gibbs_sweep_chunk,
    summarize,
)
from .spectral_prior import build_prior

Rect = tuple[int, int, int, int]  # r0, r1, c0, c1 (half-open)

_DIRECTIONS = ("up", "down", "left", "right")


@dataclass(frozen=True)
class Chunk:
    """One tile: exclusive interior plus a halo-padded extended rectangle."""

    index: int
    grid_pos: tuple[int, int]
    interior: Rect
    extended: Rect
    neighbors: dict  # direction -> chunk index


@dataclass(frozen=True)
class ChunkLayout:
    """Ceil-division tiling of the image with halo width = PSF half support."""

    image_shape: tuple[int, int]
    grid_shape: tuple[int, int]
    halo: int
    chunks: tuple[Chunk, ...]

    @property
    def diameter(self) -> int:
        """Maximum Manhattan distance between chunks (wavefront depth)."""
        return (self.grid_shape[0] - 1) + (self.grid_shape[1] - 1)


def _edges(length: int, side: int) -> list[tuple[int, int]]:
    n = -(-length // side)
    return [(i * side, min((i + 1) * side, length)) for i in range(n)]


def build_layout(
    image_shape: tuple[int, int], psf: PSFKernel, chunk_side: int
) -> ChunkLayout:
    """Tile the image into chunks; edge chunks may be smaller (ragged)."""
    halo = psf.half_support
    if chunk_side < 2 * halo + 1:
        raise ValueError(
            f"chunk_side {chunk_side} must be >= 2 * half_support + 1 = {2 * halo + 1}"
        )
    h_img, w_img = image_shape
    rows = _edges(h_img, chunk_side)
    cols = _edges(w_img, chunk_side)
    pr, pc = len(rows), len(cols)
    chunks = []
    for gi, (r0, r1) in enumerate(rows):
        for gj, (c0, c1) in enumerate(cols):
            idx = gi * pc + gj
            ext = (
                max(0, r0 - halo),
                min(h_img, r1 + halo),
                max(0, c0 - halo),
                min(w_img, c1 + halo),
            )
            nbrs = {}
            if gi > 0:
                nbrs["up"] = idx - pc
            if gi < pr - 1:
                nbrs["down"] = idx + pc
            if gj > 0:
                nbrs["left"] = idx - 1
            if gj < pc - 1:
                nbrs["right"] = idx + 1
            chunks.append(
                Chunk(idx, (gi, gj), (r0, r1, c0, c1), ext, nbrs)
            )
    return ChunkLayout(
        image_shape=image_shape,
        grid_shape=(pr, pc),
        halo=halo,
        chunks=tuple(chunks),
    )


def default_chunk_side(psf: PSFKernel) -> int:
    return max(32, 4 * psf.half_support + 1)


def single_chunk_layout(image_shape: tuple[int, int], psf: PSFKernel) -> ChunkLayout:
    """Degenerate layout whose schedule is strictly serial."""
    side = max(image_shape)
    halo = psf.half_support
    return build_layout(image_shape, psf, max(side, 2 * halo + 1))


@dataclass
class WavefrontSchedule:
    """Per-chunk iteration counters and the neighbor dependency rule."""

    layout: ChunkLayout
    total_iterations: int
    completed: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.completed:
            self.completed = [0] * len(self.layout.chunks)

    def runnable(self, index: int) -> bool:
        """Chunk may run iteration completed+1 once neighbors finished completed."""
        t = self.completed[index] + 1
        if t > self.total_iterations:
            return False
        chunk = self.layout.chunks[index]
        return all(
            self.completed[nbr] >= t - 1 for nbr in chunk.neighbors.values()
        )

    def mark_done(self, index: int):
        self.completed[index] += 1
        for nbr in self.layout.chunks[index].neighbors.values():
            if abs(self.completed[nbr] - self.completed[index]) > 1:
                raise RuntimeError("wavefront monotonicity violated")

    @property
    def finished(self) -> bool:
        return all(c >= self.total_iterations for c in self.completed)


class _ChunkRun:
    """Runtime wrapper: chain state, tagged inbox, per-iteration history."""

    def __init__(self, chunk: Chunk, state: ChainState):
        self.chunk = chunk
        self.state = state
        # sender index -> {iteration tag -> list of (rect, rho, mu, phi)}
        self.inbox: dict[int, dict[int, list]] = {}
        self.history: dict[int, np.ndarray] = {}

    def snapshot_interior(self, t: int):
        r0, r1, c0, c1 = self.chunk.interior
        self.history[t] = self.state.object[r0:r1, c0:c1].copy()


def _strip_rects(chunk: Chunk, halo: int) -> dict[str, Rect]:
    """Interior boundary strips (extended-width across) sent to each neighbor."""
    r0, r1, c0, c1 = chunk.interior
    er0, er1, ec0, ec1 = chunk.extended
    rects = {}
    if "up" in chunk.neighbors:
        rects["up"] = (r0, min(r0 + halo, er1), ec0, ec1)
    if "down" in chunk.neighbors:
        rects["down"] = (max(r1 - halo, er0), r1, ec0, ec1)
    if "left" in chunk.neighbors:
        rects["left"] = (er0, er1, c0, min(c0 + halo, ec1))
    if "right" in chunk.neighbors:
        rects["right"] = (er0, er1, max(c1 - halo, ec0), c1)
    return rects


def exchange_halos(layout: ChunkLayout, runs: dict[int, "_ChunkRun"], index: int):
    """Copy the chunk's boundary strips into each neighbor's tagged inbox.

    Both object values and expected-image (mu cache) contributions travel,
    along with latent counts, tagged with the sender's completed iteration.
    """
    run = runs[index]
    chunk = run.chunk
    tag = run.state.iteration
    st = run.state
    for direction, rect in _strip_rects(chunk, layout.halo).items():
        nbr = chunk.neighbors[direction]
        if nbr not in runs:
            raise RuntimeError(f"missing neighbor state for chunk {nbr}")
        r0, r1, c0, c1 = rect
        strip = (
            rect,
            st.object[r0:r1, c0:c1].copy(),
            st.expected[r0:r1, c0:c1].copy(),
            st.photons[r0:r1, c0:c1].copy(),
        )
        runs[nbr].inbox.setdefault(index, {}).setdefault(tag, []).append(strip)


def _apply_inbox(run: _ChunkRun, expected_tag: int):
    """Paste all neighbor strips carrying exactly the expected iteration tag."""
    st = run.state
    for sender in sorted(run.inbox):
        tags = run.inbox[sender]
        if expected_tag not in tags:
            raise RuntimeError(
                f"chunk {run.chunk.index} at iteration {expected_tag + 1} is "
                f"missing halo tag {expected_tag} from {sender} "
                f"(available: {sorted(tags)})"
            )
        for rect, rho, mu, phi in tags.pop(expected_tag):
            r0, r1, c0, c1 = rect
            st.object[r0:r1, c0:c1] = rho
            st.expected[r0:r1, c0:c1] = mu
            st.photons[r0:r1, c0:c1] = phi


def _recompute_interior_mu(run: _ChunkRun, psf: PSFKernel, image_shape):
    """Rebuild the interior mu cache from the local object view.

    Also records the divergence of the incremental cache against the fresh
    value (forced-refresh diagnostics).
    """
    h = psf.half_support
    r0, r1, c0, c1 = run.chunk.interior
    pr0, pr1 = max(0, r0 - h), min(image_shape[0], r1 + h)
    pc0, pc1 = max(0, c0 - h), min(image_shape[1], c1 + h)
    patch = run.state.object[pr0:pr1, pc0:pc1]
    conv = fftconvolve(patch, psf.values, mode="same")
    fresh = conv[r0 - pr0 : r1 - pr0, c0 - pc0 : c1 - pc0]
    fresh = np.maximum(fresh, 0.0)
    cached = run.state.expected[r0:r1, c0:c1]
    scale = max(float(np.abs(fresh).max()), 1e-300)
    div = float(np.abs(cached - fresh).max()) / scale
    run.state.mu_cache_divergence = max(run.state.mu_cache_divergence, div)
    run.state.expected[r0:r1, c0:c1] = fresh


class _Aggregator:
    """Assembles globally consistent iteration snapshots and accumulates samples."""

    def __init__(self, layout: ChunkLayout, config: SamplerConfig, initial: np.ndarray):
        self.layout = layout
        self.config = config
        self.snapshots: dict[int, np.ndarray] = {0: initial.copy()}
        self.next_assemble = 1
        shape = layout.image_shape
        self.mean_acc = np.zeros(shape)
        self.m2_acc = np.zeros(shape)
        self.retained: list[np.ndarray] = []
        self.n_acc = 0

    def collect(self, runs: dict[int, _ChunkRun]):
        cfg = self.config
        while self.next_assemble <= cfg.total_sweeps and all(
            self.next_assemble in run.history for run in runs.values()
        ):
            t = self.next_assemble
            snap = np.empty(self.layout.image_shape)
            for run in runs.values():
                r0, r1, c0, c1 = run.chunk.interior
                snap[r0:r1, c0:c1] = run.history.pop(t)
            self.snapshots[t] = snap
            if t > cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
                if self.n_acc < cfg.n_samples:
                    self.mean_acc += snap
                    self.m2_acc += snap * snap
                    self.retained.append(snap.copy())
                    self.n_acc += 1
            keep_from = t - self.layout.diameter - 1
            for old in [k for k in self.snapshots if k < keep_from]:
                del self.snapshots[old]
            self.next_assemble += 1


def _advance(
    run: _ChunkRun,
    aggregator: _Aggregator,
    layout: ChunkLayout,
    raw: np.ndarray,
    psf: PSFKernel,
    camera: CameraMap,
    tables: PriorTables | None,
    config: SamplerConfig,
    lock: threading.Lock,
):
    """Run one MCMC iteration of one chunk (state owned exclusively here)."""
    t = run.state.iteration + 1
    multi = len(layout.chunks) > 1
    with lock:
        if multi:
            _apply_inbox(run, t - 1)
        if multi and tables is not None:
            s = max(0, t - 1 - layout.diameter)
            snap = aggregator.snapshots[s]
            er0, er1, ec0, ec1 = run.chunk.extended
            block = run.state.object[er0:er1, ec0:ec1].copy()
            run.state.object[:] = snap
            run.state.object[er0:er1, ec0:ec1] = block
    if multi or (t - 1) % config.mu_refresh_sweeps == 0:
        _recompute_interior_mu(run, psf, layout.image_shape)
        if tables is not None:
            run.state.refresh_spectrum(tables)
    r0, r1, c0, c1 = run.chunk.interior
    gibbs_sweep_chunk(run.state, (r0, r1, c0, c1), raw, psf, camera, tables, config)
    run.snapshot_interior(t)


def run_wavefront(
    raw: ImageGrid,
    psf: PSFKernel,
    camera: CameraMap,
    config: SamplerConfig,
    n_workers: int = 1,
    layout: ChunkLayout | None = None,
) -> PosteriorSummary:
    """Posterior sampling with chunked, wavefront-scheduled Gibbs sweeps.

    With a single-chunk layout this reduces bit-for-bit to the serial
    chain. Outputs depend on (layout, seed) only, never on ``n_workers``.
    """
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    if camera.shape != raw.shape:
        raise ValueError("camera maps do not match the raw image")
    if not np.all(np.isfinite(raw.values)):
        raise ValueError("raw image must be finite")
    if layout is None:
        side = config.chunk_side or default_chunk_side(psf)
        layout = build_layout(raw.shape, psf, side)

    tables = None
    if config.spectral_prior:
        otf = otf_from_psf(psf, raw.shape)
        prior = build_prior(otf, config.alpha_floor)
        tables = PriorTables(prior, raw.shape)

    pe = adu_to_photon_estimate(raw, camera).values
    init_obj = np.maximum(pe, config.eps_init)
    init_mu = np.maximum(fftconvolve(init_obj, psf.values, mode="same"), 0.0)
    init_phi = np.round(pe)

    runs: dict[int, _ChunkRun] = {}
    for chunk in layout.chunks:
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(config.seed, spawn_key=(chunk.index,)))
        )
        state = ChainState(
            object=init_obj.copy(),
            photons=init_phi.copy(),
            expected=init_mu.copy(),
            rng=rng,
        )
        if tables is not None:
            state.refresh_spectrum(tables)
        run = _ChunkRun(chunk, state)
        run.snapshot_interior(0)
        runs[chunk.index] = run

    aggregator = _Aggregator(layout, config, init_obj)
    aggregator.collect(runs)  # consumes iteration-0 history
    schedule = WavefrontSchedule(layout, config.total_sweeps)
    lock = threading.Lock()
    cond = threading.Condition(lock)
    running: set[int] = set()
    errors: list[BaseException] = []

    if len(layout.chunks) > 1:
        for idx in runs:
            exchange_halos(layout, runs, idx)

    raw_vals = raw.values

    def pick_ready() -> int | None:
        for idx in range(len(layout.chunks)):
            if idx in running:
                continue
            if schedule.runnable(idx):
                return idx
        return None

    def worker():
        while True:
            with cond:
                while True:
                    if errors or schedule.finished:
                        return
                    idx = pick_ready()
                    if idx is not None:
                        break
                    if not running:
                        errors.append(
                            RuntimeError(
                                "wavefront deadlock: no runnable chunk; "
                                f"counters={schedule.completed}"
                            )
                        )
                        cond.notify_all()
                        return
                    cond.wait()
                running.add(idx)
            try:
                _advance(
                    runs[idx], aggregator, layout, raw_vals, psf, camera,
                    tables, config, lock,
                )
            except BaseException as exc:  # propagate to the caller
                with cond:
                    errors.append(exc)
                    running.discard(idx)
                    cond.notify_all()
                return
            with cond:
                running.discard(idx)
                schedule.mark_done(idx)
                if len(layout.chunks) > 1:
                    exchange_halos(layout, runs, idx)
                aggregator.collect(runs)
                cond.notify_all()

    if n_workers == 1:
        worker()
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(worker) for _ in range(n_workers)]
            for f in futures:
                f.result()
    if errors:
        raise errors[0]

    total_props = sum(r.state.proposals for r in runs.values())
    total_accs = sum(r.state.accepts for r in runs.values())
    return summarize(
        aggregator.mean_acc,
        aggregator.m2_acc,
        aggregator.n_acc,
        aggregator.retained,
        raw.pixel_pitch,
        total_accs / total_props if total_props else 0.0,
    )
