"""End-to-end segmentation pipelines.

Every pipeline clusters one slice: a plain fuzzy c-means fit (seeded by
the Gaussian-mixture init) establishes the starting state, an optional
optimiser picks the attraction strengths by probing a short attraction
update from that state, and a full attraction-distance iteration runs to
convergence from the best probe's state.  The 2-D pipelines confine the
neighbourhood to the slice; the 3-D pipeline reaches into adjacent
slices of the parent volume through shell neighbourhoods.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from voxseg.attraction import (AttractionParams, FACTOR_FLOOR, PlaneContext,
                               SliceContext, ifcm_step, plane_context,
                               slice_context)
from voxseg.errors import ValidationError
from voxseg.fcm import (FcmConfig, fcm, gmm_init, jm_cost, update_centers,
                        update_membership)
from voxseg.metrics import defuzzify
from voxseg.optimize import GaConfig, OptResult, PsoConfig, ga_minimize, pso_minimize
from voxseg.volume import LabelVolume, SliceRef, Volume

WEIGHT_BOUNDS = ((0.0, 1.0), (0.0, 1.0))


@dataclass
class SegmentationResult:
    membership: np.ndarray
    centers: np.ndarray
    labels: LabelVolume
    feature_weight: float
    spatial_weight: float
    iterations: int
    final_cost: float
    wall_time: float


def _context(domain, params: AttractionParams):
    if isinstance(domain, (PlaneContext, SliceContext)):
        return domain
    if isinstance(domain, Volume):
        return plane_context(domain, params.level)
    raise ValidationError(f"cannot segment a {type(domain).__name__}")


def _initial_state(ctx, clusters: int, cfg: FcmConfig):
    centers0 = gmm_init(ctx.data, clusters, scale=ctx.intensity_max)
    return fcm(ctx.data, clusters, cfg, init_centers=centers0)


def _converge(ctx, u, centers, params: AttractionParams, cfg: FcmConfig):
    """Iterate attraction updates until the membership matrix settles."""
    iterations = 0
    cost = float("nan")
    for _ in range(cfg.max_iterations):
        u_next, centers, cost = ifcm_step(ctx, u, centers, params, cfg)
        shift = float(np.abs(u_next - u).max())
        u = u_next
        iterations += 1
        if shift < cfg.tolerance:
            break
    return u, centers, cost, iterations


def _probe(ctx, u0, centers0, cfg: FcmConfig, params: AttractionParams,
           steps: int | None):
    """Objective for weight search: cost after ``steps`` attraction updates
    from the frozen starting state (None = run to convergence).

    The neighbourhood terms and base distances depend only on the start
    state, so the first update is shared across all candidate weights.
    """
    h, f = ctx.attraction_terms(u0, centers0, cfg.fuzziness)
    base = (ctx.data[:, None] - centers0) ** 2

    def propagate(feature_weight: float, spatial_weight: float):
        d2 = base * np.maximum(1.0 - feature_weight * h - spatial_weight * f,
                               FACTOR_FLOOR)
        u = update_membership(d2, cfg.fuzziness)
        cost = jm_cost(u, d2, cfg.fuzziness)
        centers, u = update_centers(u, ctx.data, cfg.fuzziness)
        done = 1
        p = replace(params, feature_weight=feature_weight, spatial_weight=spatial_weight)
        while steps is None or done < steps:
            u_prev = u
            u, centers, cost = ifcm_step(ctx, u, centers, p, cfg)
            done += 1
            if steps is None and (float(np.abs(u - u_prev).max()) < cfg.tolerance
                                  or done >= cfg.max_iterations):
                break
        return u, centers, cost

    return propagate


def _finish(ctx, u, centers, feature_weight, spatial_weight, iterations,
            cost, started) -> SegmentationResult:
    labels = ctx.labels_volume(np.argmax(u, axis=1))
    return SegmentationResult(
        membership=u, centers=centers, labels=labels,
        feature_weight=float(feature_weight), spatial_weight=float(spatial_weight),
        iterations=iterations, final_cost=float(cost),
        wall_time=time.perf_counter() - started)


def ifcm(domain, params: AttractionParams, init=None,
         cfg: FcmConfig | None = None) -> SegmentationResult:
    """Attraction-distance clustering at fixed weights.

    ``domain`` is a single-slice volume, a plane context, or a slice
    context; ``init`` is a (membership, centers) pair, typically the
    output of :func:`voxseg.fcm.gmm_fcm`.  With ``init=None`` the
    starting state is fit here (requires passing the cluster count via
    the centers of ``init`` otherwise).
    """
    cfg = cfg or FcmConfig()
    started = time.perf_counter()
    ctx = _context(domain, params)
    if init is None:
        raise ValidationError("ifcm needs an initial (membership, centers) state")
    u, centers = init
    u = np.asarray(u, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64).ravel()
    if u.shape != (ctx.data.size, centers.size):
        raise ValidationError(f"init shapes {u.shape} / {centers.shape} do not "
                              f"match {ctx.data.size} voxels")
    u, centers, cost, iterations = _converge(ctx, u, centers, params, cfg)
    return _finish(ctx, u, centers, params.feature_weight, params.spatial_weight,
                   iterations, cost, started)


def _optimised_run(ctx, clusters, cfg, params, optimiser, fixed, probe_steps,
                   started) -> SegmentationResult:
    state = _initial_state(ctx, clusters, cfg)
    if fixed is not None:
        feature_weight, spatial_weight = (float(fixed[0]), float(fixed[1]))
        u, centers = state.membership, state.centers
    else:
        propagate = _probe(ctx, state.membership, state.centers, cfg, params,
                           probe_steps)
        best: OptResult = optimiser(lambda pos: propagate(pos[0], pos[1])[2])
        feature_weight, spatial_weight = (float(best.position[0]),
                                          float(best.position[1]))
        u, centers, _ = propagate(feature_weight, spatial_weight)
    tuned = replace(params, feature_weight=feature_weight,
                    spatial_weight=spatial_weight)
    u, centers, cost, iterations = _converge(ctx, u, centers, tuned, cfg)
    return _finish(ctx, u, centers, feature_weight, spatial_weight,
                   iterations, cost, started)


def pso_ifcm(img, clusters: int, cfg: FcmConfig | None = None,
             params: AttractionParams | None = None,
             pso: PsoConfig | None = None,
             fixed: tuple[float, float] | None = None,
             probe_steps: int | None = 1) -> SegmentationResult:
    """Swarm-tuned attraction clustering of a 2-D image.

    The swarm searches (feature_weight, spatial_weight) in [0, 1]^2 with
    the no-attraction point planted in the initial swarm; ``fixed``
    bypasses the search entirely and runs at the given weights.
    """
    cfg = cfg or FcmConfig()
    params = params or AttractionParams()
    pso = pso or PsoConfig()
    pso = replace(pso, bounds=WEIGHT_BOUNDS)
    started = time.perf_counter()
    ctx = _context(img, params)

    def optimiser(objective):
        return pso_minimize(objective, pso, seed_points=[(0.0, 0.0)])

    return _optimised_run(ctx, clusters, cfg, params, optimiser, fixed,
                          probe_steps, started)


def ga_ifcm(img, clusters: int, cfg: FcmConfig | None = None,
            params: AttractionParams | None = None,
            ga: GaConfig | None = None,
            fixed: tuple[float, float] | None = None,
            probe_steps: int | None = 1) -> SegmentationResult:
    """Genetic-algorithm-tuned attraction clustering of a 2-D image."""
    cfg = cfg or FcmConfig()
    params = params or AttractionParams()
    ga = ga or GaConfig()
    ga = replace(ga, bounds=WEIGHT_BOUNDS)
    started = time.perf_counter()
    ctx = _context(img, params)

    def optimiser(objective):
        return ga_minimize(objective, ga, seed_points=[(0.0, 0.0)])

    return _optimised_run(ctx, clusters, cfg, params, optimiser, fixed,
                          probe_steps, started)


def pso_ifcm_3d(vol: Volume, ref: SliceRef, clusters: int,
                depth: int = 3, decay: float = 1.1,
                cfg: FcmConfig | None = None, pso: PsoConfig | None = None,
                fixed: tuple[float, float] | None = None,
                probe_steps: int | None = 1) -> SegmentationResult:
    """Swarm-tuned clustering of one slice with 3-D shell neighbourhoods.

    Identical to :func:`pso_ifcm` except that attraction terms gather
    neighbours through the shell table, reaching into adjacent slices of
    ``vol``; the returned labels cover just the addressed slice.
    """
    cfg = cfg or FcmConfig()
    pso = pso or PsoConfig()
    pso = replace(pso, bounds=WEIGHT_BOUNDS)
    params = AttractionParams(depth=depth, decay=decay)
    started = time.perf_counter()
    ctx = slice_context(vol, ref, depth, decay)

    def optimiser(objective):
        return pso_minimize(objective, pso, seed_points=[(0.0, 0.0)])

    return _optimised_run(ctx, clusters, cfg, params, optimiser, fixed,
                          probe_steps, started)
