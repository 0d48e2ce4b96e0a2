"""Attraction-modified distances for noise-robust fuzzy clustering.

The squared distance between voxel i and cluster j is the plain squared
intensity difference scaled by ``1 - feature_weight*H - spatial_weight*F``:

* H averages the neighbours' membership in cluster j, weighted by the
  intensity contrast ``g = |x_i - x_k|`` between voxel and neighbour;
* F averages the squared neighbour memberships, weighted by the square of
  the squared spatial offset ``q = dx^2 + dy^2 (+ dz^2)`` - proximity
  deliberately enters as q^2.

In 2-D the neighbourhood is the set of integer offsets with squared
radius below ``2**(level-1)``.  In 3-D the neighbours of a slice voxel
are grouped into concentric shells that reach into adjacent slices of
the parent volume; per-shell averages are blended with exponentially
decaying weights.  Neighbourhoods are clipped at the volume boundary
(no padding); a shell clipped away entirely hands its weight to the
surviving shells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from voxseg.errors import ValidationError
from voxseg.fcm import FcmConfig, jm_cost, update_centers, update_membership
from voxseg.volume import AXES, LabelVolume, SliceRef, Volume

# Strong attraction can push the scale factor negative; flooring it keeps
# every d^2 a usable squared distance.
FACTOR_FLOOR = 1e-6

# Squared-radius bands of the 3-D shells.  Offset counts per shell are
# 6 / 12 / 8 / 30 / 36 (cumulative 6, 18, 26, 56, 92).
SHELL_BANDS = ((1, 1), (2, 2), (3, 3), (4, 5), (6, 8))


@dataclass
class AttractionParams:
    """Attraction strengths plus neighbourhood geometry.

    feature_weight and spatial_weight scale the H and F terms and live in
    [0, 1]; ``level`` sizes the 2-D neighbourhood; ``depth`` counts 3-D
    shells; ``decay`` sets how fast shell weights fall off with rank.
    """

    feature_weight: float = 0.0
    spatial_weight: float = 0.0
    level: int = 2
    depth: int = 3
    decay: float = 1.1

    def __post_init__(self):
        if not 0.0 <= float(self.feature_weight) <= 1.0:
            raise ValidationError(f"feature_weight must be in [0, 1], got {self.feature_weight}")
        if not 0.0 <= float(self.spatial_weight) <= 1.0:
            raise ValidationError(f"spatial_weight must be in [0, 1], got {self.spatial_weight}")
        if int(self.level) < 2:
            raise ValidationError(f"level must be >= 2, got {self.level}")
        if not 2 <= int(self.depth) <= len(SHELL_BANDS):
            raise ValidationError(f"depth must be in [2, {len(SHELL_BANDS)}], got {self.depth}")
        if not 0.01 <= float(self.decay) <= 100.0:
            raise ValidationError(f"decay must be in [0.01, 100], got {self.decay}")


def decay_weights(decay: float, depth: int) -> np.ndarray:
    """Normalised exponential shell weights exp(-r/decay), r = 1..depth."""
    if not float(decay) > 0:
        raise ValidationError(f"decay must be positive, got {decay}")
    if int(depth) < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    raw = np.exp(-np.arange(1, int(depth) + 1) / float(decay))
    return raw / raw.sum()


def neighborhood_2d(level: int) -> np.ndarray:
    """Integer offsets with 0 < dx^2 + dy^2 < 2**(level-1), sorted."""
    if int(level) < 2:
        raise ValidationError(f"level must be >= 2, got {level}")
    bound = 2 ** (int(level) - 1)
    radius = int(np.ceil(np.sqrt(bound)))
    offsets = [(dx, dy)
               for dx in range(-radius, radius + 1)
               for dy in range(-radius, radius + 1)
               if 0 < dx * dx + dy * dy < bound]
    return np.array(sorted(offsets), dtype=np.intp)


@dataclass(frozen=True)
class ShellTable:
    """Concentric 3-D offset shells, outermost last."""

    shells: tuple[np.ndarray, ...]
    bands: tuple[tuple[int, int], ...]

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.shells)

    @property
    def cumulative(self) -> tuple[int, ...]:
        return tuple(np.cumsum(self.counts).tolist())


def build_shell_table(depth: int) -> ShellTable:
    """Offsets of the first ``depth`` shells, grouped by squared radius band."""
    depth = int(depth)
    if not 2 <= depth <= len(SHELL_BANDS):
        raise ValidationError(f"depth must be in [2, {len(SHELL_BANDS)}], got {depth}")
    bands = SHELL_BANDS[:depth]
    shells = []
    reach = int(np.floor(np.sqrt(bands[-1][1])))
    for lo, hi in bands:
        members = [(dx, dy, dz)
                   for dx in range(-reach, reach + 1)
                   for dy in range(-reach, reach + 1)
                   for dz in range(-reach, reach + 1)
                   if lo <= dx * dx + dy * dy + dz * dz <= hi]
        shells.append(np.array(sorted(members), dtype=np.intp))
    return ShellTable(tuple(shells), bands)


def _windows(nx: int, ny: int, dx: int, dy: int):
    """Target / source slice pairs covering voxels whose (dx, dy) neighbour
    stays in bounds; None when no voxel qualifies."""
    tx0, tx1 = max(0, -dx), nx - max(0, dx)
    ty0, ty1 = max(0, -dy), ny - max(0, dy)
    if tx0 >= tx1 or ty0 >= ty1:
        return None
    target = (slice(tx0, tx1), slice(ty0, ty1))
    source = (slice(tx0 + dx, tx1 + dx), slice(ty0 + dy, ty1 + dy))
    return target, source


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num / den with zero denominators mapping to zero (flat patches
    attract nothing), clipped to [0, 1] to shed division dust."""
    out = np.divide(num, den[..., None], out=np.zeros_like(num), where=den[..., None] > 0)
    return np.clip(out, 0.0, 1.0)


class PlaneContext:
    """Neighbourhood bookkeeping for clustering one 2-D image."""

    def __init__(self, plane: np.ndarray, level: int = 2,
                 label_dims: tuple[int, int, int] | None = None,
                 unit_axis: int = 2, intensity_max: float | None = None):
        plane = np.asarray(plane, dtype=np.float64)
        if plane.ndim != 2:
            raise ValidationError(f"plane must be 2-D, got shape {plane.shape}")
        self.plane = plane
        self.shape = plane.shape
        self.offsets = neighborhood_2d(level)
        self.data = plane.ravel(order="F")
        self.unit_axis = unit_axis
        if label_dims is None:
            label_dims = (plane.shape[0], plane.shape[1], 1)
        self.label_dims = label_dims
        self.intensity_max = intensity_max

    def labels_volume(self, labels_flat: np.ndarray) -> LabelVolume:
        grid = labels_flat.reshape(self.shape, order="F").astype(np.uint8)
        return LabelVolume(self.label_dims, np.expand_dims(grid, self.unit_axis))

    def attraction_terms(self, u: np.ndarray, centers: np.ndarray,
                         fuzziness: float) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.shape
        c = len(np.asarray(centers).ravel())
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (nx * ny, c):
            raise ValidationError(f"membership shape {u.shape} does not match "
                                  f"{nx * ny} voxels x {c} clusters")
        ug = u.reshape(nx, ny, c, order="F")
        contrast_sum = np.zeros((nx, ny))
        contrast_vote = np.zeros((nx, ny, c))
        prox_sum = np.zeros((nx, ny))
        prox_vote = np.zeros((nx, ny, c))
        for dx, dy in self.offsets:
            win = _windows(nx, ny, int(dx), int(dy))
            if win is None:
                continue
            target, source = win
            g = np.abs(self.plane[target] - self.plane[source])
            q2 = float(dx * dx + dy * dy) ** 2
            nb = ug[source]
            contrast_sum[target] += g
            contrast_vote[target] += nb * g[..., None]
            prox_sum[target] += q2
            prox_vote[target] += nb ** 2 * q2
        h = _ratio(contrast_vote, contrast_sum)
        f = _ratio(prox_vote, prox_sum)
        return (h.reshape(nx * ny, c, order="F"),
                f.reshape(nx * ny, c, order="F"))


class SliceContext:
    """Neighbourhood bookkeeping for one slice segmented inside its volume.

    The clustering state covers the slice itself; neighbours in adjacent
    slices contribute their intensities directly and their memberships
    through the plain membership update against the current centers.
    """

    def __init__(self, vol: Volume, ref: SliceRef, depth: int = 3, decay: float = 1.1):
        axis = AXES[ref.axis]
        if not 0 <= ref.index < vol.dims[axis]:
            raise IndexError(f"slice {ref.axis}:{ref.index} out of range for dims {vol.dims}")
        self.grid = np.moveaxis(vol.data, axis, 2).astype(np.float64)
        self.axis = axis
        self.z = ref.index
        self.plane = self.grid[:, :, self.z]
        self.shape = self.plane.shape
        self.data = self.plane.ravel(order="F")
        self.table = build_shell_table(depth)
        self.weights = decay_weights(decay, depth)
        self.intensity_max = vol.intensity_max
        dims = list(vol.dims)
        dims[axis] = 1
        self.label_dims = tuple(dims)

    def labels_volume(self, labels_flat: np.ndarray) -> LabelVolume:
        grid = labels_flat.reshape(self.shape, order="F").astype(np.uint8)
        return LabelVolume(self.label_dims, np.moveaxis(grid[:, :, None], 2, self.axis))

    def _derived_plane(self, zk: int, centers: np.ndarray, fuzziness: float) -> np.ndarray:
        """Plain membership of plane zk against the given centers."""
        nx, ny = self.shape
        flat = self.grid[:, :, zk].ravel(order="F")
        d2 = (flat[:, None] - centers) ** 2
        return update_membership(d2, fuzziness).reshape(nx, ny, len(centers), order="F")

    def _terms_at(self, z_target: int, lookup, centers: np.ndarray,
                  fuzziness: float) -> tuple[np.ndarray, np.ndarray]:
        """Blended contrast / proximity terms for the plane at z_target.

        ``lookup(zk)`` must return the membership grid of any in-bounds
        plane; shells clipped at the volume boundary hand their weight to
        the shells that survive.
        """
        nx, ny = self.shape
        nz = self.grid.shape[2]
        c = centers.size
        tgt_plane = self.grid[:, :, z_target]
        h = np.zeros((nx, ny, c))
        f = np.zeros((nx, ny, c))
        weight_present = np.zeros((nx, ny))
        for w, shell in zip(self.weights, self.table.shells):
            contrast_sum = np.zeros((nx, ny))
            contrast_vote = np.zeros((nx, ny, c))
            prox_sum = np.zeros((nx, ny))
            prox_vote = np.zeros((nx, ny, c))
            reached = np.zeros((nx, ny), dtype=bool)
            for dx, dy, dz in shell:
                zk = z_target + int(dz)
                if not 0 <= zk < nz:
                    continue
                win = _windows(nx, ny, int(dx), int(dy))
                if win is None:
                    continue
                target, source = win
                g = np.abs(tgt_plane[target] - self.grid[source[0], source[1], zk])
                q2 = float(dx * dx + dy * dy + dz * dz) ** 2
                nb = lookup(zk)[source]
                contrast_sum[target] += g
                contrast_vote[target] += nb * g[..., None]
                prox_sum[target] += q2
                prox_vote[target] += nb ** 2 * q2
                reached[target] = True
            h += w * _ratio(contrast_vote, contrast_sum)
            f += w * _ratio(prox_vote, prox_sum)
            weight_present += w * reached
        # renormalise over the shells that actually reached each voxel
        ok = weight_present > 0
        denom = np.where(ok, weight_present, 1.0)[..., None]
        h = np.where(ok[..., None], h / denom, 0.0)
        f = np.where(ok[..., None], f / denom, 0.0)
        return np.clip(h, 0.0, 1.0), np.clip(f, 0.0, 1.0)

    def attraction_terms(self, u: np.ndarray, centers: np.ndarray,
                         fuzziness: float) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.shape
        centers = np.asarray(centers, dtype=np.float64).ravel()
        c = centers.size
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (nx * ny, c):
            raise ValidationError(f"membership shape {u.shape} does not match "
                                  f"{nx * ny} voxels x {c} clusters")
        u_grid = u.reshape(nx, ny, c, order="F")
        cache: dict[int, np.ndarray] = {}

        def lookup(zk: int) -> np.ndarray:
            if zk == self.z:
                return u_grid
            if zk not in cache:
                cache[zk] = self._derived_plane(zk, centers, fuzziness)
            return cache[zk]

        h, f = self._terms_at(self.z, lookup, centers, fuzziness)
        return (h.reshape(nx * ny, c, order="F"),
                f.reshape(nx * ny, c, order="F"))


def plane_context(img: Volume | np.ndarray, level: int = 2) -> PlaneContext:
    """Context for a 2-D image given as a single-slice volume or array."""
    if isinstance(img, Volume):
        return PlaneContext(img.plane(), level, label_dims=img.dims,
                            unit_axis=img.unit_axis(), intensity_max=img.intensity_max)
    return PlaneContext(np.asarray(img), level)


def slice_context(vol: Volume, ref: SliceRef, depth: int = 3,
                  decay: float = 1.1) -> SliceContext:
    """Context for one slice with shell neighbourhoods into the volume."""
    return SliceContext(vol, ref, depth, decay)


def attraction_distances(ctx, u: np.ndarray, centers: np.ndarray,
                         fuzziness: float, feature_weight: float,
                         spatial_weight: float) -> np.ndarray:
    """Full matrix of attraction-scaled squared distances."""
    h, f = ctx.attraction_terms(u, centers, fuzziness)
    centers = np.asarray(centers, dtype=np.float64).ravel()
    base = (ctx.data[:, None] - centers) ** 2
    factor = np.maximum(1.0 - feature_weight * h - spatial_weight * f, FACTOR_FLOOR)
    return base * factor


def attraction_distance_2d(i: int, j: int, plane: np.ndarray, u: np.ndarray,
                           centers: np.ndarray, params: AttractionParams,
                           fuzziness: float = 2.0) -> float:
    """Scalar 2-D attraction distance for voxel i, cluster j."""
    ctx = plane_context(plane, params.level)
    d2 = attraction_distances(ctx, u, centers, fuzziness,
                              params.feature_weight, params.spatial_weight)
    return float(d2[i, j])


def attraction_distance_3d(i: int, j: int, vol: Volume, ref: SliceRef,
                           u: np.ndarray, centers: np.ndarray,
                           params: AttractionParams, fuzziness: float = 2.0) -> float:
    """Scalar 3-D attraction distance for slice voxel i, cluster j."""
    ctx = slice_context(vol, ref, params.depth, params.decay)
    d2 = attraction_distances(ctx, u, centers, fuzziness,
                              params.feature_weight, params.spatial_weight)
    return float(d2[i, j])


def ifcm_step(ctx, u: np.ndarray, centers: np.ndarray, params: AttractionParams,
              cfg: FcmConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """One Picard update under attraction distances.

    Recomputes distances from the given state, updates memberships, then
    centers; returns the new pair plus the cost evaluated with the new
    memberships against the distances just used.
    """
    if params.feature_weight == 0.0 and params.spatial_weight == 0.0:
        # attraction switched off: the scale factor is identically one
        centers_arr = np.asarray(centers, dtype=np.float64).ravel()
        d2 = (ctx.data[:, None] - centers_arr) ** 2
    else:
        d2 = attraction_distances(ctx, u, centers, cfg.fuzziness,
                                  params.feature_weight, params.spatial_weight)
    u_next = update_membership(d2, cfg.fuzziness)
    cost = jm_cost(u_next, d2, cfg.fuzziness)
    centers_next, u_next = update_centers(u_next, ctx.data, cfg.fuzziness)
    return u_next, centers_next, cost
