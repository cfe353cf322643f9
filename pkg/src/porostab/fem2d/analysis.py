"""Post-processing of P1 fields: integrals, spread, point values and the
dominant pattern wavelength."""

from __future__ import annotations

import numpy as np
import scipy.interpolate

from .mesh import Mesh


def lumped_weights(mesh: Mesh) -> np.ndarray:
    """``int phi_i``: one third of the area of every incident triangle."""
    a = mesh.signed_areas() / 3.0
    return np.bincount(mesh.triangles.ravel(), weights=np.repeat(a, 3), minlength=mesh.n_vertices)


def integral(mesh: Mesh, values: np.ndarray) -> float:
    """Exact integral of a P1 field."""
    return float(lumped_weights(mesh) @ values)


def spatial_std(mesh: Mesh, values: np.ndarray) -> float:
    """Area-weighted standard deviation of a P1 field (exact quadrature of
    the squared deviation from its mean)."""
    area = mesh.signed_areas()
    v = values[mesh.triangles]
    mean = float((area * v.mean(axis=1)).sum() / area.sum())
    d = v - mean
    # int over a triangle of (sum d_i l_i)^2 = |T|/12 (sum d_i^2 + (sum d_i)^2)
    sq = area / 12.0 * ((d * d).sum(axis=1) + d.sum(axis=1) ** 2)
    return float(np.sqrt(max(sq.sum(), 0.0) / area.sum()))


def locate(mesh: Mesh, points) -> tuple[np.ndarray, np.ndarray]:
    """Containing triangle and barycentric coordinates of each point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p = mesh.vertices[mesh.triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    tris, bary = [], []
    for x in pts:
        r = x - p[:, 0]
        l1 = (r[:, 0] * e2[:, 1] - r[:, 1] * e2[:, 0]) / det
        l2 = (e1[:, 0] * r[:, 1] - e1[:, 1] * r[:, 0]) / det
        l0 = 1.0 - l1 - l2
        worst = np.minimum(np.minimum(l0, l1), l2)
        k = int(np.argmax(worst))
        if worst[k] < -1e-9:
            raise ValueError(f"point {x.tolist()} lies outside the mesh")
        tris.append(k)
        bary.append((l0[k], l1[k], l2[k]))
    return np.array(tris), np.array(bary)


def point_values(mesh: Mesh, values: np.ndarray, located) -> np.ndarray:
    tris, bary = located
    return np.einsum("pi,pi->p", values[mesh.triangles[tris]], bary)


def radial_autocorrelation(mesh: Mesh, values: np.ndarray, n_grid: int = 256):
    """Radially averaged, overlap-normalised autocorrelation of the
    mean-free field sampled on a square grid.

    Returns ``(lags, correlation)`` with ``correlation[0] == 1``.
    """
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    h = float((hi - lo).max()) / (n_grid - 1)
    xs = lo[0] + h * np.arange(n_grid)
    ys = lo[1] + h * np.arange(n_grid)
    X, Y = np.meshgrid(xs, ys)
    interp = scipy.interpolate.LinearNDInterpolator(mesh.vertices, values)
    f = interp(X, Y)
    mask = np.isfinite(f)
    f = np.where(mask, f - np.nanmean(f), 0.0)
    shape = (2 * n_grid, 2 * n_grid)
    F = np.fft.rfft2(f, shape)
    Mk = np.fft.rfft2(mask.astype(float), shape)
    corr = np.fft.irfft2(F * np.conj(F), shape)
    overlap = np.fft.irfft2(Mk * np.conj(Mk), shape)
    iy, ix = np.meshgrid(np.fft.fftfreq(shape[0]) * shape[0], np.fft.fftfreq(shape[1]) * shape[1], indexing="ij")
    r = np.hypot(ix, iy)
    good = overlap > 0.25 * overlap[0, 0]
    c = np.where(good, corr / np.where(good, overlap, 1.0), 0.0)
    bins = np.rint(r).astype(int)
    nb = n_grid
    sel = good & (bins < nb)
    total = np.bincount(bins[sel], weights=c[sel], minlength=nb)
    count = np.bincount(bins[sel], minlength=nb)
    valid = count > 0
    prof = np.full(nb, np.nan)
    prof[valid] = total[valid] / count[valid]
    prof /= prof[0]
    return h * np.arange(nb), prof


def dominant_wavelength(mesh: Mesh, values: np.ndarray, n_grid: int = 256) -> float:
    """Lag of the strongest correlation in the first positive lobe that
    follows the first negative lobe of the radial autocorrelation.

    Working with lobes rather than local extrema keeps bin-scale wiggles from
    being read as peaks. For a single wavenumber ``k`` the profile is
    ``J0(k r)``, so the returned lag is about ``1.117 * 2 pi / k``.
    Returns NaN when no such lobe exists.
    """
    lags, prof = radial_autocorrelation(mesh, values, n_grid)
    prof = prof[np.isfinite(prof)]
    neg = np.flatnonzero(prof < 0)
    if len(neg) == 0:
        return float("nan")
    pos = np.flatnonzero(prof[neg[0]:] > 0)
    if len(pos) == 0:
        return float("nan")
    start = neg[0] + pos[0]
    stop = np.flatnonzero(prof[start:] <= 0)
    end = start + (stop[0] if len(stop) else len(prof) - start)
    if end >= len(prof):
        return float("nan")
    return float(lags[start + int(np.argmax(prof[start:end]))])
