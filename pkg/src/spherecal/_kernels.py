"""Optional numba fast paths for the per-pixel resampling loops.

Each kernel mirrors its numpy reference implementation operation-for-
operation (float64 weights, float32 stores, no fastmath), so results are
bit-identical and the warp engine's determinism and convexity guarantees
hold on either path. Import failure falls back to numpy transparently.
"""

from __future__ import annotations

import math

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def bilinear_kernel(
        src: np.ndarray,
        sx: np.ndarray,
        sy: np.ndarray,
        wrap_x: bool,
        out: np.ndarray,
    ) -> None:
        h, w, c = src.shape
        n = sx.size
        fx = sx.ravel()
        fy = sy.ravel()
        fout = out.reshape(n, c)
        for i in range(n):
            xf = fx[i] - 0.5
            yf = fy[i] - 0.5
            x0 = int(math.floor(xf))
            y0 = int(math.floor(yf))
            tx = xf - x0
            ty = yf - y0
            if wrap_x:
                x0i = x0 % w
                x1i = (x0 + 1) % w
            else:
                x0i = min(max(x0, 0), w - 1)
                x1i = min(max(x0 + 1, 0), w - 1)
            y0i = min(max(y0, 0), h - 1)
            y1i = min(max(y0 + 1, 0), h - 1)
            for ch in range(c):
                top = src[y0i, x0i, ch] * (1.0 - tx) + src[y0i, x1i, ch] * tx
                bot = src[y1i, x0i, ch] * (1.0 - tx) + src[y1i, x1i, ch] * tx
                fout[i, ch] = top * (1.0 - ty) + bot * ty

    @numba.njit(cache=True, nogil=True)
    def equirect_map_kernel(
        xs: np.ndarray,
        ys: np.ndarray,
        focal: float,
        xi: float,
        u0: float,
        v0: float,
        rot: np.ndarray,
        pano_w: float,
        pano_h: float,
        out_x: np.ndarray,
        out_y: np.ndarray,
    ) -> None:
        n = xs.size
        fx = xs.ravel()
        fy = ys.ravel()
        ox = out_x.ravel()
        oy = out_y.ravel()
        two_pi = 2.0 * math.pi
        for i in range(n):
            uh = (fx[i] - u0) / focal
            vh = (fy[i] - v0) / focal
            r2 = uh * uh + vh * vh
            omega = (xi + math.sqrt(1.0 + (1.0 - xi * xi) * r2)) / (r2 + 1.0)
            dx = omega * uh
            dy = omega * vh
            dz = omega - xi
            # row-vector d_cam @ rot == rot^T @ d_cam
            wx = dx * rot[0, 0] + dy * rot[1, 0] + dz * rot[2, 0]
            wy = dx * rot[0, 1] + dy * rot[1, 1] + dz * rot[2, 1]
            wz = dx * rot[0, 2] + dy * rot[1, 2] + dz * rot[2, 2]
            lam = math.atan2(wx, wz)
            s = -wy
            if s > 1.0:
                s = 1.0
            elif s < -1.0:
                s = -1.0
            phi = math.asin(s)
            ox[i] = (lam / two_pi + 0.5) * pano_w
            oy[i] = (0.5 - phi / math.pi) * pano_h
