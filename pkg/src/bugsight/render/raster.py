"""Triangle fill kernels.

Triangles arrive fully set up: screen vertices in 1/16-pixel fixed point,
positive-area orientation, per-vertex ``1/z``, ``u/z`` and
``v/z``, a pixel bounding box and per-triangle material data.  The kernels
walk pixels in a fixed order and resolve visibility against a depth buffer.

Per-pixel ``state``: 0 empty, 1 front face, 2 back face.  A candidate wins
when strictly nearer by more than ``eps``.  Within ``eps`` a front face beats
a back face; equal facings are decided by the frame's ``tie_bits``.

The numba and numpy versions evaluate the same float64 expressions in the
same order and must agree bit for bit.
"""
import numpy as np

from .._accel import USE_NUMBA, njit

MISSING_RGB = (255, 0, 255)


@njit
def _fill_numba(fx, fy, bias, iz, uz, vz, back, tex, shade, label, bbox,
                atlas, tex_off, tex_w, tex_h,
                zbuf, state, color, labels, tie_bits,
                near, far, eps, backface_label):
    for t in range(fx.shape[0]):
        x0 = fx[t, 0]
        y0 = fy[t, 0]
        x1 = fx[t, 1]
        y1 = fy[t, 1]
        x2 = fx[t, 2]
        y2 = fy[t, 2]
        area = float((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0))
        is_back = back[t]
        face = 2 if is_back else 1
        lab = label[t]
        if lab == 0 and is_back:
            lab = backface_label
        tid = tex[t]
        sh = shade[t]
        for py in range(bbox[t, 2], bbox[t, 3] + 1):
            cy = py * 16 + 8
            for px in range(bbox[t, 0], bbox[t, 1] + 1):
                cx = px * 16 + 8
                e12 = (x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)
                if e12 + bias[t, 0] < 0:
                    continue
                e20 = (x0 - x2) * (cy - y2) - (y0 - y2) * (cx - x2)
                if e20 + bias[t, 1] < 0:
                    continue
                e01 = (x1 - x0) * (cy - y0) - (y1 - y0) * (cx - x0)
                if e01 + bias[t, 2] < 0:
                    continue
                w0 = e12 / area
                w1 = e20 / area
                w2 = e01 / area
                inv = w0 * iz[t, 0] + w1 * iz[t, 1] + w2 * iz[t, 2]
                depth = 1.0 / inv
                if depth >= far:
                    continue
                if depth < near:
                    depth = near
                st = state[py, px]
                if st != 0:
                    old = zbuf[py, px]
                    if depth < old - eps:
                        pass
                    elif depth < old + eps:
                        if face != st:
                            if face == 2:
                                continue
                        elif not tie_bits[py, px]:
                            continue
                    else:
                        continue
                zbuf[py, px] = depth
                state[py, px] = face
                labels[py, px] = lab
                if tid < 0:
                    color[py, px, 0] = 255
                    color[py, px, 1] = 0
                    color[py, px, 2] = 255
                else:
                    u = (w0 * uz[t, 0] + w1 * uz[t, 1] + w2 * uz[t, 2]) / inv
                    v = (w0 * vz[t, 0] + w1 * vz[t, 1] + w2 * vz[t, 2]) / inv
                    w = tex_w[tid]
                    h = tex_h[tid]
                    tx = int(np.floor(u * w)) % w
                    ty = (h - 1) - int(np.floor(v * h)) % h
                    base = tex_off[tid] + (ty * w + tx) * 3
                    color[py, px, 0] = int(atlas[base] * sh)
                    color[py, px, 1] = int(atlas[base + 1] * sh)
                    color[py, px, 2] = int(atlas[base + 2] * sh)


def _fill_numpy(fx, fy, bias, iz, uz, vz, back, tex, shade, label, bbox,
                atlas, tex_off, tex_w, tex_h,
                zbuf, state, color, labels, tie_bits,
                near, far, eps, backface_label):
    for t in range(fx.shape[0]):
        xa, xb, ya, yb = bbox[t]
        if xa > xb or ya > yb:
            continue
        x0, x1, x2 = fx[t]
        y0, y1, y2 = fy[t]
        area = float((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0))
        cy = (np.arange(ya, yb + 1, dtype=np.int64) * 16 + 8)[:, None]
        cx = (np.arange(xa, xb + 1, dtype=np.int64) * 16 + 8)[None, :]
        e12 = (x2 - x1) * (cy - y1) - (y2 - y1) * (cx - x1)
        e20 = (x0 - x2) * (cy - y2) - (y0 - y2) * (cx - x2)
        e01 = (x1 - x0) * (cy - y0) - (y1 - y0) * (cx - x0)
        inside = (e12 + bias[t, 0] >= 0) & (e20 + bias[t, 1] >= 0) & (e01 + bias[t, 2] >= 0)
        if not inside.any():
            continue
        rows, cols = np.nonzero(inside)
        e12 = e12[rows, cols]
        e20 = e20[rows, cols]
        e01 = e01[rows, cols]
        py = rows + ya
        px = cols + xa
        w0 = e12 / area
        w1 = e20 / area
        w2 = e01 / area
        inv = w0 * iz[t, 0] + w1 * iz[t, 1] + w2 * iz[t, 2]
        depth = 1.0 / inv
        ok = depth < far
        depth = np.where(depth < near, near, depth)
        face = 2 if back[t] else 1
        st = state[py, px]
        old = zbuf[py, px]
        nearer = depth < old - eps
        tie = ~nearer & (depth < old + eps)
        tie_win = np.where(st != face, face == 1, tie_bits[py, px])
        win = ok & ((st == 0) | nearer | (tie & tie_win))
        if not win.any():
            continue
        py, px = py[win], px[win]
        w0, w1, w2, inv = w0[win], w1[win], w2[win], inv[win]
        zbuf[py, px] = depth[win]
        state[py, px] = face
        lab = label[t]
        if lab == 0 and back[t]:
            lab = backface_label
        labels[py, px] = lab
        tid = tex[t]
        if tid < 0:
            color[py, px] = MISSING_RGB
            continue
        u = (w0 * uz[t, 0] + w1 * uz[t, 1] + w2 * uz[t, 2]) / inv
        v = (w0 * vz[t, 0] + w1 * vz[t, 1] + w2 * vz[t, 2]) / inv
        w, h = int(tex_w[tid]), int(tex_h[tid])
        tx = np.floor(u * w).astype(np.int64) % w
        ty = (h - 1) - np.floor(v * h).astype(np.int64) % h
        base = tex_off[tid] + (ty * w + tx) * 3
        sh = shade[t]
        for c in range(3):
            color[py, px, c] = (atlas[base + c] * sh).astype(np.int64)


def fill_triangles(*args, backend=None):
    """Rasterise prepared triangles into the given buffers (in place).

    ``backend`` is ``"numba"``, ``"numpy"`` or ``None`` for the configured default.
    """
    if backend is None:
        backend = "numba" if USE_NUMBA else "numpy"
    if backend == "numba":
        return _fill_numba(*args)
    if backend == "numpy":
        return _fill_numpy(*args)
    raise ValueError(f"unknown raster backend {backend!r}")
