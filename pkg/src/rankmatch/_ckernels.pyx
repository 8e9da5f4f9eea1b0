# cython: language_level=3
"""Compiled twins of the kernels in ``_pykernels``.

Operation order mirrors the Python versions so results are bit-identical.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef inline double _fmin(double a, double b) nogil:
    return a if a < b else b


cdef inline double _fmax(double a, double b) nogil:
    return a if a > b else b


def iou_matrix(a, b):
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    cdef double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] O = out
    cdef double area_a, area_b, iw, ih, inter, union
    with nogil:
        for i in range(n):
            area_a = (A[i, 2] - A[i, 0]) * (A[i, 3] - A[i, 1])
            for j in range(m):
                area_b = (B[j, 2] - B[j, 0]) * (B[j, 3] - B[j, 1])
                iw = _fmin(A[i, 2], B[j, 2]) - _fmax(A[i, 0], B[j, 0])
                ih = _fmin(A[i, 3], B[j, 3]) - _fmax(A[i, 1], B[j, 1])
                inter = _fmax(iw, 0.0) * _fmax(ih, 0.0)
                union = area_a + area_b - inter
                if union > 0.0:
                    O[i, j] = inter / union
    return out


def giou_matrix(a, b):
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    cdef double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] O = out
    cdef double area_a, area_b, iw, ih, inter, union, iou, ew, eh, enclose
    with nogil:
        for i in range(n):
            area_a = (A[i, 2] - A[i, 0]) * (A[i, 3] - A[i, 1])
            for j in range(m):
                area_b = (B[j, 2] - B[j, 0]) * (B[j, 3] - B[j, 1])
                iw = _fmin(A[i, 2], B[j, 2]) - _fmax(A[i, 0], B[j, 0])
                ih = _fmin(A[i, 3], B[j, 3]) - _fmax(A[i, 1], B[j, 1])
                inter = _fmax(iw, 0.0) * _fmax(ih, 0.0)
                union = area_a + area_b - inter
                iou = inter / union if union > 0.0 else 0.0
                ew = _fmax(A[i, 2], B[j, 2]) - _fmin(A[i, 0], B[j, 0])
                eh = _fmax(A[i, 3], B[j, 3]) - _fmin(A[i, 1], B[j, 1])
                enclose = ew * eh
                if enclose > 0.0:
                    O[i, j] = iou - (enclose - union) / enclose
    return out


def nms_ordered(boxes, categories, order, double iou_threshold):
    cdef double[:, ::1] B = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    cdef cnp.int64_t[::1] C = np.ascontiguousarray(categories, dtype=np.int64)
    cdef cnp.int64_t[::1] O = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = O.shape[0], k, t, n_kept = 0
    kept_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] K = kept_arr
    cdef cnp.int64_t i, j
    cdef double x1, y1, x2, y2, area_i, iw, ih, inter, union
    cdef bint survive
    with nogil:
        for k in range(n):
            i = O[k]
            x1 = B[i, 0]
            y1 = B[i, 1]
            x2 = B[i, 2]
            y2 = B[i, 3]
            area_i = (x2 - x1) * (y2 - y1)
            survive = True
            for t in range(n_kept):
                j = K[t]
                if C[j] != C[i]:
                    continue
                iw = _fmin(x2, B[j, 2]) - _fmax(x1, B[j, 0])
                ih = _fmin(y2, B[j, 3]) - _fmax(y1, B[j, 1])
                if iw <= 0.0 or ih <= 0.0:
                    continue
                inter = iw * ih
                union = area_i + (B[j, 2] - B[j, 0]) * (B[j, 3] - B[j, 1]) - inter
                if union > 0.0 and inter / union > iou_threshold:
                    survive = False
                    break
            if survive:
                K[n_kept] = i
                n_kept += 1
    return kept_arr[:n_kept].copy()


def lsa_square(cost):
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], i, j, j0, j1, i0
    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(n + 1)
    minv_arr = np.empty(n + 1)
    p_arr = np.zeros(n + 1, dtype=np.intp)
    way_arr = np.zeros(n + 1, dtype=np.intp)
    used_arr = np.zeros(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr, v = v_arr, minv = minv_arr
    cdef Py_ssize_t[::1] p = p_arr, way = way_arr
    cdef unsigned char[::1] used = used_arr
    cdef double delta, cur, ui0
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                ui0 = u[i0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = c[i0 - 1, j - 1] - ui0 - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break
    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row, u_arr[1:].copy(), v_arr[1:].copy()


def claim_matches(iou, double iou_threshold):
    cdef double[:, ::1] M = np.ascontiguousarray(iou, dtype=np.float64)
    cdef Py_ssize_t n_det = M.shape[0], n_gt = M.shape[1], i, j, best
    claimed_arr = np.zeros(n_gt, dtype=np.uint8)
    flags = np.zeros(n_det, dtype=bool)
    cdef unsigned char[::1] claimed = claimed_arr
    cdef cnp.npy_bool[::1] F = flags
    cdef double best_iou
    with nogil:
        for i in range(n_det):
            best = -1
            best_iou = -1.0
            for j in range(n_gt):
                if claimed[j] or M[i, j] < 0.0:
                    continue
                if M[i, j] > best_iou:
                    best_iou = M[i, j]
                    best = j
            if best >= 0 and best_iou >= iou_threshold:
                claimed[best] = 1
                F[i] = 1
    return flags
