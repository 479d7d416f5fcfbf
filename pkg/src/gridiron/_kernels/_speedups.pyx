# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pure-Python kernels in ``_pure``.

Signatures take typed memoryviews; the selecting package converts plain
sequences to ``array('q')`` / ``array('d')`` before calling in here.
"""

from libc.stdlib cimport free, malloc, qsort


cdef int _cmp_ll(const void* a, const void* b) noexcept nogil:
    cdef long long x = (<const long long*> a)[0]
    cdef long long y = (<const long long*> b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


def peak_alive(long long[:] create_ticks, long long[:] delete_ticks):
    cdef Py_ssize_t n = create_ticks.shape[0]
    if delete_ticks.shape[0] != n:
        raise ValueError("create/delete tick arrays differ in length")
    if n == 0:
        return 0
    cdef long long* creates = <long long*> malloc(n * sizeof(long long))
    cdef long long* deletes = <long long*> malloc(n * sizeof(long long))
    if creates == NULL or deletes == NULL:
        free(creates)
        free(deletes)
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(n):
        creates[i] = create_ticks[i]
        deletes[i] = delete_ticks[i]
    cdef long long alive = 0, peak = 0
    cdef Py_ssize_t di = 0
    with nogil:
        qsort(creates, n, sizeof(long long), _cmp_ll)
        qsort(deletes, n, sizeof(long long), _cmp_ll)
        for i in range(n):
            while di < n and deletes[di] <= creates[i]:
                alive -= 1
                di += 1
            alive += 1
            if alive > peak:
                peak = alive
    free(creates)
    free(deletes)
    return peak


cdef inline void _heap_push(long long* heap, Py_ssize_t* size, long long value) noexcept nogil:
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t parent
    cdef long long tmp
    heap[i] = value
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        tmp = heap[parent]
        heap[parent] = heap[i]
        heap[i] = tmp
        i = parent


cdef inline void _heap_pop(long long* heap, Py_ssize_t* size) noexcept nogil:
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t child
    cdef long long tmp
    size[0] -= 1
    heap[0] = heap[size[0]]
    while True:
        child = 2 * i + 1
        if child >= size[0]:
            break
        if child + 1 < size[0] and heap[child + 1] < heap[child]:
            child += 1
        if heap[i] <= heap[child]:
            break
        tmp = heap[i]
        heap[i] = heap[child]
        heap[child] = tmp
        i = child


def rolling_split(long long[:] create_ticks, long long[:] delete_ticks, long long cap):
    if cap < 2:
        raise ValueError("cap must be >= 2")
    cdef Py_ssize_t n = create_ticks.shape[0]
    if delete_ticks.shape[0] != n:
        raise ValueError("create/delete tick arrays differ in length")
    out = [0] * n
    if n == 0:
        return out
    cdef long long* heap = <long long*> malloc(n * sizeof(long long))
    cdef long long* splits = <long long*> malloc(n * sizeof(long long))
    if heap == NULL or splits == NULL:
        free(heap)
        free(splits)
        raise MemoryError()
    cdef Py_ssize_t heap_size = 0
    cdef long long split = 0, peak = 0
    cdef Py_ssize_t i
    cdef long long c
    with nogil:
        for i in range(n):
            c = create_ticks[i]
            if peak >= cap:
                split += 1
                heap_size = 0
                peak = 0
            while heap_size > 0 and heap[0] <= c:
                _heap_pop(heap, &heap_size)
            _heap_push(heap, &heap_size, delete_ticks[i])
            if heap_size > peak:
                peak = heap_size
            splits[i] = split
    for i in range(n):
        out[i] = splits[i]
    free(heap)
    free(splits)
    return out


def tick_deltas_to_series(long long[:] ticks, double[:] deltas, Py_ssize_t horizon):
    cdef Py_ssize_t n = ticks.shape[0]
    if deltas.shape[0] != n:
        raise ValueError("tick/delta arrays differ in length")
    cdef double* buf = <double*> malloc(horizon * sizeof(double)) if horizon > 0 else NULL
    if horizon > 0 and buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    cdef long long t
    cdef double acc = 0.0
    with nogil:
        for i in range(horizon):
            buf[i] = 0.0
        for i in range(n):
            t = ticks[i]
            if 0 <= t < horizon:
                buf[t] += deltas[i]
        for i in range(horizon):
            acc += buf[i]
            buf[i] = acc
    out = [0.0] * horizon
    for i in range(horizon):
        out[i] = buf[i]
    free(buf)
    return out
