"""Numba kernels: grid scatter loops and the max-flow solver.

The scatter kernels are the only hot loops of grid building. Each pixel
deposits weight on its nearest lattice vertex and on the one axis neighbor
per dimension it leans toward (the remaining candidates of the L1 ball
receive weight zero). Accumulation order is pixel-major, then
center-before-neighbors, so results are bitwise reproducible; the
pure-numpy fallback in bilateral_grid replicates the same order.

The flow solver is Dinic's algorithm on float64 residuals with paired arcs
(arc ^ 1 is the reverse). Floats avoid any capacity scaling: augmenting by
the exact path minimum zeroes at least one residual bitwise per
augmentation, so phases terminate like the integer version.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def scatter_data(b, strides, dhat, S, A_FG, A_BG):
    """Deposit S / A_FG / A_BG for data pixels.

    b: (7, n) lifted coordinates; dhat: (n,) disparity affinity in [0, 1];
    S, A_FG, A_BG: dense per-cell accumulators indexed by packed key.
    """
    n = b.shape[1]
    f = np.empty(7)
    c = np.empty(7)
    for p in range(n):
        w0 = 1.0
        base = np.int64(0)
        for j in range(7):
            bj = b[j, p]
            nj = np.floor(bj + 0.5)
            f[j] = bj - nj
            c[j] = 1.0 - abs(f[j])
            w0 *= c[j]
            base += np.int64(nj) * strides[j]
        d = dhat[p]
        S[base] += w0
        A_FG[base] += w0 * d
        A_BG[base] += w0 * (1.0 - d)
        for j in range(7):
            aj = abs(f[j])
            if aj > 0.0:
                wj = w0 * (aj / c[j])
                key = base + (strides[j] if f[j] > 0.0 else -strides[j])
                S[key] += wj
                A_FG[key] += wj * d
                A_BG[key] += wj * (1.0 - d)


@njit(cache=True)
def scatter_mask(b, strides, fg, M_FG, M_BG):
    """Deposit M_FG / M_BG for propagation-mask pixels.

    fg: (n,) indicator, 1.0 where the previous mask marks foreground.
    """
    n = b.shape[1]
    f = np.empty(7)
    c = np.empty(7)
    for p in range(n):
        w0 = 1.0
        base = np.int64(0)
        for j in range(7):
            bj = b[j, p]
            nj = np.floor(bj + 0.5)
            f[j] = bj - nj
            c[j] = 1.0 - abs(f[j])
            w0 *= c[j]
            base += np.int64(nj) * strides[j]
        ind = fg[p]
        M_FG[base] += w0 * ind
        M_BG[base] += w0 * (1.0 - ind)
        for j in range(7):
            aj = abs(f[j])
            if aj > 0.0:
                wj = w0 * (aj / c[j])
                key = base + (strides[j] if f[j] > 0.0 else -strides[j])
                M_FG[key] += wj * ind
                M_BG[key] += wj * (1.0 - ind)


@njit(cache=True)
def build_adjacency(n_vertices, arc_from, arc_to):
    """Linked-list adjacency over paired arcs: head per vertex, nxt per arc."""
    n_arcs = arc_from.size
    head = np.full(n_vertices, -1, dtype=np.int64)
    nxt = np.empty(n_arcs, dtype=np.int64)
    for a in range(n_arcs):
        u = arc_from[a]
        nxt[a] = head[u]
        head[u] = a
    return head, nxt


@njit(cache=True)
def dinic_source_side(n_vertices, source, sink, head, nxt, arc_to, residual):
    """Run Dinic's algorithm and return the residual-reachable set of the
    source (True entries form the minimal minimum cut's source side).

    `residual` is consumed in place; arc a and arc a ^ 1 are reverses.
    """
    level = np.empty(n_vertices, dtype=np.int64)
    iter_arc = np.empty(n_vertices, dtype=np.int64)
    queue = np.empty(n_vertices, dtype=np.int64)
    stack_v = np.empty(n_vertices + 1, dtype=np.int64)
    stack_a = np.empty(n_vertices + 1, dtype=np.int64)

    while True:
        # BFS level graph over positive residuals
        level[:] = -1
        qh = 0
        qt = 0
        queue[qt] = source
        qt += 1
        level[source] = 0
        while qh < qt:
            u = queue[qh]
            qh += 1
            a = head[u]
            while a != -1:
                v = arc_to[a]
                if residual[a] > 0.0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
                a = nxt[a]
        if level[sink] < 0:
            break
        iter_arc[:] = head

        # blocking flow: iterative DFS along strictly increasing levels
        while True:
            top = 0
            stack_v[0] = source
            found = False
            while top >= 0:
                u = stack_v[top]
                if u == sink:
                    found = True
                    break
                advanced = False
                a = iter_arc[u]
                while a != -1:
                    v = arc_to[a]
                    if residual[a] > 0.0 and level[v] == level[u] + 1:
                        iter_arc[u] = a
                        stack_a[top] = a
                        top += 1
                        stack_v[top] = v
                        advanced = True
                        break
                    a = nxt[a]
                    iter_arc[u] = a
                if not advanced:
                    level[u] = -1
                    top -= 1
            if not found:
                break
            bottleneck = np.inf
            for i in range(top):
                a = stack_a[i]
                if residual[a] < bottleneck:
                    bottleneck = residual[a]
            for i in range(top):
                a = stack_a[i]
                residual[a] -= bottleneck
                residual[a ^ 1] += bottleneck

    # source side = residual-reachable from source
    reach = np.zeros(n_vertices, dtype=np.bool_)
    reach[source] = True
    qh = 0
    qt = 0
    queue[qt] = source
    qt += 1
    while qh < qt:
        u = queue[qh]
        qh += 1
        a = head[u]
        while a != -1:
            v = arc_to[a]
            if residual[a] > 0.0 and not reach[v]:
                reach[v] = True
                queue[qt] = v
                qt += 1
            a = nxt[a]
    return reach
