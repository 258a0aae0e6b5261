"""Compiled inner loops for the planner.

Same Dubins and lifted-obstacle math as :mod:`ezrrt.dubins` and
:mod:`ezrrt.ez_geometry`, written over flat arrays so the whole RRT*
iteration runs under numba. Edges are stored as a word index plus three
segment lengths in LU. Word indices follow ``dubins.WORDS``.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
SNAP = 1e-10
SAMPLE_CAP = 1_000_000

# turn sign per (word, segment); order matches dubins.WORDS
WORD_SIGNS = np.array(
    [[1, 0, 1], [-1, 0, -1], [1, 0, -1], [-1, 0, 1], [-1, 1, -1], [1, -1, 1]], dtype=np.int64
)

STATUS_OK = 0
STATUS_SAMPLE_CAP = 1


@njit(cache=True)
def mod2pi(a):
    a = a - TWO_PI * math.floor(a / TWO_PI)
    if a < 0.0:
        # tiny negatives whose quotient underflows to -0
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


@njit(cache=True)
def _snap(a):
    if a > TWO_PI - SNAP:
        return 0.0
    return a


@njit(cache=True)
def word_solution(w, alpha, beta, d):
    """Normalized ``(ok, t, p, q)`` for word index ``w``."""
    sa = math.sin(alpha)
    sb = math.sin(beta)
    ca = math.cos(alpha)
    cb = math.cos(beta)
    cab = math.cos(alpha - beta)
    if w == 0:  # LSL
        p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb)
        if p2 < 0.0:
            return False, 0.0, 0.0, 0.0
        tmp = math.atan2(cb - ca, d + sa - sb)
        return True, _snap(mod2pi(tmp - alpha)), math.sqrt(p2), _snap(mod2pi(beta - tmp))
    if w == 1:  # RSR
        p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa)
        if p2 < 0.0:
            return False, 0.0, 0.0, 0.0
        tmp = math.atan2(ca - cb, d - sa + sb)
        return True, _snap(mod2pi(alpha - tmp)), math.sqrt(p2), _snap(mod2pi(tmp - beta))
    if w == 2:  # LSR
        p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb)
        if p2 < 0.0:
            return False, 0.0, 0.0, 0.0
        p = math.sqrt(p2)
        tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
        return True, _snap(mod2pi(tmp - alpha)), p, _snap(mod2pi(tmp - beta))
    if w == 3:  # RSL
        p2 = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb)
        if p2 < 0.0:
            return False, 0.0, 0.0, 0.0
        p = math.sqrt(p2)
        tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
        return True, _snap(mod2pi(alpha - tmp)), p, _snap(mod2pi(beta - tmp))
    if w == 4:  # RLR
        c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0
        if abs(c) > 1.0:
            return False, 0.0, 0.0, 0.0
        p = mod2pi(TWO_PI - math.acos(c))
        t = _snap(mod2pi(alpha - math.atan2(ca - cb, d - sa + sb) + p / 2.0))
        return True, t, p, _snap(mod2pi(alpha - beta - t + p))
    # LRL
    c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0
    if abs(c) > 1.0:
        return False, 0.0, 0.0, 0.0
    p = mod2pi(TWO_PI - math.acos(c))
    t = _snap(mod2pi(-alpha - math.atan2(ca - cb, d + sa - sb) + p / 2.0))
    return True, t, p, _snap(mod2pi(beta - alpha - t + p))


@njit(cache=True)
def shortest(x0, y0, p0, x1, y1, p1, radius):
    """``(word, seg0, seg1, seg2, length)`` with segment lengths in LU."""
    dx = x1 - x0
    dy = y1 - y0
    d = math.hypot(dx, dy) / radius
    phi = math.atan2(dy, dx) if d > 0.0 else 0.0
    alpha = mod2pi(p0 - phi)
    beta = mod2pi(p1 - phi)
    best_w = -1
    best = math.inf
    bt = 0.0
    bp = 0.0
    bq = 0.0
    for w in range(6):
        ok, t, p, q = word_solution(w, alpha, beta, d)
        if ok:
            total = t + p + q
            if total < best:
                best = total
                best_w = w
                bt = t
                bp = p
                bq = q
    return best_w, bt * radius, bp * radius, bq * radius, best * radius


@njit(cache=True)
def advance(x, y, psi, sign, length, radius):
    if sign == 0:
        return x + length * math.cos(psi), y + length * math.sin(psi), psi
    npsi = psi + sign * length / radius
    return (
        x + sign * radius * (math.sin(npsi) - math.sin(psi)),
        y - sign * radius * (math.cos(npsi) - math.cos(psi)),
        npsi,
    )


@njit(cache=True)
def point_at(x, y, psi, w, s0, s1, s2, radius, s):
    """Point at arc length ``s``; heading returned unwrapped."""
    remaining = s
    for k in range(3):
        seg = s0 if k == 0 else (s1 if k == 1 else s2)
        take = min(seg, remaining)
        x, y, psi = advance(x, y, psi, WORD_SIGNS[w, k], take, radius)
        remaining -= take
        if remaining <= 0.0:
            break
    return x, y, psi


@njit(cache=True)
def engaged(x, y, psi, zx, zy, zr):
    """Any zone engages ``(x, y, psi)``: ``d <= r/2 (1 - cos(psi - lambda))``."""
    c = math.cos(psi)
    s = math.sin(psi)
    for i in range(zx.shape[0]):
        dx = x - zx[i]
        dy = y - zy[i]
        d2 = dx * dx + dy * dy
        r = zr[i]
        if d2 > r * r:
            continue
        d = math.sqrt(d2)
        if d == 0.0:
            return True
        # cos(psi - lambda) = (dx cos psi + dy sin psi) / d
        if d <= 0.5 * r * (1.0 - (dx * c + dy * s) / d):
            return True
    return False


@njit(cache=True)
def config_free(x, y, psi, zx, zy, zr, bounds):
    if x < bounds[0] or y < bounds[1] or x > bounds[2] or y > bounds[3]:
        return False
    return not engaged(x, y, psi, zx, zy, zr)


@njit(cache=True)
def n_samples(length, step):
    if length <= 0.0:
        return 1
    return int(math.ceil(length / step - 1e-9)) + 1


@njit(cache=True)
def segment_free(x0, y0, p0, w, s0, s1, s2, radius, ex, ey, ep, zx, zy, zr, bounds, step):
    """Sampled check of the whole path.

    ``(ex, ey, ep)`` is the exact configuration the path was planned to
    reach; it stands in for the recomputed endpoint, which can differ from
    it by rounding and spuriously leave a closed domain.
    """
    length = s0 + s1 + s2
    # zones farther than length + r_max from the start cannot be reached
    keep = np.empty(zx.shape[0], dtype=np.bool_)
    m = 0
    for i in range(zx.shape[0]):
        reach = length + zr[i]
        dx = x0 - zx[i]
        dy = y0 - zy[i]
        keep[i] = dx * dx + dy * dy <= reach * reach
        if keep[i]:
            m += 1
    lx = np.empty(m)
    ly = np.empty(m)
    lr = np.empty(m)
    j = 0
    for i in range(zx.shape[0]):
        if keep[i]:
            lx[j] = zx[i]
            ly[j] = zy[i]
            lr[j] = zr[i]
            j += 1
    n = n_samples(length, step)
    # endpoint first: the most likely collision for a freshly steered edge
    if not config_free(ex, ey, ep, lx, ly, lr, bounds):
        return False
    for i in range(n - 1):
        x, y, psi = point_at(x0, y0, p0, w, s0, s1, s2, radius, i * step)
        if not config_free(x, y, psi, lx, ly, lr, bounds):
            return False
    return True


@njit(cache=True)
def lifted_dist2(x0, y0, p0, x1, y1, p1, hw):
    a = mod2pi(p1 - p0)
    if a > math.pi:
        a = TWO_PI - a
    dx = x1 - x0
    dy = y1 - y0
    h = hw * a
    return dx * dx + dy * dy + h * h


@njit(cache=True)
def cell_of(x, y, bounds, g):
    cx = int((x - bounds[0]) / (bounds[2] - bounds[0]) * g)
    cy = int((y - bounds[1]) / (bounds[3] - bounds[1]) * g)
    return min(max(cx, 0), g - 1), min(max(cy, 0), g - 1)


@njit(cache=True)
def grid_insert(i, x, y, bounds, g, head, nxt):
    cx, cy = cell_of(x, y, bounds, g)
    c = cy * g + cx
    nxt[i] = head[c]
    head[c] = i


@njit(cache=True)
def _cell_width(bounds, g):
    return min(bounds[2] - bounds[0], bounds[3] - bounds[1]) / g


@njit(cache=True)
def _inside(x, y, bounds):
    return bounds[0] <= x <= bounds[2] and bounds[1] <= y <= bounds[3]


@njit(cache=True)
def nearest(xs, ys, ps, n, qx, qy, qp, hw, bounds, g, head, nxt):
    """Lifted-metric nearest node; ties to the lower index.

    Searches grid rings outward. Points beyond ring ``k`` lie at planar
    distance >= ``k`` cell widths, which bounds the lifted distance too.
    """
    best = -1
    bd = math.inf
    if not _inside(qx, qy, bounds):
        for i in range(n):
            d2 = lifted_dist2(xs[i], ys[i], ps[i], qx, qy, qp, hw)
            if d2 < bd:
                bd = d2
                best = i
        return best
    cx, cy = cell_of(qx, qy, bounds, g)
    cw = _cell_width(bounds, g)
    for k in range(g):
        for ix in range(cx - k, cx + k + 1):
            if ix < 0 or ix >= g:
                continue
            step = 1 if (ix == cx - k or ix == cx + k) else 2 * k
            iy = cy - k
            while iy <= cy + k:
                if 0 <= iy < g:
                    i = head[iy * g + ix]
                    while i >= 0:
                        d2 = lifted_dist2(xs[i], ys[i], ps[i], qx, qy, qp, hw)
                        if d2 < bd or (d2 == bd and i < best):
                            bd = d2
                            best = i
                        i = nxt[i]
                iy += step
        reach = k * cw
        if best >= 0 and reach * reach > bd:
            break
    return best


@njit(cache=True)
def nearest_dubins(xs, ys, ps, n, qx, qy, qp, radius, hint, bounds, g, head, nxt):
    """Node with the shortest Dubins path to ``q``; ties to the lower index.

    Planar distance lower-bounds Dubins length, so rings beyond the
    incumbent length (seeded from ``hint``) are never opened.
    """
    best = hint
    best_len = shortest(xs[hint], ys[hint], ps[hint], qx, qy, qp, radius)[4]
    cx, cy = cell_of(qx, qy, bounds, g)
    cw = _cell_width(bounds, g)
    inside = _inside(qx, qy, bounds)
    for k in range(g):
        for ix in range(cx - k, cx + k + 1):
            if ix < 0 or ix >= g:
                continue
            step = 1 if (ix == cx - k or ix == cx + k) else 2 * k
            iy = cy - k
            while iy <= cy + k:
                if 0 <= iy < g:
                    i = head[iy * g + ix]
                    while i >= 0:
                        dx = qx - xs[i]
                        dy = qy - ys[i]
                        if dx * dx + dy * dy <= best_len * best_len:
                            length = shortest(xs[i], ys[i], ps[i], qx, qy, qp, radius)[4]
                            if length < best_len or (length == best_len and i < best):
                                best_len = length
                                best = i
                        i = nxt[i]
                iy += step
        if inside and k * cw > best_len:
            break
    return best


@njit(cache=True)
def near_radius(n, gamma, cap):
    if n <= 1:
        return 0.0
    return min(gamma * (math.log(n) / n) ** (1.0 / 3.0), cap)


@njit(cache=True)
def near(xs, ys, ps, n, qx, qy, qp, hw, radius, must, out, bounds, g, head, nxt):
    """Indices within ``radius`` (plus ``must``) written ascending to ``out``; returns the count."""
    r2 = radius * radius
    m = 0
    x0, y0 = cell_of(qx - radius, qy - radius, bounds, g)
    x1, y1 = cell_of(qx + radius, qy + radius, bounds, g)
    seen_must = False
    for iy in range(y0, y1 + 1):
        for ix in range(x0, x1 + 1):
            i = head[iy * g + ix]
            while i >= 0:
                if i == must or lifted_dist2(xs[i], ys[i], ps[i], qx, qy, qp, hw) <= r2:
                    out[m] = i
                    m += 1
                    if i == must:
                        seen_must = True
                i = nxt[i]
    if must >= 0 and not seen_must:
        out[m] = must
        m += 1
    out[:m].sort()
    return m


@njit(cache=True)
def sample_free(rng, goal, goal_bias, zx, zy, zr, bounds):
    """``(status, is_goal, x, y, psi)``; the goal comes back with probability ``goal_bias``."""
    if rng.random() < goal_bias:
        return STATUS_OK, True, goal[0], goal[1], goal[2]
    wx = bounds[2] - bounds[0]
    wy = bounds[3] - bounds[1]
    for _ in range(SAMPLE_CAP):
        x = bounds[0] + wx * rng.random()
        y = bounds[1] + wy * rng.random()
        psi = TWO_PI * rng.random()
        if config_free(x, y, psi, zx, zy, zr, bounds):
            return STATUS_OK, False, x, y, psi
    return STATUS_SAMPLE_CAP, False, 0.0, 0.0, 0.0


@njit(cache=True)
def link_child(parent, child, first_child, next_sib, prev_sib):
    head = first_child[parent]
    next_sib[child] = head
    prev_sib[child] = -1
    if head >= 0:
        prev_sib[head] = child
    first_child[parent] = child


@njit(cache=True)
def unlink_child(parent, child, first_child, next_sib, prev_sib):
    p = prev_sib[child]
    nx = next_sib[child]
    if p >= 0:
        next_sib[p] = nx
    else:
        first_child[parent] = nx
    if nx >= 0:
        prev_sib[nx] = p
    next_sib[child] = -1
    prev_sib[child] = -1


@njit(cache=True)
def propagate_costs(root, cost, edge_cost, first_child, next_sib, stack):
    """Recompute ``cost`` below ``root`` from the parent recursion."""
    top = 0
    stack[0] = root
    while top >= 0:
        u = stack[top]
        top -= 1
        c = first_child[u]
        while c >= 0:
            cost[c] = cost[u] + edge_cost[c]
            top += 1
            stack[top] = c
            c = next_sib[c]


@njit(cache=True)
def opt_parent(
    cand, m, qx, qy, qp, xs, ys, ps, cost, radius, speed, zx, zy, zr, bounds, step, out_edge
):
    """Cheapest collision-free parent among ``cand[:m]``; -1 if none.

    Candidates are ranked by cost-to-come plus edge duration (stable, so
    ties go to the lower index) and only checked for collision in that order.
    """
    words = np.empty(m, dtype=np.int64)
    segs = np.empty((m, 3))
    durs = np.empty(m)
    totals = np.empty(m)
    for k in range(m):
        i = cand[k]
        w, a, b, c, length = shortest(xs[i], ys[i], ps[i], qx, qy, qp, radius)
        words[k] = w
        segs[k, 0] = a
        segs[k, 1] = b
        segs[k, 2] = c
        durs[k] = length / speed
        totals[k] = cost[i] + durs[k]
    order = np.argsort(totals, kind="mergesort")
    for k in order:
        i = cand[k]
        if segment_free(
            xs[i], ys[i], ps[i], words[k], segs[k, 0], segs[k, 1], segs[k, 2], radius,
            qx, qy, qp, zx, zy, zr, bounds, step,
        ):
            out_edge[0] = words[k]
            out_edge[1] = segs[k, 0]
            out_edge[2] = segs[k, 1]
            out_edge[3] = segs[k, 2]
            out_edge[4] = totals[k]
            out_edge[5] = durs[k]
            return i
    return -1


@njit(cache=True)
def rewire(
    new, cand, m, xs, ys, ps, parent, cost, edge_cost, edge_word, edge_seg,
    first_child, next_sib, prev_sib, stack, radius, speed, zx, zy, zr, bounds, step,
):
    """Reparent near nodes through ``new`` where that is strictly cheaper."""
    changed = 0
    for k in range(m):
        j = cand[k]
        if j == new or j == parent[new]:
            continue
        w, a, b, c, length = shortest(xs[new], ys[new], ps[new], xs[j], ys[j], ps[j], radius)
        dur = length / speed
        if not cost[new] + dur < cost[j]:
            continue
        if not segment_free(
            xs[new], ys[new], ps[new], w, a, b, c, radius, xs[j], ys[j], ps[j], zx, zy, zr, bounds, step
        ):
            continue
        unlink_child(parent[j], j, first_child, next_sib, prev_sib)
        parent[j] = new
        link_child(new, j, first_child, next_sib, prev_sib)
        edge_word[j] = w
        edge_seg[j, 0] = a
        edge_seg[j, 1] = b
        edge_seg[j, 2] = c
        edge_cost[j] = dur
        cost[j] = cost[new] + dur
        propagate_costs(j, cost, edge_cost, first_child, next_sib, stack)
        changed += 1
    return changed


@njit(cache=True)
def grow(
    n_iter, counters, best, rng,
    xs, ys, ps, parent, cost, edge_cost, edge_word, edge_seg,
    first_child, next_sib, prev_sib, stack, cand,
    goal_nodes, hist_iter, hist_cost,
    goal, goal_tol, zx, zy, zr, bounds, g, head, nxt,
    radius, speed, steer_step, goal_bias, gamma, near_cap, hw, check_step,
):
    """Run ``n_iter`` planner iterations in place.

    ``counters`` = [n_nodes, iterations, n_goal_nodes, n_history, status,
    best_goal_node]; ``best`` = [best_cost]. Arrays must have room for
    ``n_iter`` more nodes and history entries.
    """
    edge = np.empty(6)
    for _ in range(n_iter):
        status, is_goal, rx, ry, rp = sample_free(rng, goal, goal_bias, zx, zy, zr, bounds)
        if status != STATUS_OK:
            counters[4] = status
            return
        counters[1] += 1
        n = counters[0]
        inear = nearest(xs, ys, ps, n, rx, ry, rp, hw, bounds, g, head, nxt)
        if is_goal:
            inear = nearest_dubins(xs, ys, ps, n, rx, ry, rp, radius, inear, bounds, g, head, nxt)

        # steer: Dubins path toward the sample, truncated at steer_step
        w, a, b, c, length = shortest(xs[inear], ys[inear], ps[inear], rx, ry, rp, radius)
        if length > steer_step:
            rem = steer_step
            ta = min(a, rem)
            rem -= ta
            tb = min(b, rem)
            rem -= tb
            tc = min(c, rem)
            a, b, c = ta, tb, tc
            qx, qy, qp = point_at(xs[inear], ys[inear], ps[inear], w, a, b, c, radius, a + b + c)
            qp = mod2pi(qp)
        else:
            qx, qy, qp = rx, ry, rp
        if not segment_free(
            xs[inear], ys[inear], ps[inear], w, a, b, c, radius, qx, qy, qp, zx, zy, zr, bounds, check_step
        ):
            continue

        r = near_radius(n, gamma, near_cap)
        m = near(xs, ys, ps, n, qx, qy, qp, hw, r, inear, cand, bounds, g, head, nxt)
        pmin = opt_parent(cand, m, qx, qy, qp, xs, ys, ps, cost, radius, speed, zx, zy, zr, bounds, check_step, edge)
        if pmin < 0:
            continue

        new = n
        xs[new] = qx
        ys[new] = qy
        ps[new] = qp
        parent[new] = pmin
        edge_word[new] = int(edge[0])
        edge_seg[new, 0] = edge[1]
        edge_seg[new, 1] = edge[2]
        edge_seg[new, 2] = edge[3]
        cost[new] = edge[4]
        edge_cost[new] = edge[5]
        first_child[new] = -1
        next_sib[new] = -1
        prev_sib[new] = -1
        link_child(pmin, new, first_child, next_sib, prev_sib)
        grid_insert(new, qx, qy, bounds, g, head, nxt)
        counters[0] = n + 1

        rewire(
            new, cand, m, xs, ys, ps, parent, cost, edge_cost, edge_word, edge_seg,
            first_child, next_sib, prev_sib, stack, radius, speed, zx, zy, zr, bounds, check_step,
        )

        dgx = qx - goal[0]
        dgy = qy - goal[1]
        dgp = mod2pi(qp - goal[2])
        if dgp > math.pi:
            dgp = TWO_PI - dgp
        if dgx * dgx + dgy * dgy <= goal_tol[0] * goal_tol[0] and dgp <= goal_tol[1]:
            goal_nodes[counters[2]] = new
            counters[2] += 1

        # rewiring can lower an existing goal node, so rescan all of them
        bc = best[0]
        bi = counters[5]
        for k in range(counters[2]):
            gi = goal_nodes[k]
            if cost[gi] < bc:
                bc = cost[gi]
                bi = gi
        if bc < best[0]:
            best[0] = bc
            counters[5] = bi
            h = counters[3]
            hist_iter[h] = counters[1]
            hist_cost[h] = bc
            counters[3] = h + 1
    counters[4] = STATUS_OK
