"""Independent reference implementations used as test oracles.

Everything here is deliberately written in the dumbest possible style
(scalar loops, pure-Python floats, O(n^2) scans) and stays independent of
the library code paths it checks.
"""

import math


def sigmoid_scalar(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def lstm_step_reference(x, h_prev, c_prev, cell):
    """Scalar-loop LSTM step over per-gate weight lists from LstmCellParams."""
    hidden = cell.hidden_dim

    def affine(w, u, b, j):
        s = float(b[j])
        for k in range(len(x)):
            s += float(w[j][k]) * float(x[k])
        for k in range(hidden):
            s += float(u[j][k]) * float(h_prev[k])
        return s

    h, c = [0.0] * hidden, [0.0] * hidden
    for j in range(hidden):
        i = sigmoid_scalar(affine(cell.w_i, cell.u_i, cell.b_i, j))
        f = sigmoid_scalar(affine(cell.w_f, cell.u_f, cell.b_f, j))
        g = math.tanh(affine(cell.w_g, cell.u_g, cell.b_g, j))
        o = sigmoid_scalar(affine(cell.w_o, cell.u_o, cell.b_o, j))
        c[j] = f * float(c_prev[j]) + i * g
        h[j] = o * math.tanh(c[j])
    return h, c


def bilstm_reference(sequence, fwd, bwd):
    """Scripted bi-LSTM: final forward state concat final backward state."""
    h = [0.0] * fwd.hidden_dim
    c = [0.0] * fwd.hidden_dim
    for x in sequence:
        h, c = lstm_step_reference(x, h, c, fwd)
    hb = [0.0] * bwd.hidden_dim
    cb = [0.0] * bwd.hidden_dim
    for x in reversed(list(sequence)):
        hb, cb = lstm_step_reference(x, hb, cb, bwd)
    return h + hb


def euclid(a, b) -> float:
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def silhouette_reference(points, labels) -> float:
    """Double-loop mean silhouette; singleton clusters and all-zero rows
    score 0."""
    n = len(points)
    total = 0.0
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            continue
        a = sum(euclid(points[i], points[j]) for j in own) / len(own)
        b = math.inf
        for lab in set(labels):
            if lab == labels[i]:
                continue
            others = [j for j in range(n) if labels[j] == lab]
            b = min(b, sum(euclid(points[i], points[j]) for j in others) / len(others))
        m = max(a, b)
        total += 0.0 if m == 0 else (b - a) / m
    return total / n


def separability_reference(points, labels) -> float:
    """Nearest-neighbor label agreement, ties broken by lowest index."""
    n = len(points)
    hits = 0
    for i in range(n):
        best_j, best_d = -1, math.inf
        for j in range(n):
            if j == i:
                continue
            d = euclid(points[i], points[j])
            if d < best_d:
                best_j, best_d = j, d
        hits += labels[best_j] == labels[i]
    return hits / n


def f2_from_precision_recall(tp: int, fp: int, fn: int) -> float:
    """The precision/recall form: 5PR / (4P + R), 0 when undefined."""
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 5.0 * precision * recall / (4.0 * precision + recall)


def best_f2_threshold_reference(scores, labels):
    """Exhaustive sweep over midpoints of sorted unique scores; ties take the
    smallest threshold."""
    uniq = sorted(set(float(s) for s in scores))
    best_thr, best_f2 = None, -1.0
    for lo, hi in zip(uniq[:-1], uniq[1:]):
        thr = (lo + hi) / 2.0
        tp = fp = fn = 0
        for s, y in zip(scores, labels):
            pred = s > thr
            if pred and y:
                tp += 1
            elif pred:
                fp += 1
            elif y:
                fn += 1
        f2 = f2_from_precision_recall(tp, fp, fn)
        if f2 > best_f2:
            best_thr, best_f2 = thr, f2
    return best_thr, best_f2


def positive_weeks_reference(relapse_day: int, horizon: int, m_days: int,
                             n_days: int, step: int) -> int:
    """Day-by-day count of emitted week starts whose target week intersects
    the pre-relapse interval."""
    count = 0
    start = 0
    while start + m_days + 7 <= n_days:
        t = start + m_days
        week = set(range(t, t + 7))
        pre = set(range(relapse_day - horizon, relapse_day + 1))
        if week & pre:
            count += 1
        start += step
    return count
