"""Maximum-weight general matching (Edmonds' blossom algorithm, O(n^3)).

Array-based port of Van Rantwijk's primal-dual implementation for numba.
Weights are integers and are doubled internally so every dual stays an
integer. The per-blossom "best edge" lists are not kept; the least-slack
edge of a new blossom is found by rescanning its leaves, which is slower on
huge graphs but much simpler.

Recursion in the reference code (leaf enumeration, blossom expansion at the
end of a stage, augmentation through nested blossoms) is replaced by explicit
stacks. Sub-blossoms touched by one augmentation are disjoint, so their order
does not matter.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _wrap(j, n):
    return ((j % n) + n) % n


@njit(cache=True)
def max_weight_matching(nvertex, ei, ej, ew, maxcardinality):
    """Return ``mate`` (partner vertex or -1) of a maximum-weight matching.

    With ``maxcardinality`` the matching has maximum size first and maximum
    weight among those.
    """
    nedge = ei.shape[0]
    mate = np.full(nvertex, -1, np.int64)
    if nedge == 0 or nvertex == 0:
        return mate
    w2 = 2 * ew.astype(np.int64)
    maxweight = max(0, w2.max())

    endpoint = np.empty(2 * nedge, np.int64)
    for k in range(nedge):
        endpoint[2 * k] = ei[k]
        endpoint[2 * k + 1] = ej[k]
    nbstart = np.zeros(nvertex + 1, np.int64)
    for k in range(nedge):
        nbstart[ei[k] + 1] += 1
        nbstart[ej[k] + 1] += 1
    for v in range(nvertex):
        nbstart[v + 1] += nbstart[v]
    nb = np.empty(2 * nedge, np.int64)
    fill = nbstart[:-1].copy()
    for k in range(nedge):
        nb[fill[ei[k]]] = 2 * k + 1
        fill[ei[k]] += 1
        nb[fill[ej[k]]] = 2 * k
        fill[ej[k]] += 1

    n = nvertex
    n2 = 2 * n
    label = np.zeros(n2, np.int64)
    labelend = np.full(n2, -1, np.int64)
    inblossom = np.arange(n)
    blossomparent = np.full(n2, -1, np.int64)
    childs = np.zeros((n, n + 1), np.int64)  # row b - n
    endps = np.zeros((n, n + 1), np.int64)
    nchilds = np.zeros(n2, np.int64)
    blossombase = np.full(n2, -1, np.int64)
    for v in range(n):
        blossombase[v] = v
    bestedge = np.full(n2, -1, np.int64)
    unused = np.empty(n, np.int64)
    for i in range(n):
        unused[i] = n + i
    nunused = n
    dualvar = np.zeros(n2, np.int64)
    for v in range(n):
        dualvar[v] = maxweight
    allowedge = np.zeros(nedge, np.bool_)
    queue = np.empty(4 * n + 4, np.int64)
    qlen = 0

    leafbuf = np.empty(n, np.int64)
    leafstack = np.empty(n2 + 1, np.int64)
    tmp = np.empty(n + 1, np.int64)
    bestedgeto = np.full(n2, -1, np.int64)
    path = np.empty(n + 1, np.int64)
    pathend = np.empty(n + 1, np.int64)
    work_b = np.empty(n2 + 1, np.int64)
    work_v = np.empty(n2 + 1, np.int64)

    def slack(k):
        return dualvar[ei[k]] + dualvar[ej[k]] - w2[k]

    def leaves(b, out):
        if b < n:
            out[0] = b
            return 1
        cnt = 0
        top = 1
        leafstack[0] = b
        while top > 0:
            top -= 1
            x = leafstack[top]
            if x < n:
                out[cnt] = x
                cnt += 1
            else:
                for c in range(nchilds[x] - 1, -1, -1):
                    leafstack[top] = childs[x - n, c]
                    top += 1
        return cnt

    def assign_label(w, t, p, qlen):
        while True:
            b = inblossom[w]
            label[w] = t
            label[b] = t
            labelend[w] = p
            labelend[b] = p
            bestedge[w] = -1
            bestedge[b] = -1
            if t == 1:
                cnt = leaves(b, leafbuf)
                for i in range(cnt):
                    queue[qlen] = leafbuf[i]
                    qlen += 1
                return qlen
            base = blossombase[b]
            w = endpoint[mate[base]]
            p = mate[base] ^ 1
            t = 1

    def scan_blossom(v, w):
        npath = 0
        base = -1
        while v != -1 or w != -1:
            b = inblossom[v]
            if label[b] & 4:
                base = blossombase[b]
                break
            path[npath] = b
            npath += 1
            label[b] = 5
            if labelend[b] == -1:
                v = -1
            else:
                v = endpoint[labelend[b]]
                b = inblossom[v]
                v = endpoint[labelend[b]]
            if w != -1:
                v, w = w, v
        for i in range(npath):
            label[path[i]] = 1
        return base

    def add_blossom(base, k, nunused, qlen):
        v = ei[k]
        w = ej[k]
        bb = inblossom[base]
        bv = inblossom[v]
        bw = inblossom[w]
        nunused -= 1
        b = unused[nunused]
        r = b - n
        blossombase[b] = base
        blossomparent[b] = -1
        blossomparent[bb] = b
        npath = 0
        while bv != bb:
            blossomparent[bv] = b
            path[npath] = bv
            pathend[npath] = labelend[bv]
            npath += 1
            v = endpoint[labelend[bv]]
            bv = inblossom[v]
        # childs = [bb] + reversed(path); endps = reversed(pathend) + [2k]
        childs[r, 0] = bb
        for i in range(npath):
            childs[r, 1 + i] = path[npath - 1 - i]
            endps[r, i] = pathend[npath - 1 - i]
        endps[r, npath] = 2 * k
        cnt = npath + 1
        ecnt = npath + 1
        while bw != bb:
            blossomparent[bw] = b
            childs[r, cnt] = bw
            cnt += 1
            endps[r, ecnt] = labelend[bw] ^ 1
            ecnt += 1
            w = endpoint[labelend[bw]]
            bw = inblossom[w]
        nchilds[b] = cnt
        label[b] = 1
        labelend[b] = labelend[bb]
        dualvar[b] = 0
        nl = leaves(b, leafbuf)
        for i in range(nl):
            x = leafbuf[i]
            if label[inblossom[x]] == 2:
                queue[qlen] = x
                qlen += 1
            inblossom[x] = b
        # least-slack edge from the new blossom to every other S-blossom
        touched = 0
        for i in range(nl):
            x = leafbuf[i]
            for pi in range(nbstart[x], nbstart[x + 1]):
                kk = nb[pi] // 2
                j = endpoint[nb[pi]]
                bj = inblossom[j]
                if bj != b and label[bj] == 1:
                    if bestedgeto[bj] == -1:
                        tmp[touched] = bj
                        touched += 1
                        bestedgeto[bj] = kk
                    elif slack(kk) < slack(bestedgeto[bj]):
                        bestedgeto[bj] = kk
        for c in range(cnt):
            bestedge[childs[r, c]] = -1
        best = -1
        for i in range(touched):
            kk = bestedgeto[tmp[i]]
            bestedgeto[tmp[i]] = -1
            if best == -1 or slack(kk) < slack(best):
                best = kk
        bestedge[b] = best
        return nunused, qlen

    def free_blossom(b, nunused):
        label[b] = -1
        labelend[b] = -1
        nchilds[b] = 0
        blossombase[b] = -1
        bestedge[b] = -1
        unused[nunused] = b
        return nunused + 1

    def expand_endstage(b0, nunused):
        top = 1
        work_b[0] = b0
        while top > 0:
            top -= 1
            b = work_b[top]
            r = b - n
            for c in range(nchilds[b]):
                s = childs[r, c]
                blossomparent[s] = -1
                if s < n:
                    inblossom[s] = s
                elif dualvar[s] == 0:
                    work_b[top] = s
                    top += 1
                else:
                    nl = leaves(s, leafbuf)
                    for i in range(nl):
                        inblossom[leafbuf[i]] = s
            nunused = free_blossom(b, nunused)
        return nunused

    def expand_midstage(b, nunused, qlen):
        r = b - n
        nc = nchilds[b]
        for c in range(nc):
            s = childs[r, c]
            blossomparent[s] = -1
            if s < n:
                inblossom[s] = s
            else:
                nl = leaves(s, leafbuf)
                for i in range(nl):
                    inblossom[leafbuf[i]] = s
        if label[b] == 2:
            entrychild = inblossom[endpoint[labelend[b] ^ 1]]
            j = 0
            for c in range(nc):
                if childs[r, c] == entrychild:
                    j = c
                    break
            if j & 1:
                j -= nc
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            p = labelend[b]
            while j != 0:
                label[endpoint[p ^ 1]] = 0
                label[endpoint[endps[r, _wrap(j - endptrick, nc)] ^ endptrick ^ 1]] = 0
                qlen = assign_label(endpoint[p ^ 1], 2, p, qlen)
                allowedge[endps[r, _wrap(j - endptrick, nc)] // 2] = True
                j += jstep
                p = endps[r, _wrap(j - endptrick, nc)] ^ endptrick
                allowedge[p // 2] = True
                j += jstep
            bv = childs[r, _wrap(j, nc)]
            label[endpoint[p ^ 1]] = 2
            label[bv] = 2
            labelend[endpoint[p ^ 1]] = p
            labelend[bv] = p
            bestedge[bv] = -1
            j += jstep
            while childs[r, _wrap(j, nc)] != entrychild:
                bv = childs[r, _wrap(j, nc)]
                if label[bv] == 1:
                    j += jstep
                    continue
                nl = leaves(bv, leafbuf)
                v = -1
                for i in range(nl):
                    v = leafbuf[i]
                    if label[v] != 0:
                        break
                if label[v] != 0:
                    label[v] = 0
                    label[endpoint[mate[blossombase[bv]]]] = 0
                    qlen = assign_label(v, 2, labelend[v], qlen)
                j += jstep
        return free_blossom(b, nunused), qlen

    def augment_blossom(b0, v0):
        top = 1
        work_b[0] = b0
        work_v[0] = v0
        while top > 0:
            top -= 1
            b = work_b[top]
            v = work_v[top]
            r = b - n
            nc = nchilds[b]
            t = v
            while blossomparent[t] != b:
                t = blossomparent[t]
            if t >= n:
                work_b[top] = t
                work_v[top] = v
                top += 1
            i = 0
            for c in range(nc):
                if childs[r, c] == t:
                    i = c
                    break
            j = i
            if i & 1:
                j -= nc
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            while j != 0:
                j += jstep
                t = childs[r, _wrap(j, nc)]
                p = endps[r, _wrap(j - endptrick, nc)] ^ endptrick
                if t >= n:
                    work_b[top] = t
                    work_v[top] = endpoint[p]
                    top += 1
                j += jstep
                t = childs[r, _wrap(j, nc)]
                if t >= n:
                    work_b[top] = t
                    work_v[top] = endpoint[p ^ 1]
                    top += 1
                mate[endpoint[p]] = p ^ 1
                mate[endpoint[p ^ 1]] = p
            for c in range(nc):
                tmp[c] = childs[r, (c + i) % nc]
            for c in range(nc):
                childs[r, c] = tmp[c]
            for c in range(nc):
                tmp[c] = endps[r, (c + i) % nc]
            for c in range(nc):
                endps[r, c] = tmp[c]
            blossombase[b] = v

    def augment_matching(k):
        for side in range(2):
            if side == 0:
                s = ei[k]
                p = 2 * k + 1
            else:
                s = ej[k]
                p = 2 * k
            while True:
                bs = inblossom[s]
                if bs >= n:
                    augment_blossom(bs, s)
                mate[s] = p
                if labelend[bs] == -1:
                    break
                t = endpoint[labelend[bs]]
                bt = inblossom[t]
                s = endpoint[labelend[bt]]
                j = endpoint[labelend[bt] ^ 1]
                if bt >= n:
                    augment_blossom(bt, j)
                mate[j] = labelend[bt]
                p = labelend[bt] ^ 1

    for _stage in range(n):
        label[:] = 0
        bestedge[:] = -1
        allowedge[:] = False
        qlen = 0
        for v in range(n):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                qlen = assign_label(v, 1, -1, qlen)
        augmented = False
        while True:
            while qlen > 0 and not augmented:
                qlen -= 1
                v = queue[qlen]
                for pi in range(nbstart[v], nbstart[v + 1]):
                    p = nb[pi]
                    k = p // 2
                    w = endpoint[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    kslack = 0
                    if not allowedge[k]:
                        kslack = slack(k)
                        if kslack <= 0:
                            allowedge[k] = True
                    if allowedge[k]:
                        if label[inblossom[w]] == 0:
                            qlen = assign_label(w, 2, p ^ 1, qlen)
                        elif label[inblossom[w]] == 1:
                            base = scan_blossom(v, w)
                            if base >= 0:
                                nunused, qlen = add_blossom(base, k, nunused, qlen)
                            else:
                                augment_matching(k)
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < slack(bestedge[b]):
                            bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1 or kslack < slack(bestedge[w]):
                            bestedge[w] = k
            if augmented:
                break

            deltatype = -1
            delta = 0
            deltaedge = -1
            deltablossom = -1
            if not maxcardinality:
                deltatype = 1
                delta = dualvar[:n].min()
            for v in range(n):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    d = slack(bestedge[v])
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 2
                        deltaedge = bestedge[v]
            for b in range(n2):
                if blossomparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    d = slack(bestedge[b]) // 2
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 3
                        deltaedge = bestedge[b]
            for b in range(n, n2):
                if (
                    blossombase[b] >= 0
                    and blossomparent[b] == -1
                    and label[b] == 2
                    and (deltatype == -1 or dualvar[b] < delta)
                ):
                    delta = dualvar[b]
                    deltatype = 4
                    deltablossom = b
            if deltatype == -1:
                deltatype = 1
                delta = max(0, dualvar[:n].min())

            for v in range(n):
                lb = label[inblossom[v]]
                if lb == 1:
                    dualvar[v] -= delta
                elif lb == 2:
                    dualvar[v] += delta
            for b in range(n, n2):
                if blossombase[b] >= 0 and blossomparent[b] == -1:
                    if label[b] == 1:
                        dualvar[b] += delta
                    elif label[b] == 2:
                        dualvar[b] -= delta

            if deltatype == 1:
                break
            elif deltatype == 2:
                allowedge[deltaedge] = True
                i = ei[deltaedge]
                if label[inblossom[i]] == 0:
                    i = ej[deltaedge]
                queue[qlen] = i
                qlen += 1
            elif deltatype == 3:
                allowedge[deltaedge] = True
                queue[qlen] = ei[deltaedge]
                qlen += 1
            else:
                nunused, qlen = expand_midstage(deltablossom, nunused, qlen)

        if not augmented:
            break
        for b in range(n, n2):
            if blossomparent[b] == -1 and blossombase[b] >= 0 and label[b] == 1 and dualvar[b] == 0:
                nunused = expand_endstage(b, nunused)

    for v in range(n):
        if mate[v] >= 0:
            mate[v] = endpoint[mate[v]]
    return mate


@njit(cache=True)
def min_weight_perfect_matching(nvertex, ei, ej, ew):
    """``mate`` of a minimum-weight perfect matching, or all -1 if none exists."""
    if ei.shape[0] == 0:
        return np.full(nvertex, -1, np.int64)
    top = ew.max() + 1
    mate = max_weight_matching(nvertex, ei, ej, top - ew, True)
    for v in range(nvertex):
        if mate[v] < 0:
            return np.full(nvertex, -1, np.int64)
    return mate
