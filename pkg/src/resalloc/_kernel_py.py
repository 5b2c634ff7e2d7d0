"""Pure-Python simulation kernel.

Same event loop and random stream as the compiled kernel, so both backends
return identical results for identical inputs.  Used when the extension is
not built.
"""

import math

MASK = (1 << 64) - 1
OK, CAPACITY_VIOLATION, ACTION_VIOLATION = 0, 1, 2


class Xoshiro256:
    """xoshiro256** generator with 53-bit uniform doubles."""

    def __init__(self, state):
        self.s = [int(x) & MASK for x in state]

    def next(self):
        s = self.s
        r = (((s[1] * 5) & MASK) << 7 | ((s[1] * 5) & MASK) >> 57) & MASK
        r = (r * 9) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = ((s[3] << 45) | (s[3] >> 19)) & MASK
        return r

    def uniform(self):
        return (self.next() >> 11) * (1.0 / 9007199254740992.0)


def _decide(I, L, owner, dummy, W_rows, pools, order, ceil, state_cap, dummy_of,
            N, used, reserved, act):
    for rt in range(L):
        act[rt] = -1
    for j in range(len(reserved)):
        reserved[j] = 0
    for i in order:
        rt = owner[i]
        if act[rt] >= 0:
            continue
        if dummy[i]:
            act[rt] = i
            continue
        if N[i] >= state_cap[i]:
            continue
        fits = True
        for j in pools[i]:
            if used[j] + reserved[j] + 1 > ceil[j][i]:
                fits = False
                break
        if fits:
            act[rt] = i
            for j in pools[i]:
                reserved[j] += W_rows[j][i]
    for rt in range(L):
        if act[rt] < 0:
            act[rt] = dummy_of[rt]


def run_replication(W, owner, dummy, mu, net, lam, C, mode, order, ceil, state_cap,
                    pool_ptr, pool_idx, rt_ptr, rt_pats, dummy_of,
                    horizon, t_warm, seed):
    J, I = W.shape
    L = len(lam)
    W_rows = W.tolist()
    owner = owner.tolist()
    dummy = [bool(d) for d in dummy]
    mu = mu.tolist()
    net = net.tolist()
    lam = lam.tolist()
    C = C.tolist()
    order = order.tolist()
    ceil = ceil.tolist()
    state_cap = state_cap.tolist()
    dummy_of = dummy_of.tolist()
    pools = [pool_idx[pool_ptr[i]:pool_ptr[i + 1]].tolist() for i in range(I)]
    rt_list = [rt_pats[rt_ptr[r]:rt_ptr[r + 1]].tolist() for r in range(L)]
    rng = Xoshiro256(seed)

    N = [0] * I
    used = [0] * J
    reserved = [0] * J
    act = [-1] * L
    occ = [0.0] * I
    arrivals = [0] * L
    blocked = [0] * L
    lam_tot = sum(lam)
    rev = 0.0
    events = 0
    status = OK
    t = 0.0
    if mode == 0:
        _decide(I, L, owner, dummy, W_rows, pools, order, ceil, state_cap, dummy_of,
                N, used, reserved, act)
    while True:
        dep = 0.0
        rate = 0.0
        for i in range(I):
            if N[i]:
                dep += N[i] * mu[i]
                rate += N[i] * net[i]
        total = lam_tot + dep
        t_next = t - math.log(1.0 - rng.uniform()) / total
        end = t_next if t_next < horizon else horizon
        lo = t if t > t_warm else t_warm
        if end > lo:
            span = end - lo
            rev += rate * span
            for i in range(I):
                if N[i]:
                    occ[i] += N[i] * span
        if t_next >= horizon:
            break
        t = t_next
        events += 1
        u = rng.uniform() * total
        if u < lam_tot:
            rt = L - 1
            acc = 0.0
            for r in range(L):
                acc += lam[r]
                if u < acc:
                    rt = r
                    break
            if mode == 0:
                i = act[rt]
            else:
                cand = [k for k in rt_list[rt]
                        if all(used[j] + W_rows[j][k] <= C[j] for j in pools[k])]
                if cand:
                    i = cand[int(rng.uniform() * len(cand))]
                else:
                    i = dummy_of[rt]
            if t >= t_warm:
                arrivals[rt] += 1
                if dummy[i]:
                    blocked[rt] += 1
            if not dummy[i]:
                N[i] += 1
                for j in pools[i]:
                    used[j] += W_rows[j][i]
                    if used[j] > C[j]:
                        status = CAPACITY_VIOLATION
        else:
            u -= lam_tot
            i = I - 1
            acc = 0.0
            for k in range(I):
                if N[k]:
                    acc += N[k] * mu[k]
                    if u < acc:
                        i = k
                        break
            while N[i] == 0:
                i -= 1
            N[i] -= 1
            for j in pools[i]:
                used[j] -= W_rows[j][i]
        if status != OK:
            break
        if mode == 0:
            _decide(I, L, owner, dummy, W_rows, pools, order, ceil, state_cap, dummy_of,
                    N, used, reserved, act)
            for j in range(J):
                if used[j] + reserved[j] > C[j]:
                    status = CAPACITY_VIOLATION
            for rt in range(L):
                if act[rt] < 0 or owner[act[rt]] != rt:
                    status = ACTION_VIOLATION
            if status != OK:
                break
    return rev, occ, arrivals, blocked, events, status
