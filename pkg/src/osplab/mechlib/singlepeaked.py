"""Single-peaked policy mechanisms: dictatorships with safeguards against
extremism (embedding plain dictatorship, min, and max), directional sweeps,
boundary arbitration, and the median rule (as an SCF only).

The policy grid is a finite integer interval; veto bounds may be open
(None stands for the missing bound).
"""
from __future__ import annotations

from dataclasses import dataclass

from .. import kernel as kn
from .. import prefdomains as pd
from ..errors import AmbiguousMedian, InvalidInput, InvalidParams

RIGHT = "right"
LEFT = "left"


@dataclass(frozen=True)
class Arbitration:
    """A proto-dictatorship splice at one sweep boundary.

    Going right from y to y+1 with boundary y+1, the designated agent
    (whose right veto sits exactly at the boundary) may force the boundary
    policy, open arbitration between the two neighbors, or pass.
    """

    direction: str
    boundary: int
    designated: int
    stream: tuple  # ((agent, offered policy), ...)
    final: int


@dataclass(frozen=True)
class SafeguardParams:
    dictator: int
    vetoes: tuple  # ((agent, l or None, r or None), ...) for agents != dictator
    arbitrations: tuple = ()

    def agents(self):
        return tuple(sorted({self.dictator} | {a for a, _, _ in self.vetoes}))

    def veto_of(self, agent):
        for a, l, r in self.vetoes:
            if a == agent:
                return l, r
        raise InvalidInput(f"agent {agent} has no veto entry")


def safeguards(dictator, vetoes, arbitrations=()):
    """Convenience builder: vetoes as {agent: (l, r)} with None for ±inf."""
    rows = tuple(sorted((a, l, r) for a, (l, r) in vetoes.items()))
    return SafeguardParams(dictator, rows, tuple(arbitrations))


def plain_dictatorship(n, dictator=1):
    others = {a: (None, None) for a in range(1, n + 1) if a != dictator}
    return safeguards(dictator, others)


def min_rule(n, lo, dictator=1):
    others = {a: (None, lo) for a in range(1, n + 1) if a != dictator}
    return safeguards(dictator, others)


def max_rule(n, hi, dictator=1):
    others = {a: (hi, None) for a in range(1, n + 1) if a != dictator}
    return safeguards(dictator, others)


def domain_for(params: SafeguardParams, lo, hi) -> pd.Domain:
    agents = params.agents()
    outcomes = tuple(pd.Outcome.policy(y) for y in range(lo, hi + 1))
    prefs = tuple(pd.enumerate_single_peaked(lo, hi, agent=a) for a in agents)
    return pd.Domain("single_peaked", agents, outcomes, prefs)


def _bounds(params, lo, hi):
    ls = [l for _, l, _ in params.vetoes if l is not None]
    rs = [r for _, _, r in params.vetoes if r is not None]
    lstar_raw = max(ls) if ls else None
    hstar_raw = min(rs) if rs else None
    if lstar_raw is not None and hstar_raw is not None and lstar_raw > hstar_raw:
        raise InvalidParams("veto intervals have empty intersection")
    c_lo = max(lstar_raw, lo) if lstar_raw is not None else lo
    c_hi = min(hstar_raw, hi) if hstar_raw is not None else hi
    if c_lo > c_hi:
        raise InvalidParams("center interval misses the truncated grid")
    return c_lo, c_hi


def _validate_arbitrations(params, lo, hi, c_lo, c_hi):
    seen = set()
    for arb in params.arbitrations:
        if arb.direction not in (RIGHT, LEFT):
            raise InvalidParams(f"bad direction {arb.direction}")
        key = (arb.direction, arb.boundary)
        if key in seen:
            raise InvalidParams("only one agent may arbitrate per boundary")
        seen.add(key)
        l, r = params.veto_of(arb.designated)
        if arb.direction == RIGHT:
            if not (c_hi < arb.boundary <= hi):
                raise InvalidParams(f"right boundary {arb.boundary} not on the sweep")
            if r != arb.boundary:
                raise InvalidParams("designated agent's right veto must sit at the boundary")
            low, high = arb.boundary - 1, arb.boundary
        else:
            if not (lo <= arb.boundary < c_lo):
                raise InvalidParams(f"left boundary {arb.boundary} not on the sweep")
            if l != arb.boundary:
                raise InvalidParams("designated agent's left veto must sit at the boundary")
            low, high = arb.boundary, arb.boundary + 1
        participants = [a for a, _ in arb.stream] + [arb.final]
        if len(set(participants)) != len(participants):
            raise InvalidParams("arbitration repeats an agent")
        for a, offered in tuple(arb.stream) + ((arb.final, low),):
            if offered not in (low, high):
                raise InvalidParams("offered policy outside the boundary pair")
            if a == params.dictator or a == arb.designated:
                raise InvalidParams("dictator and designated agent cannot arbitrate")
            al, ar = params.veto_of(a)
            if arb.direction == RIGHT and ar is not None and ar < arb.boundary:
                raise InvalidParams(f"agent {a} already moved before the boundary")
            if arb.direction == LEFT and al is not None and al > arb.boundary:
                raise InvalidParams(f"agent {a} already moved before the boundary")


def dictatorship_with_safeguards(params: SafeguardParams, lo, hi) -> kn.Mechanism:
    """The labeled sweep mechanism implementing the safeguarded dictatorship.

    The dictator first picks freely from the center interval or starts a
    directional sweep; at policy y, every agent whose veto has lapsed (and
    the dictator) may stop; arbitration splices sit between steps.
    """
    if lo > hi:
        raise InvalidInput("lo > hi")
    domain = domain_for(params, lo, hi)
    c_lo, c_hi = _bounds(params, lo, hi)
    _validate_arbitrations(params, lo, hi, c_lo, c_hi)
    d = params.dictator
    if lo == hi:
        labels = {a: frozenset(domain.prefs(a)) for a in domain.agents}
        return kn.Mechanism(kn.Leaf(pd.Outcome.policy(lo), kn.make_labels(labels)))

    by_peak = {
        a: {p.peak: [q for q in domain.prefs(a) if q.peak == p.peak] for p in domain.prefs(a)}
        for a in domain.agents
    }

    def peak_side(prefs, y, side):
        if side == "stop_right":
            return frozenset(p for p in prefs if p.peak <= y)
        if side == "stop_left":
            return frozenset(p for p in prefs if p.peak >= y)
        raise AssertionError(side)

    def eligible(direction, y):
        out = []
        for a in domain.agents:
            if a == d:
                out.append(a)
                continue
            l, r = params.veto_of(a)
            if direction == RIGHT and r is not None and r <= y:
                out.append(a)
            if direction == LEFT and l is not None and l >= y:
                out.append(a)
        return tuple(out)

    def arbitration_at(direction, boundary):
        for arb in params.arbitrations:
            if arb.direction == direction and arb.boundary == boundary:
                return arb
        return None

    def stop_fans(agent, stops, labels, y):
        fans = []
        for p in sorted(stops, key=lambda q: q.key()):
            fan_labels = dict(labels)
            fan_labels[agent] = frozenset((p,))
            fans.append(
                (f"stop{y}~{p.short()}", kn.Leaf(pd.Outcome.policy(y), kn.make_labels(fan_labels)))
            )
        return fans

    def run_step(direction, y, queue, labels, last):
        if not queue:
            return transition(direction, y, labels, last)
        i = queue[0]
        side = "stop_right" if direction == RIGHT else "stop_left"
        stops = peak_side(labels[i], y, side)
        conts = labels[i] - stops
        if not stops:
            return run_step(direction, y, queue[1:], labels, last)
        if not conts:
            raise AssertionError("forced stop should have become a leaf earlier")
        if i == last:
            if len(queue) == 1:
                raise AssertionError("lone repeated mover in a sweep step")
            return run_step(direction, y, queue[1:] + (i,), labels, last)
        children = stop_fans(i, stops, labels, y)
        ynext = y + (1 if direction == RIGHT else -1)
        later_movers = any(
            peak_side(labels[j], y, side) for j in queue[1:]
        )
        boundary = (direction == RIGHT and ynext == hi) or (
            direction == LEFT and ynext == lo
        )
        if (
            not later_movers
            and not boundary
            and arbitration_at(direction, ynext) is None
        ):
            # The step's last mover is also the first who may settle the next
            # policy; without this her continue action would pin that policy
            # while revealing nothing.
            force = frozenset(p for p in conts if p.peak == ynext)
            conts = conts - force
            children.extend(stop_fans(i, force, labels, ynext))
        cont_labels = dict(labels)
        cont_labels[i] = conts
        children.append(("continue", run_step(direction, y, queue[1:], cont_labels, i)))
        return kn.Node(i, tuple(children), kn.make_labels(labels))

    def transition(direction, y, labels, last):
        ynext = y + (1 if direction == RIGHT else -1)
        arb = arbitration_at(direction, ynext)
        if arb is not None:
            return arb_node(direction, arb, labels, last)
        return enter_step(direction, ynext, labels, last)

    def enter_step(direction, ynext, labels, last):
        if (direction == RIGHT and ynext == hi) or (direction == LEFT and ynext == lo):
            return kn.Leaf(pd.Outcome.policy(ynext), kn.make_labels(labels))
        return run_step(direction, ynext, eligible(direction, ynext), labels, last)

    def arb_node(direction, arb, labels, last):
        b = arb.boundary
        j = arb.designated
        if direction == RIGHT:
            force = frozenset(p for p in labels[j] if p.peak == b)
            arbitrate = frozenset(p for p in labels[j] if p.peak <= b - 1)
            cont = frozenset(p for p in labels[j] if p.peak > b)
            low, high = b - 1, b
        else:
            force = frozenset(p for p in labels[j] if p.peak == b)
            arbitrate = frozenset(p for p in labels[j] if p.peak >= b + 1)
            cont = frozenset(p for p in labels[j] if p.peak < b)
            low, high = b, b + 1
        children = []
        for p in sorted(force, key=lambda q: q.key()):
            fl = dict(labels)
            fl[j] = frozenset((p,))
            children.append((f"force{b}~{p.short()}", kn.Leaf(pd.Outcome.policy(b), kn.make_labels(fl))))
        arb_labels = dict(labels)
        arb_labels[j] = arbitrate
        children.append(("arbitrate", proto_over_pair(arb, low, high, arb_labels, j)))
        if cont:
            cont_labels = dict(labels)
            cont_labels[j] = cont
            children.append(("continue", enter_step(direction, b, cont_labels, j)))
        return kn.Node(j, tuple(children), kn.make_labels(labels))

    def proto_over_pair(arb, low, high, labels, last):
        def prefer(prefs, target):
            if target == low:
                return frozenset(p for p in prefs if p.peak <= low)
            return frozenset(p for p in prefs if p.peak >= high)

        def build(k, labels, last):
            if k == len(arb.stream):
                i = arb.final
                children = []
                for target in (low, high):
                    for p in sorted(prefer(labels[i], target), key=lambda q: q.key()):
                        fl = dict(labels)
                        fl[i] = frozenset((p,))
                        children.append(
                            (f"pick{target}~{p.short()}", kn.Leaf(pd.Outcome.policy(target), kn.make_labels(fl)))
                        )
                return kn.Node(i, tuple(children), kn.make_labels(labels))
            i, offered = arb.stream[k]
            mine = prefer(labels[i], offered)
            rest = labels[i] - mine
            children = []
            for p in sorted(mine, key=lambda q: q.key()):
                fl = dict(labels)
                fl[i] = frozenset((p,))
                children.append(
                    (f"force{offered}~{p.short()}", kn.Leaf(pd.Outcome.policy(offered), kn.make_labels(fl)))
                )
            pass_labels = dict(labels)
            pass_labels[i] = rest
            children.append(("pass", build(k + 1, pass_labels, i)))
            return kn.Node(i, tuple(children), kn.make_labels(labels))

        return build(0, labels, last)

    root_labels = {a: frozenset(domain.prefs(a)) for a in domain.agents}
    children = []
    for y in range(c_lo, c_hi + 1):
        for p in by_peak[d].get(y, ()):
            pl = dict(root_labels)
            pl[d] = frozenset((p,))
            children.append((f"pick{y}~{p.short()}", kn.Leaf(pd.Outcome.policy(y), kn.make_labels(pl))))
    if c_hi < hi:
        rl = dict(root_labels)
        rl[d] = frozenset(p for p in root_labels[d] if p.peak > c_hi)
        children.append(("right", run_step(RIGHT, c_hi, eligible(RIGHT, c_hi), rl, d)))
    if c_lo > lo:
        ll = dict(root_labels)
        ll[d] = frozenset(p for p in root_labels[d] if p.peak < c_lo)
        children.append(("left", run_step(LEFT, c_lo, eligible(LEFT, c_lo), ll, d)))
    return kn.Mechanism(kn.Node(d, tuple(children), kn.make_labels(root_labels)))


def safeguards_scf(params: SafeguardParams, lo, hi) -> pd.SCFTable:
    """Closed-form SCF of an arbitration-free safeguarded dictatorship:
    the dictator's peak clamped into the veto-adjusted interval."""
    if params.arbitrations:
        raise InvalidInput("closed form only covers arbitration-free parameters")
    domain = domain_for(params, lo, hi)
    _bounds(params, lo, hi)
    d_pos = domain.position(params.dictator)

    def run(prof):
        by = dict(zip(domain.agents, prof))
        low_bound, high_bound = lo, hi
        for a, l, r in params.vetoes:
            peak = by[a].peak
            if l is not None:
                low_bound = max(low_bound, min(peak, l))
            if r is not None:
                high_bound = min(high_bound, max(peak, r))
        peak = prof[d_pos].peak
        return pd.Outcome.policy(min(max(peak, low_bound), high_bound))

    return pd.scf_from_function(domain, run)


def median_scf(n: int, lo: int, hi: int) -> pd.SCFTable:
    """Median of the declared peaks; refuses even n (no tie rule)."""
    if n % 2 == 0:
        raise AmbiguousMedian("median undefined for an even number of voters")
    domain = pd.single_peaked_domain(n, lo, hi)

    def run(prof):
        peaks = sorted(p.peak for p in prof)
        return pd.Outcome.policy(peaks[n // 2])

    return pd.scf_from_function(domain, run)
