"""Auction fixtures: ascending-clock and sealed-bid single-good auctions on
integer value grids, plus welfare-maximizing (VCG/Clarke) tables for the
two-good additive setting."""
from __future__ import annotations

import itertools

from .. import kernel as kn
from .. import prefdomains as pd
from ..errors import InvalidInput

GOOD = "g"


def win_outcome(bidders, winner, price) -> pd.Outcome:
    payments = {b: 0 for b in bidders}
    payments[winner] = int(price)
    return pd.Outcome.auction({GOOD: winner}, payments)


def one_good_domain(values, n: int, extra_outcomes=()) -> pd.Domain:
    bidders = tuple(range(1, n + 1))
    values = tuple(sorted(values))
    outcomes = {
        win_outcome(bidders, w, p) for w in bidders for p in values
    }
    outcomes |= set(extra_outcomes)
    vectors = {b: [(v,) for v in values] for b in bidders}
    return pd.auction_domain(bidders, (GOOD,), vectors, outcomes)


def ascending_clock_auction(values, n: int = 2):
    """Discrete ascending clock. At each price the remaining bidders are
    asked in descending id order whether to stay or quit; a quitter is out
    for good, and once one bidder remains she wins at the current price.
    If everyone still in sits through the top of the grid, the lowest id
    wins there. Yields the simultaneous-drop tie rule: lowest id wins.

    Returns (mechanism, domain).
    """
    if n < 2:
        raise InvalidInput("the clock needs at least two bidders")
    values = tuple(sorted(values))
    bidders = tuple(range(1, n + 1))
    domain = one_good_domain(values, n)
    top = values[-1]

    def build(step, remaining, queue, labels):
        price = values[step]
        if len(remaining) == 1:
            return kn.Leaf(win_outcome(bidders, remaining[0], price), kn.make_labels(labels))
        if not queue:
            if price == top:
                winner = min(remaining)
                return kn.Leaf(win_outcome(bidders, winner, price), kn.make_labels(labels))
            nxt = tuple(sorted(remaining, reverse=True))
            return build(step + 1, remaining, nxt, labels)
        i = queue[0]
        quits = frozenset(p for p in labels[i] if p.value_of(GOOD) == price)
        stays = labels[i] - quits
        if not quits:
            return build(step, remaining, queue[1:], labels)
        if not stays:
            # the bidder's value grid is exhausted: quitting is forced
            after = tuple(b for b in remaining if b != i)
            return build(step, after, queue[1:], labels)
        quit_labels = dict(labels)
        quit_labels[i] = quits
        stay_labels = dict(labels)
        stay_labels[i] = stays
        after_quit = tuple(b for b in remaining if b != i)
        children = (
            ("quit", build(step, after_quit, queue[1:], quit_labels)),
            ("stay", build(step, remaining, queue[1:], stay_labels)),
        )
        return kn.Node(i, tuple(children), kn.make_labels(labels))

    root_labels = {b: frozenset(domain.prefs(b)) for b in bidders}
    start = tuple(sorted(bidders, reverse=True))
    tree = build(0, bidders, start, root_labels)
    return kn.Mechanism(tree), domain


def truthful_clock_strategy(m: kn.Mechanism, domain: pd.Domain, agent):
    """Stay while the price is below the value; labels encode exactly that."""
    return kn.truthful_strategy(m, agent)


def sealed_bid_second_price(values, n: int = 2, bids=None):
    """Simultaneous sealed bids via one information cell per bidder; the
    highest bid wins (ties to the lowest id) at the second-highest bid.

    Returns (mechanism, domain).
    """
    values = tuple(sorted(values))
    bids = tuple(sorted(bids)) if bids is not None else values
    bidders = tuple(range(1, n + 1))
    extra = {
        win_outcome(bidders, w, p) for w in bidders for p in bids
    }
    domain = one_good_domain(values, n, extra_outcomes=extra)

    def winner_and_price(bid_map):
        best = max(bid_map.values())
        winner = min(b for b in bidders if bid_map[b] == best)
        second = max(v for b, v in bid_map.items() if b != winner)
        return winner, second

    def build(k, bid_map):
        if k == len(bidders):
            w, p = winner_and_price(bid_map)
            return kn.Leaf(win_outcome(bidders, w, p))
        i = bidders[k]
        children = []
        for b in bids:
            sub = dict(bid_map)
            sub[i] = b
            children.append((f"bid{b}", build(k + 1, sub)))
        return kn.Node(i, tuple(children))

    tree = build(0, {})
    m = kn.Mechanism(tree)
    cells = []
    for i in bidders:
        cell = tuple(sorted(h for h in m.decision_histories(i)))
        cells.append(cell)
    return kn.Mechanism(tree, cells), domain


def truthful_sealed_strategy(m: kn.Mechanism, domain: pd.Domain, agent):
    strategy = {}
    for p in domain.prefs(agent):
        v = p.value_of(GOOD)
        target = f"bid{v}"
        choices = {}
        for cell in m.agent_cells(agent):
            acts = m.node_at(cell[0]).actions
            choices[cell] = target if target in acts else acts[0]
        strategy[p] = kn.Behavior(agent, choices)
    return strategy


# ---------------------------------------------------------------------------
# Two goods, additive bidders, welfare maximization with Clarke pivots


def two_good_outcome(bidders, allocation, payments) -> pd.Outcome:
    pays = {b: 0 for b in bidders}
    pays.update(payments)
    return pd.Outcome.auction(allocation, pays)


def welfare_best_allocations(goods, valuations):
    """All welfare-maximizing allocations; valuations: bidder -> {good: v}."""
    bidders = sorted(valuations)
    best, arg = None, []
    for assignment in itertools.product(bidders, repeat=len(goods)):
        alloc = dict(zip(goods, assignment))
        welfare = sum(valuations[b][g] for g, b in alloc.items())
        if best is None or welfare > best:
            best, arg = welfare, [alloc]
        elif welfare == best:
            arg.append(alloc)
    return best, arg


def vcg_clarke_scf(vectors, goods=("a", "b")) -> pd.SCFTable:
    """VCG with the Clarke pivot rule on an explicit additive domain.

    `vectors` maps bidder -> list of value tuples aligned with `goods`.
    Ties in welfare break toward allocating to the lowest bidder id,
    good by good.
    """
    bidders = tuple(sorted(vectors))
    goods = tuple(goods)

    def table_for(profile):
        vals = {
            b: dict(p.values)
            for b, p in zip(bidders, profile)
        }
        _, args = welfare_best_allocations(goods, vals)
        alloc = min(args, key=lambda al: tuple(al[g] for g in goods))
        payments = {}
        for b in bidders:
            others = {j: v for j, v in vals.items() if j != b}
            solo, _ = welfare_best_allocations(goods, others)
            with_b = sum(
                vals[j][g] for g, j in alloc.items() if j != b
            )
            payments[b] = solo - with_b
        return alloc, payments

    domain_probe = pd.auction_domain(bidders, goods, vectors, ())
    outcomes = set()
    rows = {}
    for prof in itertools.product(*(domain_probe.prefs(b) for b in bidders)):
        alloc, pays = table_for(prof)
        y = two_good_outcome(bidders, alloc, pays)
        rows[prof] = y
        outcomes.add(y)
    # preference objects are structural, so the probe's profiles key the
    # final domain's table directly
    domain = pd.auction_domain(bidders, goods, vectors, outcomes)
    return pd.SCFTable(domain, rows)


APPENDIX_TYPES = ((20, 2), (8, 8), (6, 6))


def restricted_two_good_scf() -> pd.SCFTable:
    """VCG-Clarke on the three crafted additive types, both bidders."""
    vectors = {1: list(APPENDIX_TYPES), 2: list(APPENDIX_TYPES)}
    return vcg_clarke_scf(vectors)
