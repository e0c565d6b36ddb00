"""Outcomes, preferences, and finite preference domains.

Three settings are covered: integer policy grids with single-peaked voters,
house matching with strict rankings, and multi-good auctions with additive
quasilinear bidders. Everything here is immutable and pure; domains are
always full products of per-agent preference sets.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import InvalidInput, InvalidInterval, PartialScf, UnknownOutcome

STRICTLY_BETTER = 1
INDIFFERENT = 0
STRICTLY_WORSE = -1


@dataclass(frozen=True, order=True)
class Outcome:
    """A social outcome: a policy, a matching, or an auction result.

    The payload is a canonical hashable tuple so outcomes can live in sets
    and serve as dict keys.
    """

    kind: str
    payload: tuple

    @staticmethod
    def policy(value: int) -> "Outcome":
        return Outcome("policy", (int(value),))

    @staticmethod
    def matching(assignment) -> "Outcome":
        items = tuple(sorted(assignment.items()))
        agents = [a for a, _ in items]
        houses = [h for _, h in items]
        if len(set(agents)) != len(agents):
            raise InvalidInput("an agent appears twice in a matching")
        if len(set(houses)) != len(houses):
            raise InvalidInput("a house appears twice in a matching")
        return Outcome("matching", items)

    @staticmethod
    def auction(allocation, payments) -> "Outcome":
        alloc = tuple(sorted(allocation.items()))
        pays = tuple(sorted((b, int(p)) for b, p in payments.items()))
        return Outcome("auction", (alloc, pays))

    @property
    def policy_value(self) -> int:
        return self.payload[0]

    def house_of(self, agent):
        for a, h in self.payload:
            if a == agent:
                return h
        return None

    def allocation(self):
        return dict(self.payload[0])

    def bundle_of(self, bidder):
        return frozenset(g for g, b in self.payload[0] if b == bidder)

    def payment_of(self, bidder) -> int:
        for b, p in self.payload[1]:
            if b == bidder:
                return p
        return 0

    def short(self) -> str:
        if self.kind == "policy":
            return str(self.policy_value)
        if self.kind == "matching":
            return ",".join(f"{a}:{h}" for a, h in self.payload)
        alloc = ",".join(f"{g}:{b}" for g, b in self.payload[0])
        pays = ",".join(f"{b}={p}" for b, p in self.payload[1])
        return f"[{alloc}|{pays}]"


class Preference:
    """One agent's complete transitive order on the outcome universe."""

    agent: int

    def compare(self, y: Outcome, y2: Outcome) -> int:
        raise NotImplementedError

    def key(self):
        """Canonical sortable encoding, unique within one domain."""
        raise NotImplementedError

    def short(self) -> str:
        raise NotImplementedError

    def best(self, outcomes):
        it = iter(outcomes)
        top = next(it)
        for y in it:
            if self.compare(y, top) == STRICTLY_BETTER:
                top = y
        return top

    def worst(self, outcomes):
        it = iter(outcomes)
        bot = next(it)
        for y in it:
            if self.compare(y, bot) == STRICTLY_WORSE:
                bot = y
        return bot


def is_single_peaked_order(order) -> bool:
    """Predicate: total order on a policy set, strictly falling away from the peak."""
    peak = order[0]
    rank = {y: k for k, y in enumerate(order)}
    for y1 in order:
        for y2 in order:
            closer = (peak <= y1 < y2) or (y2 < y1 <= peak)
            if closer and rank[y1] >= rank[y2]:
                return False
    return True


@dataclass(frozen=True)
class SinglePeaked(Preference):
    agent: int
    order: tuple  # policies, best first

    def __post_init__(self):
        if not is_single_peaked_order(self.order):
            raise InvalidInput(f"order {self.order} is not single-peaked")
        object.__setattr__(self, "_rank", {y: k for k, y in enumerate(self.order)})

    @property
    def peak(self) -> int:
        return self.order[0]

    def _pos(self, y: Outcome) -> int:
        if y.kind != "policy" or y.policy_value not in self._rank:
            raise UnknownOutcome(f"{y} outside universe of {self}")
        return self._rank[y.policy_value]

    def compare(self, y, y2):
        a, b = self._pos(y), self._pos(y2)
        if a < b:
            return STRICTLY_BETTER
        if a > b:
            return STRICTLY_WORSE
        return INDIFFERENT

    def key(self):
        return ("sp", self.order)

    def short(self):
        return ">".join(str(y) for y in self.order)


@dataclass(frozen=True)
class StrictRanking(Preference):
    agent: int
    ranking: tuple  # houses, best first

    def __post_init__(self):
        if len(set(self.ranking)) != len(self.ranking):
            raise InvalidInput("ranking repeats a house")
        object.__setattr__(self, "_rank", {h: k for k, h in enumerate(self.ranking)})

    def house_rank(self, house) -> int:
        return self._rank[house]

    def top(self, houses=None):
        if houses is None:
            return self.ranking[0]
        return min(houses, key=self._rank.__getitem__)

    def compare(self, y, y2):
        if y.kind != "matching" or y2.kind != "matching":
            raise UnknownOutcome("strict rankings order matchings only")
        h1, h2 = y.house_of(self.agent), y2.house_of(self.agent)
        if h1 not in self._rank or h2 not in self._rank:
            raise UnknownOutcome(f"house outside ranking of agent {self.agent}")
        if h1 == h2:
            return INDIFFERENT
        return STRICTLY_BETTER if self._rank[h1] < self._rank[h2] else STRICTLY_WORSE

    def key(self):
        return ("rank", self.ranking)

    def short(self):
        return ">".join(str(h) for h in self.ranking)


@dataclass(frozen=True)
class AdditiveValuation(Preference):
    agent: int
    values: tuple  # ((good, value), ...) sorted by good, values nonnegative ints

    def __post_init__(self):
        vals = tuple(sorted((g, int(v)) for g, v in self.values))
        if any(v < 0 for _, v in vals):
            raise InvalidInput("valuations must be nonnegative integers")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_val", dict(vals))

    def value_of(self, good) -> int:
        return self._val[good]

    def utility(self, y: Outcome) -> int:
        if y.kind != "auction":
            raise UnknownOutcome("additive valuations order auction outcomes only")
        worth = sum(self._val.get(g, 0) for g in y.bundle_of(self.agent))
        return worth - y.payment_of(self.agent)

    def compare(self, y, y2):
        u1, u2 = self.utility(y), self.utility(y2)
        if u1 > u2:
            return STRICTLY_BETTER
        if u1 < u2:
            return STRICTLY_WORSE
        return INDIFFERENT

    def key(self):
        return ("val", tuple(v for _, v in self.values))

    def short(self):
        return "v=" + ",".join(f"{g}:{v}" for g, v in self.values)


def prefers(p: Preference, y: Outcome, y2: Outcome) -> int:
    """-1/0/+1 ordering of y against y2 under p (`STRICTLY_*`, `INDIFFERENT`)."""
    return p.compare(y, y2)


def strictly_prefers(p, y, y2) -> bool:
    return p.compare(y, y2) == STRICTLY_BETTER


def weakly_prefers(p, y, y2) -> bool:
    return p.compare(y, y2) != STRICTLY_WORSE


@dataclass(frozen=True)
class Domain:
    """A full product domain: per-agent preference sets over one outcome universe."""

    kind: str
    agents: tuple
    outcomes: tuple
    preferences: tuple  # tuple of per-agent tuples, aligned with agents

    def __post_init__(self):
        if tuple(sorted(self.agents)) != self.agents:
            raise InvalidInput("agents must be sorted")
        if len(self.preferences) != len(self.agents):
            raise InvalidInput("one preference set per agent required")
        for agent, prefs in zip(self.agents, self.preferences):
            if not prefs:
                raise InvalidInput(f"empty preference set for agent {agent}")
            for p in prefs:
                if p.agent != agent:
                    raise InvalidInput("preference/agent mismatch")

    @property
    def n(self) -> int:
        return len(self.agents)

    def position(self, agent) -> int:
        return self.agents.index(agent)

    def prefs(self, agent):
        return self.preferences[self.position(agent)]

    def pref_sets(self):
        return {a: frozenset(ps) for a, ps in zip(self.agents, self.preferences)}

    def profiles(self):
        return itertools.product(*self.preferences)

    def profile_count(self) -> int:
        count = 1
        for ps in self.preferences:
            count *= len(ps)
        return count

    def pref_index(self, agent, pref) -> int:
        return self.prefs(agent).index(pref)


Profile = tuple


def profile_pref(domain: Domain, profile, agent) -> Preference:
    return profile[domain.position(agent)]


def completely_indifferent(domain: Domain, agent, y: Outcome, y2: Outcome) -> bool:
    """True iff y and y2 are indifferent under every preference in the agent's set."""
    return all(p.compare(y, y2) == INDIFFERENT for p in domain.prefs(agent))


class IndifferenceIndex:
    """Per-agent partition of the outcome universe into complete-indifference classes."""

    def __init__(self, domain: Domain):
        self.domain = domain
        self._class_of = {}
        for agent in domain.agents:
            classes = []
            mapping = {}
            for y in domain.outcomes:
                for k, rep in enumerate(classes):
                    if completely_indifferent(domain, agent, y, rep):
                        mapping[y] = k
                        break
                else:
                    mapping[y] = len(classes)
                    classes.append(y)
            self._class_of[agent] = mapping

    def class_id(self, agent, y: Outcome) -> int:
        return self._class_of[agent][y]

    def same_class(self, agent, y, y2) -> bool:
        return self.class_id(agent, y) == self.class_id(agent, y2)

    def class_members(self, agent, y):
        cid = self.class_id(agent, y)
        return frozenset(
            o for o, k in self._class_of[agent].items() if k == cid
        )


def enumerate_single_peaked(lo: int, hi: int, agent=0):
    """All single-peaked total orders on [lo, hi] (2^(hi-lo) of them)."""
    if lo > hi:
        raise InvalidInterval(f"lo={lo} > hi={hi}")
    prefs = []
    for peak in range(lo, hi + 1):
        for order in _sp_extensions(peak, peak, (peak,), lo, hi):
            prefs.append(SinglePeaked(agent, order))
    return tuple(prefs)


def _sp_extensions(a, b, acc, lo, hi):
    # Grow the covered interval [a,b] one endpoint at a time; each growth
    # sequence is one single-peaked order.
    if a == lo and b == hi:
        yield acc
        return
    if a > lo:
        yield from _sp_extensions(a - 1, b, acc + (a - 1,), lo, hi)
    if b < hi:
        yield from _sp_extensions(a, b + 1, acc + (b + 1,), lo, hi)


def enumerate_strict_rankings(houses, agent=0):
    """All |houses|! strict orders over the given houses."""
    if not houses:
        raise InvalidInput("empty house set")
    return tuple(
        StrictRanking(agent, perm) for perm in itertools.permutations(sorted(houses))
    )


def single_peaked_domain(n: int, lo: int, hi: int) -> Domain:
    agents = tuple(range(1, n + 1))
    outcomes = tuple(Outcome.policy(y) for y in range(lo, hi + 1))
    prefs = tuple(enumerate_single_peaked(lo, hi, agent=a) for a in agents)
    return Domain("single_peaked", agents, outcomes, prefs)


def two_outcome_domain(n: int) -> Domain:
    """The |Y|=2 voting domain, with policies 0 and 1 standing for y and z."""
    return single_peaked_domain(n, 0, 1)


def all_matchings(agents, houses):
    agents = tuple(sorted(agents))
    outs = []
    for chosen in itertools.permutations(sorted(houses), len(agents)):
        outs.append(Outcome.matching(dict(zip(agents, chosen))))
    return tuple(sorted(outs))


def matching_domain(agents, houses) -> Domain:
    agents = tuple(sorted(agents))
    if len(houses) < len(agents):
        raise InvalidInput("need at least as many houses as agents")
    outcomes = all_matchings(agents, houses)
    prefs = tuple(enumerate_strict_rankings(houses, agent=a) for a in agents)
    return Domain("matching", agents, outcomes, prefs)


def auction_domain(bidders, goods, vectors, outcomes) -> Domain:
    """Auction domain from per-bidder valuation vectors over a fixed good list.

    `vectors` maps bidder -> iterable of value tuples aligned with `goods`.
    """
    bidders = tuple(sorted(bidders))
    goods = tuple(sorted(goods))
    prefs = tuple(
        tuple(
            AdditiveValuation(b, tuple(zip(goods, vec)))
            for vec in vectors[b]
        )
        for b in bidders
    )
    return Domain("auction", bidders, tuple(sorted(set(outcomes))), prefs)


def pareto_optimal(profile, y: Outcome, universe) -> bool:
    """No alternative weakly improves on y for everyone and strictly for someone."""
    for alt in universe:
        if alt == y:
            continue
        some_strict = False
        dominated = True
        for p in profile:
            c = p.compare(alt, y)
            if c == STRICTLY_WORSE:
                dominated = False
                break
            if c == STRICTLY_BETTER:
                some_strict = True
        if dominated and some_strict:
            return False
    return True


@dataclass
class SCFTable:
    """An explicit social choice function: a total map profile -> outcome."""

    domain: Domain
    table: dict

    def of(self, profile) -> Outcome:
        try:
            return self.table[tuple(profile)]
        except KeyError:
            raise PartialScf(f"scf undefined at {profile}") from None

    def signature(self):
        """Domain-order-independent identity, for set comparisons of SCFs."""
        return frozenset(
            (tuple(p.key() for p in prof), y) for prof, y in self.table.items()
        )

    def outcomes_used(self):
        return frozenset(self.table.values())

    def is_onto(self, universe=None) -> bool:
        target = frozenset(universe if universe is not None else self.domain.outcomes)
        return self.outcomes_used() == target

    def is_unanimous_peaks(self) -> bool:
        """Single-peaked unanimity: equal peaks are implemented verbatim."""
        for prof in self.domain.profiles():
            peaks = {p.peak for p in prof}
            if len(peaks) == 1 and self.of(prof).policy_value != peaks.pop():
                return False
        return True


def scf_from_function(domain: Domain, fn) -> SCFTable:
    return SCFTable(domain, {prof: fn(prof) for prof in domain.profiles()})


def _matching_dominated(prof, y, houses):
    """Strict-preference matchings: dominated iff some agent can grab a
    strictly better unmatched house, or an improving trade cycle exists."""
    own = {p.agent: y.house_of(p.agent) for p in prof}
    unmatched = set(houses) - set(own.values())
    edges = {}
    for p in prof:
        mine = p.house_rank(own[p.agent])
        if any(p.house_rank(h) < mine for h in unmatched):
            return True
        edges[p.agent] = [
            q.agent for q in prof
            if q.agent != p.agent and p.house_rank(own[q.agent]) < mine
        ]
    color = {}

    def cyclic(a):
        color[a] = 1
        for b in edges[a]:
            if color.get(b) == 1:
                return True
            if b not in color and cyclic(b):
                return True
        color[a] = 2
        return False

    return any(a not in color and cyclic(a) for a in edges)


def scf_pareto_optimal(scf: SCFTable):
    """Conjunction of pareto_optimal over all profiles; reports the first violation."""
    universe = scf.domain.outcomes
    if scf.domain.kind == "matching":
        houses = {h for y in universe for _, h in y.payload}
        for prof in scf.domain.profiles():
            if _matching_dominated(prof, scf.of(prof), houses):
                return False, prof
        return True, None
    for prof in scf.domain.profiles():
        if not pareto_optimal(prof, scf.of(prof), universe):
            return False, prof
    return True, None


def scf_strategyproof(scf: SCFTable):
    """Direct-revelation strategyproofness; reports the first violation."""
    dom = scf.domain
    for prof in dom.profiles():
        truth = scf.of(prof)
        for pos, agent in enumerate(dom.agents):
            for dev in dom.prefs(agent):
                if dev == prof[pos]:
                    continue
                lied = scf.of(prof[:pos] + (dev,) + prof[pos + 1:])
                if strictly_prefers(prof[pos], lied, truth):
                    return False, (agent, prof, dev)
    return True, None


# ---------------------------------------------------------------------------
# JSON codecs


def outcome_to_json(y: Outcome):
    if y.kind == "policy":
        return {"policy": y.policy_value}
    if y.kind == "matching":
        return {"matching": {str(a): h for a, h in y.payload}}
    return {
        "auction": {
            "allocation": {g: b for g, b in y.payload[0]},
            "payments": {str(b): p for b, p in y.payload[1]},
        }
    }


def outcome_from_json(data) -> Outcome:
    if "policy" in data:
        return Outcome.policy(data["policy"])
    if "matching" in data:
        return Outcome.matching({int(a): h for a, h in data["matching"].items()})
    spec = data["auction"]
    return Outcome.auction(
        spec["allocation"], {int(b): p for b, p in spec["payments"].items()}
    )


def _pref_to_json(p: Preference):
    if isinstance(p, SinglePeaked):
        return list(p.order)
    if isinstance(p, StrictRanking):
        return list(p.ranking)
    return {g: v for g, v in p.values}


def _pref_from_json(kind, agent, data) -> Preference:
    if kind == "single_peaked":
        return SinglePeaked(agent, tuple(data))
    if kind == "matching":
        return StrictRanking(agent, tuple(data))
    return AdditiveValuation(agent, tuple(data.items()))


def domain_to_json(domain: Domain):
    return {
        "kind": domain.kind,
        "agents": list(domain.agents),
        "outcomes": [outcome_to_json(y) for y in domain.outcomes],
        "preferences": {
            str(a): [_pref_to_json(p) for p in domain.prefs(a)]
            for a in domain.agents
        },
    }


def domain_from_json(data) -> Domain:
    kind = data["kind"]
    agents = tuple(sorted(int(a) for a in data["agents"]))
    outcomes = tuple(outcome_from_json(y) for y in data["outcomes"])
    prefs = tuple(
        tuple(_pref_from_json(kind, a, item) for item in data["preferences"][str(a)])
        for a in agents
    )
    return Domain(kind, agents, outcomes, prefs)


def scf_to_json(scf: SCFTable):
    rows = []
    for prof, y in sorted(scf.table.items(), key=lambda kv: [p.key() for p in kv[0]]):
        idx = [scf.domain.pref_index(a, p) for a, p in zip(scf.domain.agents, prof)]
        rows.append({"profile": idx, "outcome": outcome_to_json(y)})
    return {"domain": domain_to_json(scf.domain), "map": rows}


def scf_from_json(data) -> SCFTable:
    domain = domain_from_json(data["domain"])
    table = {}
    for row in data["map"]:
        prof = tuple(
            domain.prefs(a)[i] for a, i in zip(domain.agents, row["profile"])
        )
        table[prof] = outcome_from_json(row["outcome"])
    return SCFTable(domain, table)
