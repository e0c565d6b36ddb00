"""Sequential barter (with and without lurkers): the house-matching state
machine unrolled into a labeled game tree.

A deterministic policy makes every designer choice (whom to endow, with
what, how to initialize and update the possible sets). The interpreter
enforces each step's constraints at runtime and asserts the state
invariants between rounds.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .. import kernel as kn
from .. import prefdomains as pd
from ..errors import InvalidInput, PolicyViolation
from ..osp import (
    _condense_runs,
    _stage_split_forced,
    forced_reveal_violations,
    normalize_tree,
)


@dataclass
class BarterState:
    houses: tuple
    agents: tuple
    o: frozenset                 # unmatched houses
    t: frozenset                 # active traders
    l: frozenset                 # lurkers
    g: frozenset                 # houses without lurkers
    d: dict                      # trader -> endowed houses
    oi: dict                     # trader -> possible houses
    matches: dict                # agent -> house
    lurk_seq: tuple              # ((agent, house), ...) in lurk order
    labels: dict                 # agent -> frozenset of still-consistent prefs
    last_mover: int = None

    def clone(self):
        return BarterState(
            self.houses, self.agents, self.o, self.t, self.l, self.g,
            dict(self.d), dict(self.oi), dict(self.matches),
            self.lurk_seq, dict(self.labels), self.last_mover,
        )

    def nonlurkers(self):
        return self.t - self.l

    def unmatched_agents(self):
        return [a for a in self.agents if a not in self.matches]


class BarterPolicy:
    """Deterministic designer callbacks; every returned choice is validated
    against the step constraints by the interpreter."""

    def pick_agent(self, state: BarterState):
        raise NotImplementedError

    def pick_endowment(self, state: BarterState, agent):
        raise NotImplementedError

    def pick_oi_init(self, state: BarterState, agent):
        return "G"

    def pick_oj_update(self, state: BarterState, other, lurked):
        return "shrink"


def valid_endowments(state: BarterState, agent):
    """All house sets the agent may legally be endowed with right now."""
    pool = state.oi[agent] - state.d[agent]
    others = state.nonlurkers() - {agent}
    pool2 = set(pool)
    if len(others) == 1:
        (t_other,) = others
        if state.oi[t_other] != state.g:
            pool2 -= state.d[t_other]
    inside = sorted(pool2 & state.g)
    options = []
    for mask in range(1, 1 << len(inside)):
        options.append(frozenset(h for k, h in enumerate(inside) if mask >> k & 1))
    if pool - state.g and pool == pool2:
        if frozenset(pool) not in options:
            options.append(frozenset(pool))
    return options


def endowable_agents(state: BarterState):
    out = []
    free = state.nonlurkers()
    for a in state.unmatched_agents():
        if len(free) == 2 and a not in state.t:
            continue
        if a == state.last_mover:
            continue
        probe = state if a in state.t else _joined(state, a, "G")
        probe2 = None if a in state.t else _joined(state, a, "O")
        if valid_endowments(probe, a):
            out.append(a)
        elif probe2 is not None and _join_allows_o(state) and valid_endowments(probe2, a):
            out.append(a)
    return out


def _join_allows_o(state):
    free = sorted(state.nonlurkers())
    if len(free) == 1 and state.oi[free[0]] != state.g:
        return False
    return True


def _joined(state, agent, choice):
    s = state.clone()
    s.d[agent] = frozenset()
    s.oi[agent] = s.g if choice == "G" else s.o
    s.t = s.t | {agent}
    return s


class _Interp:
    def __init__(self, policy, domain, lurkers_enabled, traversal):
        self.policy = policy
        self.domain = domain
        self.lurkers_enabled = lurkers_enabled
        self.traversal = traversal or (lambda agents: sorted(agents))
        self.states_seen = 0

    def check_invariants(self, s: BarterState):
        self.states_seen += 1
        assert len(s.t - s.l) <= 2, "more than two active nonlurkers"
        assert (not s.l) == (s.g == s.o), "lurker set and lurked houses disagree"
        over = [a for a in s.t - s.l if s.oi[a] == s.o and s.o != s.g]
        assert len(over) <= 1, "two nonlurkers see the full house set"
        for a in s.t - s.l:
            assert s.oi[a] in (s.g, s.o), "nonlurker possible set is neither G nor O"
        lurked_so_far = []
        for agent, house in s.lurk_seq:
            if agent not in s.l:
                lurked_so_far.append(house)
                continue
            assert s.oi[agent] - s.d[agent] == {house}, "lurker set mismatch"
            assert s.oi[agent] == s.o - frozenset(lurked_so_far), "lurker hierarchy broken"
            for p in s.labels[agent]:
                top = p.top(s.oi[agent])
                assert top == house, "lurker no longer favors her house"
            lurked_so_far.append(house)
        for a in s.t:
            assert s.d[a] <= s.oi[a], "endowments leak outside the possible set"

    # -- tree construction ---------------------------------------------------

    def build(self, state: BarterState):
        self.check_invariants(state)
        if not state.unmatched_agents():
            return kn.Leaf(
                pd.Outcome.matching(state.matches), kn.make_labels(state.labels)
            )
        return self.endowment_step(state)

    def endowment_step(self, state: BarterState):
        s = state.clone()
        agent = self.policy.pick_agent(s)
        if agent in s.matches or agent not in s.agents:
            raise PolicyViolation("endowment", f"agent {agent} cannot be endowed")
        if len(s.nonlurkers()) == 2 and agent not in s.t:
            raise PolicyViolation("endowment", "two active nonlurkers: must pick one")
        if agent == s.last_mover:
            raise PolicyViolation("endowment", "re-endowing the agent who just moved")
        if agent not in s.t:
            s.d[agent] = frozenset()
            free = sorted(s.nonlurkers())
            if len(free) == 1 and s.oi[free[0]] != s.g:
                choice = "G"
            else:
                choice = self.policy.pick_oi_init(s, agent)
                if choice not in ("G", "O"):
                    raise PolicyViolation("endowment", f"bad possible-set init {choice}")
            s.oi[agent] = s.g if choice == "G" else s.o
            s.t = s.t | {agent}
        h = frozenset(self.policy.pick_endowment(s, agent))
        if h not in valid_endowments(s, agent):
            raise PolicyViolation("endowment", f"illegal endowment {sorted(h)}")
        s.d[agent] = s.d[agent] | h
        return self.question_step(s, agent, ())

    def question_step(self, state: BarterState, agent, pending):
        s = state
        label = s.labels[agent]
        yes = frozenset(p for p in label if p.top(s.oi[agent]) in s.d[agent])
        no = label - yes
        if not yes:
            return self.answered_no(s, agent, pending, moved=False)
        if not no and len(yes) == 1:
            (p,) = yes
            s2 = s.clone()
            s2.labels[agent] = frozenset((p,))
            return self.matching_step(s2, agent, p.top(s2.oi[agent]), pending)
        children = []
        for p in sorted(yes, key=lambda q: q.key()):
            s2 = s.clone()
            s2.labels[agent] = frozenset((p,))
            s2.last_mover = agent
            children.append(
                (
                    f"take~{p.short()}",
                    self.matching_step(s2, agent, p.top(s2.oi[agent]), pending),
                )
            )
        if no:
            s3 = s.clone()
            s3.labels[agent] = no
            s3.last_mover = agent
            children.append(("pass", self.answered_no(s3, agent, pending, moved=True)))
        return kn.Node(agent, tuple(children), kn.make_labels(s.labels))

    def matching_step(self, state: BarterState, agent, house, pending):
        s = state.clone()
        s.matches[agent] = house
        s.t = s.t - {agent}
        s.l = s.l - {agent}
        s.o = s.o - {house}
        s.g = s.g - {house}
        affected = []
        for j in self.traversal(s.t):
            if house in s.d[j]:
                affected.append(j)
            elif house in s.oi[j]:
                affected.append(j)
        for j in s.t:
            if house in s.d[j]:
                s.d[j] = s.oi[j] - {house}
            s.oi[j] = s.oi[j] - {house}
            s.d[j] = s.d[j] - {house}
        queue = tuple(pending) + tuple(a for a in affected if a not in pending)
        return self.flush(s, queue)

    def flush(self, state: BarterState, pending):
        while pending:
            j, pending = pending[0], pending[1:]
            if j in state.t:
                return self.question_step(state, j, pending)
        return self.build(state)

    def answered_no(self, state: BarterState, agent, pending, moved):
        s = state
        if (
            self.lurkers_enabled
            and agent in s.t
            and agent not in s.l
            and s.oi[agent] == s.g
            and len(s.oi[agent] - s.d[agent]) == 1
        ):
            (o,) = s.oi[agent] - s.d[agent]
            others = sorted(s.nonlurkers() - {agent})
            j = others[0] if others else None
            if j is None or o not in s.d[j]:
                s = s.clone()
                s.l = s.l | {agent}
                s.g = s.g - {o}
                s.lurk_seq = s.lurk_seq + ((agent, o),)
                if j is not None:
                    choice = self.policy.pick_oj_update(s, j, o)
                    if choice == "shrink":
                        new_oj = s.oi[j] - {o}
                    elif choice == "keep":
                        new_oj = s.oi[j]
                    else:
                        raise PolicyViolation("sorting", f"bad update {choice}")
                    if not (s.d[j] <= new_oj and new_oj in (s.o, s.g)):
                        raise PolicyViolation(
                            "sorting", "possible set must stay O or G and cover D"
                        )
                    if new_oj != s.oi[j]:
                        s.oi[j] = new_oj
                        pending = (j,) + tuple(x for x in pending if x != j)
        return self.flush(s, pending)


def sequential_barter(
    policy: BarterPolicy,
    agents,
    houses,
    lurkers_enabled=True,
    traversal=None,
):
    """Unroll the barter state machine into a labeled mechanism.

    Returns (mechanism, domain, states_seen)."""
    agents = tuple(sorted(agents))
    houses = tuple(sorted(houses))
    if len(houses) < len(agents):
        raise InvalidInput("need at least as many houses as agents")
    domain = pd.matching_domain(agents, houses)
    interp = _Interp(policy, domain, lurkers_enabled, traversal)
    state = BarterState(
        houses=houses,
        agents=agents,
        o=frozenset(houses),
        t=frozenset(),
        l=frozenset(),
        g=frozenset(houses),
        d={},
        oi={},
        matches={},
        lurk_seq=(),
        labels={a: frozenset(domain.prefs(a)) for a in agents},
        last_mover=None,
    )
    tree = interp.build(state)
    # Informationless designer moves between two asks of one agent would
    # leave consecutive same-player nodes; condense them away.
    tree = _condense_runs(tree)
    # A generous policy can let a passer still pin down her own match by
    # waiting; canonical form then demands she reveal instead. Split such
    # preferences into their own actions, like the canonicalizer does.
    index = pd.IndifferenceIndex(domain)
    if forced_reveal_violations(tree, domain, index):
        tree = _stage_split_forced(tree, domain, index)
        tree = normalize_tree(tree)
    return kn.Mechanism(tree), domain, interp.states_seen


# ---------------------------------------------------------------------------
# Policy library


class SerialDictatorshipPolicy(BarterPolicy):
    """One trader at a time, endowed with everything she can still get."""

    def __init__(self, order):
        self.order = tuple(order)

    def pick_agent(self, state):
        for a in self.order:
            if a not in state.matches:
                return a
        raise PolicyViolation("endowment", "no unmatched agent")

    def pick_endowment(self, state, agent):
        return state.oi[agent] - state.d[agent]

    def pick_oi_init(self, state, agent):
        return "O"


class BipolarPolicy(BarterPolicy):
    """Two traders with priority over complementary house sets; if both
    decline their own set, the first picks anywhere and the second follows."""

    def __init__(self, first, second, first_houses):
        self.first = first
        self.second = second
        self.first_houses = frozenset(first_houses)

    def pick_agent(self, state):
        if self.first not in state.matches and not state.d.get(self.first):
            return self.first
        if self.second not in state.matches and not state.d.get(self.second):
            return self.second
        for a in (self.first, self.second):
            if a not in state.matches and a != state.last_mover:
                return a
        for a in state.unmatched_agents():
            if a != state.last_mover:
                return a
        raise PolicyViolation("endowment", "nobody to endow")

    def pick_endowment(self, state, agent):
        pool = state.oi[agent] - state.d[agent]
        if not state.d.get(agent):
            own = self.first_houses if agent == self.first else frozenset(state.houses) - self.first_houses
            slice_ = pool & own & state.g
            if slice_:
                return slice_
        return pool

    def pick_oi_init(self, state, agent):
        return "G"


class Fig1Policy(BarterPolicy):
    """Replays the four-agent lurker example via barter steps."""

    def pick_agent(self, state):
        if 1 not in state.t and 1 not in state.matches:
            return 1
        if 1 in state.l and 2 not in state.t and 2 not in state.matches:
            return 2
        if 2 in state.l and 3 not in state.t and 3 not in state.matches:
            return 3
        order = self._tail_order(state)
        for a in order:
            if a not in state.matches and a != state.last_mover:
                return a
        for a in state.unmatched_agents():
            if a != state.last_mover:
                return a
        raise PolicyViolation("endowment", "nobody to endow")

    def _tail_order(self, state):
        if state.matches.get(1) == "d" and 2 in state.matches:
            if state.matches[2] == "a":
                return (4, 3)
            if state.matches[2] == "b":
                return (3, 4)
        return (2, 3, 4)

    def pick_endowment(self, state, agent):
        pool = state.oi[agent] - state.d[agent]
        if agent == 1 and not state.d.get(1):
            return pool & frozenset(("a", "b", "c"))
        if agent == 2 and not state.d.get(2) and 1 in state.l:
            return pool & frozenset(("a", "b"))
        return pool

    def pick_oi_init(self, state, agent):
        if agent == 1:
            return "O"
        if agent == 3 and 2 in state.l:
            return "O"
        return "G"


class SeededRandomPolicy(BarterPolicy):
    """Deterministic pseudo-random designer: every choice is drawn from the
    valid options with a generator keyed by (seed, canonical state)."""

    def __init__(self, seed):
        self.seed = seed

    def _rng(self, state: BarterState, tag):
        fingerprint = (
            tag,
            tuple(sorted(state.matches.items())),
            tuple(sorted((a, tuple(sorted(state.d[a]))) for a in state.t)),
            tuple(sorted((a, tuple(sorted(state.oi[a]))) for a in state.t)),
            tuple(sorted((a, tuple(sorted(p.key() for p in ps)))
                  for a, ps in state.labels.items())),
            state.lurk_seq,
        )
        return random.Random((self.seed, fingerprint).__repr__())

    def pick_agent(self, state):
        options = endowable_agents(state)
        if not options:
            raise PolicyViolation("endowment", "no endowable agent")
        return self._rng(state, "agent").choice(sorted(options))

    def pick_endowment(self, state, agent):
        options = valid_endowments(state, agent)
        options.sort(key=lambda h: tuple(sorted(h)))
        return self._rng(state, "endow").choice(options)

    def pick_oi_init(self, state, agent):
        free = sorted(state.nonlurkers())
        if len(free) == 1 and state.oi[free[0]] != state.g:
            return "G"
        return self._rng(state, "init").choice(("G", "O"))

    def pick_oj_update(self, state, other, lurked):
        legal = []
        for choice, new in (("keep", state.oi[other]), ("shrink", state.oi[other] - {lurked})):
            if state.d[other] <= new and new in (state.o, state.g):
                legal.append(choice)
        if not legal:
            raise PolicyViolation("sorting", "no legal possible-set update")
        return self._rng(state, "sort").choice(legal)
