"""House matching fixtures: serial dictatorship, top trading cycles, and the
hard-coded four-agent mechanism with a lurker (three simultaneously active
traders).

Serial dictatorship and the fixture are emitted in gradual-revelation form:
an action that settles an agent's own match reveals her whole preference.
TTC is deliberately left with house-level actions; it only serves the
negative obvious-dominance check.
"""
from __future__ import annotations

from .. import kernel as kn
from .. import prefdomains as pd
from ..errors import InvalidInput

FIG1_AGENTS = (1, 2, 3, 4)
FIG1_HOUSES = ("a", "b", "c", "d")


def _fans(agent, prefs, child_for, labels, tag="take"):
    """Per-preference fully revealing actions (the canonical forced-match fan)."""
    children = []
    for p in sorted(prefs, key=lambda q: q.key()):
        sub_labels = dict(labels)
        sub_labels[agent] = frozenset((p,))
        children.append((f"{tag}~{p.short()}", child_for(p, sub_labels)))
    return children


def _sd_tree(order, remaining, assigned, labels, domain):
    if not order:
        return kn.Leaf(pd.Outcome.matching(assigned), kn.make_labels(labels))
    agent, rest = order[0], order[1:]
    if len(remaining) == 1:
        sub = dict(assigned)
        sub[agent] = next(iter(remaining))
        return _sd_tree(rest, frozenset(), sub, labels, domain)

    def child(p, sub_labels):
        top = p.top(remaining)
        sub = dict(assigned)
        sub[agent] = top
        return _sd_tree(rest, remaining - {top}, sub, sub_labels, domain)

    children = _fans(agent, labels[agent], child, labels)
    return kn.Node(agent, tuple(children), kn.make_labels(labels))


def serial_dictatorship(order, houses) -> kn.Mechanism:
    """Agents pick their favorite remaining house in the given order."""
    agents = tuple(sorted(order))
    if len(set(order)) != len(order):
        raise InvalidInput("an agent appears twice in the picking order")
    domain = pd.matching_domain(agents, houses)
    labels = {a: frozenset(domain.prefs(a)) for a in agents}
    tree = _sd_tree(tuple(order), frozenset(houses), {}, labels, domain)
    return kn.Mechanism(tree)


def serial_dictatorship_domain(order, houses) -> pd.Domain:
    return pd.matching_domain(tuple(sorted(order)), houses)


# ---------------------------------------------------------------------------
# Top trading cycles (house-level actions; used for the negative check)


def _ttc_cycles(pointing, owner):
    """Agents on cycles of the agent -> top house -> owner graph."""
    matched = {}
    for start in pointing:
        trail, seen = start, []
        while trail not in matched and trail not in seen:
            seen.append(trail)
            trail = owner[pointing[trail]]
        if trail in seen:
            for k in range(seen.index(trail), len(seen)):
                cyc = seen[k]
                matched[cyc] = pointing[cyc]
    return matched


def ttc(endowment) -> kn.Mechanism:
    """Extensive-form top trading cycles: each round the active agents are
    queried in id order for their top remaining house; cycles then trade."""
    agents = tuple(sorted(endowment))
    houses = tuple(sorted(endowment.values()))
    if len(set(houses)) != len(houses):
        raise InvalidInput("endowment repeats a house")

    def run_round(owner, assigned, queue, answers):
        if not queue:
            matched = _ttc_cycles(answers, {h: a for a, h in owner.items()})
            new_assigned = dict(assigned)
            new_assigned.update(matched)
            left = {a: h for a, h in owner.items() if a not in matched}
            taken = set(matched.values())
            left = {a: h for a, h in left.items() if h not in taken}
            # an uncycled agent whose endowed house was traded away cannot
            # happen under TTC (cycles consume matched houses exactly)
            if not left:
                return kn.Leaf(pd.Outcome.matching(new_assigned))
            return run_round(left, new_assigned, tuple(sorted(left)), {})
        agent, rest = queue[0], queue[1:]
        children = []
        for h in sorted(owner.values()):
            sub = dict(answers)
            sub[agent] = h
            children.append((h, run_round(owner, assigned, rest, sub)))
        return kn.Node(agent, tuple(children))

    tree = run_round(dict(endowment), {}, agents, {})
    return kn.Mechanism(tree)


def ttc_truthful_strategy(m: kn.Mechanism, domain: pd.Domain, agent):
    """Point at the true favorite among the offered houses (= the actions)."""
    strategy = {}
    for p in domain.prefs(agent):
        choices = {}
        for h in m.decision_histories(agent):
            acts = m.node_at(h).actions
            choices[m.cell_of(h)] = p.top(acts)
        strategy[p] = kn.Behavior(agent, choices)
    return strategy


# ---------------------------------------------------------------------------
# The figure fixture: agent 1 may pass on {a,b,c}, becoming a lurker for d


def fig1_domain() -> pd.Domain:
    return pd.matching_domain(FIG1_AGENTS, FIG1_HOUSES)


def fig1_mechanism() -> kn.Mechanism:
    """Hard-coded tree of the published four-agent example, in canonical
    labeled form. Structure, house by house:

    - agent 1 claims her favorite among {a,b,c} (then serial dictatorship
      2,3,4), or passes, revealing she favors d;
    - agent 2 claims a or b (then 1 takes d; dictatorship 4,3 after a,
      3,4 after b), or answers c, sending agent 3 into a free pick;
    - if agent 3 takes d, agent 1 is re-offered {a,b,c}; otherwise 1 keeps d.
    """
    domain = fig1_domain()
    full = {a: frozenset(domain.prefs(a)) for a in FIG1_AGENTS}

    def sd(order, remaining, assigned, labels):
        return _sd_tree(tuple(order), frozenset(remaining), dict(assigned), labels, domain)

    def finish(assigned, remaining, labels):
        """Match every still-open agent by forced picks; remaining agents in
        ascending order with deterministic leftovers."""
        open_agents = [a for a in FIG1_AGENTS if a not in assigned]
        return sd(open_agents, remaining, assigned, labels)

    def agent2_free_pick(assigned, remaining, labels):
        def child(q, sub_labels):
            top = q.top(remaining)
            sub = dict(assigned)
            sub[2] = top
            return finish(sub, remaining - {top}, sub_labels)

        return kn.Node(2, tuple(_fans(2, labels[2], child, labels)), kn.make_labels(labels))

    def agent3_node(labels):
        # agent 3 picks freely from all four houses
        def child(r, sub_labels):
            t = r.top(frozenset(FIG1_HOUSES))
            assigned = {3: t}
            remaining = frozenset(FIG1_HOUSES) - {t}
            if t == "d":
                return agent1_back(assigned, remaining, sub_labels)
            # agent 1 keeps d; agent 2 tops c among {a,b,c}
            sub = dict(assigned)
            sub[1] = "d"
            rem = remaining - {"d"}
            if t == "c":
                return agent2_free_pick(sub, rem, sub_labels)
            sub[2] = "c"
            return finish(sub, rem - {"c"}, sub_labels)

        return kn.Node(3, tuple(_fans(3, labels[3], child, labels)), kn.make_labels(labels))

    def agent1_back(assigned, remaining, labels):
        # d is gone: agent 1 (who favors d) picks her best among {a,b,c}
        def child(p, sub_labels):
            s = p.top(remaining)
            sub = dict(assigned)
            sub[1] = s
            rem = remaining - {s}
            if s == "c":
                return agent2_free_pick(sub, rem, sub_labels)
            sub2 = dict(sub)
            sub2[2] = "c"
            return finish(sub2, rem - {"c"}, sub_labels)

        return kn.Node(1, tuple(_fans(1, labels[1], child, labels)), kn.make_labels(labels))

    # agent 2's node on the pass path
    def agent2_node(labels):
        abc = frozenset(("a", "b", "c"))
        two = labels[2]
        takers = {h: frozenset(q for q in two if q.top(abc) == h) for h in ("a", "b")}
        answer_c = frozenset(q for q in two if q.top(abc) == "c")
        children = []
        for h in ("a", "b"):
            def child(q, sub_labels, h=h):
                assigned = {2: h, 1: "d"}
                rest = [x for x in ("a", "b", "c") if x != h]
                order = (4, 3) if h == "a" else (3, 4)
                return sd(order, rest, assigned, sub_labels)

            children.extend(_fans(2, takers[h], child, labels))
        c_labels = dict(labels)
        c_labels[2] = answer_c
        children.append(("answer_c", agent3_node(c_labels)))
        return kn.Node(2, tuple(children), kn.make_labels(labels))

    # root: agent 1 over {a,b,c} or pass
    abc = frozenset(("a", "b", "c"))
    claimers = frozenset(p for p in full[1] if p.top(frozenset(FIG1_HOUSES)) != "d")
    passers = full[1] - claimers

    def root_child(p, sub_labels):
        top = p.top(abc)
        assigned = {1: top}
        return sd((2, 3, 4), frozenset(FIG1_HOUSES) - {top}, assigned, sub_labels)

    children = _fans(1, claimers, root_child, full)
    pass_labels = dict(full)
    pass_labels[1] = passers
    children.append(("pass", agent2_node(pass_labels)))
    root = kn.Node(1, tuple(children), kn.make_labels(full))
    return kn.Mechanism(root)
