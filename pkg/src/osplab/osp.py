"""Incentive checkers: dominance, obvious dominance, gradual-revelation
validation, induced SCF extraction, and the canonicalization pipeline.

The general checkers (`is_dominant`, `is_obviously_dominant`) work on any
mechanism, information cells included, by exhaustive quantification over
behaviors restricted to the relevant subtrees. The `*_grm` checkers exploit
gradual-revelation labels and run in one truthful-play sweep.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import kernel as kn
from . import prefdomains as pd
from .errors import (
    LabelInconsistency,
    MissingLabels,
    NotOspInput,
    SearchSpaceExceeded,
)


@dataclass
class Violation:
    agent: int
    pref: pd.Preference
    history: tuple
    alt_history: tuple
    action: str
    alt_action: str
    truthful_worst: pd.Outcome
    deviation_best: pd.Outcome
    truthful_moves: dict  # (player, history) -> action, reaches truthful_worst
    deviation_moves: dict  # (player, history) -> action, reaches deviation_best

    def to_json(self):
        return {
            "agent": self.agent,
            "pref": self.pref.short(),
            "history": list(self.history),
            "alt_history": list(self.alt_history),
            "action": self.action,
            "alt_action": self.alt_action,
            "truthful_worst": pd.outcome_to_json(self.truthful_worst),
            "deviation_best": pd.outcome_to_json(self.deviation_best),
            "truthful_moves": [
                {"player": p, "history": list(h), "action": a}
                for (p, h), a in sorted(self.truthful_moves.items())
            ],
            "deviation_moves": [
                {"player": p, "history": list(h), "action": a}
                for (p, h), a in sorted(self.deviation_moves.items())
            ],
        }


@dataclass
class OspVerdict:
    holds: bool
    violation: Violation = None
    checked: str = ""

    def to_json(self):
        return {
            "holds": self.holds,
            "checked": self.checked,
            "violation": None if self.violation is None else self.violation.to_json(),
        }


def replay_moves(m: kn.Mechanism, moves) -> pd.Outcome:
    """Walk the recorded per-history moves of a violation to its leaf."""
    h, nd = (), m.root
    while not nd.is_leaf:
        a = moves[(nd.player, h)]
        h, nd = h + (a,), nd.child(a)
    return nd.outcome


# ---------------------------------------------------------------------------
# General checkers (arbitrary mechanisms, information cells allowed)


def _consistent_actions(m, assign, player, h, nd):
    cell = m.cell_of(h)
    if (player, cell) in assign:
        return (assign[(player, cell)],)
    return nd.actions


def _outcome_extremes(m, start_h, assign, pref, pin=None, want="both"):
    """DFS the subtree at start_h under measurability assignment `assign`.

    `pin` = (agent, Behavior) forces that agent's choices. Returns
    ((worst, worst_moves), (best, best_moves)) by `pref`, either side None
    if not requested. Moves are (player, history) -> action maps good for
    replay_moves.
    """
    worst = best = None

    def visit(h, nd, assign, moves):
        nonlocal worst, best
        if nd.is_leaf:
            y = nd.outcome
            if want in ("both", "worst"):
                if worst is None or pref.compare(y, worst[0]) == pd.STRICTLY_WORSE:
                    worst = (y, dict(moves))
            if want in ("both", "best"):
                if best is None or pref.compare(y, best[0]) == pd.STRICTLY_BETTER:
                    best = (y, dict(moves))
            return
        if pin is not None and nd.player == pin[0]:
            acts = (pin[1].at(m, h),)
        else:
            acts = _consistent_actions(m, assign, nd.player, h, nd)
        cell = m.cell_of(h)
        for a in acts:
            key = (nd.player, cell)
            had = key in assign
            old = assign.get(key)
            assign[key] = a
            moves[(nd.player, h)] = a
            visit(h + (a,), nd.child(a), assign, moves)
            del moves[(nd.player, h)]
            if had:
                assign[key] = old
            else:
                del assign[key]

    visit(start_h, m.node_at(start_h), assign, {})
    return worst, best


def _path_assignment(m, h):
    """Measurable (player, cell) -> action along the path to h, or None."""
    assign, moves = {}, {}
    cur, nd = (), m.root
    for a in h:
        key = (nd.player, m.cell_of(cur))
        if assign.get(key, a) != a:
            return None, None
        assign[key] = a
        moves[(nd.player, cur)] = a
        nd = nd.child(a)
        cur = cur + (a,)
    return assign, moves


def _truthful_reachable(m, agent, behavior):
    """i-histories on some Path(S_i(R_i), B_-i), with their path assignments."""
    found = []

    def visit(h, nd, assign):
        if nd.is_leaf:
            return
        if nd.player == agent:
            found.append((h, dict(assign)))
            acts = (behavior.at(m, h),)
        else:
            acts = _consistent_actions(m, assign, nd.player, h, nd)
        cell = m.cell_of(h)
        for a in acts:
            key = (nd.player, cell)
            had, old = key in assign, assign.get(key)
            assign[key] = a
            visit(h + (a,), nd.child(a), assign)
            if had:
                assign[key] = old
            else:
                del assign[key]

    visit((), m.root, {})
    merged = {}
    for h, assign in found:
        merged.setdefault(h, assign)
    return merged


def is_obviously_dominant(m: kn.Mechanism, agent, strategy) -> OspVerdict:
    """Literal worst-case-vs-best-case check of obvious dominance.

    `strategy` maps each preference of the agent to a Behavior. For every
    on-path history h and same-cell history h', the worst outcome of
    following from h must weakly beat the best outcome of any deviation
    taken at h', quantified over all opposing behaviors.
    """
    cells_index = {}
    for h2, nd2 in m.nonterminal():
        if nd2.player == agent:
            cells_index.setdefault(m.cell_of(h2), []).append(h2)
    for pref, behavior in strategy.items():
        reachable = _truthful_reachable(m, agent, behavior)
        for h, path_assign in reachable.items():
            a_truth = behavior.at(m, h)
            (worst, worst_moves), _ = _outcome_extremes(
                m, h, dict(path_assign), pref, pin=(agent, behavior), want="worst"
            )
            _, path_moves = _path_assignment(m, h)
            full_worst_moves = dict(path_moves)
            full_worst_moves.update(worst_moves)
            cell = m.cell_of(h)
            for h2 in cells_index.get(cell, [h]):
                assign2, moves2 = _path_assignment(m, h2)
                if assign2 is None:
                    continue
                pinned = assign2.get((agent, cell))
                for a_dev in m.node_at(h2).actions:
                    if a_dev == a_truth:
                        continue
                    if pinned is not None and pinned != a_dev:
                        continue
                    assign3 = dict(assign2)
                    assign3[(agent, cell)] = a_dev
                    dev_moves = dict(moves2)
                    dev_moves[(agent, h2)] = a_dev
                    _, best = _outcome_extremes(
                        m, h2 + (a_dev,), assign3, pref, want="best"
                    )
                    if best is None:
                        continue
                    if pref.compare(best[0], worst) == pd.STRICTLY_BETTER:
                        dev_moves.update(best[1])
                        return OspVerdict(
                            False,
                            Violation(
                                agent, pref, h, h2, a_truth, a_dev,
                                worst, best[0], full_worst_moves, dev_moves,
                            ),
                            checked="obviously-dominant",
                        )
    return OspVerdict(True, checked="obviously-dominant")


def is_dominant(m: kn.Mechanism, agent, strategy, limit=200000) -> OspVerdict:
    """Exhaustive weak-dominance check against all opposing behavior profiles."""
    others = [j for j in m.agents() if j != agent]
    option_lists = [kn.enumerate_behaviors(m, j, limit=limit) for j in others]
    total = 1
    for opts in option_lists:
        total *= max(1, len(opts))
    if total > limit:
        raise SearchSpaceExceeded(f"{total} opposing behavior profiles")
    for pref, behavior in strategy.items():
        for combo in itertools.product(*option_lists):
            profile = dict(zip(others, combo))
            profile[agent] = behavior
            truth_outcome, truth_path = kn.play(m, profile)
            # Best the agent can reach against this fixed opposing profile.
            assign = {}
            best = None

            def visit(h, nd, moves):
                nonlocal best
                if nd.is_leaf:
                    if best is None or pref.compare(nd.outcome, best[0]) == pd.STRICTLY_BETTER:
                        best = (nd.outcome, dict(moves))
                    return
                if nd.player != agent:
                    acts = (profile[nd.player].at(m, h),)
                else:
                    acts = _consistent_actions(m, assign, agent, h, nd)
                cell = m.cell_of(h)
                for a in acts:
                    key = (agent, cell)
                    had, old = key in assign, assign.get(key)
                    if nd.player == agent:
                        assign[key] = a
                    moves[(nd.player, h)] = a
                    visit(h + (a,), nd.child(a), moves)
                    del moves[(nd.player, h)]
                    if nd.player == agent:
                        if had:
                            assign[key] = old
                        else:
                            del assign[key]

            visit((), m.root, {})
            if best and pref.compare(best[0], truth_outcome) == pd.STRICTLY_BETTER:
                truth_moves = {}
                h, nd = (), m.root
                for a in truth_path:
                    truth_moves[(nd.player, h)] = a
                    nd, h = nd.child(a), h + (a,)
                return OspVerdict(
                    False,
                    Violation(
                        agent, pref, (), (), "", "",
                        truth_outcome, best[0], truth_moves, best[1],
                    ),
                    checked="dominant",
                )
    return OspVerdict(True, checked="dominant")


def is_osp(m: kn.Mechanism, strategies) -> OspVerdict:
    """Conjunction of is_obviously_dominant over all agents."""
    for agent, strategy in sorted(strategies.items()):
        verdict = is_obviously_dominant(m, agent, strategy)
        if not verdict.holds:
            verdict.checked = "osp"
            return verdict
    return OspVerdict(True, checked="osp")


# ---------------------------------------------------------------------------
# Gradual revelation mechanisms


@dataclass
class GrmReport:
    ok: bool
    violations: list = field(default_factory=list)  # (property, history, message)

    def properties_violated(self):
        return sorted({p for p, _, _ in self.violations})

    def to_json(self):
        return {
            "ok": self.ok,
            "violations": [
                {"property": p, "history": list(h), "message": msg}
                for p, h, msg in self.violations
            ],
        }


def guaranteeable_classes(tree, agent, index: pd.IndifferenceIndex, memo=None):
    """Complete-indifference classes the agent can force from this subtree,
    quantifying over all her behaviors against all opposing behaviors."""
    if memo is not None:
        key = (id(tree), agent)
        hit = memo.get(key)
        if hit is not None:
            return hit
    if tree.is_leaf:
        out = frozenset((index.class_id(agent, tree.outcome),))
    else:
        sets = [
            guaranteeable_classes(sub, agent, index, memo)
            for _, sub in tree.children
        ]
        if tree.player == agent:
            out = frozenset().union(*sets)
        else:
            out = sets[0]
            for s in sets[1:]:
                out &= s
    if memo is not None:
        memo[key] = out
    return out


def forced_reveal_violations(tree, domain, index=None):
    """Histories where an action can pin the mover's indifference class but
    its cell is not a singleton (the forced-revelation property)."""
    if index is None:
        index = pd.IndifferenceIndex(domain)
    memo = {}
    bad = []

    def walk(node, h):
        if node.is_leaf:
            return
        for a, sub in node.children:
            cell = dict(sub.labels).get(node.player, frozenset())
            if len(cell) != 1 and guaranteeable_classes(sub, node.player, index, memo):
                bad.append(h + (a,))
            walk(sub, h + (a,))

    walk(tree, ())
    return bad


def normalize_tree(tree):
    """Fixpoint of pruning dead actions, condensing same-player runs, and
    dropping singleton-action chains."""
    while True:
        before = tree
        tree = _prune_empty(tree)
        tree = _condense_runs(tree)
        tree = _drop_singleton_chains(tree)
        if tree == before:
            return tree


def validate_gradual_revelation(m: kn.Mechanism, domain: pd.Domain) -> GrmReport:
    """Check the five structural properties of a gradual revelation mechanism."""
    report = GrmReport(True)

    def flag(prop, h, msg):
        report.ok = False
        report.violations.append((prop, h, msg))

    for cell in m.cells:
        if len(cell) > 1:
            flag(1, cell[0], f"information cell of size {len(cell)}")

    if m.root.labels is None:
        flag(4, (), "no labels at the root")
        return report

    root_rect = m.rect(())
    for agent in domain.agents:
        if root_rect.get(agent) != frozenset(domain.prefs(agent)):
            flag(4, (), f"root label of agent {agent} is not the full set")

    index = pd.IndifferenceIndex(domain)
    memo = {}
    for h, nd in m.nonterminal():
        if len(nd.actions) < 2:
            flag(3, h, "singleton action set")
        if nd.labels is None:
            flag(4, h, "missing labels")
            continue
        rect = m.rect(h)
        for a, sub in nd.children:
            if not nd.is_leaf and not sub.is_leaf and sub.player == nd.player:
                flag(2, h + (a,), f"agent {nd.player} moves twice in a row")
            if sub.labels is None:
                flag(4, h + (a,), "missing labels")
                continue
            child_rect = dict(sub.labels)
            for agent in domain.agents:
                if agent == nd.player:
                    continue
                if child_rect.get(agent) != rect.get(agent):
                    flag(4, h + (a,), f"label of bystander {agent} changed")
        i = nd.player
        cells = []
        broken = False
        for a, sub in nd.children:
            if sub.labels is None:
                broken = True
                continue
            cells.append((a, dict(sub.labels).get(i, frozenset())))
        if not broken:
            union = frozenset().union(*(c for _, c in cells)) if cells else frozenset()
            if union != rect.get(i, frozenset()):
                flag(4, h, f"children cells of agent {i} do not cover the label")
            for (a1, c1), (a2, c2) in itertools.combinations(cells, 2):
                if c1 & c2:
                    flag(4, h, f"cells of actions {a1},{a2} overlap")
            for a, c in cells:
                if not c:
                    flag(4, h + (a,), "empty action cell")
        for a, sub in nd.children:
            if sub.labels is None:
                continue
            if guaranteeable_classes(sub, i, index, memo):
                cell = dict(sub.labels).get(i, frozenset())
                if len(cell) != 1:
                    flag(
                        5,
                        h + (a,),
                        f"agent {i} can pin an indifference class without revealing",
                    )
    return report


def _descent_tables(m: kn.Mechanism):
    """Per nonterminal history: (mover, {pref -> action}) for truthful descent."""
    tables = {}
    for h, nd in m.nonterminal():
        route = {}
        for a, sub in nd.children:
            for p in sub.label(nd.player):
                route[p] = a
        tables[h] = (nd.player, route)
    return tables


def truthful_play(m: kn.Mechanism, tables, positions, profile):
    """Follow labels to a leaf; returns (outcome, path of histories)."""
    h, nd = (), m.root
    path = [()]
    while not nd.is_leaf:
        mover, route = tables[h]
        pref = profile[positions[mover]]
        try:
            a = route[pref]
        except KeyError:
            raise LabelInconsistency(
                f"no action for {pref.short()} of agent {mover} at {h}"
            ) from None
        h = h + (a,)
        nd = nd.child(a)
        path.append(h)
    for agent, ps in nd.labels or ():
        if profile[positions[agent]] not in ps:
            raise LabelInconsistency(
                f"leaf {h} label excludes agent {agent}'s preference"
            )
    return nd.outcome, path


def induced_scf(m: kn.Mechanism, domain: pd.Domain) -> pd.SCFTable:
    """The SCF induced by truthtelling: scf(R) = play(m, T(R))."""
    if not m.labeled:
        raise MissingLabels("induced_scf needs gradual-revelation labels")
    tables = _descent_tables(m)
    positions = {a: k for k, a in enumerate(domain.agents)}
    out = {}
    for prof in domain.profiles():
        out[prof], _ = truthful_play(m, tables, positions, prof)
    return pd.SCFTable(domain, out)


def is_obviously_incentive_compatible_grm(m: kn.Mechanism, domain: pd.Domain) -> OspVerdict:
    """Simplified obvious-dominance condition at every history of a labeled tree.

    At each h with mover i, the worst truthful outcome for R_i (over profiles
    consistent with h) must weakly beat every outcome reached from h by
    preferences choosing a different action. One sweep of truthful plays.
    """
    if not m.labeled:
        raise MissingLabels("grm checker needs labels")
    tables = _descent_tables(m)
    positions = {a: k for k, a in enumerate(domain.agents)}
    worst = {}          # (h, pref) -> (outcome, witness profile)
    pools = {}          # (h, action) -> {outcome: witness profile}
    for prof in domain.profiles():
        y, path = truthful_play(m, tables, positions, prof)
        for k, h in enumerate(path[:-1]):
            mover, _route = tables[h]
            pref = prof[positions[mover]]
            key = (h, pref)
            cur = worst.get(key)
            if cur is None or pref.compare(y, cur[0]) == pd.STRICTLY_WORSE:
                worst[key] = (y, prof)
            action = path[k + 1][len(h)]
            pools.setdefault((h, action), {}).setdefault(y, prof)
    for h, nd in m.nonterminal():
        mover, route = tables[h]
        for pref in nd.label(mover):
            own = route[pref]
            w, w_prof = worst[(h, pref)]
            for a, _sub in nd.children:
                if a == own:
                    continue
                for y, y_prof in pools.get((h, a), {}).items():
                    if pref.compare(y, w) == pd.STRICTLY_BETTER:
                        t_moves = _profile_moves(m, tables, positions, w_prof)
                        d_moves = _profile_moves(m, tables, positions, y_prof)
                        return OspVerdict(
                            False,
                            Violation(
                                mover, pref, h, h, own, a, w, y, t_moves, d_moves
                            ),
                            checked="grm-oic",
                        )
    return OspVerdict(True, checked="grm-oic")


def _profile_moves(m, tables, positions, profile):
    moves = {}
    h, nd = (), m.root
    while not nd.is_leaf:
        mover, route = tables[h]
        a = route[profile[positions[mover]]]
        moves[(mover, h)] = a
        h, nd = h + (a,), nd.child(a)
    return moves


# ---------------------------------------------------------------------------
# Canonicalization (the five-stage revelation pipeline)


def canonicalize(m: kn.Mechanism, strategies, domain: pd.Domain, verify=True) -> kn.Mechanism:
    """Rebuild an OSP mechanism as an obviously incentive compatible
    gradual revelation mechanism inducing the same SCF.

    Stages: break cells and label by strategy-reachability; split choices
    that already pin an indifference class into fully revealing actions;
    prune never-taken actions; condense consecutive same-player runs;
    collapse singleton-action chains.
    """
    if verify:
        verdict = is_osp(m, strategies)
        if not verdict.holds:
            raise NotOspInput(
                f"strategy profile is not OSP (agent {verdict.violation.agent})"
            )
    tree = _stage_labels(m, strategies, domain)
    tree = _prune_empty(tree)
    index = pd.IndifferenceIndex(domain)
    tree = _stage_split_forced(tree, domain, index)
    return kn.Mechanism(normalize_tree(tree))


def _stage_labels(m, strategies, domain):
    """M1: singleton cells; labels = strategy-reachability sets."""

    def build(h, nd, sets):
        labels = kn.make_labels(sets)
        if nd.is_leaf:
            return kn.Leaf(nd.outcome, labels)
        children = []
        for a, sub in nd.children:
            child_sets = dict(sets)
            i = nd.player
            child_sets[i] = frozenset(
                p for p in sets[i] if strategies[i][p].at(m, h) == a
            )
            children.append((a, build(h + (a,), sub, child_sets)))
        return kn.Node(nd.player, tuple(children), labels)

    root_sets = {a: frozenset(domain.prefs(a)) for a in domain.agents}
    return build((), m.root, root_sets)


def _prune_empty(tree):
    """M3: drop actions whose mover cell is empty (never on a truthful path)."""
    if tree.is_leaf:
        return tree
    children = []
    for a, sub in tree.children:
        if not sub.label(tree.player):
            continue
        children.append((a, _prune_empty(sub)))
    return kn.Node(tree.player, tuple(children), tree.labels)


def _truthful_outcome_sets(tree):
    """Per node: agent -> pref -> outcomes of truthful continuations."""
    table = {}

    def rec(node, h):
        if node.is_leaf:
            table[h] = {a: {p: {node.outcome} for p in ps} for a, ps in node.labels}
            return
        for a, sub in node.children:
            rec(sub, h + (a,))
        mine = {}
        for agent, ps in node.labels:
            per = {}
            for p in ps:
                if agent == node.player:
                    for a, sub in node.children:
                        if p in sub.label(agent):
                            per[p] = table[h + (a,)][agent][p]
                            break
                else:
                    acc = set()
                    for a, sub in node.children:
                        acc |= table[h + (a,)][agent].get(p, set())
                    per[p] = acc
            mine[agent] = per
        table[h] = mine

    rec(tree, ())
    return table


def _one_class(outcomes, agent, index):
    cids = {index.class_id(agent, y) for y in outcomes}
    return len(cids) == 1


def _stage_split_forced(tree, domain, index):
    """M2: when a preference's truthful continuation pins an indifference
    class, split it off into its own fully revealing action."""
    while True:
        table = _truthful_outcome_sets(tree)
        jobs = _minimal_split_jobs(tree, (), table, index, frozenset())
        if not jobs:
            return tree
        tree = _apply_splits(tree, (), {h: ps for h, ps in jobs.items()})


def _minimal_split_jobs(node, h, table, index, resolved):
    """Find the minimal histories where a split is due; pref-wise."""
    jobs = {}
    if node.is_leaf:
        return jobs
    i = node.player
    here = set()
    for a, sub in node.children:
        cell = sub.label(i)
        if len(cell) == 1:
            continue
        for p in cell:
            if p in resolved:
                continue
            if _one_class(table[h][i][p], i, index):
                here.add(p)
    if here:
        jobs[h] = frozenset(here)
    child_resolved = resolved | here
    for a, sub in node.children:
        jobs.update(_minimal_split_jobs(sub, h + (a,), table, index, child_resolved))
    return jobs


def _apply_splits(node, h, jobs):
    if node.is_leaf:
        return node
    children = list(node.children)
    if h in jobs:
        i = node.player
        for p in sorted(jobs[h], key=lambda q: q.key()):
            for k, (a, sub) in enumerate(children):
                if p in sub.label(i):
                    children[k] = (a, _restrict(sub, i, sub.label(i) - {p}))
                    clone = _restrict(sub, i, frozenset((p,)))
                    children.append((f"{a}~{p.short()}", clone))
                    break
    out = []
    for a, sub in children:
        out.append((a, _apply_splits(sub, h + (a,), jobs)))
    return kn.Node(node.player, tuple(out), node.labels)


def _restrict(tree, agent, keep):
    """Intersect one agent's labels with `keep`, pruning her dead actions."""
    labels = kn.make_labels(
        {a: (ps & keep if a == agent else ps) for a, ps in tree.labels}
    )
    if tree.is_leaf:
        return kn.Leaf(tree.outcome, labels)
    children = []
    for a, sub in tree.children:
        if tree.player == agent and not (sub.label(agent) & keep):
            continue
        children.append((a, _restrict(sub, agent, keep)))
    return kn.Node(tree.player, tuple(children), labels)


def _condense_runs(tree):
    """M4: a child whose mover equals its parent's is spliced into the parent."""
    if tree.is_leaf:
        return tree
    children = [(a, _condense_runs(sub)) for a, sub in tree.children]
    changed = True
    while changed:
        changed = False
        for k, (a, sub) in enumerate(children):
            if not sub.is_leaf and sub.player == tree.player:
                spliced = [(f"{a}.{a2}", sub2) for a2, sub2 in sub.children]
                children = children[:k] + spliced + children[k + 1:]
                changed = True
                break
    return kn.Node(tree.player, tuple(children), tree.labels)


def _drop_singleton_chains(tree):
    """M5: a nonterminal with one action is replaced by its child."""
    if tree.is_leaf:
        return tree
    if len(tree.children) == 1:
        return _drop_singleton_chains(tree.children[0][1])
    return kn.Node(
        tree.player,
        tuple((a, _drop_singleton_chains(sub)) for a, sub in tree.children),
        tree.labels,
    )
