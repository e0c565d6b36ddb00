"""Extensive game forms: finite trees, information cells, play-out, labels.

Histories are tuples of action ids from the root. Labels, when present,
attach a preference set per agent to every node (gradual-revelation style).
Mechanisms are immutable after construction; all queries are pure.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from . import prefdomains as pd
from .errors import (
    IncompleteBehavior,
    InvalidInput,
    MissingLabels,
    ParseError,
)

History = tuple


def make_labels(label_dict):
    """Freeze an {agent: iterable-of-preferences} map into node label form."""
    return tuple(sorted((a, frozenset(ps)) for a, ps in label_dict.items()))


@dataclass(frozen=True)
class Leaf:
    outcome: pd.Outcome
    labels: tuple = None

    @property
    def is_leaf(self):
        return True

    def label(self, agent):
        return _label_lookup(self.labels, agent)


@dataclass(frozen=True)
class Node:
    player: int
    children: tuple  # ((action, subtree), ...) sorted by action id
    labels: tuple = None

    def __post_init__(self):
        acts = [a for a, _ in self.children]
        if len(set(acts)) != len(acts):
            raise InvalidInput("duplicate action ids")
        if acts != sorted(acts):
            object.__setattr__(self, "children", tuple(sorted(self.children)))

    @property
    def is_leaf(self):
        return False

    @property
    def actions(self):
        return tuple(a for a, _ in self.children)

    def child(self, action):
        for a, sub in self.children:
            if a == action:
                return sub
        raise KeyError(action)

    def label(self, agent):
        return _label_lookup(self.labels, agent)


def _label_lookup(labels, agent):
    if labels is None:
        raise MissingLabels("mechanism carries no preference-set labels")
    for a, ps in labels:
        if a == agent:
            return ps
    raise MissingLabels(f"no label for agent {agent}")


def node(player, children, labels=None):
    items = tuple(sorted(children.items())) if isinstance(children, dict) else tuple(children)
    return Node(player, items, make_labels(labels) if isinstance(labels, dict) else labels)


def leaf(outcome, labels=None):
    return Leaf(outcome, make_labels(labels) if isinstance(labels, dict) else labels)


class Mechanism:
    """A finite rooted labeled game form with optional information cells.

    `cells` is a collection of history tuples grouped into information cells;
    histories not mentioned sit in singleton cells (perfect information).
    """

    def __init__(self, root, cells=None):
        self.root = root
        self._cell_of = {}
        norm = []
        for cell in cells or ():
            cell = tuple(sorted(tuple(h) for h in cell))
            norm.append(cell)
            for h in cell:
                self._cell_of[h] = cell
        self.cells = tuple(sorted(norm))
        self._index = {}
        for h, nd in _walk(root, ()):
            self._index[h] = nd
        self._validate_cells()

    def _validate_cells(self):
        for cell in self.cells:
            nodes = [self.node_at(h) for h in cell]
            if any(nd.is_leaf for nd in nodes):
                raise InvalidInput("terminal history inside an information cell")
            players = {nd.player for nd in nodes}
            if len(players) != 1:
                raise InvalidInput("information cell mixes players")
            acts = {nd.actions for nd in nodes}
            if len(acts) != 1:
                raise InvalidInput("information cell with unequal action sets")

    # -- structure queries ---------------------------------------------------

    def node_at(self, h):
        try:
            return self._index[tuple(h)]
        except KeyError:
            raise InvalidInput(f"no node at history {h}") from None

    def histories(self):
        return self._index.items()

    def nonterminal(self):
        return ((h, nd) for h, nd in self._index.items() if not nd.is_leaf)

    def leaves(self):
        return ((h, nd) for h, nd in self._index.items() if nd.is_leaf)

    def player(self, h):
        return self.node_at(h).player

    def actions(self, h):
        return self.node_at(h).actions

    def cell_of(self, h):
        h = tuple(h)
        return self._cell_of.get(h, (h,))

    def decision_histories(self, agent):
        return [h for h, nd in self.nonterminal() if nd.player == agent]

    def agent_cells(self, agent):
        seen = []
        for h in self.decision_histories(agent):
            cell = self.cell_of(h)
            if cell not in seen:
                seen.append(cell)
        return seen

    @property
    def labeled(self):
        return self.root.labels is not None

    def rect(self, h):
        """Per-agent label sets at h as a dict (the set R(h) as a product)."""
        nd = self.node_at(h)
        if nd.labels is None:
            raise MissingLabels("unlabeled mechanism")
        return dict(nd.labels)

    def root_rect(self):
        return self.rect(())

    def agents(self):
        if self.labeled:
            return tuple(a for a, _ in self.root.labels)
        return tuple(sorted({nd.player for _, nd in self.nonterminal()}))

    def size(self):
        return len(self._index)

    def __eq__(self, other):
        if not isinstance(other, Mechanism):
            return NotImplemented
        if self.root != other.root:
            return False
        mine = {h: frozenset(self.cell_of(h)) for h, nd in self.nonterminal()}
        theirs = {h: frozenset(other.cell_of(h)) for h, nd in other.nonterminal()}
        return mine == theirs

    def __repr__(self):
        return f"Mechanism({self.size()} histories)"


def _walk(tree, h):
    yield h, tree
    if not tree.is_leaf:
        for a, sub in tree.children:
            yield from _walk(sub, h + (a,))


# -- behaviors and play ------------------------------------------------------


class Behavior:
    """An information-measurable choice function for one agent.

    Keyed by cell, so measurability holds by construction.
    """

    def __init__(self, agent, choices):
        self.agent = agent
        self.choices = dict(choices)

    def at(self, m: Mechanism, h) -> str:
        cell = m.cell_of(h)
        try:
            return self.choices[cell]
        except KeyError:
            raise IncompleteBehavior(
                f"agent {self.agent} has no choice at {h}"
            ) from None

    def __repr__(self):
        return f"Behavior({self.agent}, {len(self.choices)} cells)"


def behavior_from_history_map(m: Mechanism, agent, per_history):
    """Build a Behavior from history->action, checking cell-measurability."""
    choices = {}
    for h, action in per_history.items():
        cell = m.cell_of(h)
        if choices.get(cell, action) != action:
            raise InvalidInput("choices differ within one information cell")
        choices[cell] = action
    return Behavior(agent, choices)


def enumerate_behaviors(m: Mechanism, agent, limit=200000):
    """All measurable behaviors of one agent (exhaustive; guarded)."""
    cells = m.agent_cells(agent)
    total = 1
    option_sets = []
    for cell in cells:
        acts = m.node_at(cell[0]).actions
        option_sets.append([(cell, a) for a in acts])
        total *= len(acts)
        if total > limit:
            from .errors import SearchSpaceExceeded

            raise SearchSpaceExceeded(
                f"{total}+ behaviors for agent {agent}; raise the limit to proceed"
            )
    return [Behavior(agent, dict(combo)) for combo in itertools.product(*option_sets)]


def play(m: Mechanism, behaviors):
    """Run the behavior profile to a leaf; returns (outcome, terminal history)."""
    h = ()
    nd = m.root
    while not nd.is_leaf:
        try:
            b = behaviors[nd.player]
        except KeyError:
            raise IncompleteBehavior(f"no behavior for player {nd.player}") from None
        a = b.at(m, h)
        h = h + (a,)
        nd = nd.child(a)
    return nd.outcome, h


def outcomes_under(m: Mechanism, h):
    """Y(h): outcomes of all terminal histories below h."""
    return frozenset(nd.outcome for _, nd in _walk(m.node_at(h), ()) if nd.is_leaf)


def outcome_sets(m: Mechanism):
    """Y(h) for every history, computed bottom-up in one pass."""
    table = {}

    def rec(tree, h):
        if tree.is_leaf:
            table[h] = frozenset((tree.outcome,))
        else:
            acc = frozenset()
            for a, sub in tree.children:
                rec(sub, h + (a,))
                acc |= table[h + (a,)]
            table[h] = acc

    rec(m.root, ())
    return table


def dictatorial_sets(m: Mechanism, h, index: pd.IndifferenceIndex):
    """(Y*_h, A*_h, nondictatorial complement) for the mover at h.

    An action is dictatorial when its whole subtree sits inside one
    complete-indifference class of the mover; Y*_h collects the outcomes of
    Y(h) whose class is pinned by some such action.
    """
    nd = m.node_at(h)
    if nd.is_leaf:
        raise InvalidInput("dictatorial sets are defined at nonterminal histories")
    i = nd.player
    ystar, astar = set(), set()
    yh = outcomes_under(m, h)
    for a, _sub in nd.children:
        under = outcomes_under(m, tuple(h) + (a,))
        classes = {index.class_id(i, y) for y in under}
        if len(classes) == 1:
            astar.add(a)
            cid = classes.pop()
            ystar |= {y for y in yh if index.class_id(i, y) == cid}
    abar = frozenset(nd.actions) - astar
    return frozenset(ystar), frozenset(astar), frozenset(abar)


def consistent_profiles(m: Mechanism, h):
    """R(h): the product of the per-agent label sets at h."""
    rect = m.rect(h)
    agents = sorted(rect)
    return tuple(
        itertools.product(*(sorted(rect[a], key=lambda p: p.key()) for a in agents))
    )


# -- truthful strategies on labeled trees ------------------------------------


def truthful_behavior(m: Mechanism, agent, pref) -> Behavior:
    """Label-following behavior; lexicographically first action off-label."""
    choices = {}
    for h in m.decision_histories(agent):
        nd = m.node_at(h)
        picked = nd.actions[0]
        for a, sub in nd.children:
            if pref in sub.label(agent):
                picked = a
                break
        choices[m.cell_of(h)] = picked
    return Behavior(agent, choices)


def truthful_strategy(m: Mechanism, agent, prefs=None):
    if prefs is None:
        prefs = m.root.label(agent)
    return {p: truthful_behavior(m, agent, p) for p in prefs}


def truthful_profile(m: Mechanism, profile_map):
    """profile_map: agent -> preference. Returns agent -> Behavior."""
    return {a: truthful_behavior(m, a, p) for a, p in profile_map.items()}


# -- serialization -----------------------------------------------------------


def _tree_to_json(tree, domain):
    if tree.is_leaf:
        out = {"leaf": pd.outcome_to_json(tree.outcome)}
    else:
        out = {
            "node": {
                "player": tree.player,
                "actions": {a: _tree_to_json(sub, domain) for a, sub in tree.children},
            }
        }
    if tree.labels is not None:
        out["labels"] = {
            str(a): sorted(domain.pref_index(a, p) for p in ps)
            for a, ps in tree.labels
        }
    return out


def _tree_from_json(data, domain, where):
    labels = None
    if "labels" in data:
        labels = make_labels(
            {
                int(a): frozenset(domain.prefs(int(a))[i] for i in idxs)
                for a, idxs in data["labels"].items()
            }
        )
    if "leaf" in data:
        return Leaf(pd.outcome_from_json(data["leaf"]), labels)
    if "node" not in data:
        raise ParseError("expected 'node' or 'leaf'", where)
    spec = data["node"]
    try:
        player = spec["player"]
        actions = spec["actions"]
    except KeyError as missing:
        raise ParseError(f"node missing {missing}", where) from None
    children = tuple(
        (a, _tree_from_json(sub, domain, where + (a,)))
        for a, sub in sorted(actions.items())
    )
    return Node(player, children, labels)


def serialize(m: Mechanism, domain: pd.Domain) -> str:
    """Canonical JSON text for a mechanism plus the domain it lives on."""
    payload = {
        "domain": pd.domain_to_json(domain),
        "root": _tree_to_json(m.root, domain),
        "cells": [[list(h) for h in cell] for cell in m.cells],
    }
    return json.dumps(payload, sort_keys=True, indent=1)


def deserialize(text: str):
    """Inverse of serialize; returns (Mechanism, Domain)."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"bad JSON: {err}", ("<root>",)) from None
    try:
        domain = pd.domain_from_json(payload["domain"])
        root = _tree_from_json(payload["root"], domain, ())
        cells = [tuple(tuple(h) for h in cell) for cell in payload.get("cells", [])]
    except ParseError:
        raise
    except Exception as err:
        raise ParseError(str(err), ("<root>",)) from None
    return Mechanism(root, cells), domain


def export_dot(m: Mechanism) -> str:
    """Graphviz text with player/action/outcome annotations."""
    lines = ["digraph mechanism {", '  node [shape=box, fontsize=10];']
    ids = {}

    def nid(h):
        if h not in ids:
            ids[h] = f"n{len(ids)}"
        return ids[h]

    for h, nd in m.histories():
        if nd.is_leaf:
            lines.append(f'  {nid(h)} [shape=ellipse, label="{nd.outcome.short()}"];')
        else:
            lines.append(f'  {nid(h)} [label="P{nd.player}"];')
    for h, nd in m.histories():
        if nd.is_leaf:
            continue
        for a, _sub in nd.children:
            lines.append(f'  {nid(h)} -> {nid(h + (a,))} [label="{a}"];')
    for k, cell in enumerate(m.cells):
        members = " ".join(nid(h) for h in cell)
        lines.append(f"  subgraph cluster_cell{k} {{ style=dashed; {members} }}")
    lines.append("}")
    return "\n".join(lines)
