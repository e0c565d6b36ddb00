"""OSP-implementability of explicit SCFs by recursive witness search.

The search state is a rectangle (product subdomain). At each step some
agent other than the previous mover partitions her set; a partition is kept
when worst-case truthtelling beats best-case deviation across cells and
every child rectangle recursively admits a witness. Successful searches
return a labeled gradual-revelation tree.
"""
from __future__ import annotations

import itertools

from . import kernel as kn
from . import osp
from . import prefdomains as pd
from .errors import PartialScf, SearchSpaceExceeded

PARTITION_GUARD = 6  # Bell-number enumeration is exhaustive up to this set size


def set_partitions(items):
    """All partitions of `items` in canonical (restricted-growth) order."""
    items = list(items)
    if not items:
        yield ()
        return

    def rec(k, groups):
        if k == len(items):
            yield tuple(tuple(g) for g in groups)
            return
        for g in groups:
            g.append(items[k])
            yield from rec(k + 1, groups)
            g.pop()
        groups.append([items[k]])
        yield from rec(k + 1, groups)
        groups.pop()

    yield from rec(1, [[items[0]]])


class _Search:
    def __init__(self, scf: pd.SCFTable, limit=PARTITION_GUARD):
        self.scf = scf
        self.domain = scf.domain
        self.index = pd.IndifferenceIndex(self.domain)
        self.limit = limit
        self.memo = {}
        self.root_trace = []  # (agent, reason) pairs for certificates

    # rectangles are dicts agent -> tuple of prefs (canonically sorted)

    def rect_key(self, rect, parent):
        return (
            tuple(tuple(p.key() for p in rect[a]) for a in self.domain.agents),
            parent,
        )

    def outcomes_on(self, rect):
        outs = set()
        for prof in itertools.product(*(rect[a] for a in self.domain.agents)):
            outs.add(self.scf.of(prof))
        return outs

    def value(self, rect, agent, pref):
        """scf outcomes over the rectangle with this agent pinned to pref."""
        pinned = dict(rect)
        pinned[agent] = (pref,)
        return self.outcomes_on(pinned)

    def labels_for(self, rect):
        return kn.make_labels({a: frozenset(ps) for a, ps in rect.items()})

    def search(self, rect, parent, trace=None):
        key = self.rect_key(rect, parent)
        if key in self.memo:
            return self.memo[key]
        result = self._search_uncached(rect, parent, trace)
        self.memo[key] = result
        return result

    def _search_uncached(self, rect, parent, trace=None):
        outs = self.outcomes_on(rect)
        if len(outs) == 1:
            return kn.Leaf(next(iter(outs)), self.labels_for(rect))
        movable = [
            a for a in self.domain.agents if a != parent and len(rect[a]) >= 2
        ]
        for agent in movable:
            tree = self._try_agent(rect, agent, trace)
            if tree is not None:
                return tree
        return None

    def _try_agent(self, rect, agent, trace=None):
        prefs = rect[agent]
        worst, best_as = self._compat_tables(rect, agent)
        components = self._merge_components(prefs, worst, best_as)
        if len(components) < 2:
            if trace is not None:
                trace.append((agent, "incompatibility graph is connected"))
            return None
        if len(components) > self.limit:
            raise SearchSpaceExceeded(
                f"{len(components)} mergeable groups for agent {agent}"
            )
        only_movable = all(
            len(rect[a]) == 1 for a in self.domain.agents if a not in (agent,)
        )
        if only_movable:
            candidates = [tuple((p,) for p in prefs)]
        else:
            candidates = (
                tuple(
                    tuple(itertools.chain.from_iterable(group))
                    for group in partition
                )
                for partition in set_partitions(components)
                if len(partition) >= 2
            )
        for cells in candidates:
            if not self._condition_a(rect, agent, cells, worst, best_as):
                continue
            cells = self._refine_indifferent(rect, agent, cells)
            children = []
            for cell in cells:
                sub = dict(rect)
                sub[agent] = tuple(cell)
                child = self.search(sub, agent)
                if child is None:
                    children = None
                    break
                children.append((cell, child))
            if children is None:
                continue
            if not self._property5_ok(agent, children):
                continue
            labeled = tuple(
                (f"a{k}", child) for k, (_cell, child) in enumerate(children)
            )
            return kn.Node(agent, labeled, self.labels_for(rect))
        if trace is not None:
            trace.append((agent, "no partition satisfies obvious dominance"))
        return None

    def _compat_tables(self, rect, agent):
        worst = {}
        best_as = {}
        for p in rect[agent]:
            mine = self.value(rect, agent, p)
            worst[p] = p.worst(mine)
        for p in rect[agent]:
            for q in rect[agent]:
                if p is q:
                    continue
                best_as[(p, q)] = p.best(self.value(rect, agent, q))
        return worst, best_as

    def _compatible(self, p, q, worst, best_as):
        return (
            p.compare(worst[p], best_as[(p, q)]) != pd.STRICTLY_WORSE
            and q.compare(worst[q], best_as[(q, p)]) != pd.STRICTLY_WORSE
        )

    def _merge_components(self, prefs, worst, best_as):
        """Prefs that cannot obviously-dominate across cells must share one."""
        parent = {p: p for p in prefs}

        def find(p):
            while parent[p] is not p:
                parent[p] = parent[parent[p]]
                p = parent[p]
            return p

        for p, q in itertools.combinations(prefs, 2):
            if not self._compatible(p, q, worst, best_as):
                parent[find(p)] = find(q)
        groups = {}
        for p in prefs:
            groups.setdefault(find(p), []).append(p)
        comps = [tuple(g) for g in groups.values()]
        comps.sort(key=lambda g: g[0].key())
        return comps

    def _condition_a(self, rect, agent, cells, worst, best_as):
        for cell in cells:
            others = [q for c in cells if c is not cell for q in c]
            for p in cell:
                for q in others:
                    if p.compare(worst[p], best_as[(p, q)]) == pd.STRICTLY_WORSE:
                        return False
        return True

    def _refine_indifferent(self, rect, agent, cells):
        """Cells whose reachable outcomes the agent cannot tell apart must
        fully reveal (one preference per action)."""
        refined = []
        for cell in cells:
            if len(cell) == 1:
                refined.append(cell)
                continue
            sub = dict(rect)
            sub[agent] = tuple(cell)
            cids = {self.index.class_id(agent, y) for y in self.outcomes_on(sub)}
            if len(cids) == 1:
                refined.extend((p,) for p in cell)
            else:
                refined.append(cell)
        return tuple(refined)

    def _property5_ok(self, agent, children):
        for cell, child in children:
            if len(cell) == 1:
                continue
            if osp.guaranteeable_classes(child, agent, self.index):
                return False
        return True


def full_rectangle(domain: pd.Domain):
    return {a: tuple(domain.prefs(a)) for a in domain.agents}


def osp_implementable(scf: pd.SCFTable, rect=None, limit=PARTITION_GUARD, trace=None):
    """Search for an OSP witness of the SCF on the rectangle (default: full
    domain). Returns a labeled Mechanism or None."""
    search = _Search(scf, limit=limit)
    if rect is None:
        rect = full_rectangle(scf.domain)
    rect = {a: tuple(sorted(ps, key=lambda p: p.key())) for a, ps in rect.items()}
    for prof in itertools.product(*(rect[a] for a in scf.domain.agents)):
        if tuple(prof) not in scf.table:
            raise PartialScf(f"scf not total on rectangle at {prof}")
    tree = search.search(rect, parent=None, trace=trace)
    if tree is None:
        return None
    return kn.Mechanism(tree)


def check_witness(w: kn.Mechanism, scf: pd.SCFTable) -> bool:
    """Full revalidation: gradual-revelation shape, obvious incentive
    compatibility, and profile-by-profile SCF agreement."""
    report = osp.validate_gradual_revelation(w, scf.domain)
    if not report.ok:
        return False
    if not osp.is_obviously_incentive_compatible_grm(w, scf.domain).holds:
        return False
    induced = osp.induced_scf(w, scf.domain)
    return induced.table == scf.table


def prune_witness(w: kn.Mechanism, rect) -> kn.Mechanism:
    """Restrict a witness to a sub-rectangle, relabel, and renormalize."""

    def restrict(tree):
        labels = kn.make_labels(
            {a: ps & frozenset(rect[a]) for a, ps in tree.labels}
        )
        if tree.is_leaf:
            return kn.Leaf(tree.outcome, labels)
        children = []
        for a, sub in tree.children:
            if not (sub.label(tree.player) & frozenset(rect[tree.player])):
                continue
            children.append((a, restrict(sub)))
        return kn.Node(tree.player, tuple(children), labels)

    tree = restrict(w.root)
    while True:
        before = tree
        tree = osp._condense_runs(tree)
        tree = osp._drop_singleton_chains(tree)
        if tree == before:
            break
    return kn.Mechanism(tree)


def enumerate_osp_scfs(domain: pd.Domain, predicate=None, limit=1 << 16):
    """All SCFs passing the predicate that admit an OSP witness. Guarded:
    |Y|^{profiles} grows brutally fast."""
    profiles = list(domain.profiles())
    total = len(domain.outcomes) ** len(profiles)
    if total > limit:
        raise SearchSpaceExceeded(
            f"{total} candidate SCFs exceed the limit of {limit}"
        )
    keepers = []
    for values in itertools.product(domain.outcomes, repeat=len(profiles)):
        scf = pd.SCFTable(domain, dict(zip(profiles, values)))
        if predicate is not None and not predicate(scf):
            continue
        if osp_implementable(scf) is not None:
            keepers.append(scf)
    return keepers
