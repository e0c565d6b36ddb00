"""Two-outcome voting: proto-dictatorships and (super)majority rules.

The two outcomes are encoded as policies 0 and 1 on a single-peaked grid of
length two, which yields exactly one preference per side.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .. import kernel as kn
from .. import prefdomains as pd
from ..errors import InvalidInput, InvalidSpec


@dataclass(frozen=True)
class ProtoDictSpec:
    """A stream of agents who may each force one designated outcome or pass,
    ending with a free chooser."""

    stream: tuple  # ((agent, offered outcome in {0,1}), ...)
    final: int

    def __post_init__(self):
        agents = [a for a, _ in self.stream] + [self.final]
        if len(set(agents)) != len(agents):
            raise InvalidSpec("an agent appears twice in a proto-dictatorship")
        if any(o not in (0, 1) for _, o in self.stream):
            raise InvalidSpec("offered outcomes must be 0 or 1")


def _pref_with_peak(domain, agent, peak):
    for p in domain.prefs(agent):
        if p.peak == peak:
            return p
    raise InvalidInput(f"no preference with peak {peak} for agent {agent}")


def proto_dictatorship(spec: ProtoDictSpec, domain: pd.Domain = None) -> kn.Mechanism:
    """Labeled game tree of the proto-dictatorship over outcomes {0, 1}."""
    if domain is None:
        n = max([a for a, _ in spec.stream] + [spec.final])
        domain = pd.two_outcome_domain(n)
    participants = {a for a, _ in spec.stream} | {spec.final}
    if not participants <= set(domain.agents):
        raise InvalidSpec("spec mentions agents outside the domain")

    def build(k, labels):
        if k == len(spec.stream):
            i = spec.final
            children = []
            for o in (0, 1):
                sub_labels = dict(labels)
                sub_labels[i] = frozenset((_pref_with_peak(domain, i, o),))
                children.append((f"take{o}", kn.Leaf(pd.Outcome.policy(o), kn.make_labels(sub_labels))))
            return kn.Node(i, tuple(children), kn.make_labels(labels))
        i, offered = spec.stream[k]
        force_labels = dict(labels)
        force_labels[i] = frozenset((_pref_with_peak(domain, i, offered),))
        pass_labels = dict(labels)
        pass_labels[i] = frozenset((_pref_with_peak(domain, i, 1 - offered),))
        children = (
            (f"force{offered}", kn.Leaf(pd.Outcome.policy(offered), kn.make_labels(force_labels))),
            ("pass", build(k + 1, pass_labels)),
        )
        return kn.Node(i, tuple(children), kn.make_labels(labels))

    root_labels = {a: frozenset(domain.prefs(a)) for a in domain.agents}
    return kn.Mechanism(build(0, root_labels))


def proto_scf(spec: ProtoDictSpec, domain: pd.Domain = None) -> pd.SCFTable:
    """The SCF a proto-dictatorship induces, computed without the tree."""
    if domain is None:
        n = max([a for a, _ in spec.stream] + [spec.final])
        domain = pd.two_outcome_domain(n)

    def run(profile):
        by_agent = dict(zip(domain.agents, profile))
        for agent, offered in spec.stream:
            if by_agent[agent].peak == offered:
                return pd.Outcome.policy(offered)
        return pd.Outcome.policy(by_agent[spec.final].peak)

    return pd.scf_from_function(domain, run)


def all_proto_specs(agents):
    """Every proto-dictatorship over the given agents."""
    agents = tuple(sorted(agents))
    specs = []
    for k in range(len(agents)):
        for movers in itertools.permutations(agents, k):
            for offers in itertools.product((0, 1), repeat=k):
                for final in agents:
                    if final in movers:
                        continue
                    specs.append(ProtoDictSpec(tuple(zip(movers, offers)), final))
    return specs


def majority_scf(n: int, k: int) -> pd.SCFTable:
    """Outcome 1 iff at least k of the n agents prefer it; default 0."""
    if not 1 <= k <= n:
        raise InvalidInput(f"threshold k={k} outside 1..{n}")
    domain = pd.two_outcome_domain(n)
    return pd.scf_from_function(
        domain,
        lambda prof: pd.Outcome.policy(
            1 if sum(p.peak for p in prof) >= k else 0
        ),
    )


def unanimity_scf(n: int, default: int = 0) -> pd.SCFTable:
    """Outcome 1 iff everyone prefers it, else the default outcome."""
    domain = pd.two_outcome_domain(n)
    target = 1 - default

    def run(prof):
        if all(p.peak == target for p in prof):
            return pd.Outcome.policy(target)
        return pd.Outcome.policy(default)

    return pd.scf_from_function(domain, run)


def revelation_tree(scf: pd.SCFTable, order=None) -> kn.Mechanism:
    """Sequential full-revelation tree of an SCF (each agent fans out her
    whole preference set in turn)."""
    domain = scf.domain
    order = tuple(order) if order is not None else domain.agents

    def build(k, labels, chosen):
        if k == len(order):
            prof = tuple(chosen[a] for a in domain.agents)
            return kn.Leaf(scf.of(prof), kn.make_labels(labels))
        agent = order[k]
        children = []
        for p in sorted(labels[agent], key=lambda q: q.key()):
            sub_labels = dict(labels)
            sub_labels[agent] = frozenset((p,))
            sub_chosen = dict(chosen)
            sub_chosen[agent] = p
            children.append((p.short(), build(k + 1, sub_labels, sub_chosen)))
        return kn.Node(agent, tuple(children), kn.make_labels(labels))

    root = {a: frozenset(domain.prefs(a)) for a in domain.agents}
    return kn.Mechanism(build(0, root, {}))
