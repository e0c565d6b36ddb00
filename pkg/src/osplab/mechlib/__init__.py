"""Constructors for every mechanism family the workbench reproduces."""

from .auctions import (
    APPENDIX_TYPES,
    ascending_clock_auction,
    one_good_domain,
    restricted_two_good_scf,
    sealed_bid_second_price,
    truthful_clock_strategy,
    truthful_sealed_strategy,
    vcg_clarke_scf,
    welfare_best_allocations,
    win_outcome,
)
from .barter import (
    BarterPolicy,
    BarterState,
    BipolarPolicy,
    Fig1Policy,
    SeededRandomPolicy,
    SerialDictatorshipPolicy,
    endowable_agents,
    sequential_barter,
    valid_endowments,
)
from .matching import (
    FIG1_AGENTS,
    FIG1_HOUSES,
    fig1_domain,
    fig1_mechanism,
    serial_dictatorship,
    serial_dictatorship_domain,
    ttc,
    ttc_truthful_strategy,
)
from .singlepeaked import (
    Arbitration,
    SafeguardParams,
    dictatorship_with_safeguards,
    domain_for,
    max_rule,
    median_scf,
    min_rule,
    plain_dictatorship,
    safeguards,
    safeguards_scf,
)
from .voting import (
    ProtoDictSpec,
    all_proto_specs,
    majority_scf,
    proto_dictatorship,
    proto_scf,
    revelation_tree,
    unanimity_scf,
)
