"""osplab: represent, verify, and synthesize obviously strategyproof
mechanisms over finite preference domains."""

__version__ = "0.1.0"
