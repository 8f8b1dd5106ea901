"""Built-in model pairs, selectable by name."""

from .beam import BeamPair
from .boucwen import BoucWenPair
from .damper import DamperPair, statistical_linearization
from .synthetic import linear_pair, noisy_pair

REGISTRY = {
    "beam": BeamPair,
    "damper": DamperPair,
    "boucwen": BoucWenPair,
    "linear": linear_pair,
    "noisy": noisy_pair,
}


def get_problem(name, **options):
    """Instantiate the registered pair ``name`` with keyword ``options``."""
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(REGISTRY)}") from None
    return factory(**options)


__all__ = ["BeamPair", "BoucWenPair", "DamperPair", "REGISTRY", "get_problem",
           "linear_pair", "noisy_pair", "statistical_linearization"]
