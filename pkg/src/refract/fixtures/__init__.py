"""Bundled model fixtures.

case1.json
    The default test model: sigma = 0.2, c_Y = 0.5, kappa = 1 with an
    order-6 Coxian phase-type jump law approximating the folded standard
    normal |N(0,1)| (fitted in-repo by tools/fit_folded_normal.py; jump
    mean 0.799, second moment 0.999), delta1 = 1, delta2 = 0.5, q = 0.05,
    beta = 1.2, rho = 0.

hyperexp2.json
    A bounded-variation companion: sigma = 0 with an m = 2
    hyperexponential jump law, used wherever only qualitative structure
    (or the sigma = 0 boundary behavior) is exercised.
"""

from importlib import resources

from ..model import LevyModel, load_model

_NAMES = ("case1", "hyperexp2")


def fixture_path(name: str):
    """Filesystem path of a bundled fixture ('case1' or 'hyperexp2')."""
    if name not in _NAMES:
        raise KeyError(f"unknown fixture {name!r}; available: {_NAMES}")
    return resources.files(__package__) / f"{name}.json"


def load_fixture(name: str, **overrides) -> LevyModel:
    """Load a bundled fixture, optionally overriding scalar fields."""
    with resources.as_file(fixture_path(name)) as p:
        model = load_model(p)
    if overrides:
        cfg = model.to_config_dict()
        cfg.update(overrides)
        from ..model import build_model

        model = build_model(**cfg)
    return model
