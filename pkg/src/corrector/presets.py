"""Built-in experiments: the one-dimensional oracle and the two-asset figure gallery.

The figure presets feed the volatility matrix straight into the corrector
(``alpha = sigma``) so that both coefficients equal the displayed matrices.
No grid size is published for the figures; every preset uses ``n = 201`` and
the automatic radius.
"""

from __future__ import annotations

from .config import ExperimentConfig, apply_text

_MARKET_1D = """
[market]
mu = 0.1
r = 0.02
beta = 0.1
p = 0.5
"""

_MARKET_2D = """
[market]
mu = 0.06 0.06
r = 0.02
beta = 0.1
p = 0.5
"""

_FIG = """
[corrector]
alpha = sigma
[solver]
n = 201
radius = auto
"""

LAM0 = "0 0.001 0.001; 0.001 0 inf; 0.001 inf 0"
LAM_PRIME = "0 0.001 0.002; 0.001 0 inf; 0.002 inf 0"
LAM_ALL = "0 0.001 0.001; 0.001 0 0.001; 0.001 0.001 0"
LAM_ALL_PRIME = "0 0.001 0.002; 0.001 0 0.001; 0.002 0.001 0"
SIGMA0 = "1 0; 0 1"
SIGMA_MINUS = "1 -0.25; -0.25 1"
SIGMA_PLUS = "1 0.25; 0.25 1"
SIGMA_MM = "1 -0.25; -0.1 1"
SIGMA_PP = "1 0.25; 0.1 1"


def _fig(sigma: str, lam: str) -> str:
    return _MARKET_2D + f"sigma = {sigma}\nlam = {lam}\n" + _FIG


# name -> (provenance line, settings)
_TABLE = {
    "oracle-1d": (
        "1D closed form: sigma = alphaBar = 1, both cash costs 0.001, n = 141; a_bar = 0.0065522",
        _MARKET_1D
        + "sigma = 1\nlam = 0 0.001; 0.001 0\n"
        + "[corrector]\nalpha = sigma\n[solver]\nn = 141\n[validation]\nmc = true\n",
    ),
    "separable-2d": (
        "two independent copies of the 1D oracle (sigma = alphaBar = I, cash-only 0.001), n = 121",
        _fig(SIGMA0, LAM0).replace("n = 201", "n = 121"),
    ),
    "fig-uncorrelated": ("cash-to-asset only, lambda_0 with 0.001 entries, sigma_0 = I", _fig(SIGMA0, LAM0)),
    "fig-neg-correlation": (
        "cash-to-asset only, lambda_0, sigma_- off-diagonal -0.25",
        _fig(SIGMA_MINUS, LAM0),
    ),
    "fig-pos-correlation": (
        "cash-to-asset only, lambda_0, sigma_+ off-diagonal +0.25",
        _fig(SIGMA_PLUS, LAM0),
    ),
    "fig-higher-corr": (
        "cash-to-asset only, lambda_0, sigma_-- with entries -0.25/-0.1",
        _fig(SIGMA_MM, LAM0),
    ),
    "fig-higher-corr-pos": (
        "cash-to-asset only, lambda_0, sigma_++ with entries +0.25/+0.1",
        _fig(SIGMA_PP, LAM0),
    ),
    "fig-asymmetric": (
        "cash-to-asset only, lambda' with 0.002 for asset 2, sigma_0 = I",
        _fig(SIGMA0, LAM_PRIME),
    ),
    "fig-all-uncorrelated": (
        "all transfers allowed, every cost 0.001, sigma_0 = I",
        _fig(SIGMA0, LAM_ALL),
    ),
    "fig-all-neg-correlation": (
        "all transfers allowed, every cost 0.001, sigma_- off-diagonal -0.25",
        _fig(SIGMA_MINUS, LAM_ALL),
    ),
    "fig-all-pos-correlation": (
        "all transfers allowed, every cost 0.001, sigma_+ off-diagonal +0.25",
        _fig(SIGMA_PLUS, LAM_ALL),
    ),
    "fig-all-asymmetric": (
        "all transfers allowed, lambda' cash costs (0.001, 0.002), asset-asset 0.001, sigma_0 = I",
        _fig(SIGMA0, LAM_ALL_PRIME),
    ),
    "merton-2d": (
        "two assets, corrector coefficients derived from the Merton solution, cash-only 0.001",
        _MARKET_2D
        + "sigma = 0.2 0; 0.05 0.25\nlam = "
        + LAM0
        + "\n[solver]\nn = 121\n",
    ),
    "zero-cost": (
        "all costs zero: a_bar = 0 and no-trade everywhere (degenerate)",
        _MARKET_2D + f"sigma = {SIGMA0}\nlam = 0 0 0; 0 0 0; 0 0 0\n" + "[corrector]\nalpha = sigma\n[solver]\nn = 21\n",
    ),
}

PRESETS = tuple(_TABLE)


def get(name: str) -> ExperimentConfig:
    provenance, text = _TABLE[name]
    cfg = ExperimentConfig(name=name, description=provenance)
    return apply_text(cfg, text, source=f"preset {name}")


def list_presets() -> str:
    width = max(len(n) for n in PRESETS)
    return "\n".join(f"{n:<{width}}  {_TABLE[n][0]}" for n in PRESETS) + "\n"
