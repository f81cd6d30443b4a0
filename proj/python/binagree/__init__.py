"""Agreement between two binary measuring methods with multiple raters over time.

Thin wrapper around the compiled ``_binagree`` extension. Typical use::

    import binagree as ba
    data = ba.load_csv("visits.csv")
    fit = ba.fit(data)
    print(ba.wald_test(fit).p_value)
"""

from ._binagree import *  # noqa: F401,F403
from ._binagree import (
    BAScale,
    ModelSpec,
    RaterEffect,
    ResidualScale,
    eblup_summary,
    ba_summary,
    model_kappa,
    naive_kappa,
    icc,
    wald_test,
)

__version__ = "0.1.0"


def agreement_report(fit, dataset, scale=BAScale.latent, level=0.95):
    """Wald test, Bland-Altman summary, kappas and ICCs for one fit, as a dict."""
    summaries = eblup_summary(fit, dataset)
    return {
        "wald": wald_test(fit, level),
        "bland_altman": ba_summary(summaries, scale),
        "model_kappa": model_kappa(summaries, level),
        "naive_kappa": naive_kappa(dataset, level),
        "icc": icc(fit.vc),
    }
