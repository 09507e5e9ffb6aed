"""Named ion/bath configurations with their measured relaxation numbers.

Each profile bundles the ion, the bath state, the detection efficiency
table used for that measurement and the reported relaxation time and
steady state (times in t_L, populations corrected for detection).
Missing relaxation times are filled with ``FALLBACK_T1`` when a curve
has to be generated.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rates import TwoLevelRates, decompose_rates

FALLBACK_T1 = 2.50


@dataclass(frozen=True)
class Profile:
    name: str
    ion: str
    bath_state: tuple[int, int]
    detection: str
    T1: float | None
    T1_sigma: float | None
    p_inf: float
    p_inf_sigma: float
    T2: float | None = None
    T2_sigma: float | None = None

    @property
    def stretched(self):
        return self.ion == "yb174" and abs(self.bath_state[1]) == 2

    @property
    def T1_or_fallback(self):
        return self.T1 if self.T1 is not None else FALLBACK_T1

    def two_level_rates(self, T1=None, p_inf=None):
        """Rates (1/t_L) reproducing (T1, p_inf).

        Stretched Zeeman baths use the spin-exchange / relaxation split
        (mirrored for |2,-2>); otherwise the rates are booked as spin
        relaxation because the data do not separate the two.
        """
        T1 = self.T1_or_fallback if T1 is None else T1
        p = self.p_inf if p_inf is None else p_inf
        if self.stretched and self.bath_state[1] == 2:
            return decompose_rates(T1, p)
        if self.stretched:
            m = decompose_rates(T1, 1.0 - p)
            return TwoLevelRates(up_se=m.down_se, up_sr=m.down_sr, down_se=m.up_se, down_sr=m.up_sr)
        return TwoLevelRates.from_totals((1.0 - p) / T1, p / T1)


TABLE1 = {
    p.name: p
    for p in [
        Profile("yb171_rb1m1", "yb171", (1, -1), "yb171_hyperfine", 1.73, 0.17, 0.000, 0.005),
        Profile("yb171_rb22", "yb171", (2, 2), "yb171_hyperfine", 3.39, 0.16, 0.163, 0.013, 1.4, 0.2),
        Profile("yb174_rb22", "yb174", (2, 2), "yb174_f2_bath", 2.50, 0.39, 0.609, 0.015),
        Profile("yb174_rb2m2", "yb174", (2, -2), "yb174_f2_bath", None, None, 0.423, 0.026),
        Profile("yb174_rb11", "yb174", (1, 1), "yb174_f1_bath", 1.60, 0.24, 0.563, 0.017),
        Profile("yb174_rb1m1", "yb174", (1, -1), "yb174_f1_bath", None, None, 0.457, 0.021),
    ]
}

#: Reported split for the stretched Zeeman case, in units of 1/T1.
STRETCHED_SPLIT = {"se_T1": (0.22, 0.03), "sr_T1": (0.39, 0.02)}


def profile(name):
    try:
        return TABLE1[name]
    except KeyError:
        raise KeyError(f"unknown profile {name!r}; choose from {sorted(TABLE1)}") from None
