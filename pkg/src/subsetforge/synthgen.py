"""Synthetic platform datasets calibrated to the published summary statistics.

Features are drawn independently from per-column marginals. The target comes
from a planted logistic model on the standardized features, with the intercept
tuned by bisection so the realized survival rate hits ``target_rate``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, special, stats

from .schema import DataError, Dataset, FeatureSchema, Kind, canonical_schema


class CalibrationError(DataError):
    pass


@dataclass(frozen=True)
class ContinuousMarginal:
    mean: float
    std: float
    low: float
    high: float
    log_scale: bool = False


@dataclass(frozen=True)
class MarginalSpec:
    binary: dict[str, float]
    continuous: dict[str, ContinuousMarginal]
    ordinal: dict[str, tuple[float, ...]]

    def __post_init__(self):
        for name, p in self.binary.items():
            if not 0 <= p <= 1:
                raise ValueError(f"{name}: probability {p} outside [0, 1]")
        for name, m in self.continuous.items():
            if m.std <= 0 or not m.low <= m.mean <= m.high:
                raise ValueError(f"{name}: invalid continuous marginal {m}")
        for name, probs in self.ordinal.items():
            if any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0):
                raise ValueError(f"{name}: category probabilities must be a distribution")

    def to_dict(self) -> dict:
        return {
            "binary": dict(self.binary),
            "continuous": {k: asdict(v) for k, v in self.continuous.items()},
            "ordinal": {k: list(v) for k, v in self.ordinal.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MarginalSpec":
        return cls(
            binary=dict(d["binary"]),
            continuous={k: ContinuousMarginal(**v) for k, v in d["continuous"].items()},
            ordinal={k: tuple(v) for k, v in d["ordinal"].items()},
        )


# Percentage of ones and signed Spearman correlation with Operating Status.
PUBLISHED_BINARY = {
    "NE": (0.9467, -0.1829),
    "Auto Bidding": (0.1694, 0.3315),
    "Car Loan": (0.0664, 0.2425),
    "Personal Credit Loan": (0.0197, 0.0898),
    "Business Credit Loan": (0.0234, 0.0187),
    "Other Loans": (0.2588, 0.2785),
    "Multiple Loans": (0.6276, -0.4075),
    "Borrow Fee": (0.0033, 0.0585),
    "Top-up Fee": (0.0094, 0.0635),
    "Withdrawal Fee": (0.1423, 0.2666),
    "Third-party Guarantee": (0.0911, 0.0931),
    "Bank Guarantee": (0.0021, 0.0392),
    "Risk Reserve": (0.0427, -0.0230),
    "CAPM": (0.1624, -0.1063),
    "Financing Guarantee": (0.1136, 0.0207),
    "BDM": (0.2317, 0.5336),
    "Other Guarantee": (0.2810, 0.1783),
    "No Guarantee": (0.3720, -0.1949),
    "NIFA Membership": (0.0960, 0.2844),
    "AVCA": (0.0582, 0.1013),
    "TCA": (0.0607, 0.2010),
    "Listed Company": (0.0853, 0.2057),
    "Company License": (0.4307, 0.7820),
    "Operation Permit": (0.0767, 0.1841),
    "No Supervisory Mechanism": (0.7957, -0.3393),
}

# (mean, std, min, max, spearman)
PUBLISHED_CONTINUOUS = {
    "NoMO": (34.84, 16.37, 9.0, 157.0, 0.3658),
    "Registered Capital": (4805.0, 10747.0, 1.0, 285000.0, 0.2934),
    "AIR": (12.20, 4.62, 0.0, 48.0, -0.3106),
}

PUBLISHED_TARGET_RATE = 0.3798

# Geographical Location has no published marginal or correlation.
GEO_PROBS = (0.2, 0.2, 0.2, 0.2, 0.2)


def published_correlations() -> dict[str, float]:
    out = {k: v[1] for k, v in PUBLISHED_BINARY.items()}
    out.update({k: v[4] for k, v in PUBLISHED_CONTINUOUS.items()})
    return out


def published_marginals() -> MarginalSpec:
    return MarginalSpec(
        binary={k: v[0] for k, v in PUBLISHED_BINARY.items()},
        continuous={
            k: ContinuousMarginal(*v[:4], log_scale=(k == "Registered Capital"))
            for k, v in PUBLISHED_CONTINUOUS.items()
        },
        ordinal={"Geographical Location": GEO_PROBS},
    )


def planted_features(k: int = 7) -> list[str]:
    """The ``k`` variables with the largest published |correlation|."""
    corr = published_correlations()
    return sorted(corr, key=lambda n: -abs(corr[n]))[:k]


def default_coefficients(schema: Optional[FeatureSchema] = None, k: int = 7) -> dict[str, float]:
    schema = schema or canonical_schema()
    corr = published_correlations()
    planted = set(planted_features(k))
    return {n: (math.copysign(1.0, corr[n]) if n in planted else 0.0) for n in schema.names}


@dataclass(frozen=True)
class GeneratorConfig:
    n_rows: int = 2438
    target_rate: float = PUBLISHED_TARGET_RATE
    coefficients: dict[str, float] = field(default_factory=default_coefficients)
    noise_std: float = 0.5
    seed: int = 0
    marginals: MarginalSpec = field(default_factory=published_marginals)

    def __post_init__(self):
        if self.n_rows < 2:
            raise ValueError("n_rows must be at least 2")
        if not 0 < self.target_rate < 1:
            raise ValueError("target_rate must lie strictly between 0 and 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "target_rate": self.target_rate,
            "coefficients": dict(self.coefficients),
            "noise_std": self.noise_std,
            "seed": self.seed,
            "marginals": self.marginals.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        kw = dict(d)
        kw.pop("format_version", None)
        kw.pop("intercept", None)
        if "marginals" in kw:
            kw["marginals"] = MarginalSpec.from_dict(kw["marginals"])
        if "coefficients" in kw:
            coef = default_coefficients()
            coef.update({k: 0.0 for k in coef})
            coef.update(kw["coefficients"])
            kw["coefficients"] = coef
        return cls(**kw)


def _truncnorm_moments(mu, sigma, low, high):
    a, b = (low - mu) / sigma, (high - mu) / sigma
    m, v = stats.truncnorm.stats(a, b, loc=mu, scale=sigma, moments="mv")
    return float(m), float(math.sqrt(v))


def _trunclognorm_moments(mu, sigma, low, high):
    la = math.log(low) if low > 0 else -math.inf
    lb = math.log(high)

    def raw(k):
        z = special.ndtr((lb - mu - k * sigma**2) / sigma) - special.ndtr((la - mu - k * sigma**2) / sigma)
        return math.exp(k * mu + 0.5 * k**2 * sigma**2) * z

    mass = raw(0)
    m1 = raw(1) / mass
    m2 = raw(2) / mass
    return m1, math.sqrt(max(m2 - m1 * m1, 0.0))


def _calibrate(m: ContinuousMarginal) -> tuple[float, float]:
    """Location/scale of the untruncated law whose truncation has ``m``'s mean and std."""
    if m.log_scale:
        s2 = math.log1p((m.std / m.mean) ** 2)
        x0 = [math.log(m.mean) - s2 / 2, 0.5 * math.log(s2)]
        moments = _trunclognorm_moments
    else:
        x0 = [m.mean, math.log(m.std)]
        moments = _truncnorm_moments

    def resid(x):
        mean, std = moments(x[0], math.exp(x[1]), m.low, m.high)
        return [(mean - m.mean) / m.std, (std - m.std) / m.std]

    sol = optimize.least_squares(resid, x0, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if max(abs(r) for r in sol.fun) > 1e-6:
        raise CalibrationError(f"cannot match truncated moments for {m}")
    return float(sol.x[0]), float(math.exp(sol.x[1]))


def _draw_continuous(m: ContinuousMarginal, n: int, rng: np.random.Generator) -> np.ndarray:
    mu, sigma = _calibrate(m)
    if m.log_scale:
        lo = math.log(m.low) if m.low > 0 else -math.inf
        hi = math.log(m.high)
    else:
        lo, hi = m.low, m.high
    pa = special.ndtr((lo - mu) / sigma)
    pb = special.ndtr((hi - mu) / sigma)
    u = pa + (pb - pa) * rng.random(n)
    x = mu + sigma * special.ndtri(u)
    if m.log_scale:
        x = np.exp(x)
    return np.clip(x, m.low, m.high)


def _draw_features(config: GeneratorConfig, schema: FeatureSchema, rng: np.random.Generator) -> np.ndarray:
    n = config.n_rows
    marg = config.marginals
    X = np.empty((n, len(schema)), dtype=np.float64)
    for j, col in enumerate(schema.columns):
        if col.kind is Kind.BINARY:
            X[:, j] = (rng.random(n) < marg.binary[col.name]).astype(np.float64)
        elif col.kind is Kind.CONTINUOUS:
            X[:, j] = _draw_continuous(marg.continuous[col.name], n, rng)
        else:
            probs = np.asarray(marg.ordinal[col.name], dtype=np.float64)
            lo = int(col.low)
            X[:, j] = lo + rng.choice(probs.size, size=n, p=probs / probs.sum())
    return X


def _calibrate_intercept(linpred: np.ndarray, u: np.ndarray, target_rate: float) -> tuple[float, np.ndarray]:
    def rate(b):
        return np.mean(u < special.expit(b + linpred))

    lo, hi = -60.0, 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if rate(mid) < target_rate:
            lo = mid
        else:
            hi = mid
    best = min((lo, hi), key=lambda b: abs(rate(b) - target_rate))
    if abs(rate(best) - target_rate) > 0.02:
        raise CalibrationError(
            f"realized positive rate {rate(best):.4f} cannot reach {target_rate:.4f} +/- 0.02 "
            f"with {linpred.size} rows"
        )
    y = (u < special.expit(best + linpred)).astype(np.int64)
    return best, y


def generate(config: GeneratorConfig, schema: Optional[FeatureSchema] = None) -> Dataset:
    """Draw a dataset; identical configs give identical datasets."""
    ds, _ = generate_with_intercept(config, schema)
    return ds


def generate_with_intercept(config: GeneratorConfig, schema: Optional[FeatureSchema] = None):
    schema = schema or canonical_schema()
    unknown = set(config.coefficients) - set(schema.names)
    if unknown:
        raise ValueError(f"coefficients for unknown columns: {sorted(unknown)}")
    rng = np.random.default_rng(config.seed)
    X = _draw_features(config, schema, rng)

    std = X.std(axis=0)
    Z = np.where(std > 0, (X - X.mean(axis=0)) / np.where(std > 0, std, 1.0), 0.0)
    coef = np.array([config.coefficients.get(n, 0.0) for n in schema.names])
    noise = rng.normal(0.0, 1.0, config.n_rows) * config.noise_std
    u = rng.random(config.n_rows)
    intercept, y = _calibrate_intercept(Z @ coef + noise, u, config.target_rate)
    return Dataset(X, y, schema, provenance=f"synthetic(seed={config.seed})"), intercept


def sidecar_json(config: GeneratorConfig, intercept: float) -> str:
    d = {"format_version": 1, **config.to_dict(), "intercept": intercept}
    return json.dumps(d, indent=2, sort_keys=True)
