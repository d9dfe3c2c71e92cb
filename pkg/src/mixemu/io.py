"""Ensemble CSV loading, run configuration, and model artifact (de)serialization.

Artifacts are versioned JSON documents holding everything needed to
reproduce predictions bitwise: standardizer, prior settings, posterior
draws, diagnostics and seeds.  Factorizations are recomputed on load from
the stored draws, which is deterministic.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .design import Standardizer
from .mixture import FeatureMap, MixtureFit
from .nonstationary import FittedNonstationaryGP, _ns_cache
from .sampler import DrawSet
from .stationary import FittedStationaryGP, GPPrior, _prediction_cache

ARTIFACT_VERSION = 1


class EnsembleFormatError(ValueError):
    pass


class ArtifactError(ValueError):
    pass


@dataclass
class Ensemble:
    X: np.ndarray  # raw inputs (n, p)
    F: np.ndarray  # raw response (n,) or None for design-only files
    columns: list = field(default_factory=list)

    @property
    def has_response(self):
        return self.F is not None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


def load_ensemble(path):
    """Read an ensemble CSV: header x1..xp[,y], one numeric row per run."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EnsembleFormatError(f"{path}: empty file")
        header = [h.strip() for h in header]
        p = len(header) - 1 if header and header[-1] == "y" else len(header)
        expected = [f"x{j + 1}" for j in range(p)]
        if header[:p] != expected or p < 1:
            raise EnsembleFormatError(
                f"{path}: header must be x1,...,xp[,y]; got {','.join(header)}"
            )
        has_y = len(header) == p + 1
        rows = []
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise EnsembleFormatError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as err:
                raise EnsembleFormatError(f"{path}: row {i}: {err}")
    if not rows:
        raise EnsembleFormatError(f"{path}: no data rows")
    data = np.asarray(rows)
    X = data[:, :p]
    F = data[:, p] if has_y else None
    return Ensemble(X=X, F=F, columns=header)


def save_ensemble(path, X, F=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    header = [f"x{j + 1}" for j in range(X.shape[1])]
    if F is not None:
        header.append("y")
    rows = X if F is None else np.column_stack([X, F])
    _atomic_write_text(
        path,
        ",".join(header)
        + "\n"
        + "\n".join(",".join(repr(float(v)) for v in row) for row in rows)
        + "\n",
    )


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """Pipeline settings; every field has a default, unknown keys rejected."""

    seed: int = 0
    chains: int = 2
    warmup_iters: int = 3000
    keep_iters: int = 4000
    mixture_warmup_iters: int = None  # fall back to warmup_iters
    mixture_keep_iters: int = None
    ns_warmup_iters: int = None
    ns_keep_iters: int = None
    target_accept: float = 0.3
    L_max: int = 4
    waic_band: float = 2.0
    alpha: float = 0.05
    beta_sd: float = 10.0
    delta_shape: object = 4.0  # scalar or per-dimension list
    delta_rate: object = 4.0
    sigma2_shape: float = 2.0
    sigma2_scale: float = 1.0
    nugget: float = 1e-4
    mixture_intercept: bool = False
    input_ranges: object = None  # [[lo, hi], ...] or None for observed
    max_cached_draws: int = 400
    out_dir: str = "."

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            import yaml

            data = yaml.safe_load(text)
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a mapping")
        return cls.from_dict(data)

    def gp_prior(self):
        ds = self.delta_shape
        dr = self.delta_rate
        return GPPrior(
            beta_sd=self.beta_sd,
            delta_shape=np.asarray(ds, dtype=float) if not np.isscalar(ds) else ds,
            delta_rate=np.asarray(dr, dtype=float) if not np.isscalar(dr) else dr,
            sigma2_shape=self.sigma2_shape,
            sigma2_scale=self.sigma2_scale,
            nugget=self.nugget,
        )

    def sampler_config(self, seed_offset=0, stage=None):
        from .sampler import SamplerConfig

        warmup, keep = self.warmup_iters, self.keep_iters
        if stage == "mixture":
            warmup = self.mixture_warmup_iters or warmup
            keep = self.mixture_keep_iters or keep
        elif stage == "nonstationary":
            warmup = self.ns_warmup_iters or warmup
            keep = self.ns_keep_iters or keep
        return SamplerConfig(
            chains=self.chains,
            warmup_iters=warmup,
            keep_iters=keep,
            seed=self.seed + seed_offset,
            target_accept=self.target_accept,
        )

    def digest(self):
        payload = json.dumps(asdict(self), sort_keys=True, default=_jsonify)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _jsonify(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    raise TypeError(f"cannot serialize {type(value)}")


def _array(value, allow_none=False):
    if value is None and allow_none:
        return None
    return np.asarray(value, dtype=float)


def _drawset_to_dict(ds):
    return {
        "by_chain": ds.by_chain.tolist(),
        "rhat": None if ds.rhat is None else ds.rhat.tolist(),
        "ess": None if ds.ess is None else ds.ess.tolist(),
        "accept_rate": None if ds.accept_rate is None else ds.accept_rate.tolist(),
    }


def _drawset_from_dict(d):
    return DrawSet(
        by_chain=np.asarray(d["by_chain"], dtype=float),
        rhat=_array(d["rhat"], allow_none=True),
        ess=_array(d["ess"], allow_none=True),
        accept_rate=_array(d["accept_rate"], allow_none=True),
    )


def _prior_to_dict(prior):
    return {
        "beta_sd": prior.beta_sd,
        "delta_shape": np.asarray(prior.delta_shape).tolist(),
        "delta_rate": np.asarray(prior.delta_rate).tolist(),
        "sigma2_shape": prior.sigma2_shape,
        "sigma2_scale": prior.sigma2_scale,
        "nugget": prior.nugget,
    }


def _prior_from_dict(d):
    def scalar_or_array(v):
        return v if np.isscalar(v) else np.asarray(v, dtype=float)

    return GPPrior(
        beta_sd=d["beta_sd"],
        delta_shape=scalar_or_array(d["delta_shape"]),
        delta_rate=scalar_or_array(d["delta_rate"]),
        sigma2_shape=d["sigma2_shape"],
        sigma2_scale=d["sigma2_scale"],
        nugget=d["nugget"],
    )


def standardizer_to_dict(s):
    return {
        "input_lower": s.input_lower.tolist(),
        "input_upper": s.input_upper.tolist(),
        "response_mean": s.response_mean,
        "response_sd": s.response_sd,
    }


def standardizer_from_dict(d):
    return Standardizer(
        input_lower=np.asarray(d["input_lower"], dtype=float),
        input_upper=np.asarray(d["input_upper"], dtype=float),
        response_mean=d["response_mean"],
        response_sd=d["response_sd"],
    )


def stationary_to_dict(fit):
    return {
        "kind": "stationary",
        "X": fit.X.tolist(),
        "F": fit.F.tolist(),
        "prior": _prior_to_dict(fit.prior),
        "drawset": _drawset_to_dict(fit.drawset),
        "exponents": None if fit.exponents is None else fit.exponents.tolist(),
        "converged": fit.converged,
        "max_jitter": fit.max_jitter,
        "cached_draws": len(fit.cache),
    }


def stationary_from_dict(d):
    X = _array(d["X"])
    F = _array(d["F"])
    prior = _prior_from_dict(d["prior"])
    ds = _drawset_from_dict(d["drawset"])
    exponents = _array(d["exponents"], allow_none=True)
    cache, _ = _prediction_cache(X, F, ds.draws, exponents, prior.nugget, d["cached_draws"])
    return FittedStationaryGP(
        X=X,
        F=F,
        prior=prior,
        drawset=ds,
        exponents=exponents,
        converged=d["converged"],
        max_jitter=d["max_jitter"],
        cache=cache,
    )


def mixture_to_dict(fit):
    return {
        "kind": "mixture",
        "L": fit.L,
        "X": fit.X.tolist(),
        "e": fit.e.tolist(),
        "drawset": _drawset_to_dict(fit.drawset),
        "intercept": fit.feature_map.intercept,
        "converged": fit.converged,
        "waic": fit.waic,
    }


def mixture_from_dict(d):
    return MixtureFit(
        L=d["L"],
        X=_array(d["X"]),
        e=_array(d["e"]),
        drawset=_drawset_from_dict(d["drawset"]),
        feature_map=FeatureMap(intercept=d["intercept"]),
        converged=d["converged"],
        waic=d["waic"],
    )


def nonstationary_to_dict(fit, mixture_fit):
    return {
        "kind": "nonstationary",
        "X": fit.X.tolist(),
        "F": fit.F.tolist(),
        "prior": _prior_to_dict(fit.prior),
        "L": fit.L,
        "drawset": _drawset_to_dict(fit.drawset),
        "exponents": None if fit.exponents is None else fit.exponents.tolist(),
        "converged": fit.converged,
        "max_jitter": fit.max_jitter,
        "estimate_nuggets": fit.estimate_nuggets,
        "cached_draws": len(fit.cache),
        "mixture": mixture_to_dict(mixture_fit),
    }


def nonstationary_from_dict(d):
    X = _array(d["X"])
    F = _array(d["F"])
    prior = _prior_from_dict(d["prior"])
    ds = _drawset_from_dict(d["drawset"])
    exponents = _array(d["exponents"], allow_none=True)
    mix = mixture_from_dict(d["mixture"])
    Lam = mix.lambda_hat(X)
    cache, max_jitter = _ns_cache(
        X, F, ds.draws, d["L"], Lam, prior, exponents, d["estimate_nuggets"], d["cached_draws"]
    )
    return FittedNonstationaryGP(
        X=X,
        F=F,
        prior=prior,
        L=d["L"],
        lambda_fn=mix.lambda_hat,
        drawset=ds,
        exponents=exponents,
        converged=d["converged"],
        max_jitter=d["max_jitter"],
        estimate_nuggets=d["estimate_nuggets"],
        cache=cache,
    )


def save_artifact(path, payload, standardizer=None, extra=None):
    """Write a versioned artifact document atomically."""
    doc = {"format_version": ARTIFACT_VERSION, "model": payload}
    if standardizer is not None:
        doc["standardizer"] = standardizer_to_dict(standardizer)
    if extra:
        doc["extra"] = extra
    _atomic_write_text(path, json.dumps(doc, default=_jsonify))


def load_artifact(path):
    """Load an artifact; returns (fit, standardizer, extra)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != ARTIFACT_VERSION:
        raise ArtifactError(f"{path}: unsupported format version {doc.get('format_version')}")
    model = doc["model"]
    kind = model.get("kind")
    loaders = {
        "stationary": stationary_from_dict,
        "mixture": mixture_from_dict,
        "nonstationary": nonstationary_from_dict,
    }
    if kind not in loaders:
        raise ArtifactError(f"{path}: unknown artifact kind {kind!r}")
    fit = loaders[kind](model)
    std = doc.get("standardizer")
    return fit, (standardizer_from_dict(std) if std else None), doc.get("extra")


def _atomic_write_text(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
