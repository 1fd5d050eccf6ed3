"""JSON model files and atomic output writing."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .estimation import FitResult
from .model import ModelParams, ModelSpec, num_params

__all__ = ["SCHEMA_VERSION", "ModelFileError", "save_model", "load_model", "atomic_write"]

SCHEMA_VERSION = 1


class ModelFileError(ValueError):
    """A model file is malformed, from another schema version, or out of domain."""


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _to_doc(fit: FitResult) -> dict:
    spec, params = fit.spec, fit.params
    return {
        "schema_version": SCHEMA_VERSION,
        "spec": {
            "n_states": spec.n_states,
            "copula": spec.copula.value,
            "covariates": [
                {"name": n, "mean": m, "sd": s}
                for n, (m, s) in zip(spec.covariate_names, spec.standardization)
            ],
        },
        "params": {
            "lambda": params.lam.tolist(),
            "nu": params.nu.tolist(),
            "theta": params.theta.tolist(),
            "delta": params.delta.tolist(),
            "coefficients": params.coeffs.tolist(),
        },
        "fit": {
            "loglik": fit.loglik,
            "aic": fit.aic,
            "bic": fit.bic,
            "n_obs": fit.n_obs,
            "n_params": num_params(spec),
            "converged": fit.converged,
            "n_starts": fit.n_starts,
            "best_start_index": fit.best_start_index,
            "n_iter": fit.n_iter,
            "message": fit.message,
        },
        "working": np.asarray(fit.working).tolist(),
        "working_cov": None if fit.working_cov is None else np.asarray(fit.working_cov).tolist(),
    }


def save_model(fit: FitResult, path) -> None:
    """Serialize a fit as indented JSON (floats keep full ``repr`` precision)."""
    atomic_write(path, json.dumps(_to_doc(fit), indent=2) + "\n")


def load_model(path) -> FitResult:
    """Read a model written by :func:`save_model`.

    Raises
    ------
    ModelFileError
        On schema-version mismatch, missing keys, or parameters outside
        their domains.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from exc
    version = doc.get("schema_version") if isinstance(doc, dict) else None
    if version != SCHEMA_VERSION:
        raise ModelFileError(f"{path}: schema version {version!r}, expected {SCHEMA_VERSION}")
    try:
        s, p, f = doc["spec"], doc["params"], doc["fit"]
        spec = ModelSpec(
            s["n_states"], s["copula"],
            tuple(c["name"] for c in s["covariates"]),
            tuple((c["mean"], c["sd"]) for c in s["covariates"]),
        )
        params = ModelParams(spec, p["lambda"], p["nu"], p["theta"], p["delta"],
                             p["coefficients"])
        cov = doc.get("working_cov")
        cov = None if cov is None else np.array(cov, dtype=float)
        working = np.array(doc["working"], dtype=float)
        if working.shape != (num_params(spec),):
            raise ValueError(f"working vector has length {working.shape}, expected {num_params(spec)}")
        return FitResult(
            spec, params, float(f["loglik"]), float(f["aic"]), float(f["bic"]), int(f["n_obs"]),
            working, cov, int(f.get("n_starts", 1)), int(f.get("best_start_index", 0)),
            bool(f.get("converged", False)), int(f.get("n_iter", 0)), str(f.get("message", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"{path}: invalid model file: {exc}") from exc
