"""JSON run configurations for the ``price`` command.

The document is checked against a versioned JSON Schema before anything is
built; unknown keys anywhere are rejected so typos cannot pass silently.
Custom payoffs are callables and have no JSON form.
"""

import json
from dataclasses import dataclass
from typing import Optional

import jsonschema

from .errors import ConfigError, DomainError
from .geometry import CorrelationPoint
from .payoffs import PayoffDescriptor
from .pricing import MonteCarlo, PricingRequest, Quadrature
from .transform import MarketParams

SCHEMA_VERSION = 1

_number = {"type": "number"}
_index = {"type": "integer", "minimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "params", "spot", "payoff"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "required": ["rate", "vols", "maturity"],
            "properties": {
                "rate": _number,
                "vols": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "maturity": {"type": "number", "minimum": 0},
            },
        },
        "correlations": {"type": ["array", "null"], "items": {"type": "number", "minimum": -1, "maximum": 1}},
        "spot": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "valuation_time": {"type": "number", "minimum": 0},
        "payoff": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["vanilla_call", "vanilla_put", "basket_call", "exchange",
                                  "max_call", "min_call"]},
                "asset": _index,
                "strike": {"type": "number", "minimum": 0},
                "weights": {"type": "array", "items": _number},
                "asset_long": _index,
                "asset_short": _index,
                "units": {"type": "number", "minimum": 0},
            },
        },
        "method": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {
                        "type": {"const": "quadrature"},
                        "order": {"type": "integer", "minimum": 3},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {
                        "type": {"const": "monte_carlo"},
                        "paths": {"type": "integer", "minimum": 1000},
                        "seed": {"type": "integer", "minimum": 0},
                        "workers": {"type": "integer", "minimum": 1},
                    },
                },
            ]
        },
        "eps_rank": {"type": "number", "exclusiveMinimum": 0},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": "string"},
                "format": {"enum": ["csv", "json"]},
            },
        },
    },
}


@dataclass(frozen=True)
class RunConfig:
    request: PricingRequest
    output_path: Optional[str] = None
    output_format: str = "json"


def _method(entry):
    entry = dict(entry or {"type": "quadrature"})
    kind = entry.pop("type")
    if kind == "quadrature":
        return Quadrature(**entry)
    return MonteCarlo(**entry)


def parse_config(doc):
    """Validate a decoded document and build the :class:`RunConfig`."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    try:
        p = doc["params"]
        params = MarketParams(p["rate"], tuple(p["vols"]), p["maturity"])
        corr = doc.get("correlations")
        corr = CorrelationPoint(params.n_assets, tuple(corr)) if corr else None
        request = PricingRequest(
            params,
            corr,
            tuple(doc["spot"]),
            doc.get("valuation_time", 0.0),
            PayoffDescriptor.from_dict(doc["payoff"]),
            _method(doc.get("method")),
            doc.get("eps_rank"),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    out = doc.get("output", {})
    return RunConfig(request, out.get("path"), out.get("format", "json"))


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(doc)


def request_to_dict(request):
    """Inverse of :func:`parse_config` for the request part."""
    m = request.method
    if isinstance(m, Quadrature):
        method = {"type": "quadrature", "order": m.order}
    else:
        method = {"type": "monte_carlo", "paths": m.paths, "seed": m.seed, "workers": m.workers}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "params": {"rate": request.params.rate, "vols": list(request.params.vols),
                   "maturity": request.params.maturity},
        "correlations": list(request.correlation.entries) if request.correlation else None,
        "spot": list(request.spot),
        "valuation_time": request.valuation_time,
        "payoff": request.payoff.to_dict(),
        "method": method,
    }
    if request.eps_rank is not None:
        doc["eps_rank"] = request.eps_rank
    return doc
