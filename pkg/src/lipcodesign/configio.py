"""JSON problem files and run reports.

A problem file has a required ``plant`` block and optional ``codesign`` and
``simulate`` blocks; matrices are nested row-major lists. Everything is
schema-checked before any numbers are touched. Reports are written with
sorted keys and ``repr`` floats, so identical runs give identical bytes
and gains round-trip exactly.
"""

import json
from importlib import resources

import jsonschema
import numpy as np

from .codesign import CoDesignConfig, DesignFunction
from .matrix_equations import eigenvalues
from .plant import NonlinearitySpec, PlantFamily, Transform
from .simulate import DisturbanceSignal

__all__ = [
    "ConfigError",
    "SCHEMA",
    "load_config",
    "parse_config",
    "build_plant",
    "build_codesign_config",
    "build_disturbance",
    "bundled_config_path",
    "report_to_dict",
    "dumps",
]

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_matrix = {"type": "array", "items": {"type": "array", "items": _number}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "required": ["plant"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "plant": {
            "type": "object",
            "required": ["A0", "B", "B_w", "C", "D", "d_lower", "d_upper"],
            "additionalProperties": False,
            "properties": {
                "dimensions": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {k: {"type": "integer", "minimum": 0}
                                   for k in ("n_x", "n_u", "n_w", "n_z", "n_d")},
                },
                "A0": _matrix,
                "A_terms": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["index", "matrix"],
                        "additionalProperties": False,
                        "properties": {"index": {"type": "integer", "minimum": 0},
                                       "matrix": _matrix},
                    },
                },
                "B": _matrix,
                "B_w": _matrix,
                "C": _matrix,
                "D": _matrix,
                "nonlinearity": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["none", "scaled-sine"]},
                        "slot": {"type": "integer", "minimum": 0},
                        "arg_index": {"type": "integer", "minimum": 0},
                        "gain": _number,
                    },
                },
                "alpha": {"type": "number", "minimum": 0},
                "d_lower": _vector,
                "d_upper": _vector,
            },
        },
        "codesign": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eta": {"type": "number", "exclusiveMinimum": 0},
                "eta_bar": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "mu": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "beta_d": {"type": "number", "minimum": 0},
                "beta_c": {"type": "number", "minimum": 0},
                "design_fn": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {"kind": {"enum": ["zero", "linear", "quadratic"]},
                                   "c": _vector, "center": _vector},
                },
                "armijo_nu": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "armijo_zeta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "eps_g": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "transform": {
                    "oneOf": [
                        {"type": "null"},
                        {"type": "object", "required": ["diag"], "additionalProperties": False,
                         "properties": {"diag": _vector}},
                        {"type": "object", "required": ["matrix"], "additionalProperties": False,
                         "properties": {"matrix": _matrix}},
                    ],
                },
                "pole_targets": {
                    "type": "array",
                    "items": {"oneOf": [_number,
                                        {"type": "array", "items": _number,
                                         "minItems": 2, "maxItems": 2}]},
                },
                "initial_d": _vector,
            },
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "x0": _vector,
                "disturbance": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["zero", "constant", "canonical-initial"]},
                        "value": {"oneOf": [_number, _vector]},
                        "t_on": _number,
                        "t_off": _number,
                        "k": {"type": "integer", "minimum": 0},
                    },
                },
                "t_end": {"type": "number", "minimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "gains": _matrix,
                "d": _vector,
            },
        },
    },
}


class ConfigError(ValueError):
    """Malformed or inconsistent problem file; ``path`` locates the field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def bundled_config_path(name="manipulator"):
    return resources.files("lipcodesign") / "data" / f"{name}.json"


def parse_config(text):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          "<document>") from exc
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(err.message, path)
    return raw


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _arr(x):
    return np.array(x, dtype=float)


def build_plant(raw):
    """:class:`PlantFamily` from a parsed config (whole file or plant block)."""
    p = raw.get("plant", raw)
    nl_raw = p.get("nonlinearity", {"kind": "none"})
    try:
        nl = NonlinearitySpec(nl_raw["kind"], slot=nl_raw.get("slot", 0),
                              arg_index=nl_raw.get("arg_index", 0),
                              gain=float(nl_raw.get("gain", 0.0)))
        plant = PlantFamily(
            A0=_arr(p["A0"]),
            A_terms=tuple((t["index"], _arr(t["matrix"])) for t in p.get("A_terms", [])),
            B=_arr(p["B"]), B_w=_arr(p["B_w"]), C=_arr(p["C"]), D=_arr(p["D"]),
            nonlinearity=nl, alpha=p.get("alpha"),
            d_lower=_arr(p["d_lower"]), d_upper=_arr(p["d_upper"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "plant") from exc
    for key, val in p.get("dimensions", {}).items():
        if getattr(plant, key) != val:
            raise ConfigError(f"declared {key}={val} but matrices give {getattr(plant, key)}",
                              f"plant/dimensions/{key}")
    return plant


def _poles(raw_poles):
    return tuple(complex(p[0], p[1]) if isinstance(p, list) else complex(p)
                 for p in raw_poles)


def build_codesign_config(raw, **overrides):
    c = dict(raw.get("codesign", {}))
    kwargs = {k: c[k] for k in ("eta", "eta_bar", "beta_d", "beta_c", "armijo_nu",
                                "armijo_zeta", "eps_g", "max_iters") if k in c}
    if "mu" in c:
        kwargs["mu"] = c["mu"]
    if "design_fn" in c:
        df = c["design_fn"]
        kwargs["design_fn"] = DesignFunction(
            df["kind"], c=None if "c" not in df else _arr(df["c"]),
            center=None if "center" not in df else _arr(df["center"]))
    tr = c.get("transform")
    try:
        if tr is not None:
            kwargs["transform"] = (Transform.diag(tr["diag"]) if "diag" in tr
                                   else Transform.from_matrix(tr["matrix"]))
        if "pole_targets" in c:
            kwargs["pole_targets"] = _poles(c["pole_targets"])
        if "initial_d" in c:
            kwargs["initial_d"] = _arr(c["initial_d"])
        kwargs.update(overrides)
        return CoDesignConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc), "codesign") from exc


def build_disturbance(raw_sim):
    dist = raw_sim.get("disturbance", {"kind": "zero"})
    kind = dist["kind"]
    if kind == "constant":
        return DisturbanceSignal.constant(dist.get("value", 1.0), dist.get("t_on", 0.0),
                                          dist.get("t_off", float("inf")))
    if kind == "canonical-initial":
        return DisturbanceSignal.canonical_initial(dist.get("k", 0))
    return DisturbanceSignal()


def _complex_list(values):
    return [[float(v.real), float(v.imag)] for v in values]


def _controller_dict(init):
    if init is None:
        return None
    return {
        "delta0": init.delta0,
        "threshold": init.threshold,
        "feasible": init.feasible,
        "Kp0": init.Kp0.tolist(),
        "K0": None if init.K0 is None else init.K0.tolist(),
        "gain_form": init.gain_form,
        "verified": init.verified,
    }


def report_to_dict(report, plant):
    cl = np.sort_complex(eigenvalues(plant.closed_loop(report.final_d,
                                                       report.final_K_original)))
    return {
        "status": "converged" if report.converged else "not_converged",
        "message": report.message,
        "stalled": report.stalled,
        "initial_original": _controller_dict(report.initial_original),
        "initial_transformed": _controller_dict(report.initial_transformed),
        "transform": report.transform.T.tolist(),
        "mu": report.mu,
        "eta_bar": report.eta_bar,
        "objective_initial": report.objective_initial,
        "objective_final": report.objective_final,
        "improvement_percent": report.improvement_percent,
        "final_d": report.final_d.tolist(),
        "final_K_bar": report.final_K_bar.tolist(),
        "final_K_original": report.final_K_original.tolist(),
        "final_P": report.final_P.P.tolist(),
        "final_P_residual": report.final_P.residual_norm,
        "closed_loop_eigenvalues": _complex_list(cl),
        "iterations": [
            {"index": j, "d": r.d.tolist(), "K": r.K.tolist(), "objective": r.objective,
             "grad_d_norm": r.grad_d_norm, "grad_K_norm": r.grad_K_norm,
             "step_size": r.step_size}
            for j, r in enumerate(report.iterations)
        ],
    }


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
