"""Command-line scenario runner.

Usage::

    hybrid-koopman run --config scenario.json --out results/ [--checks all|none|a,b] [--quiet]
    hybrid-koopman presets
    hybrid-koopman schema

``run`` writes ``timeseries.csv``, ``checks.json`` and ``config.resolved.json``
to the output directory. Exit status: 0 when every enabled check passes,
1 when a check fails, 2 for an invalid configuration, 3 for a numerical
failure during the run.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .dynamics import build_hybrid_hamiltonian, evolve_trajectory, low_rank_factor
from .errors import ConfigurationError, HybridKoopmanError
from .expr import evaluate_on_grid, parse
from .hybrid_algebra import (
    HybridOperator,
    HybridState,
    classical_marginal_values,
    lift,
    quantum_marginal,
    random_hybrid_state,
)
from .phase_space import PRESETS, ClassicalDensity, build_grid, liouville_oracle
from .quantum import entropy_from_eigenvalues, hermiticity_defect, purity

CHECKS = ("trace", "hermiticity", "positivity", "entropy", "back_reaction")
THRESHOLDS = {"trace": 1e-10, "hermiticity": 1e-10, "positivity": -1e-9, "entropy": 1e-8,
              "back_reaction": 1e-8}
EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

_NUMBER = {"type": "number"}
_PAIR = {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}
_MATRIX = {
    "type": "array",
    "description": "Row-major matrix; each entry is a [re, im] pair.",
    "minItems": 2,
    "items": {"type": "array", "minItems": 2, "items": _PAIR},
}
_STRENGTH = {"oneOf": [_NUMBER, {"type": "string", "description": "name of a parameter"}]}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "hybrid-koopman scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["grid", "quantum_dim", "hamiltonian", "initial_state", "time"],
    "properties": {
        "name": {"type": "string", "default": "scenario"},
        "seed": {"type": "integer", "minimum": 0, "default": 0},
        "params": {
            "type": "object",
            "description": "Numbers substituted for matching names in expressions.",
            "additionalProperties": _NUMBER,
            "propertyNames": {"pattern": "^[A-Za-z_][A-Za-z_0-9]*$"},
            "default": {},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["q", "p", "n_q", "n_p"],
            "properties": {
                "q": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
                "p": {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
                "n_q": {"type": "integer", "minimum": 2},
                "n_p": {"type": "integer", "minimum": 2},
                "boundary": {"enum": ["periodic", "zero"], "default": "periodic"},
            },
        },
        "quantum_dim": {"type": "integer", "minimum": 2},
        "derivative": {
            "enum": ["order2", "order4", "spectral"],
            "default": "order2",
            "description": "Discretization of the conjugate momenta.",
        },
        "hamiltonian": {
            "type": "object",
            "additionalProperties": False,
            "required": ["classical", "quantum"],
            "properties": {
                "classical": {"type": "string", "description": "preset name or expression in q, p"},
                "quantum": _MATRIX,
                "coupling": {
                    "type": "array",
                    "default": [],
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["classical", "quantum", "strength"],
                        "properties": {
                            "classical": {"type": "string"},
                            "quantum": _MATRIX,
                            "strength": _STRENGTH,
                        },
                    },
                },
            },
        },
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["product", "custom", "random"]},
                "classical": {"type": "string", "description": "unnormalized classical density"},
                "quantum": _MATRIX,
                "components": {
                    "type": "array",
                    "description": "custom: rho(xi) proportional to sum_k f_k(xi) Q_k",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["classical", "quantum"],
                        "properties": {"classical": {"type": "string"}, "quantum": _MATRIX},
                    },
                },
            },
        },
        "lift": {"enum": ["block_diagonal", "coherent"], "default": "block_diagonal"},
        "time": {
            "type": "object",
            "additionalProperties": False,
            "required": ["t_end", "n_samples"],
            "properties": {
                "t_end": {"type": "number", "minimum": 0},
                "n_samples": {"type": "integer", "minimum": 2},
            },
        },
        "observables": {
            "type": "array",
            "default": [],
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "terms"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z_0-9]*$"},
                    "terms": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["classical", "quantum"],
                            "properties": {
                                "coefficient": {**_PAIR, "default": [1, 0]},
                                "classical": {"type": "string"},
                                "quantum": _MATRIX,
                            },
                        },
                    },
                },
            },
        },
        "checks": {
            "type": "array",
            "items": {"enum": list(CHECKS)},
            "default": list(CHECKS),
        },
    },
}

_SECTIONS = ("grid", "hamiltonian", "initial_state", "time")


# -- configuration -------------------------------------------------------------------


class ConfigError(ConfigurationError):
    """Invalid scenario; ``errors`` lists ``(field_path, message)``."""

    code = "invalid_config"

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


def _path(parts) -> str:
    out = ""
    for part in parts:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def validate_config(raw) -> dict:
    """Fill defaults and validate; returns a new dict or raises :class:`ConfigError`.

    Missing top-level sections are treated as empty so that errors name the
    missing leaf fields (for example ``grid.n_q``).
    """
    if not isinstance(raw, dict):
        raise ConfigError([("<root>", "configuration must be a JSON object")])
    cfg = copy.deepcopy(raw)
    for key in _SECTIONS:
        cfg.setdefault(key, {})
    errors = []
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for err in validator.iter_errors(cfg):
        parts = list(err.absolute_path)
        if err.validator == "required":
            missing = [k for k in err.validator_value if k not in err.instance]
            errors.extend((_path(parts + [k]), "required field is missing") for k in missing)
        else:
            errors.append((_path(parts), err.message))
    if errors:
        raise ConfigError(sorted(set(errors)))
    _fill_defaults(cfg)
    _semantic_checks(cfg)
    return cfg


def _fill_defaults(cfg):
    for key, prop in SCHEMA["properties"].items():
        if key not in cfg and "default" in prop:
            cfg[key] = copy.deepcopy(prop["default"])
    cfg["grid"].setdefault("boundary", "periodic")
    cfg["hamiltonian"].setdefault("coupling", [])
    for obs in cfg["observables"]:
        for term in obs["terms"]:
            term.setdefault("coefficient", [1, 0])


def _semantic_checks(cfg):
    errors = []
    d = cfg["quantum_dim"]
    for axis in ("q", "p"):
        lo, hi = cfg["grid"][axis]
        if not hi > lo:
            errors.append((f"grid.{axis}", "upper bound must exceed lower bound"))

    def mat(path, m):
        if len(m) != d or any(len(row) != d for row in m):
            errors.append((path, f"matrix must be {d}x{d}"))

    mat("hamiltonian.quantum", cfg["hamiltonian"]["quantum"])
    for i, c in enumerate(cfg["hamiltonian"]["coupling"]):
        mat(f"hamiltonian.coupling[{i}].quantum", c["quantum"])
        if isinstance(c["strength"], str) and c["strength"] not in cfg["params"]:
            errors.append((f"hamiltonian.coupling[{i}].strength", f"unknown parameter {c['strength']!r}"))
    st = cfg["initial_state"]
    if st["kind"] == "product":
        for key in ("classical", "quantum"):
            if key not in st:
                errors.append((f"initial_state.{key}", "required field is missing"))
        if "quantum" in st:
            mat("initial_state.quantum", st["quantum"])
    elif st["kind"] == "custom":
        if "components" not in st:
            errors.append(("initial_state.components", "required field is missing"))
        for i, c in enumerate(st.get("components", [])):
            mat(f"initial_state.components[{i}].quantum", c["quantum"])
    for i, obs in enumerate(cfg["observables"]):
        for j, term in enumerate(obs["terms"]):
            mat(f"observables[{i}].terms[{j}].quantum", term["quantum"])
    names = [o["name"] for o in cfg["observables"]]
    if len(set(names)) != len(names):
        errors.append(("observables", "observable names must be unique"))
    if errors:
        raise ConfigError(errors)


def substitute_params(text: str, params: dict) -> str:
    """Replace whole-word parameter names by their numeric values."""
    for name in sorted(params, key=len, reverse=True):
        text = re.sub(rf"\b{re.escape(name)}\b", f"({float(params[name])!r})", text)
    return text


def resolve_config(cfg: dict) -> dict:
    """Copy of a validated config with parameters substituted into every expression."""
    out = copy.deepcopy(cfg)
    params = out["params"]

    def sub(obj, key):
        if key in obj:
            obj[key] = substitute_params(obj[key], params)

    if out["hamiltonian"]["classical"] not in PRESETS:
        sub(out["hamiltonian"], "classical")
    for c in out["hamiltonian"]["coupling"]:
        sub(c, "classical")
        if isinstance(c["strength"], str):
            c["strength"] = float(params[c["strength"]])
    sub(out["initial_state"], "classical")
    for c in out["initial_state"].get("components", []):
        sub(c, "classical")
    for obs in out["observables"]:
        for term in obs["terms"]:
            sub(term, "classical")
    return out


def _matrix(m) -> np.ndarray:
    return np.array([[complex(re_, im) for re_, im in row] for row in m])


def _expr(text, grid, path):
    try:
        return evaluate_on_grid(parse(text), grid)
    except HybridKoopmanError as exc:
        raise ConfigError([(path, str(exc))]) from exc


# -- running ----------------------------------------------------------------------------


@dataclass
class Scenario:
    config: dict
    grid: object
    hamiltonian: object
    state: HybridState
    observables: dict = field(default_factory=dict)


def build_scenario(cfg: dict, zero_coupling: bool = False) -> Scenario:
    """Construct grid, Hamiltonian, initial state and observables from a resolved config."""
    g = cfg["grid"]
    grid = build_grid((*g["q"], *g["p"]), g["n_q"], g["n_p"], g["boundary"])
    d = cfg["quantum_dim"]
    deriv = cfg["derivative"]
    ham = cfg["hamiltonian"]
    if ham["classical"] in PRESETS:
        H_C = ham["classical"]
    else:
        H_C = _expr(ham["classical"], grid, "hamiltonian.classical")
    coupling = []
    for i, c in enumerate(ham["coupling"]):
        strength = 0.0 if zero_coupling else float(c["strength"])
        coupling.append((_expr(c["classical"], grid, f"hamiltonian.coupling[{i}].classical"),
                         _matrix(c["quantum"]), strength))
    try:
        H = build_hybrid_hamiltonian(grid, H_C, _matrix(ham["quantum"]), coupling,
                                     order=4 if deriv == "order4" else 2,
                                     spectral=deriv == "spectral")
    except HybridKoopmanError as exc:
        raise ConfigError([("hamiltonian", str(exc))]) from exc

    st = cfg["initial_state"]
    try:
        if st["kind"] == "product":
            F = ClassicalDensity.from_unnormalized(grid, _expr(st["classical"], grid, "initial_state.classical"))
            state = HybridState(grid, F.values[:, None, None] * _normalized(_matrix(st["quantum"]))[None])
        elif st["kind"] == "custom":
            blocks = np.zeros((grid.size, d, d), dtype=complex)
            for i, c in enumerate(st["components"]):
                f = _expr(c["classical"], grid, f"initial_state.components[{i}].classical")
                blocks += f[:, None, None] * _matrix(c["quantum"])[None]
            state = HybridState.from_unnormalized(grid, blocks)
        else:
            state = random_hybrid_state(grid, d, np.random.default_rng(cfg["seed"]))
    except ConfigError:
        raise
    except HybridKoopmanError as exc:
        raise ConfigError([("initial_state", str(exc))]) from exc

    observables = {}
    for i, obs in enumerate(cfg["observables"]):
        terms = []
        for j, t in enumerate(obs["terms"]):
            a = _expr(t["classical"], grid, f"observables[{i}].terms[{j}].classical")
            terms.append((complex(*t["coefficient"]), a, _matrix(t["quantum"])))
        observables[obs["name"]] = HybridOperator(grid, d, terms).realize()
    return Scenario(cfg, grid, H, state, observables)


def _normalized(Q):
    tr = np.trace(Q).real
    if tr <= 0:
        raise ConfigError([("initial_state.quantum", "quantum state must have positive trace")])
    return Q / tr


def _spectrum(M) -> np.ndarray:
    """Eigenvalues of a Hermitian PSD-or-not matrix; cheap for low-rank states."""
    L = low_rank_factor(M, max_rank=32)
    if L is not None:
        nz = np.linalg.eigvalsh(L.conj().T @ L)
        return np.concatenate([np.zeros(M.shape[0] - nz.size), nz])
    return np.linalg.eigvalsh(0.5 * (M + M.conj().T))


def simulate(sc: Scenario):
    """Rows of diagnostics at each sample time, plus the classical marginals."""
    cfg = sc.config
    times = np.linspace(0.0, cfg["time"]["t_end"], cfg["time"]["n_samples"])
    rho0 = lift(sc.state, cfg["lift"])
    states = evolve_trajectory(rho0, sc.hamiltonian, times[1:])
    states.insert(0, rho0)
    preset = cfg["hamiltonian"]["classical"] if cfg["hamiltonian"]["classical"] in PRESETS else None
    F0 = ClassicalDensity.from_unnormalized(sc.grid, classical_marginal_values(rho0).clip(0))
    dv = sc.grid.cell_volume
    idx = np.arange(sc.grid.size)
    rows, marginals = [], []
    for t, rho in zip(times, states):
        M = np.asarray(rho.matrix)
        eigs = _spectrum(M)
        S_vN, _ = entropy_from_eigenvalues(eigs)
        blocks = rho.blocks4()[idx, :, idx, :] / dv
        blocks = 0.5 * (blocks + blocks.conj().transpose(0, 2, 1))
        S_H = dv * entropy_from_eigenvalues(np.linalg.eigvalsh(blocks))[0]
        marg = classical_marginal_values(rho)
        marginals.append(marg)
        row = {"time": float(t)}
        for name, F in sc.observables.items():
            val = complex((F.T.multiply(M)).sum())
            row[name] = val.real
            row[f"{name}_imag"] = val.imag
        row["S_vN"] = S_vN
        row["S_H"] = S_H
        row["purity"] = purity(quantum_marginal(rho))
        row["trace_residual"] = abs(np.trace(M) - 1.0)
        row["hermiticity_defect"] = hermiticity_defect(M)
        row["min_eigenvalue"] = float(eigs.min())
        if preset is not None:
            row["classical_deviation"] = float(np.abs(marg - liouville_oracle(F0, preset, float(t)).values).max())
        rows.append(row)
    return rows, np.array(marginals)


def run_checks(sc: Scenario, rows, marginals, enabled):
    """Evaluate each enabled invariant suite on the time series."""
    out = {}
    if "trace" in enabled:
        v = max(r["trace_residual"] for r in rows)
        out["trace"] = _check(v, THRESHOLDS["trace"], v <= THRESHOLDS["trace"])
    if "hermiticity" in enabled:
        v = max(r["hermiticity_defect"] for r in rows)
        out["hermiticity"] = _check(v, THRESHOLDS["hermiticity"], v <= THRESHOLDS["hermiticity"])
    if "positivity" in enabled:
        # a non-positive initial lift cannot become positive; compare against its start
        start = min(rows[0]["min_eigenvalue"], 0.0)
        v = min(r["min_eigenvalue"] for r in rows) - start
        out["positivity"] = _check(v, THRESHOLDS["positivity"], v >= THRESHOLDS["positivity"])
    if "entropy" in enabled:
        v = max(abs(r["S_vN"] - rows[0]["S_vN"]) for r in rows)
        out["entropy"] = _check(v, THRESHOLDS["entropy"], v <= THRESHOLDS["entropy"])
    if "back_reaction" in enabled:
        if sc.hamiltonian.decoupled:
            v = 0.0
        else:
            free = build_scenario(sc.config, zero_coupling=True)
            _, free_marginals = simulate(free)
            v = float(np.abs(marginals - free_marginals).max())
        out["back_reaction"] = _check(v, THRESHOLDS["back_reaction"], v <= THRESHOLDS["back_reaction"])
    return out


def _fmt(x) -> str:
    # adding 0.0 turns -0.0 into 0.0
    return format(float(x) + 0.0, ".17g")


def _check(value, threshold, passed) -> dict:
    return {"value": float(value) + 0.0, "threshold": float(threshold), "passed": bool(passed)}


def write_outputs(out_dir: Path, cfg, rows, checks):
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0].keys())
    writer.writerow(header)
    for r in rows:
        writer.writerow([_fmt(r[k]) for k in header])
    (out_dir / "timeseries.csv").write_text(buf.getvalue(), encoding="utf-8", newline="")
    doc = {"passed": all(c["passed"] for c in checks.values()), "seed": cfg["seed"], "checks": checks}
    (out_dir / "checks.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out_dir / "config.resolved.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")


def run_scenario(raw_config: dict, out_dir, checks="all", quiet: bool = True):
    """Validate, simulate, check and write outputs. Returns ``(rows, checks)``."""
    cfg = resolve_config(validate_config(raw_config))
    if checks == "all":
        enabled = list(cfg["checks"])
    elif checks == "none":
        enabled = []
    else:
        enabled = [c.strip() for c in checks.split(",") if c.strip()]
        unknown = [c for c in enabled if c not in CHECKS]
        if unknown:
            raise ConfigError([("--checks", f"unknown check {c!r}") for c in unknown])
    sc = build_scenario(cfg)
    rows, marginals = simulate(sc)
    results = run_checks(sc, rows, marginals, enabled)
    write_outputs(Path(out_dir), cfg, rows, results)
    if not quiet:
        for name, res in results.items():
            status = "pass" if res["passed"] else "FAIL"
            print(f"{name:14s} {status}  value={res['value']:.3e}  threshold={res['threshold']:.0e}")
    return rows, results


def list_presets() -> list[dict]:
    return [{"name": p.name, "expression": p.expression, "period": p.period, "description": p.description}
            for p in PRESETS.values()]


def emit_schema() -> dict:
    return copy.deepcopy(SCHEMA)


def bundled_scenario(name: str) -> dict:
    """Load one of the scenarios shipped with the package."""
    text = resources.files("hybrid_koopman").joinpath("scenarios", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def _error(code, message, errors=None):
    doc = {"error": code, "message": message}
    if errors:
        doc["errors"] = [{"path": p, "message": m} for p, m in errors]
    print(json.dumps(doc, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hybrid-koopman", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--checks", default="all", help="all, none or a comma-separated list")
    run.add_argument("--quiet", action="store_true")
    sub.add_parser("presets", help="list classical flow presets")
    sub.add_parser("schema", help="print the scenario JSON schema")
    args = parser.parse_args(argv)

    if args.command == "presets":
        print(json.dumps(list_presets(), indent=2, sort_keys=True))
        return EXIT_OK
    if args.command == "schema":
        print(json.dumps(emit_schema(), indent=2, sort_keys=True))
        return EXIT_OK

    try:
        raw = json.loads(args.config.read_text(encoding="utf-8"))
    except OSError as exc:
        _error("io", str(exc))
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        _error("invalid_json", f"{exc.msg} at line {exc.lineno}, column {exc.colno}")
        return EXIT_CONFIG
    try:
        _, results = run_scenario(raw, args.out, args.checks, args.quiet)
    except ConfigError as exc:
        _error(exc.code, "invalid configuration", exc.errors)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        _error(exc.code, str(exc))
        return EXIT_CONFIG
    except HybridKoopmanError as exc:
        _error(exc.code, str(exc))
        return EXIT_RUNTIME
    return EXIT_OK if all(r["passed"] for r in results.values()) else EXIT_CHECK_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
