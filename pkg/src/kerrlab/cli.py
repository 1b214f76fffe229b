"""Command-line front end.

A run is described by a TOML file with the sections ``run``, ``params``,
``circuit``, ``dissipation``, ``sweep`` and ``task``; every key can be
overridden on the command line as ``--section.key value``.  Example::

    [run]
    task = "spectrum"
    out = "spectrum.csv"

    [params]
    kerr = 1.0
    delta = 0.0

    [sweep]
    parameter = "params.eps2"
    start = 0.0
    stop = 13.0
    count = 200

Exit status is 0 on success, 2 on configuration errors and 3 when a
numerical routine raises a :class:`kerrlab.errors.KerrLabError`.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import KerrLabError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["ConfigError", "RunConfig", "TASKS", "load_config", "main", "run"]


class ConfigError(Exception):
    """Invalid configuration; maps to exit status 2."""


# -- schema ---------------------------------------------------------------------

# unit kinds: "rate" scales with K, "time" with 1/K, None is dimensionless
_SCHEMA = {
    "run": {"task": None, "seed": None, "out": None, "format": None, "units": None,
            "dim": None, "jobs": None},
    "params": {"delta": "rate", "kerr": "rate", "eps2": "rate", "lam": "rate",
               "eps4": "rate", "eps2_prime": "rate"},
    "circuit": {"omega_o": "rate", "g3": "rate", "g4": "rate", "g5": "rate", "g6": "rate",
                "Omega_d": "rate", "omega_d": "rate", "omega_a": "rate"},
    "dissipation": {"kappa1": "rate", "n_th": None, "kappa_phi": "rate",
                    "sigma_delta": "rate", "n_samples": None},
    "sweep": {"parameter": None, "start": None, "stop": None, "count": None, "spacing": None},
    "task": {"n_pairs": None, "n_levels": None, "gamma": None, "t_max": "time",
             "n_points": None, "eps_x": "rate", "alpha": None, "parity": None,
             "state": None, "x_max": None, "grid": None, "spread": None,
             "n_particles": None, "snr": None, "T_X": "time", "tau": "time",
             "n_shots": None, "n_repeats": None, "order": None, "steps": None,
             "points_per_unit": None, "include_hamiltonian": None,
             "center_x": None, "center_p": None},
}

_DEFAULTS = {
    "run": {"task": None, "seed": None, "out": "-", "format": "csv", "units": "kerr",
            "dim": "auto", "jobs": 0},
    "params": {"delta": 0.0, "kerr": 1.0, "eps2": 0.0},
    "circuit": {},
    "dissipation": {},
    "sweep": {},
    "task": {},
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration (nested dict) plus the resolved seed."""

    data: dict
    seed: int

    @property
    def task(self) -> str:
        return self.data["run"]["task"]

    def section(self, name: str) -> dict:
        return dict(self.data.get(name, {}))


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _merge(base: dict, extra: dict, origin: str) -> None:
    for sec, vals in extra.items():
        if sec not in _SCHEMA:
            raise ConfigError(f"{origin}: unknown section [{sec}]")
        if not isinstance(vals, dict):
            raise ConfigError(f"{origin}: [{sec}] must be a table")
        for key, v in vals.items():
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"{origin}: unknown key {sec}.{key}")
            base[sec][key] = v


def load_config(path: str | None, overrides: dict[str, object] | None = None) -> RunConfig:
    """Read a TOML file, apply ``section.key`` overrides and validate.

    Raises:
        ConfigError: on syntax errors (with line and column), unknown keys
            or inconsistent values.
    """
    data = copy.deepcopy(_DEFAULTS)
    if path:
        try:
            with open(path, "rb") as fh:
                _merge(data, tomllib.load(fh), path)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    for dotted, v in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override --{dotted} must look like --section.key")
        _merge(data, {sec: {key: v}}, "command line")

    run_sec = data["run"]
    if run_sec["task"] not in TASKS:
        raise ConfigError(f"run.task must be one of {sorted(TASKS)}, got {run_sec['task']!r}")
    if run_sec["format"] not in ("csv", "json"):
        raise ConfigError("run.format must be 'csv' or 'json'")
    if run_sec["units"] not in ("kerr", "si"):
        raise ConfigError("run.units must be 'kerr' or 'si'")
    if run_sec["dim"] != "auto" and not (isinstance(run_sec["dim"], int) and run_sec["dim"] >= 2):
        raise ConfigError("run.dim must be 'auto' or an integer >= 2")
    sw = data["sweep"]
    if sw:
        missing = {"parameter", "start"} - set(sw)
        if missing:
            raise ConfigError(f"sweep needs {sorted(missing)}")
        sec, _, key = str(sw["parameter"]).partition(".")
        if sec not in ("params", "circuit", "dissipation", "task") or key not in _SCHEMA[sec]:
            raise ConfigError(f"sweep.parameter {sw['parameter']!r} is not a sweepable key")
        sw.setdefault("stop", sw["start"])
        sw.setdefault("count", 1)
        sw.setdefault("spacing", "linear")
        if sw["spacing"] not in ("linear", "log"):
            raise ConfigError("sweep.spacing must be 'linear' or 'log'")
        if not isinstance(sw["count"], int) or sw["count"] < 1:
            raise ConfigError("sweep.count must be a positive integer")
    seed = run_sec["seed"]
    if seed is None:
        env = os.environ.get("KERRLAB_SEED")
        try:
            seed = int(env) if env is not None else 0
        except ValueError as exc:
            raise ConfigError(f"KERRLAB_SEED={env!r} is not an integer") from exc
    run_sec["seed"] = seed
    return RunConfig(data, int(seed))


def sweep_values(sw: dict) -> list[float]:
    if not sw:
        return [None]
    n = sw["count"]
    if n == 1:
        return [float(sw["start"])]
    if sw["spacing"] == "log":
        return list(np.geomspace(sw["start"], sw["stop"], n))
    return list(np.linspace(sw["start"], sw["stop"], n))


# -- unit conversion -------------------------------------------------------------

def _kerr_scale(data: dict) -> float:
    return float(data["params"].get("kerr", 1.0))


def _to_internal(data: dict) -> dict:
    """SI inputs (rad/s, s) to Kerr units."""
    out = copy.deepcopy(data)
    if data["run"]["units"] != "si":
        return out
    K = _kerr_scale(data)
    for sec, keys in _SCHEMA.items():
        for key, kind in keys.items():
            v = out[sec].get(key)
            if v is None or kind is None or isinstance(v, str):
                continue
            out[sec][key] = v / K if kind == "rate" else v * K
    return out


# -- tasks -----------------------------------------------------------------------

def _sk(d: dict):
    from .spectrum import SKParams
    p = d["params"]
    return SKParams(delta=float(p.get("delta", 0.0)), kerr=float(p.get("kerr", 1.0)),
                    eps2=float(p.get("eps2", 0.0)), lam=float(p.get("lam", 0.0)),
                    eps4=p.get("eps4", 0.0), eps2_prime=p.get("eps2_prime", 0.0))


def _diss(d: dict, seed: int):
    from .lindblad import DissipationParams
    q = dict(d["dissipation"])
    return DissipationParams(seed=seed, **q)


def _space(d: dict, params=None):
    from .fock import HilbertSpace
    from .spectrum import default_space
    dim = d["run"]["dim"]
    if dim == "auto":
        return default_space(params) if params is not None else None
    return HilbertSpace(int(dim))


def _t(d: dict, key: str, default=None):
    return d["task"].get(key, default)


def _task_spectrum(d, seed):
    from .spectrum import diagonalize
    p = _sk(d)
    n = int(_t(d, "n_pairs", 6))
    res = diagonalize(p, _space(d, p), n_levels=n)
    K = p.kerr
    rows = []
    for k in range(n):
        for par in (1, -1):
            rows.append((p.eps2 / K, k, par, res.energies[par][k] / K, res.delta_n[k] / K,
                         res.space.dim))
    return rows


def _task_bohr(d, seed):
    from .spectrum import bohr_count, lemniscate_area
    p = _sk(d)
    return [(p.eps2, p.delta, bohr_count(p), lemniscate_area(p))]


def _task_lifetime(d, seed):
    from .lindblad import coherent_lifetime
    p = _sk(d)
    tr = coherent_lifetime(p, _diss(d, seed), _space(d, p), t_max=_t(d, "t_max"),
                           n_points=int(_t(d, "n_points", 60)))
    return [(p.eps2 / p.kerr, tr.T, tr.fit.residual, tr.meta["dim"])]


def _task_leff(d, seed):
    from .lindblad import choose_gamma, eff_lindbladian
    p = _sk(d)
    diss = _diss(d, seed)
    sp = _space(d, p)
    g = _t(d, "gamma")
    g = choose_gamma(p, diss.kappa1, sp) if g is None else int(g)
    res = eff_lindbladian(p, diss, g, sp, bool(_t(d, "include_hamiltonian", True)))
    return [(p.eps2 / p.kerr, g, res.T_X_gamma)]


def _task_lindblad_spectrum(d, seed):
    from .lindblad import lindbladian_spectrum_full
    p = _sk(d)
    res = lindbladian_spectrum_full(p, _diss(d, seed), _space(d, p))
    rows = []
    for par, vals in (("even", res.even), ("odd", res.odd)):
        for k, lam in enumerate(sorted(vals, key=lambda z: -z.real)):
            rows.append((p.eps2 / p.kerr, par, k, float(lam.real), float(lam.imag)))
    return rows


def _task_wigner(d, seed):
    from .fock import HilbertSpace, auto_dim, cat, coherent, wigner_of
    alpha = complex(_t(d, "alpha", 2.0))
    dim = d["run"]["dim"]
    sp = HilbertSpace(auto_dim(abs(alpha) ** 2) if dim == "auto" else int(dim))
    kind = _t(d, "state", "cat")
    if kind == "cat":
        st = cat(sp, alpha, _t(d, "parity", "even"))
    elif kind == "coherent":
        st = coherent(sp, alpha)
    else:
        raise ConfigError("task.state must be 'cat' or 'coherent'")
    xm = float(_t(d, "x_max", 6.0))
    g = np.linspace(-xm, xm, int(_t(d, "grid", 101)))
    W = wigner_of(st, g, g).values
    return [(x, pp, float(W[j, i])) for j, pp in enumerate(g) for i, x in enumerate(g)]


def _task_kerr_evolve(d, seed):
    from .fock import HilbertSpace
    from .protocols import free_kerr_evolve
    p = _sk(d)
    alpha = complex(_t(d, "alpha", math.sqrt(6.0)))
    t = np.linspace(0.0, float(_t(d, "t_max", math.pi / p.kerr)), int(_t(d, "n_points", 101)))
    sp = None if d["run"]["dim"] == "auto" else HilbertSpace(int(d["run"]["dim"]))
    diss = _diss(d, seed) if d["dissipation"] else None
    tr = free_kerr_evolve(alpha, p, t, sp, diss)
    a = tr.observables["a"]
    return [(tk, float(np.real(ak)), float(np.imag(ak)), float(pk))
            for tk, ak, pk in zip(t, a, tr.observables["parity"])]


def _task_cat_rabi(d, seed):
    from .protocols import cat_rabi_trace, rabi_frequency, yz_lifetime_prediction
    p = _sk(d)
    diss = _diss(d, seed)
    eps_x = complex(_t(d, "eps_x", 0.05))
    t = np.linspace(0.0, float(_t(d, "t_max", 100.0)), int(_t(d, "n_points", 400)))
    tr, fit = cat_rabi_trace(p, diss, eps_x, t, _space(d, p))
    a2 = p.well_alpha2
    pred = yz_lifetime_prediction(diss.kappa1, a2) if diss.kappa1 > 0 else math.inf
    return [(p.eps2 / p.kerr, fit.omega, rabi_frequency(eps_x, math.sqrt(a2)), fit.T, pred,
             fit.residual)]


def _task_readout_sim(d, seed):
    from .protocols import ReadoutParams, readout_record_sim
    T_X = float(_t(d, "T_X", math.inf))
    ro = ReadoutParams(1.0, 1.0, 1.0, float(_t(d, "tau", 1.0)))
    r = readout_record_sim(T_X, ro, 1.0, int(_t(d, "n_shots", 10000)),
                           int(_t(d, "n_repeats", 2)), seed=seed, snr=float(_t(d, "snr", 25.0)))
    T = r.decay.T if r.decay is not None else math.nan
    return [(r.snr, r.fidelity, r.fidelity_stderr, r.qndness, r.qndness_stderr, T)]


def _task_liouville(d, seed):
    from .phasespace import liouville_evolve, sample_ensemble
    p = _sk(d)
    ens = sample_ensemble([float(_t(d, "center_x", -2.0)), float(_t(d, "center_p", 0.0))],
                          float(_t(d, "spread", 0.3)), int(_t(d, "n_particles", 2000)), seed)
    t = np.linspace(0.0, float(_t(d, "t_max", 20.0)), int(_t(d, "n_points", 21)))
    out = liouville_evolve(ens, p, t)
    return [(tk, e.anisotropy(), float(np.mean(e.energies(p)))) for tk, e in zip(t, out)]


def _task_metapotential(d, seed):
    from .phasespace import metapotential
    p = _sk(d)
    xm = float(_t(d, "x_max", 6.0))
    g = np.linspace(-xm, xm, int(_t(d, "grid", 101)))
    q = metapotential(p, g, g, "quantum").values
    c = metapotential(p, g, g, "classical").values
    return [(x, pp, float(q[j, i]), float(c[j, i]))
            for j, pp in enumerate(g) for i, x in enumerate(g)]


def _task_effcoeffs(d, seed):
    from .effham import CircuitParams, effective_coefficients
    c = CircuitParams(**d["circuit"])
    rows = []
    for order in range(1, int(_t(d, "order", 4)) + 1):
        e = effective_coefficients(c, order)
        eps2 = e.total_eps2
        rows.append((order, e.total_Delta, e.total_K, eps2.real, eps2.imag, e.lambda4,
                     complex(e.eps4).real, complex(e.eps4).imag))
    return rows


# name -> (function, columns as (name, unit kind))
TASKS = {
    "spectrum": (_task_spectrum, [("eps2_over_K", None), ("pair_index", None), ("parity", None),
                                  ("energy_over_K", None), ("delta_n_over_K", None), ("dim", None)]),
    "bohr": (_task_bohr, [("eps2", "rate"), ("delta", "rate"), ("bohr_count", None),
                          ("lemniscate_area", None)]),
    "kissing": (None, [("pair_index", None), ("eps2_over_K", None)]),
    "lifetime": (_task_lifetime, [("eps2_over_K", None), ("T_X", "time"), ("fit_residual", None),
                                  ("dim", None)]),
    "leff": (_task_leff, [("eps2_over_K", None), ("gamma", None), ("T_X_gamma", "time")]),
    "lindblad-spectrum": (_task_lindblad_spectrum, [("eps2_over_K", None), ("parity", None),
                                                    ("index", None), ("re", "rate"), ("im", "rate")]),
    "wigner": (_task_wigner, [("x", None), ("p", None), ("W", None)]),
    "kerr-evolve": (_task_kerr_evolve, [("t", "time"), ("re_a", None), ("im_a", None),
                                        ("parity", None)]),
    "cat-rabi": (_task_cat_rabi, [("eps2_over_K", None), ("omega_fit", "rate"),
                                  ("omega_formula", "rate"), ("T_YZ", "time"),
                                  ("T_YZ_prediction", "time"), ("fit_residual", None)]),
    "readout-sim": (_task_readout_sim, [("snr", None), ("fidelity", None), ("fidelity_stderr", None),
                                        ("qndness", None), ("qndness_stderr", None),
                                        ("decay_T", "time")]),
    "liouville": (_task_liouville, [("t", "time"), ("anisotropy", None), ("mean_energy", "rate")]),
    "metapotential": (_task_metapotential, [("x", None), ("p", None), ("quantum", "rate"),
                                            ("classical", "rate")]),
    "effcoeffs": (_task_effcoeffs, [("order", None), ("Delta", "rate"), ("K", "rate"),
                                    ("eps2_re", "rate"), ("eps2_im", "rate"), ("lambda", "rate"),
                                    ("eps4_re", "rate"), ("eps4_im", "rate")]),
}


def _point(args):
    name, data, seed = args
    fn = TASKS[name][0]
    return fn(data, seed)


def _set(data: dict, dotted: str, value) -> dict:
    out = copy.deepcopy(data)
    sec, _, key = dotted.partition(".")
    out[sec][key] = value
    return out


def _compute(cfg: RunConfig) -> list[tuple]:
    data = _to_internal(cfg.data)
    name = cfg.task
    sw = cfg.data["sweep"]
    values = sweep_values(sw)
    if sw and cfg.data["run"]["units"] == "si":
        sec, _, key = sw["parameter"].partition(".")
        kind = _SCHEMA[sec][key]
        K = _kerr_scale(cfg.data)
        values = [v / K if kind == "rate" else v * K if kind == "time" else v for v in values]

    if name == "kissing":
        from .spectrum import kissing_points
        if not sw or sw["parameter"] != "params.eps2":
            raise ConfigError("kissing needs a sweep over params.eps2")
        p = _sk(data)
        grid = np.asarray(values) / p.kerr
        kp = kissing_points(grid, p, int(_t(data, "n_pairs", 3)), _space(data, p.replace(eps2=max(values))))
        return [(n, x) for n, x in kp]

    tasks = [(name, _set(data, sw["parameter"], v) if sw else data, cfg.seed) for v in values]
    jobs = int(cfg.data["run"]["jobs"]) or (os.cpu_count() or 1)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            chunks = list(pool.map(_point, tasks))
    else:
        chunks = [_point(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def _to_output_units(cfg: RunConfig, rows: list[tuple]) -> list[tuple]:
    if cfg.data["run"]["units"] != "si":
        return rows
    K = _kerr_scale(cfg.data)
    kinds = [k for _, k in TASKS[cfg.task][1]]
    f = {"rate": K, "time": 1.0 / K, None: 1.0}
    return [tuple(v * f[k] if isinstance(v, (int, float)) and not isinstance(v, bool) and k else v
                  for v, k in zip(r, kinds)) for r in rows]


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _render(cfg: RunConfig, rows: list[tuple]) -> str:
    cols = TASKS[cfg.task][1]
    units = cfg.data["run"]["units"]
    unit_names = {"kerr": {"rate": "K", "time": "1/K"}, "si": {"rate": "rad/s", "time": "s"}}[units]
    meta = {
        "tool": f"kerrlab {__version__}",
        "task": cfg.task,
        "units": units,
        "seed": cfg.seed,
        "dim": cfg.data["run"]["dim"],
        "config": cfg.data,
        "columns": {n: unit_names.get(k, "1") for n, k in cols},
    }
    rows = [tuple(_plain(v) for v in r) for r in rows]
    if cfg.data["run"]["format"] == "json":
        meta["rows"] = [dict(zip([n for n, _ in cols], r)) for r in rows]
        return json.dumps(meta, indent=1, sort_keys=True, default=str) + "\n"
    buf = io.StringIO()
    for k in ("tool", "task", "units", "seed", "dim"):
        buf.write(f"# {k}: {meta[k]}\n")
    buf.write(f"# config: {json.dumps(cfg.data, sort_keys=True, default=str)}\n")
    buf.write("# columns: " + ", ".join(f"{n} [{u}]" for n, u in meta["columns"].items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([n for n, _ in cols])
    w.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
    return buf.getvalue()


def run(cfg: RunConfig) -> str:
    """Execute a resolved configuration and return the rendered output."""
    rows = _to_output_units(cfg, _compute(cfg))
    return _render(cfg, rows)


def _split_overrides(extra: list[str]) -> dict[str, object]:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(f"unrecognised argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            val = extra[i + 1]
            i += 2
        out[key] = _parse_value(val)
    return out


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="kerrlab",
        description="Squeezed Kerr oscillator simulations. Any config key may be "
                    "overridden with --section.key VALUE.")
    ap.add_argument("task", nargs="?", help="task name; overrides run.task")
    ap.add_argument("-c", "--config", help="TOML configuration file")
    ap.add_argument("-o", "--out", help="output path, '-' for stdout")
    ap.add_argument("--format", choices=["csv", "json"])
    ap.add_argument("--seed", type=int)
    ap.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    ap.add_argument("--list-tasks", action="store_true")
    args, extra = ap.parse_known_args(argv)
    if args.list_tasks:
        print("\n".join(sorted(TASKS)))
        return 0
    try:
        ov = _split_overrides(extra)
        for key, val in (("task", args.task), ("out", args.out), ("format", args.format),
                         ("seed", args.seed), ("jobs", args.jobs)):
            if val is not None:
                ov[f"run.{key}"] = val
        cfg = load_config(args.config, ov)
        text = run(cfg)
    except ConfigError as exc:
        print(f"kerrlab: config error: {exc}", file=sys.stderr)
        return 2
    except KerrLabError as exc:
        print(f"kerrlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (TypeError, ValueError) as exc:
        print(f"kerrlab: config error: {exc}", file=sys.stderr)
        return 2
    out = cfg.data["run"]["out"]
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
