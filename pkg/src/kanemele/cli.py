"""Command-line front end.

    kanemele <command> [--config PATH] [--out DIR] [--threads N] [--grid N] [--tol X] [--plot]

Commands: bands, phase, cond, jump, scaling, flake, check.  Every run writes
its outputs plus manifest.json into --out.  Data files carry the checksum of
the resolved configuration in a leading comment or key, so two runs with
the same configuration and version produce identical data files.
"""
import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import re
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, GapTooSmall, NonConvergence, PhaseError, RefineGrid
from .geometry import dirac_points
from .model import ModelParams
from .numerics import QuadratureSpec

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_PHASE, EXIT_CONVERGENCE = 0, 1, 2, 3, 4

DEFAULTS = {
    "model": {"t": "1.0", "lambdaSO": "0.3", "w": "0.0", "lambdaR": "0.0", "r": "0.0", "mu": "0.0"},
    "quadrature": {"bz_grid": "96", "k0_order": "64", "k0_tol": "1e-9", "radius": "0.0", "subgrid": "8"},
    "sweep": {
        "pathPoints": "301",
        "w_min": "-0.6",
        "w_max": "0.6",
        "w_steps": "25",
        "lambdaR_min": "0.0",
        "lambdaR_max": "0.15",
        "lambdaR_steps": "4",
        "chern_grid": "48",
        "routes": "kubo,matsubara",
        "m_ladder": "",
        "lambdaR_values": "0.02,0.04,0.08,0.16",
        "m": "0.3",
        "L": "16",
    },
    "output": {"plot": "false"},
}

INT_KEYS = {"bz_grid", "k0_order", "subgrid", "pathPoints", "w_steps", "lambdaR_steps", "chern_grid", "L"}
FLOAT_LIST_KEYS = {"m_ladder", "lambdaR_values"}
STRING_KEYS = {"routes", "plot"}


@dataclass
class RunManifest:
    command: str
    params: dict
    sweep: dict
    quadrature: dict
    outputs: list = field(default_factory=list)
    wallTime: float = 0.0
    version: str = __version__
    checksum: str = ""
    threads: int = 0


# configuration


def _key_line(text, section, key):
    sec = None
    for n, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            sec = s[1:-1].strip()
        elif sec == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.I):
            return n
    return None


def _convert(section, key, raw, text):
    try:
        if key in STRING_KEYS:
            return raw.strip()
        if key in FLOAT_LIST_KEYS:
            return [float(x) for x in raw.split(",") if x.strip()]
        if key in INT_KEYS:
            return int(raw)
        if section == "model" and key == "mu" and raw.strip().lower() == "critical":
            return "critical"
        return float(raw)
    except ValueError:
        line = _key_line(text, section, key)
        where = f"line {line}, " if line else ""
        raise ConfigError(f"{where}[{section}] {key}: cannot parse {raw!r}") from None


def load_config(path=None, text=None):
    """Resolve a config file against DEFAULTS into typed sections."""
    if path is not None:
        text = Path(path).read_text()
    text = text or ""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    out = {}
    for section, defaults in DEFAULTS.items():
        merged = dict(defaults)
        if cp.has_section(section):
            for key, raw in cp.items(section):
                if key not in defaults:
                    line = _key_line(text, section, key)
                    where = f"line {line}, " if line else ""
                    raise ConfigError(f"{where}[{section}] {key}: unknown field")
                merged[key] = raw
        out[section] = {k: _convert(section, k, v, text) for k, v in merged.items()}
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
    return out


def make_params(model, mu=None):
    from .spectrum import critical_energy

    kw = dict(model)
    if mu is not None:
        kw["mu"] = mu
    if kw["mu"] == "critical":
        kw["mu"] = critical_energy(kw["lambdaSO"], kw["lambdaR"])
    try:
        return ModelParams(**kw)
    except ValueError as exc:
        raise ConfigError(f"[model] {exc}") from None


def make_spec(quad):
    try:
        return QuadratureSpec(**quad)
    except ValueError as exc:
        raise ConfigError(f"[quadrature] {exc}") from None


def config_checksum(cfg, command):
    blob = json.dumps({"command": command, "config": cfg, "version": __version__}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


# output helpers


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def _floats_marked(obj):
    # floats become marked strings so the dump can print them with 17 digits
    if isinstance(obj, dict):
        return {str(k): _floats_marked(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_floats_marked(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _floats_marked(obj.tolist())
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return bool(obj) if obj is not None else None
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return None
        return "\x00F%.17g" % obj
    if isinstance(obj, complex):
        return _floats_marked([obj.real, obj.imag])
    return obj


def dumps_json(obj):
    s = json.dumps(_floats_marked(obj), indent=2, sort_keys=True)
    return re.sub(r'"\\u0000F([^"]*)"', r"\1", s) + "\n"


class Writer:
    def __init__(self, out, checksum, command, plot=False):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.checksum = checksum
        self.command = command
        self.plot = plot
        self.files = []

    def csv(self, name, header, rows):
        buf = io.StringIO()
        buf.write(f"# kanemele {__version__} command={self.command} checksum={self.checksum}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
        path = self.out / name
        path.write_text(buf.getvalue())
        self.files.append(name)
        if self.plot:
            self._plot_script(name, header)
        return path

    def json(self, name, obj):
        obj = dict(obj)
        obj["manifestChecksum"] = self.checksum
        path = self.out / name
        path.write_text(dumps_json(obj))
        self.files.append(name)
        return path

    def _plot_script(self, name, header):
        numeric = [h for h in header[1:] if h not in ("classification",)]
        script = (
            "import numpy as np\n"
            "import matplotlib\n"
            "matplotlib.use('Agg')\n"
            "import matplotlib.pyplot as plt\n\n"
            f"data = np.genfromtxt({name!r}, delimiter=',', names=True, comments='#')\n"
            f"for col in {numeric!r}:\n"
            f"    plt.plot(data[{header[0]!r}], data[col], '.-', label=col)\n"
            f"plt.xlabel({header[0]!r})\n"
            "plt.legend()\n"
            f"plt.savefig({(name + '.png')!r}, dpi=150)\n"
        )
        script_name = name + ".plot.py"
        (self.out / script_name).write_text(script)
        self.files.append(script_name)


# commands


def band_path(points):
    """Gamma -> k_F^+ -> k_F^- -> Gamma with every vertex on a row."""
    if points < 4:
        raise ConfigError("[sweep] pathPoints: need at least 4")
    kp, km = dirac_points()
    verts = [np.zeros(2), kp, km, np.zeros(2)]
    lengths = [np.linalg.norm(verts[i + 1] - verts[i]) for i in range(3)]
    total = sum(lengths)
    counts = [max(1, int(round((points - 1) * l / total))) for l in lengths]
    counts[-1] = points - 1 - sum(counts[:-1])
    ks, params = [], []
    start = 0.0
    for i, n in enumerate(counts):
        for j in range(n):
            f = j / n
            ks.append(verts[i] + f * (verts[i + 1] - verts[i]))
            params.append(start + f * lengths[i])
        start += lengths[i]
    ks.append(verts[-1])
    params.append(total)
    return np.array(params), np.array(ks)


def cmd_bands(cfg, args, writer):
    from .spectrum import bands

    p = make_params(cfg["model"])
    s, k = band_path(cfg["sweep"]["pathPoints"])
    e = bands(p, k)
    rows = [[s[i], *e[i]] for i in range(len(s))]
    writer.csv("bands.csv", ["k_path_param", "E1", "E2", "E3", "E4"], rows)
    return EXIT_OK


def _steps(lo, hi, n):
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


def cmd_phase(cfg, args, writer):
    from .spectrum import classify_phase, critical_curve, critical_energy
    from .topology import spin_chern

    sw = cfg["sweep"]
    spec = make_spec(cfg["quadrature"])
    ws = _steps(sw["w_min"], sw["w_max"], sw["w_steps"])
    lrs = _steps(sw["lambdaR_min"], sw["lambdaR_max"], sw["lambdaR_steps"])
    rows = []
    for lr in lrs:
        for w in ws:
            model = dict(cfg["model"], w=float(w), lambdaR=float(lr))
            p = make_params(model)
            pt = classify_phase(p, grid=spec.bz_grid)
            try:
                c = spin_chern(p, sw["chern_grid"]) if pt.is_insulator else ""
            except (RefineGrid, GapTooSmall):
                c = ""
            rows.append([w, lr, pt.classification, pt.gap, c])
    writer.csv("phase.csv", ["w", "lambdaR", "classification", "minGap", "spinChernOfPsc"], rows)
    lso = cfg["model"]["lambdaSO"]
    dense = np.linspace(min(lrs.min(), 0.0), max(lrs.max(), 2 * abs(lso)), 201)
    curves = [[lr, *critical_curve(lso, lr), critical_energy(lso, lr)] for lr in dense]
    writer.csv("phase_curves.csv", ["lambdaR", "wc_plus", "wc_minus", "mu_c"], curves)
    return EXIT_OK


def cmd_cond(cfg, args, writer):
    from .kubo import spin_conductivity_kubo
    from .matsubara import spin_conductivity_matsubara

    from .spectrum import classify_phase

    p = make_params(cfg["model"])
    spec = make_spec(cfg["quadrature"])
    routes = [r.strip() for r in cfg["sweep"]["routes"].split(",") if r.strip()]
    phase = classify_phase(p, grid=min(spec.bz_grid, 96))
    if not phase.is_insulator:
        raise PhaseError(f"{phase.classification} at these parameters, minimum gap {phase.gap:.3e}")
    results = {}
    for route in routes:
        if route == "kubo":
            results[route] = spin_conductivity_kubo(p, spec, tol=args.tol)
        elif route == "matsubara":
            results[route] = spin_conductivity_matsubara(p, spec)
        elif route == "flake":
            from .realspace import build_flake, flake_spin_conductivity

            flake, H = build_flake(p, cfg["sweep"]["L"])
            results[route] = flake_spin_conductivity(flake, H, p.mu, p)
        else:
            raise ConfigError(f"[sweep] routes: unknown route {route!r}")
    deltas = {}
    for i, a in enumerate(routes):
        for b in routes[i + 1:]:
            deltas[f"{a}-{b}"] = float(results[a].sigma[0, 1] - results[b].sigma[0, 1])
    out = {
        "params": p.to_dict(),
        "minGap": phase.gap,
        "results": {r: dict(res.to_dict(), antisymmetric=res.antisymmetry_ok()) for r, res in results.items()},
        "deltas": deltas,
    }
    writer.json("cond.json", out)
    rows = [[r, *res.sigma.ravel(), res.errorEstimate] for r, res in results.items()]
    writer.csv("cond.csv", ["route", "sigma11", "sigma12", "sigma21", "sigma22", "errorEstimate"], rows)
    return EXIT_OK


def cmd_jump(cfg, args, writer):
    from .criticality import jump_closed_form, jump_numeric

    p = make_params(cfg["model"])
    spec = make_spec(cfg["quadrature"])
    ladder = cfg["sweep"]["m_ladder"] or None
    delta, table = jump_numeric(p, ladder, spec)
    closed = jump_closed_form(p.t, p.lambdaSO, p.lambdaR, p.r)
    out = {
        "params": p.to_dict(),
        "delta": delta,
        "closedForm": closed,
        "relativeError": abs(delta - closed) / abs(closed),
        "universal": -1.0 / (2 * np.pi),
        "perM": table,
    }
    writer.json("jump.json", out)
    rows = [[d["m"], d["sigma_plus"], d["sigma_minus"], d["perM"], d["errorEstimate"]] for d in table]
    writer.csv("jump.csv", ["m", "sigma_plus", "sigma_minus", "perM", "errorEstimate"], rows)
    return EXIT_OK


def cmd_scaling(cfg, args, writer):
    from .topology import deviation_scaling

    p = make_params(cfg["model"])
    spec = make_spec(cfg["quadrature"])
    sw = cfg["sweep"]
    slope, intercept, pts = deviation_scaling(p, sw["lambdaR_values"], spec, m=sw["m"], chern_grid=sw["chern_grid"])
    writer.json("scaling.json", {"params": p.to_dict(), "m": sw["m"], "slope": slope, "intercept": intercept, "points": pts})
    rows = [[d["lambdaR"], d["dev"], d["tripleNorm"], d["sigma12"], d["spinChern"]] for d in pts]
    writer.csv("scaling.csv", ["lambdaR", "dev", "tripleNorm", "sigma12", "spinChern"], rows)
    return EXIT_OK


def cmd_flake(cfg, args, writer):
    from .realspace import FlakeSpectrum, build_flake, central_cells, flake_spin_conductivity, spin_torque_expectation

    p = make_params(cfg["model"])
    flake, H = build_flake(p, cfg["sweep"]["L"])
    res = flake_spin_conductivity(flake, H, p.mu, p)
    sp = FlakeSpectrum(H, p.mu)
    torque = [[spin_torque_expectation(flake, H, p.mu, j, c, spectrum=sp) for c in central_cells(flake)] for j in range(2)]
    writer.json("flake.json", dict(res.to_dict(), centreTorque=torque))
    return EXIT_OK


def cmd_check(cfg, args, writer):
    from .checks import GENERIC, run_all

    # the suite runs at a generic Rashba point unless a config supplies one
    results = run_all(make_params(cfg["model"]) if args.config else GENERIC)
    for r in results:
        print(r.line())
    writer.json("check.json", {"checks": [{"name": r.name, "value": r.value, "tol": r.tol, "passed": r.passed} for r in results]})
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


COMMANDS = {
    "bands": cmd_bands,
    "phase": cmd_phase,
    "cond": cmd_cond,
    "jump": cmd_jump,
    "scaling": cmd_scaling,
    "flake": cmd_flake,
    "check": cmd_check,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [model], [quadrature], [sweep], [output]")
    common.add_argument("--out", default="kanemele_out", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="cap on BLAS worker threads")
    common.add_argument("--grid", type=int, default=None, help="override [quadrature] bz_grid")
    common.add_argument("--tol", type=float, default=None, help="target error for the Kubo route (grid doubling)")
    common.add_argument("--plot", action="store_true", help="write a matplotlib script next to each CSV")
    parser = argparse.ArgumentParser(prog="kanemele", description="Extended Kane-Mele spin transport")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _error_exit(exc, code, out):
    payload = {"error": type(exc).__name__, "message": str(exc), "exitCode": code}
    print(json.dumps(payload), file=sys.stderr)
    try:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "error.json").write_text(dumps_json(payload))
    except OSError:
        pass
    return code


def _limit_threads(n):
    if n is None:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None):
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.grid is not None:
            cfg["quadrature"]["bz_grid"] = args.grid
        if args.tol is not None:
            cfg["quadrature"]["tol"] = args.tol
        checksum = config_checksum(cfg, args.command)
        cfg["quadrature"].pop("tol", None)
        plot = args.plot or cfg["output"]["plot"].lower() in ("1", "true", "yes")
        writer = Writer(args.out, checksum, args.command, plot)
        limiter = _limit_threads(args.threads)
        code = COMMANDS[args.command](cfg, args, writer)
        if limiter is not None:
            limiter.unregister()
    except ConfigError as exc:
        return _error_exit(exc, EXIT_CONFIG, args.out)
    except (PhaseError, GapTooSmall, RefineGrid) as exc:
        return _error_exit(exc, EXIT_PHASE, args.out)
    except NonConvergence as exc:
        return _error_exit(exc, EXIT_CONVERGENCE, args.out)
    manifest = RunManifest(
        command=args.command,
        params=cfg["model"],
        sweep=cfg["sweep"],
        quadrature=cfg["quadrature"],
        outputs=writer.files,
        wallTime=time.perf_counter() - t0,
        checksum=checksum,
        threads=args.threads or 0,
    )
    (Path(args.out) / "manifest.json").write_text(dumps_json(asdict(manifest)))
    return code


if __name__ == "__main__":
    sys.exit(main())
