"""Configuration-driven command line interface.

Every subcommand reads an INI file (``--config``), applies ``--set
section.key=value`` overrides and writes plot-ready CSV or JSON files to
``--out``.  Each file starts with a metadata block carrying the tool
version, the SHA-256 of the effective configuration and the grid
parameters.  Exit status: 0 on success, 2 when a checked assertion fails
(the failures are printed as JSON), 1 on any error.

``--config bundled:NAME`` loads ``NAME.ini`` shipped with the package.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import sys
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import click
import numpy as np

from . import __version__
from .errors import ConfigError, DispersiveLabError, EmptyReport, IoError
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    gaussian_data,
    run_experiment,
    write_fit_csv,
)
from .oscillatory import (
    PhaseSpec,
    WeightKind,
    fresnel_kernel,
    kernel_K,
    write_kernel_csv,
)
from .propagator import (
    TimeWindow,
    TrajectorySpec,
    energy,
    propagate_halfde,
    propagate_linww,
    restricted_l2_norm,
    sample_window,
    write_restricted_norm_csv,
    write_trajectory_csv,
)
from .sharpness import (
    JacobianSpec,
    LowFreqDatum,
    SharpDatum,
    jacobian_min,
    keysharp_both_sides,
    lowfreq_lower_bound_check,
    lq_profile,
    polynomial_bump,
    write_jacobian_csv,
    write_sharpness_json,
)
from .spectral import FrequencyGrid, SpectralField, write_snapshot

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2
BUNDLED = "bundled:"


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

class Settings:
    """Parsed configuration with typed, line-aware accessors."""

    def __init__(self, parser: configparser.ConfigParser, source: str, text: str):
        self.parser = parser
        self.source = source
        self._lines = text.splitlines()

    @classmethod
    def load(cls, path: str, overrides: Sequence[str] = ()) -> "Settings":
        if path.startswith(BUNDLED):
            name = path[len(BUNDLED):]
            try:
                text = resources.files("dispersive_lab").joinpath("configs", f"{name}.ini").read_text()
            except (FileNotFoundError, OSError) as exc:
                raise ConfigError(f"no bundled config named {name!r}") from exc
        else:
            if not os.path.isfile(path):
                raise ConfigError(f"config file not found: {path}")
            try:
                with open(path) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read {path}: {exc}") from exc
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for item in overrides:
            key, sep, value = item.partition("=")
            section, dot, option = key.strip().rpartition(".")
            if not sep or not dot or not section or not option:
                raise ConfigError(f"override {item!r} is not of the form section.key=value")
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, option, value.strip())
        return cls(parser, path, text)

    def _line(self, section: str, key: str) -> str:
        current = None
        for no, line in enumerate(self._lines, 1):
            s = line.strip()
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
            elif current == section and s.partition("=")[0].strip() == key:
                return f"line {no}: "
        return ""

    def _fail(self, section: str, key: str, what: str, raw) -> ConfigError:
        return ConfigError(f"{self.source}: {self._line(section, key)}[{section}] {key}: {what}, got {raw!r}")

    def has(self, section: str) -> bool:
        return self.parser.has_section(section)

    def raw(self, section: str, key: str, default=None) -> Optional[str]:
        if not self.parser.has_section(section):
            if default is None:
                raise ConfigError(f"{self.source}: missing section [{section}]")
            return None
        if not self.parser.has_option(section, key):
            if default is None:
                raise ConfigError(f"{self.source}: [{section}] missing key {key!r}")
            return None
        return self.parser.get(section, key)

    def text(self, section: str, key: str, default: Optional[str] = None) -> str:
        v = self.raw(section, key, default)
        return default if v is None else v

    def number(self, section: str, key: str, default: Optional[float] = None) -> float:
        v = self.raw(section, key, default)
        if v is None:
            return float(default)
        try:
            return _parse_number(v)
        except ValueError:
            raise self._fail(section, key, "expected a number", v) from None

    def integer(self, section: str, key: str, default: Optional[int] = None) -> int:
        x = self.number(section, key, default)
        if x != int(x):
            raise self._fail(section, key, "expected an integer", self.raw(section, key, default))
        return int(x)

    def numbers(self, section: str, key: str, default: Optional[Sequence[float]] = None) -> Tuple[float, ...]:
        v = self.raw(section, key, default)
        if v is None:
            return tuple(default)
        try:
            return _parse_list(v)
        except ValueError:
            raise self._fail(section, key, "expected a list of numbers or geom:lo:hi:n", v) from None

    def canonical(self) -> Dict[str, Dict[str, str]]:
        return {s: dict(sorted(self.parser.items(s))) for s in sorted(self.parser.sections())}

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _parse_number(s: str) -> float:
    s = s.strip()
    if s.lower() in ("inf", "+inf", "-inf", "nan") or not s:
        raise ValueError(s)
    if "^" in s:
        base, _, exp = s.partition("^")
        return float(base) ** float(exp)
    return float(s)


def _parse_list(s: str) -> Tuple[float, ...]:
    s = s.strip()
    if s.startswith("geom:"):
        parts = s.split(":")[1:]
        if len(parts) != 3:
            raise ValueError(s)
        lo, hi, n = _parse_number(parts[0]), _parse_number(parts[1]), int(parts[2])
        if not (lo > 0 and hi > 0 and n >= 2):
            raise ValueError(s)
        return tuple(float(v) for v in np.geomspace(lo, hi, n))
    vals = tuple(_parse_number(p) for p in s.split(",") if p.strip())
    if not vals:
        raise ValueError(s)
    return vals


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

class Run:
    """Shared state of one invocation: settings, output directory, failures."""

    def __init__(self, command: str, settings: Settings, out: str, threads: int, scale: float):
        self.command = command
        self.settings = settings
        self.out = out
        self.threads = threads
        self.scale = scale
        self.failures: List[dict] = []
        self.artifacts: List[str] = []
        try:
            os.makedirs(out, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create output directory {out}: {exc}") from exc
        if not os.access(out, os.W_OK):
            raise IoError(f"output directory {out} is not writable")

    def header(self, grid: Optional[str] = None) -> List[str]:
        lines = [f"tool=dispersive-lab {__version__}", f"config_sha256={self.settings.digest()}",
                 f"command={self.command}"]
        if grid:
            lines.append(f"grid: {grid}")
        return lines

    def meta(self, grid: Optional[str] = None) -> dict:
        doc = {"tool": f"dispersive-lab {__version__}", "config_sha256": self.settings.digest(),
               "command": self.command}
        if grid:
            doc["grid"] = grid
        return doc

    def path(self, name: str) -> str:
        self.artifacts.append(name)
        return os.path.join(self.out, name)

    def check(self, ok: bool, label: str, /, **detail) -> None:
        if not ok:
            self.failures.append({"check": label, **{k: _plain(v) for k, v in detail.items()}})

    def finish(self) -> int:
        if self.failures:
            click.echo(json.dumps({"failures": self.failures}, sort_keys=True))
            return EXIT_FAILED
        return EXIT_OK


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def _write_json(path: str, doc: dict) -> None:
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _write_rows(path: str, header: Sequence[str], columns: Sequence[str], rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def emit_report(results: Sequence[ExperimentResult], out: str, config_echo: dict, meta: dict,
                tolerance_scale: float = 1.0) -> List[str]:
    """Write one CSV per experiment and a ``report.json`` index.

    Artifact paths in the index are relative to ``out`` so identical inputs
    give byte-identical files wherever they are written.

    Raises
    ------
    EmptyReport
        If ``results`` is empty.
    """
    if not results:
        raise EmptyReport("no experiment results to report")
    header = [f"{k}={v}" for k, v in sorted(meta.items())]
    artifacts = []
    for r in results:
        name = f"{r.name}.csv"
        x_name = "y" if r.config.kind == "growth" else "t"
        write_fit_csv(os.path.join(out, name), r.fit, x_name, "value", header + [f"experiment={r.name}"])
        artifacts.append(name)
    doc = {
        "config": config_echo,
        "meta": meta,
        "fits": [r.summary(tolerance_scale) for r in results],
        "artifacts": artifacts,
    }
    _write_json(os.path.join(out, "report.json"), doc)
    return artifacts + ["report.json"]


# --------------------------------------------------------------------------
# pipelines
# --------------------------------------------------------------------------

def _grid(cfg: Settings, section: str) -> FrequencyGrid:
    return FrequencyGrid(cfg.integer(section, "n", 4096), cfg.number(section, "xi_max", 40.0))


def _grid_text(g: FrequencyGrid) -> str:
    return f"n={g.n} xi_max={g.xi_max!r} spacing={g.spacing!r}"


def _propagate(run: Run) -> None:
    cfg, sec = run.settings, "propagate"
    grid = _grid(cfg, sec)
    a = cfg.number(sec, "a", 0.5)
    times = cfg.numbers(sec, "times", (1.0, 10.0, 100.0))
    u0 = gaussian_data(grid)
    u1 = SpectralField.from_function(grid, lambda z: 1j * z * np.sqrt(np.pi) * np.exp(-z * z / 4))
    n0 = u0.l2_norm()
    e0 = energy(propagate_linww(u0, u1, 0.0))
    rows = []
    for t in times:
        ut = propagate_halfde(u0, a, t)
        drift = abs(ut.l2_norm() / n0 - 1)
        edrift = abs(energy(propagate_linww(u0, u1, t)) / e0 - 1)
        rows.append((t, drift, edrift))
        run.check(drift <= 1e-12 * run.scale, "unitarity", t=t, drift=drift)
        run.check(edrift <= 1e-10 * run.scale, "energy", t=t, drift=edrift)
        write_snapshot(ut, run.path(f"snapshot_t{t:g}.csv"), run.header(_grid_text(grid)) + [f"a={a!r} t={t!r}"])
    _write_rows(run.path("propagate.csv"), run.header(_grid_text(grid)), ["t", "l2_drift", "energy_drift"], rows)


def _trajectory(run: Run) -> None:
    cfg, sec = run.settings, "trajectory"
    grid = _grid(cfg, sec)
    a = cfg.number(sec, "a", 0.5)
    y = cfg.number(sec, "y", 1.0)
    curve = cfg.text(sec, "curve", "inv_a")
    method = cfg.text(sec, "method", "auto")
    u0 = gaussian_data(grid)
    rows = []
    for T in cfg.numbers(sec, "T_list", (8.0,)):
        win = TimeWindow(T)
        samples = sample_window(u0, a, TrajectorySpec(y, curve), win, method=method)
        vals = samples.values / (2 * np.pi)
        write_trajectory_csv(run.path(f"trajectory_T{T:g}.csv"), samples.times, y, vals,
                             run.header(_grid_text(grid)) + [f"a={a!r} curve={curve}"])
        rows.append((T, y, np.sqrt(restricted_l2_norm(samples, win)) / (2 * np.pi)))
    write_restricted_norm_csv(run.path("restricted_norm.csv"), rows, run.header(_grid_text(grid)))


def _kernel(run: Run) -> None:
    cfg, sec = run.settings, "kernel"
    xs = cfg.numbers(sec, "x_list", tuple(np.geomspace(1e-3, 1e3, 25)))
    rows = []
    for x in xs:
        r, m = fresnel_kernel(x), fresnel_kernel(-x)
        odd = abs(r.k + m.k)
        rows.append((x, r.k.real, r.k.imag, abs(r.k2), odd))
        run.check(odd <= 1e-10 * run.scale * max(1.0, abs(r.k)), "fresnel_odd", x=x, value=odd)
        run.check(abs(r.k2) <= 8.0, "fresnel_remainder", x=x, value=abs(r.k2))
    _write_rows(run.path("fresnel.csv"), run.header(), ["x", "re_k", "im_k", "abs_k2", "odd_defect"], rows)
    if cfg.parser.has_option(sec, "a"):
        a = cfg.number(sec, "a")
        y = cfg.number(sec, "y", 0.5)
        T = cfg.number(sec, "T", 8.0)
        weight = WeightKind(cfg.text(sec, "kind", "homogeneous"), cfg.number(sec, "sigma", 0.25))
        times = np.linspace(T, 2 * T, cfg.integer(sec, "n_times", 5))
        krows = []
        for t in times:
            for s in times:
                if t == s:
                    continue
                res = kernel_K(PhaseSpec(a, y, t, s), weight)
                krows.append((t, s, res))
                run.check(abs(res.near) <= res.near_bound * (1 + 1e-9), "near_bound", t=t, s=s)
        write_kernel_csv(run.path("kernel.csv"), krows, run.header() + [f"a={a!r} y={y!r} sigma={weight.sigma!r}"])


def _sharpness(run: Run) -> None:
    cfg, sec = run.settings, "sharpness"
    a = cfg.number(sec, "a", 2.0)
    ys = cfg.numbers(sec, "y_list", (0.5, 1.0, 2.0))
    center, width = cfg.number(sec, "center", 0.0), cfg.number(sec, "width", 1.0)
    lhs, rhs = [], []
    for y in ys:
        rep = keysharp_both_sides(SharpDatum.gaussian(a, y, center, width), tol=1e-6 * run.scale)
        lhs.append(rep.lhs)
        rhs.append(rep.rhs)
        run.check(rep.holds, "keysharp", a=a, y=y, lhs=rep.lhs, rhs=rep.rhs)
    write_sharpness_json(run.path("sharpness.json"), ys, lhs, rhs,
                         {**run.meta(), "a": a, "center": center, "width": width})


def _jacobian(run: Run) -> None:
    cfg, sec = run.settings, "jacobian"
    orders = cfg.numbers(sec, "a_list", (cfg.number(sec, "a", 2.0),))
    ys = cfg.numbers(sec, "y_list", (0.5, 1.0, 2.0))
    points = cfg.integer(sec, "points", 10_000)
    rows = []
    for a in orders:
        for y in ys:
            m = jacobian_min(JacobianSpec(a, y), points)
            rows.append(m)
            run.check(m.at_predicted, "jacobian_endpoint", a=a, y=y, predicted=m.predicted, argmin=m.argmin,
                      min_value=m.value, predicted_value=m.predicted_value)
    write_jacobian_csv(run.path("jacobian.csv"), rows, run.header() + [f"points={points}"])


def _lowfreq(run: Run) -> None:
    cfg, sec = run.settings, "lowfreq"
    gamma = cfg.number(sec, "gamma", -0.2)
    qs = cfg.numbers(sec, "q_list", (3.0, 4.0))
    rep = lq_profile(LowFreqDatum(gamma), qs)
    threshold = 2 / (1 - 2 * abs(gamma)) if gamma < 0 else 2.0
    rows = []
    for q, s, p, c in zip(rep.q_values, rep.shell_exponents, rep.predicted, rep.convergent):
        expect = q > threshold
        rows.append((q, s, p, bool(c), bool(expect)))
        run.check(bool(c) == expect, "lq_threshold", q=q, shell_exponent=s, threshold=threshold)
    _write_rows(run.path("lq.csv"), run.header() + [f"gamma={gamma!r}"],
                ["q", "shell_exponent", "predicted_exponent", "convergent", "threshold_says_convergent"], rows)
    if cfg.parser.has_option(sec, "M"):
        M, delta, t = cfg.number(sec, "M"), cfg.number(sec, "delta"), cfg.number(sec, "t")
        c_lower = cfg.number(sec, "c_lower", 1.0)
        ys = cfg.numbers(sec, "y_list", tuple(np.geomspace(c_lower / t, delta, 9)))
        phi, phi_hat = polynomial_bump(M, cfg.integer(sec, "k", 4))
        lb = lowfreq_lower_bound_check(phi, M, delta, ys, t, phi_hat=phi_hat, c_lower=c_lower)
        run.check(lb.all_hold, "lower_bound", failing_y=np.asarray(lb.y)[~lb.holds])
        write_sharpness_json(run.path("lower_bound.json"), lb.y, lb.lhs, lb.rhs,
                             {**run.meta(), "M": M, "delta": delta, "t": t})


_EXPERIMENT_KEYS = {
    "kind", "a", "data_class", "T_list", "y_list", "t_list", "mode", "gamma", "grid_n",
    "cutoff_support", "cutoff_plateau", "curve", "target", "tolerance", "comparison", "threads",
}


def experiment_config(cfg: Settings, section: str, threads: Optional[int] = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from an ``[experiment.NAME]`` section."""
    unknown = set(cfg.parser.options(section)) - _EXPERIMENT_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise cfg._fail(section, key, "unknown key", key)
    n = lambda k, d=None: cfg.number(section, k, d)
    lst = lambda k, d: cfg.numbers(section, k, d)
    try:
        return ExperimentConfig(
            name=section.split(".", 1)[1],
            kind=cfg.text(section, "kind"),
            a=n("a"),
            data_class=cfg.text(section, "data_class", "gaussian"),
            T_list=lst("T_list", (8.0,)),
            y_list=lst("y_list", (1.0,)),
            t_list=lst("t_list", ()),
            mode=cfg.text(section, "mode", "fixed_y"),
            gamma=n("gamma", -0.2),
            grid_n=cfg.integer(section, "grid_n", 2**14),
            cutoff_support=tuple(lst("cutoff_support", (1.0, 2.0))),
            cutoff_plateau=tuple(lst("cutoff_plateau", (1.25, 1.75))),
            curve=cfg.text(section, "curve", "inv_a"),
            target=n("target", 0.0),
            tolerance=n("tolerance", 0.05),
            comparison=cfg.text(section, "comparison", "within"),
            threads=threads or cfg.integer(section, "threads", 1),
        )
    except (ValueError, DispersiveLabError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{cfg.source}: [{section}] {exc}") from exc


def _experiment(run: Run) -> None:
    cfg = run.settings
    sections = [s for s in cfg.parser.sections() if s.startswith("experiment.")]
    only = cfg.text("experiment", "run", "") if cfg.has("experiment") else ""
    if only:
        wanted = [f"experiment.{v.strip()}" for v in only.split(",") if v.strip()]
        missing = [w for w in wanted if w not in sections]
        if missing:
            raise ConfigError(f"{cfg.source}: [experiment] run names unknown sections {missing}")
        sections = wanted
    if not sections:
        raise ConfigError(f"{cfg.source}: no [experiment.NAME] sections")
    configs = [experiment_config(cfg, s, run.threads) for s in sections]
    results = [run_experiment(c, run.scale, c.threads) for c in configs]
    for r in results:
        run.check(r.passed, "fit", **r.summary(run.scale))
    echo = cfg.canonical()
    run.artifacts += emit_report(results, run.out, echo, run.meta(), run.scale)


def _report(run: Run) -> None:
    cfg = run.settings
    inputs = [p.strip() for p in cfg.text("report", "inputs").split(",") if p.strip()]
    base = os.path.dirname(os.path.abspath(cfg.source)) if not cfg.source.startswith(BUNDLED) else os.getcwd()
    fits, artifacts, configs = [], [], []
    for rel in inputs:
        path = rel if os.path.isabs(rel) else os.path.join(base, rel)
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{cfg.source}: [report] inputs: cannot read {rel!r}: {exc}") from exc
        fits += doc.get("fits", [])
        folder = os.path.dirname(rel)
        artifacts += [os.path.join(folder, a) if folder else a for a in doc.get("artifacts", [])]
        configs.append({"source": rel, "config_sha256": doc.get("meta", {}).get("config_sha256")})
    if not fits:
        raise EmptyReport("the listed inputs contain no fits")
    for f in fits:
        run.check(bool(f.get("pass")), "fit", **f)
    _write_json(run.path("report.json"), {"config": cfg.canonical(), "meta": run.meta(), "inputs": configs,
                                          "fits": fits, "artifacts": artifacts})


PIPELINES = {
    "propagate": _propagate,
    "trajectory": _trajectory,
    "kernel": _kernel,
    "sharpness": _sharpness,
    "jacobian": _jacobian,
    "lowfreq": _lowfreq,
    "experiment": _experiment,
    "report": _report,
}


def run(command: str, config_path: str, overrides: Sequence[str] = (), out: str = "out",
        threads: int = 1, tolerance_scale: float = 1.0) -> int:
    """Execute one pipeline and return the exit status.

    Errors are reported on stderr and mapped to status 1; failed checks
    print a JSON failure list and give status 2.
    """
    try:
        if command not in PIPELINES:
            raise ConfigError(f"unknown subcommand {command!r}")
        if threads < 1 or not tolerance_scale > 0:
            raise ConfigError("--threads must be >= 1 and --tolerance-scale > 0")
        settings = Settings.load(config_path, overrides)
        state = Run(command, settings, out, threads, tolerance_scale)
        PIPELINES[command](state)
        return state.finish()
    except DispersiveLabError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_ERROR


def _common(fn):
    fn = click.option("--tolerance-scale", default=1.0, type=float, show_default=True,
                      help="Multiply every acceptance tolerance.")(fn)
    fn = click.option("--threads", default=1, type=int, show_default=True, help="Worker threads.")(fn)
    fn = click.option("--out", "out", default="out", show_default=True, help="Output directory.")(fn)
    fn = click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                      help="Override a config entry, KEY = section.key (repeatable).")(fn)
    fn = click.option("--config", "config_path", required=True, metavar="PATH",
                      help="INI file, or bundled:NAME.")(fn)
    return fn


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="dispersive-lab")
def cli():
    """Dispersive decay laboratory."""


def _make(name: str):
    @_common
    def command(config_path, overrides, out, threads, tolerance_scale):
        sys.exit(run(name, config_path, overrides, out, threads, tolerance_scale))

    command.__doc__ = f"Run the {name} pipeline."
    return cli.command(name)(command)


for _name in PIPELINES:
    _make(_name)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point; usage errors exit with status 1, not 2."""
    try:
        cli.main(args=argv, prog_name="dispersive-lab", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_ERROR
    except click.Abort:
        return EXIT_ERROR
    except SystemExit as exc:
        return int(exc.code or 0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
