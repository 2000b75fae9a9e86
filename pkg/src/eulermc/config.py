"""Sectioned key=value run configuration.

The format is a plain-text document with ``[section]`` headers, one
``key = value`` pair per line, blank lines, and full-line comments starting
with ``#`` or ``;``.  Unknown sections or keys, type mismatches, and
invariant violations are reported with the offending key and line number.
Command-line ``--set section.key=value`` overrides are applied after the
file is read and before validation.

``serialize_config(parse_config(text))`` is stable: it writes every key
explicitly with 17 significant digits, so a round trip reproduces an equal
configuration.
"""

from dataclasses import dataclass, field

from .errors import ConfigError
from .fields import GasParams, KHDataSpec
from .grid import Grid
from .scheme import SchemeParams, validate_params

__all__ = ["RunConfig", "parse_config", "serialize_config", "load_config", "KINDS"]

KINDS = ("solve", "mc-e1", "mc-e2", "total-error", "consistency")


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s):
    s = s.strip()
    return tuple(int(tok) for tok in s.split(",")) if s else ()


def _parse_float_list(s):
    s = s.strip()
    return tuple(float(tok) for tok in s.split(",")) if s else ()


def _parse_pairs(s):
    s = s.strip()
    out = []
    for tok in s.split(",") if s else []:
        nx, _, n = tok.partition(":")
        out.append((int(nx), int(n)))
    return tuple(out)


def _parse_dt(s):
    return None if s.strip().lower() in ("auto", "none", "") else float(s)


def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ",".join(f"{a}:{b}" for a, b in v)
        return ",".join(_fmt(x) for x in v)
    return str(v)


# (section, key) -> (parser, default); layout drives serialisation order too.
_SCHEMA = {
    "run": {
        "kind": (str, ""),
        "workers": (int, 1),
        "out_dir": (str, "out"),
    },
    "grid": {
        "nx": (int, 64),
        "ny": (int, 0),  # 0: same as nx
        "lx": (float, 1.0),
        "ly": (float, 0.0),  # 0: square box scaled from lx
        "ladder": (_parse_int_list, ()),
    },
    "gas": {
        "gamma": (float, 1.4),
        "a": (float, 1.0),
    },
    "scheme": {
        "alpha": (float, 0.8),
        "eps_flux": (float, 0.0),
        "dt": (_parse_dt, None),
        "t_final": (float, 0.5),
        "picard_tol": (float, 1e-10),
        "picard_max": (int, 200),
    },
    "kh": {
        "j1": (float, 0.25),
        "j2": (float, 0.75),
        "eps_perturb": (float, 0.01),
        "n_modes": (int, 10),
    },
    "plan": {
        "master_seed": (int, 0),
        "n_list": (_parse_int_list, (5, 10, 20, 40, 80)),
        "l_reps": (int, 20),
        "n_ref": (int, 100),
        "pairs": (_parse_pairs, ()),
        "ref_nx": (int, 0),
        "cesaro": (_parse_bool, False),
    },
    "solve": {
        "initial": (str, "kh"),
        "sample_id": (int, 0),
        "rho": (float, 1.0),
        "u1": (float, 0.0),
        "u2": (float, 0.0),
        "snapshots": (_parse_float_list, ()),
    },
}


@dataclass
class RunConfig:
    """Fully validated configuration of one experiment run."""

    kind: str = ""
    workers: int = 1
    out_dir: str = "out"
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0
    ladder: tuple = ()
    gas: GasParams = field(default_factory=GasParams)
    scheme: SchemeParams = field(default_factory=SchemeParams)
    kh: KHDataSpec = field(default_factory=KHDataSpec)
    master_seed: int = 0
    n_list: tuple = (5, 10, 20, 40, 80)
    l_reps: int = 20
    n_ref: int = 100
    pairs: tuple = ()
    ref_nx: int = 0
    cesaro: bool = False
    initial: str = "kh"
    sample_id: int = 0
    rho: float = 1.0
    u1: float = 0.0
    u2: float = 0.0
    snapshots: tuple = ()

    def grid(self):
        return Grid(nx=self.nx, ny=self.ny, lx=self.lx, ly=self.ly)

    def ladder_grids(self):
        from .analysis import MeshLadder

        nxs = self.ladder if self.ladder else (self.nx,)
        ratio = self.ly / self.lx
        return MeshLadder(
            tuple(Grid(nx=n, ny=round(n * ratio), lx=self.lx, ly=self.ly) for n in nxs)
        )


def _raw_entries(text):
    """Parse the document into {(section, key): (value, line)} with checks."""
    entries = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", line=lineno)
        if section is None:
            raise ConfigError("key=value before any [section] header", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key in [{section}]", key=key, line=lineno)
        entries[(section, key)] = (value.strip(), lineno)
    return entries


def parse_config(text, overrides=(), kind=None):
    """Parse and validate a configuration document.

    ``overrides`` are ``section.key=value`` strings applied on top of the
    file; ``kind`` (from the CLI subcommand) wins over the file's value.
    """
    entries = _raw_entries(text)
    for ov in overrides:
        dotted, eq, value = ov.partition("=")
        section, dot, key = dotted.partition(".")
        if not eq or not dot:
            raise ConfigError(f"override must look like section.key=value: {ov!r}")
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError("unknown override", key=f"{section}.{key}")
        entries[(section, key)] = (value.strip(), 0)  # line 0: command line

    values = {}
    lines = {}
    for section, keys in _SCHEMA.items():
        for key, (parser, default) in keys.items():
            if (section, key) in entries:
                raw, lineno = entries[(section, key)]
                try:
                    values[(section, key)] = parser(raw)
                except ValueError as exc:
                    raise ConfigError(str(exc), key=key, line=lineno) from None
                lines[(section, key)] = lineno
            else:
                values[(section, key)] = default
                lines[(section, key)] = None

    def err(section, key, message):
        raise ConfigError(message, key=key, line=lines[(section, key)])

    v = values
    if kind is not None:
        v[("run", "kind")] = kind
    if v[("run", "kind")] and v[("run", "kind")] not in KINDS:
        err("run", "kind", f"kind must be one of {KINDS}")
    if v[("run", "workers")] < 1:
        err("run", "workers", "worker count must be at least 1")

    nx = v[("grid", "nx")]
    ny = v[("grid", "ny")] or nx
    lx = v[("grid", "lx")]
    ly = v[("grid", "ly")] or lx * ny / nx
    try:
        Grid(nx=nx, ny=ny, lx=lx, ly=ly)
    except ValueError as exc:
        err("grid", "nx", str(exc))
    for n in v[("grid", "ladder")]:
        if n < 2:
            err("grid", "ladder", f"ladder entry {n} too small")

    try:
        gas = GasParams(gamma=v[("gas", "gamma")], a=v[("gas", "a")])
    except ValueError as exc:
        err("gas", "gamma", str(exc))
    try:
        scheme = SchemeParams(
            alpha=v[("scheme", "alpha")],
            eps_flux=v[("scheme", "eps_flux")],
            dt=v[("scheme", "dt")],
            t_final=v[("scheme", "t_final")],
            picard_tol=v[("scheme", "picard_tol")],
            picard_max=v[("scheme", "picard_max")],
        )
    except ValueError as exc:
        err("scheme", "alpha", str(exc))
    verdict = validate_params(gas, scheme)
    if not verdict:
        err("scheme", "alpha", f"inadmissible flux parameters: {verdict.reason}")
    try:
        kh = KHDataSpec(
            j1=v[("kh", "j1")],
            j2=v[("kh", "j2")],
            eps_perturb=v[("kh", "eps_perturb")],
            n_modes=v[("kh", "n_modes")],
        )
    except ValueError as exc:
        err("kh", "j1", str(exc))

    n_list = v[("plan", "n_list")]
    if not n_list or any(n < 1 for n in n_list):
        err("plan", "n_list", "sample counts must all be at least 1")
    if v[("plan", "l_reps")] < 1:
        err("plan", "l_reps", "repetition count must be at least 1")
    if v[("plan", "n_ref")] < max(n_list):
        err("plan", "n_ref", f"n_ref must be at least max(n_list)={max(n_list)}")
    if v[("solve", "initial")] not in ("kh", "constant"):
        err("solve", "initial", "initial data must be 'kh' or 'constant'")
    if v[("solve", "initial")] == "constant" and v[("solve", "rho")] <= 0.0:
        err("solve", "rho", "constant initial density must be positive")

    return RunConfig(
        kind=v[("run", "kind")],
        workers=v[("run", "workers")],
        out_dir=v[("run", "out_dir")],
        nx=nx,
        ny=ny,
        lx=lx,
        ly=ly,
        ladder=v[("grid", "ladder")],
        gas=gas,
        scheme=scheme,
        kh=kh,
        master_seed=v[("plan", "master_seed")],
        n_list=n_list,
        l_reps=v[("plan", "l_reps")],
        n_ref=v[("plan", "n_ref")],
        pairs=v[("plan", "pairs")],
        ref_nx=v[("plan", "ref_nx")],
        cesaro=v[("plan", "cesaro")],
        initial=v[("solve", "initial")],
        sample_id=v[("solve", "sample_id")],
        rho=v[("solve", "rho")],
        u1=v[("solve", "u1")],
        u2=v[("solve", "u2")],
        snapshots=v[("solve", "snapshots")],
    )


def serialize_config(cfg):
    """Canonical text form; parsing it reproduces an equal RunConfig."""
    get = {
        ("run", "kind"): cfg.kind,
        ("run", "workers"): cfg.workers,
        ("run", "out_dir"): cfg.out_dir,
        ("grid", "nx"): cfg.nx,
        ("grid", "ny"): cfg.ny,
        ("grid", "lx"): cfg.lx,
        ("grid", "ly"): cfg.ly,
        ("grid", "ladder"): cfg.ladder,
        ("gas", "gamma"): cfg.gas.gamma,
        ("gas", "a"): cfg.gas.a,
        ("scheme", "alpha"): cfg.scheme.alpha,
        ("scheme", "eps_flux"): cfg.scheme.eps_flux,
        ("scheme", "dt"): cfg.scheme.dt,
        ("scheme", "t_final"): cfg.scheme.t_final,
        ("scheme", "picard_tol"): cfg.scheme.picard_tol,
        ("scheme", "picard_max"): cfg.scheme.picard_max,
        ("kh", "j1"): cfg.kh.j1,
        ("kh", "j2"): cfg.kh.j2,
        ("kh", "eps_perturb"): cfg.kh.eps_perturb,
        ("kh", "n_modes"): cfg.kh.n_modes,
        ("plan", "master_seed"): cfg.master_seed,
        ("plan", "n_list"): cfg.n_list,
        ("plan", "l_reps"): cfg.l_reps,
        ("plan", "n_ref"): cfg.n_ref,
        ("plan", "pairs"): cfg.pairs,
        ("plan", "ref_nx"): cfg.ref_nx,
        ("plan", "cesaro"): cfg.cesaro,
        ("solve", "initial"): cfg.initial,
        ("solve", "sample_id"): cfg.sample_id,
        ("solve", "rho"): cfg.rho,
        ("solve", "u1"): cfg.u1,
        ("solve", "u2"): cfg.u2,
        ("solve", "snapshots"): cfg.snapshots,
    }
    out = []
    for section, keys in _SCHEMA.items():
        out.append(f"[{section}]")
        for key in keys:
            out.append(f"{key} = {_fmt(get[(section, key)])}")
        out.append("")
    return "\n".join(out)


def load_config(path, overrides=(), kind=None):
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    return parse_config(text, overrides=overrides, kind=kind)
