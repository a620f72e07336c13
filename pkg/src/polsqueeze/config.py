"""Run configuration: flat key=value documents with explicit units.

Every physical input crosses the unit boundary here; downstream code
works in meV, nm and fs only.  Pairs are separated by newlines or
commas, comments run from ``#`` to end of line.  Unknown, malformed,
duplicate and missing keys are all collected before reporting so a bad
file yields one complete diagnosis.  Serialization round-trips exactly:
floats are written with shortest-repr precision and polarizations keep
their original tags.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .screening import Heterostructure
from .steady import PolaritonModel, build_model


class ConfigError(Exception):
    """One or more problems in a run configuration."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


# circular-basis polarization presets; custom vectors use a slash
# between components so commas stay free as pair separators
_POLARIZATIONS = {
    "x": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "y": np.array([1.0, -1.0]) / np.sqrt(2.0),
    "sigma+": np.array([1.0, 0.0], dtype=complex),
    "sigma-": np.array([0.0, 1.0], dtype=complex),
}


def polarization_vector(tag: str) -> np.ndarray:
    """Unit Jones vector in the circular (K, K') basis."""
    if tag in _POLARIZATIONS:
        return _POLARIZATIONS[tag].astype(complex)
    parts = tag.split("/")
    if len(parts) != 2:
        raise ValueError(f"polarization {tag!r}: expected a preset "
                         f"({', '.join(_POLARIZATIONS)}) or two slash-"
                         "separated complex components like 1/1j")
    try:
        vec = np.array([complex(p) for p in parts])
    except ValueError:
        raise ValueError(f"polarization {tag!r}: components must be "
                         "complex numbers") from None
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ValueError(f"polarization {tag!r} has zero norm")
    return vec / norm


@dataclass(frozen=True)
class MaterialParams:
    """Monolayer and dielectric environment."""

    d_2D: float
    E_g: float  # eV; converted to meV at the model boundary
    m_e: float
    m_h: float
    eps_perp: float
    eps_env: float
    h_int: float
    gamma_vc: float  # eV nm, provenance only

    @property
    def alpha(self) -> float:
        return self.m_e / (self.m_e + self.m_h)

    @property
    def beta(self) -> float:
        return self.m_h / (self.m_e + self.m_h)


@dataclass(frozen=True)
class CavityParams:
    Omega0: float
    gamma_p: float
    delta_c: float  # photon minus exciton energy at q = 0
    n_idx: float


@dataclass(frozen=True)
class DriveParams:
    P_in: float
    omega_d: float
    S: float
    lambda_in: str
    lambda_out: str
    gamma_x: float

    def lambda_in_vector(self) -> np.ndarray:
        return polarization_vector(self.lambda_in)

    def lambda_out_vector(self) -> np.ndarray:
        lam = self.lambda_in_vector()
        if self.lambda_out == "co":
            return lam
        if self.lambda_out == "cross":
            return np.conj(np.array([lam[1], -lam[0]]))
        return polarization_vector(self.lambda_out)


@dataclass(frozen=True)
class GridSpec:
    N_k: int
    k_max: float
    N_q: int
    q_max: float
    N_theta: int
    omega_min: float
    omega_max: float
    N_omega: int

    def omega_grid(self) -> np.ndarray:
        return np.linspace(self.omega_min, self.omega_max, self.N_omega)


@dataclass(frozen=True)
class SweepParams:
    map_delta_min: float
    map_delta_max: float
    map_n_delta: int
    map_drive_span: float
    map_n_drive: int
    power_min: float
    power_max: float
    n_power: int


@dataclass(frozen=True)
class RunSpec:
    material: MaterialParams
    cavity: CavityParams
    drive: DriveParams
    grid: GridSpec
    sweep: SweepParams

    def non_paper_inputs(self) -> dict:
        # values the source material does not pin down, echoed in output
        # metadata so results stay auditable
        return {"eps_env": self.material.eps_env,
                "n_idx": self.cavity.n_idx}


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _pol(text: str) -> str:
    polarization_vector(text)  # validates
    return text


def _pol_out(text: str) -> str:
    if text in ("co", "cross"):
        return text
    return _pol(text)


def _positive(v):
    return None if v > 0 else "must be positive"


def _non_negative(v):
    return None if v >= 0 else "must not be negative"


def _count(v):
    return None if v >= 8 else "needs at least 8 points"


@dataclass(frozen=True)
class _Key:
    doc: str
    convert: object
    default: object = None
    required: bool = False
    check: object = None


_KEYS = {
    # material
    "d_2D": _Key("monolayer thickness, nm", _float, 0.626, check=_positive),
    "E_g": _Key("single-particle band gap, eV", _float, 2.48,
                check=_positive),
    "m_e": _Key("electron mass, bare-mass units", _float, 0.43,
                check=_positive),
    "m_h": _Key("hole mass, bare-mass units", _float, 0.54, check=_positive),
    "eps_perp": _Key("in-plane dielectric constant", _float, 12.8,
                     check=_positive),
    "eps_env": _Key("environment dielectric constant (not a paper value)",
                    _float, 4.5, check=_positive),
    "h_int": _Key("interlayer air gap, nm", _float, 0.3, check=_non_negative),
    "gamma_vc": _Key("momentum matrix element, eV nm (provenance only)",
                     _float, 0.222, check=_positive),
    # cavity
    "Omega0": _Key("exciton-photon coupling, meV", _float, 20.0,
                   check=_non_negative),
    "gamma_p": _Key("cavity half linewidth, meV", _float, 9.0,
                    check=_positive),
    "delta_c": _Key("cavity minus exciton energy, meV", _float, 0.0),
    "n_idx": _Key("effective refractive index", _float, 3.0,
                  check=lambda v: None if v >= 1 else "must be at least 1"),
    # drive
    "P_in": _Key("input power, mW", _float, required=True,
                 check=_non_negative),
    "omega_d": _Key("drive photon energy, meV absolute", _float,
                    required=True),
    "S": _Key("laser spot area, um^2", _float, 9.0, check=_positive),
    "lambda_in": _Key("drive polarization, circular basis", _pol, "x"),
    "lambda_out": _Key("analyzer polarization: co, cross or explicit",
                       _pol_out, "co"),
    "gamma_x": _Key("exciton dephasing, meV", _float, 0.8, check=_positive),
    # grids
    "N_k": _Key("exciton radial points", _int, 512, check=_count),
    "k_max": _Key("exciton momentum cutoff, 1/nm", _float, 40.0,
                  check=_positive),
    "N_q": _Key("pair radial points", _int, 128, check=_count),
    "q_max": _Key("pair momentum cutoff, inverse pair radii", _float, 8.0,
                  check=_positive),
    "N_theta": _Key("pair-kernel angular points", _int, 32, check=_count),
    "omega_min": _Key("homodyne grid start, meV", _float, -30.0),
    "omega_max": _Key("homodyne grid end, meV", _float, 30.0),
    "N_omega": _Key("homodyne grid points", _int, 201, check=_count),
    # sweeps
    "map_delta_min": _Key("map detuning start, meV", _float, -20.0),
    "map_delta_max": _Key("map detuning end, meV", _float, 60.0),
    "map_n_delta": _Key("map detuning points", _int, 80,
                        check=lambda v: None if v >= 2 else "needs >= 2"),
    "map_drive_span": _Key("map drive half-span around the zero-detuning "
                           "lower polariton, meV", _float, 40.0,
                           check=_positive),
    "map_n_drive": _Key("map drive points", _int, 80,
                        check=lambda v: None if v >= 2 else "needs >= 2"),
    "power_min": _Key("power scan start, mW", _float, 1.0, check=_positive),
    "power_max": _Key("power scan end, mW", _float, 10.0, check=_positive),
    "n_power": _Key("power scan points", _int, 10,
                    check=lambda v: None if v >= 2 else "needs >= 2"),
}

_SECTIONS = (
    ("material", MaterialParams),
    ("cavity", CavityParams),
    ("drive", DriveParams),
    ("grid", GridSpec),
    ("sweep", SweepParams),
)


def _pairs(text: str):
    """Yield (lineno, fragment) for every comma- or line-separated pair."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for fragment in line.split(","):
            fragment = fragment.strip()
            if fragment:
                yield lineno, fragment


def parse_config(text: str) -> RunSpec:
    """Parse and validate a flat key=value document."""
    values = {}
    problems = []
    for lineno, fragment in _pairs(text):
        key, sep, val = fragment.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            problems.append(f"line {lineno}: expected key=value, "
                            f"got {fragment!r}")
            continue
        entry = _KEYS.get(key)
        if entry is None:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            value = entry.convert(val)
        except ValueError as exc:
            problems.append(f"line {lineno}: {key}: {exc}")
            continue
        if entry.check is not None:
            complaint = entry.check(value)
            if complaint is not None:
                problems.append(f"line {lineno}: {key}={val}: {complaint}")
                continue
        values[key] = value
    for key, entry in _KEYS.items():
        if key not in values:
            if entry.required:
                problems.append(f"missing required key {key!r} "
                                f"({entry.doc})")
            else:
                values[key] = entry.default
    if problems:
        raise ConfigError(problems)

    spec = RunSpec(**{name: cls(**{f.name: values[f.name]
                                   for f in dataclasses.fields(cls)})
                      for name, cls in _SECTIONS})
    problems = _cross_checks(spec)
    if problems:
        raise ConfigError(problems)
    return spec


def _cross_checks(spec: RunSpec):
    problems = []
    if spec.grid.omega_max <= spec.grid.omega_min:
        problems.append("omega_max must exceed omega_min")
    if spec.sweep.map_delta_max <= spec.sweep.map_delta_min:
        problems.append("map_delta_max must exceed map_delta_min")
    if spec.sweep.power_max < spec.sweep.power_min:
        problems.append("power_max must not be below power_min")
    return problems


def serialize(spec: RunSpec) -> str:
    """Emit a document that parses back to an equal RunSpec."""
    flat = {}
    for name, _ in _SECTIONS:
        record = getattr(spec, name)
        for field in dataclasses.fields(record):
            flat[field.name] = getattr(record, field.name)
    lines = []
    for key, entry in _KEYS.items():
        value = flat[key]
        text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key}={text}  # {entry.doc}")
    return "\n".join(lines) + "\n"


def default_spec(P_in: float = 10.0, omega_d: float = 0.0) -> RunSpec:
    """Defaults with the two required drive values filled in."""
    return parse_config(f"P_in={P_in!r}\nomega_d={omega_d!r}\n")


def build_from_spec(spec: RunSpec) -> PolaritonModel:
    """Assemble the cavity model; the single eV-to-meV boundary."""
    mat = spec.material
    het = Heterostructure(d=mat.d_2D, eps_perp=mat.eps_perp,
                          h=mat.h_int, eps_env=mat.eps_env)
    n_theta = spec.grid.N_theta
    angles = dict(n_theta=n_theta, n_k=max(8, (3 * n_theta) // 4),
                  n_theta_k=2 * n_theta)
    return build_model(omega0=spec.cavity.Omega0,
                       delta_c=spec.cavity.delta_c,
                       hg_p=spec.cavity.gamma_p, hg_x=spec.drive.gamma_x,
                       area_um2=spec.drive.S, n_idx=spec.cavity.n_idx,
                       e_gap=1e3 * mat.E_g, m_e=mat.m_e, m_h=mat.m_h,
                       hetero=het, n_exciton=spec.grid.N_k,
                       k_span=(1e-4, spec.grid.k_max),
                       n_pair=spec.grid.N_q,
                       q_max_bohr=spec.grid.q_max,
                       kernel_angles=angles)


def write_csv(path, columns, metadata=None) -> None:
    """Write labeled columns at full precision plus a JSON sidecar.

    ``columns`` is a sequence of (header, array) pairs with units in
    the header.  Output is deterministic: fixed order, repr-exact
    floats, no timestamps; rerunning a spec reproduces the bytes.
    """
    names = [name for name, _ in columns]
    arrays = [np.asarray(col) for _, col in columns]
    length = arrays[0].shape[0] if arrays else 0
    if any(a.shape[0] != length for a in arrays):
        raise ValueError("columns differ in length")
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(length):
            fh.write(",".join(_cell(a[i]) for a in arrays) + "\n")
    if metadata is not None:
        with open(f"{path}.json", "w") as fh:
            json.dump(metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (np.integer, int)) \
            or isinstance(value, (np.bool_, bool)):
        return str(int(value))
    return format(float(value), ".17g")
