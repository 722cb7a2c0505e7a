"""Spin, sequence and node parameters, plus the derived quantities.

All angular frequencies are rad/s, times are seconds. The configuration
file uses plain kHz and is converted on ingestion.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field, replace

import tomli

TWO_PI = 2 * math.pi
KHZ = TWO_PI * 1e3  # rad/s per kHz of ordinary frequency

DEFAULT_LARMOR = 432 * KHZ
DEFAULT_N_PULSES = 48
DEFAULT_TAU_OVER_TAU_L = 8
DEFAULT_F_EE = 0.99


class Role(str, enum.Enum):
    TARGET = "target"
    UNADDRESSED = "unaddressed"
    BATH = "bath"


class ConfigError(ValueError):
    """Configuration could not be parsed or violates an invariant."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class NuclearSpinParams:
    """One 13C spin, described by its parallel coupling and tilt angle."""

    a_par: float
    beta: float = 0.0
    role: Role = Role.TARGET
    label: str = "n"

    def __post_init__(self):
        if not 0.0 <= self.beta < math.pi / 2:
            raise ValueError(f"beta must lie in [0, pi/2), got {self.beta!r}")
        object.__setattr__(self, "role", Role(self.role))

    def a_perp(self, omega_l: float) -> float:
        return (omega_l - self.a_par) * math.tan(self.beta)

    def omega1(self, omega_l: float) -> float:
        return derive_omega1(self, omega_l)

    def axis1(self) -> tuple[float, float, float]:
        """Quantisation axis while the electron is in |1>."""
        return (math.sin(self.beta), 0.0, math.cos(self.beta))


@dataclass(frozen=True)
class DdrfSequence:
    """``(tau - pi - 2tau - pi - tau)^(N/2)`` with interleaved RF pulses.

    Attributes
    ----------
    n_pulses : int
        Number of electron pi pulses ``N`` (even).
    tau : float
        Half the interpulse delay, seconds.
    omega_l : float
        Bare nuclear Larmor frequency, rad/s.
    drive_freq : float
        RF frequency ``omega``, rad/s.
    rabi : float
        RF Rabi frequency ``Omega``, rad/s.
    varphi : float
        Phase offset of the RF phase schedule.
    rabi_factor : float
        Correction applied to ``pi / (2 N tau)`` when ``rabi`` is derived.
    """

    n_pulses: int
    tau: float
    omega_l: float
    drive_freq: float
    rabi: float
    varphi: float = 0.0
    rabi_factor: float = 1.0

    def __post_init__(self):
        if self.n_pulses <= 0 or self.n_pulses % 2:
            raise ValueError(f"n_pulses must be a positive even integer, got {self.n_pulses!r}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.rabi_factor <= 1.0:
            raise ValueError(f"rabi_factor must lie in (0, 1], got {self.rabi_factor!r}")

    @classmethod
    def for_target(
        cls,
        spin: NuclearSpinParams,
        n_pulses: int = DEFAULT_N_PULSES,
        tau_over_tau_l: float = DEFAULT_TAU_OVER_TAU_L,
        omega_l: float = DEFAULT_LARMOR,
        rabi_factor: float = 1.0,
        varphi: float = 0.0,
    ) -> "DdrfSequence":
        """Sequence tuned to ``spin``: drive at its omega1, derived Rabi rate."""
        tau = tau_over_tau_l * TWO_PI / omega_l
        return cls(
            n_pulses=n_pulses,
            tau=tau,
            omega_l=omega_l,
            drive_freq=derive_omega1(spin, omega_l),
            rabi=rabi_factor * math.pi / (2 * n_pulses * tau),
            varphi=varphi,
            rabi_factor=rabi_factor,
        )

    def with_rabi_factor(self, factor: float) -> "DdrfSequence":
        return replace(self, rabi_factor=factor,
                       rabi=factor * math.pi / (2 * self.n_pulses * self.tau))

    @property
    def tau_l(self) -> float:
        return TWO_PI / self.omega_l

    @property
    def duration(self) -> float:
        return 2 * self.n_pulses * self.tau

    @property
    def resonant_tau(self) -> bool:
        """True when tau is an integer multiple of the Larmor period."""
        ratio = self.tau / self.tau_l
        return abs(ratio - round(ratio)) < 1e-9 * max(1.0, ratio)

    @property
    def peak_halfwidth(self) -> float:
        """``2 pi / (N tau)``: first zero of the off-resonant response."""
        return TWO_PI / (self.n_pulses * self.tau)


@dataclass(frozen=True)
class NemotoParams:
    """NV-15N parameters entering the effective CZ coupling."""

    d_zfs: float
    gamma_e: float
    gamma_n: float
    b_field: float
    a_par_n: float
    a_perp_n: float

    @property
    def gamma_split(self) -> float:
        return self.d_zfs + self.gamma_e * self.b_field - self.gamma_n * self.b_field


@dataclass(frozen=True)
class NodeConfig:
    """One register node: ordered spins, the DDRF sequence and F_ee."""

    spins: tuple[NuclearSpinParams, ...]
    sequence: DdrfSequence
    f_ee: float = DEFAULT_F_EE
    electron_ms: tuple[int, int] = (0, -1)
    # rabi_factor as written in the file; None means "calibrate"
    rabi_factor_given: float | None = field(default=None, compare=False)

    @property
    def target(self) -> NuclearSpinParams:
        return next(s for s in self.spins if s.role is Role.TARGET)

    @property
    def register(self) -> tuple[NuclearSpinParams, ...]:
        """Target first, then unaddressed spins in file order."""
        return (self.target,) + tuple(s for s in self.spins if s.role is Role.UNADDRESSED)

    @property
    def baths(self) -> tuple[NuclearSpinParams, ...]:
        return tuple(s for s in self.spins if s.role is Role.BATH)

    def spin(self, label: str) -> NuclearSpinParams:
        for s in self.spins:
            if s.label == label:
                return s
        raise KeyError(label)


@dataclass(frozen=True)
class ValidationWarning:
    code: str
    message: str


def derive_omega1(spin: NuclearSpinParams, omega_l: float) -> float:
    """Precession frequency with the electron in |1>."""
    if omega_l <= spin.a_par:
        raise ValueError(
            f"omega_l ({omega_l!r}) must exceed a_par ({spin.a_par!r}) for spin {spin.label!r}"
        )
    return (omega_l - spin.a_par) / math.cos(spin.beta)


def phi_tau(seq: DdrfSequence, target_omega1: float) -> float:
    return (seq.omega_l - target_omega1) * seq.tau


def rf_phase(k: int, seq: DdrfSequence, target_omega1: float) -> float:
    """Phase of RF pulse ``k`` (1..N+1), reduced to [0, 2 pi)."""
    if not 1 <= k <= seq.n_pulses + 1:
        raise ValueError(f"pulse index {k} outside 1..{seq.n_pulses + 1}")
    phase = (k - 1) * phi_tau(seq, target_omega1) + seq.varphi + (math.pi if k % 2 else 0.0)
    return phase % TWO_PI


def resonant_apar(beta_bar: float, target_omega1: float, omega_l: float) -> float:
    """Parallel coupling at which a spin of tilt ``beta_bar`` resonates."""
    if not target_omega1 * math.cos(beta_bar) < omega_l:
        raise ValueError("no resonant a_par: omega1*cos(beta_bar) must stay below omega_l")
    return omega_l - target_omega1 * math.cos(beta_bar)


def nemoto_anet(p: NemotoParams) -> tuple[float, float]:
    """Effective hyperfine coupling and the CZ waiting time ``pi/|A_net|``."""
    gamma = p.gamma_split
    if gamma <= 0:
        raise ValueError("Gamma = D + (gamma_e - gamma_n) B must be positive")
    a_net = p.a_par_n - p.a_perp_n ** 2 / (2 * gamma)
    if a_net == 0:
        raise ValueError("A_net vanishes; no CZ time exists")
    return a_net, math.pi / abs(a_net)


# --- configuration ---------------------------------------------------------

_SEQUENCE_KEYS = {"n_pulses", "tau_over_tauL", "larmor_khz", "varphi_rad", "rabi_factor"}
_SPIN_KEYS = {"label", "apar_khz", "beta_rad", "role"}
_NODE_KEYS = {"f_ee"}


def _line_of(text: str, header: str, index: int = 0, key: str | None = None) -> int | None:
    """1-based line of the ``index``-th ``header`` (or a key inside it)."""
    seen = -1
    inside = False
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            inside = False
            if stripped == header:
                seen += 1
                if seen == index:
                    inside = True
                    if key is None:
                        return n
        elif inside and key and re.match(rf"{re.escape(key)}\s*=", stripped):
            return n
    return None


def _where(text: str, header: str, index: int = 0, key: str | None = None) -> str:
    name = header.strip("[]")
    loc = f"{name}[{index}]" if header.startswith("[[") else name
    if key:
        loc += f".{key}"
    line = _line_of(text, header, index, key)
    return f"line {line} ({loc})" if line else loc


def _number(value, what: str, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}", where)
    return float(value)


def load_config(text: str) -> NodeConfig:
    """Parse the TOML node description into a :class:`NodeConfig`."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from exc

    unknown = set(doc) - {"sequence", "spin", "node"}
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}")

    seq_doc = doc.get("sequence", {})
    if not isinstance(seq_doc, dict):
        raise ConfigError("[sequence] must be a table")
    bad = set(seq_doc) - _SEQUENCE_KEYS
    if bad:
        raise ConfigError(f"unknown key(s) {sorted(bad)}", _where(text, "[sequence]"))

    def seq_val(key, default):
        if key not in seq_doc:
            return default
        return _number(seq_doc[key], key, _where(text, "[sequence]", 0, key))

    n_pulses = seq_doc.get("n_pulses", DEFAULT_N_PULSES)
    if isinstance(n_pulses, bool) or not isinstance(n_pulses, int) or n_pulses <= 0 or n_pulses % 2:
        raise ConfigError("n_pulses must be a positive even integer",
                          _where(text, "[sequence]", 0, "n_pulses"))
    tau_ratio = seq_val("tau_over_tauL", float(DEFAULT_TAU_OVER_TAU_L))
    if tau_ratio <= 0:
        raise ConfigError("tau_over_tauL must be positive", _where(text, "[sequence]", 0, "tau_over_tauL"))
    omega_l = seq_val("larmor_khz", DEFAULT_LARMOR / KHZ) * KHZ
    if omega_l <= 0:
        raise ConfigError("larmor_khz must be positive", _where(text, "[sequence]", 0, "larmor_khz"))
    varphi = seq_val("varphi_rad", 0.0)
    rabi_factor = seq_val("rabi_factor", None)
    if rabi_factor is not None and not 0.0 < rabi_factor <= 1.0:
        raise ConfigError("rabi_factor must lie in (0, 1]", _where(text, "[sequence]", 0, "rabi_factor"))

    spin_docs = doc.get("spin", [])
    if not isinstance(spin_docs, list) or not spin_docs:
        raise ConfigError("at least one [[spin]] table is required")
    spins = []
    for i, sd in enumerate(spin_docs):
        bad = set(sd) - _SPIN_KEYS
        if bad:
            raise ConfigError(f"unknown key(s) {sorted(bad)}", _where(text, "[[spin]]", i))
        for key in ("label", "apar_khz"):
            if key not in sd:
                raise ConfigError(f"missing key {key!r}", _where(text, "[[spin]]", i))
        label = sd["label"]
        if not isinstance(label, str) or not label:
            raise ConfigError("label must be a non-empty string", _where(text, "[[spin]]", i, "label"))
        a_par = _number(sd["apar_khz"], "apar_khz", _where(text, "[[spin]]", i, "apar_khz")) * KHZ
        beta = _number(sd.get("beta_rad", 0.0), "beta_rad", _where(text, "[[spin]]", i, "beta_rad"))
        if not 0.0 <= beta < math.pi / 2:
            raise ConfigError("beta_rad must lie in [0, pi/2)", _where(text, "[[spin]]", i, "beta_rad"))
        try:
            role = Role(sd.get("role", "target" if i == 0 else "unaddressed"))
        except ValueError:
            raise ConfigError(f"role must be one of {[r.value for r in Role]}",
                              _where(text, "[[spin]]", i, "role")) from None
        if omega_l <= a_par:
            raise ConfigError("apar_khz must be below larmor_khz", _where(text, "[[spin]]", i, "apar_khz"))
        spins.append(NuclearSpinParams(a_par=a_par, beta=beta, role=role, label=label))

    labels = [s.label for s in spins]
    dupes = sorted({x for x in labels if labels.count(x) > 1})
    if dupes:
        raise ConfigError(f"duplicate spin label(s) {dupes}")
    targets = [i for i, s in enumerate(spins) if s.role is Role.TARGET]
    if len(targets) != 1:
        raise ConfigError(f"exactly one spin must have role 'target', found {len(targets)}")

    node_doc = doc.get("node", {})
    bad = set(node_doc) - _NODE_KEYS
    if bad:
        raise ConfigError(f"unknown key(s) {sorted(bad)}", _where(text, "[node]"))
    f_ee = DEFAULT_F_EE
    if "f_ee" in node_doc:
        f_ee = _number(node_doc["f_ee"], "f_ee", _where(text, "[node]", 0, "f_ee"))
        if not 0.0 <= f_ee <= 1.0:
            raise ConfigError("f_ee must lie in [0, 1]", _where(text, "[node]", 0, "f_ee"))

    target = spins[targets[0]]
    sequence = DdrfSequence.for_target(
        target,
        n_pulses=n_pulses,
        tau_over_tau_l=tau_ratio,
        omega_l=omega_l,
        rabi_factor=1.0 if rabi_factor is None else rabi_factor,
        varphi=varphi,
    )
    return NodeConfig(spins=tuple(spins), sequence=sequence, f_ee=f_ee,
                      rabi_factor_given=rabi_factor)


def load_config_file(path) -> NodeConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return load_config(text)
    except ConfigError as exc:
        raise ConfigError(str(exc), str(path)) from exc


def validate(cfg: NodeConfig) -> list[ValidationWarning]:
    """Re-check invariants and report soft problems as warnings."""
    seq = cfg.sequence
    labels = [s.label for s in cfg.spins]
    if len(set(labels)) != len(labels):
        raise ConfigError("spin labels must be unique")
    if sum(s.role is Role.TARGET for s in cfg.spins) != 1:
        raise ConfigError("exactly one target spin is required")
    if not 0.0 <= cfg.f_ee <= 1.0:
        raise ConfigError("f_ee must lie in [0, 1]")

    warnings = []
    if not seq.resonant_tau:
        warnings.append(ValidationWarning(
            "non-resonant-tau",
            f"tau/tau_L = {seq.tau / seq.tau_l:.6g} is not an integer; "
            "the azimuthal phase correction is inexact",
        ))
    reg = cfg.register
    w1 = [derive_omega1(s, seq.omega_l) for s in reg]
    for i in range(len(reg)):
        for j in range(i + 1, len(reg)):
            if abs(w1[i] - w1[j]) < seq.peak_halfwidth:
                warnings.append(ValidationWarning(
                    "spectral-crowding",
                    f"spins {reg[i].label!r} and {reg[j].label!r} are within "
                    f"2pi/(N tau) of each other ({abs(w1[i] - w1[j]) / KHZ:.4g} kHz)",
                ))
    return warnings
