"""Analytic surrogate for the body-fabric-sensor chain.

Joint-angle trajectories ("motions") are generated procedurally, then mapped
to two channels of digitized counts through a per-channel response

    s_k(theta) = theta + c_k * theta^2          (mild nonlinearity)
    u_k        = lag * u_k_prev + (1 - lag) * s_k   (first-order hysteresis)
    r_k        = a_k * u_k + b_k + noise

with optional rounding + clamping to [0, 1023]. Gains/offsets differ between
domains to model wearing-position shift; trajectory kind differs to model
distinct motions. Everything is deterministic given the specs and seeds.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, replace

import numpy as np

from .data import ANGLE_MAX, Dataset, DatasetMeta, strip_labels
from .errors import ConfigError
from .rng import substream

TRAJECTORY_KINDS = ("sinusoid-mix", "ramp-cycle", "random-walk", "composite")


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "composite"
    angle_range: tuple[float, float] = (40.0, 160.0)
    freqs_hz: tuple[float, ...] = (0.2, 0.55, 1.1)
    amplitudes_deg: tuple[float, ...] = (45.0, 20.0, 8.0)
    period_frames: int = 200
    dwell_frames: int = 0
    step_deg: float = 1.5
    seed: int = 0
    sample_rate_hz: float = 50.0

    def __post_init__(self):
        lo, hi = self.angle_range
        if not (0.0 <= lo < hi <= ANGLE_MAX):
            raise ConfigError(f"angle_range must satisfy 0 <= lo < hi <= {ANGLE_MAX}, got {self.angle_range}")
        if self.kind not in TRAJECTORY_KINDS:
            raise ConfigError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "sinusoid-mix" and len(self.freqs_hz) != len(self.amplitudes_deg):
            raise ConfigError("freqs_hz and amplitudes_deg must have equal length")
        if self.kind == "ramp-cycle" and self.period_frames < 2:
            raise ConfigError("period_frames must be >= 2")
        if self.dwell_frames < 0 or self.step_deg <= 0 or self.sample_rate_hz <= 0:
            raise ConfigError("dwell_frames >= 0, step_deg > 0, sample_rate_hz > 0 required")


@dataclass(frozen=True)
class SurrogateConfig:
    gain: tuple[float, float] = (4.2, 3.6)          # counts per degree
    offset: tuple[float, float] = (90.0, 120.0)     # counts
    quad: tuple[float, float] = (0.0, 0.0)          # curvature of s(theta)
    noise_sd: float = 0.0                           # counts
    lag: float = 0.0                                # hysteresis in [0, 1)
    digitize: bool = True

    def __post_init__(self):
        if self.gain[0] <= 0 or self.gain[1] <= 0:
            raise ConfigError(f"gains must be positive, got {self.gain}")
        if not (0.0 <= self.lag < 1.0):
            raise ConfigError(f"lag must lie in [0, 1), got {self.lag}")
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")

    def stretch(self, theta):
        """Noiseless pre-gain stretch signal s_k(theta); shape (..., 2)."""
        th = np.asarray(theta, dtype=np.float64)[..., None]
        c = np.array(self.quad)
        return th + c * th * th

    def noiseless(self, theta):
        """Noiseless, lag-free channel response in counts; shape (..., 2)."""
        a = np.array(self.gain)
        b = np.array(self.offset)
        return a * self.stretch(theta) + b


def validate_surrogate(cfg: SurrogateConfig, angle_range: tuple[float, float]) -> None:
    """Check monotonicity and digitization headroom over the angle range.

    Sampled on a 1-degree grid: the response derivative a_k*(1 + 2*c_k*theta)
    must stay positive, and with digitize on the noiseless response must fit
    inside [0, 1023].
    """
    lo, hi = angle_range
    grid = np.arange(lo, hi + 0.5, 1.0)
    a = np.array(cfg.gain)
    c = np.array(cfg.quad)
    deriv = a * (1.0 + 2.0 * c * grid[:, None])
    if deriv.min() <= 0:
        raise ConfigError(
            f"channel response is not strictly increasing over [{lo}, {hi}] (quad={cfg.quad})"
        )
    if cfg.digitize:
        resp = cfg.noiseless(grid)
        if resp.min() < 0.0 or resp.max() > 1023.0:
            raise ConfigError(
                f"noiseless response spans [{resp.min():.1f}, {resp.max():.1f}], "
                "outside the digitizer range [0, 1023]"
            )


@dataclass(frozen=True)
class DomainConfig:
    """One domain = a motion generator plus a sensor response model."""

    trajectory: TrajectorySpec
    sensor: SurrogateConfig

    def __post_init__(self):
        validate_surrogate(self.sensor, self.trajectory.angle_range)


def _sinusoid_mix(spec: TrajectorySpec, frames: int, rng) -> np.ndarray:
    lo, hi = spec.angle_range
    mid = 0.5 * (lo + hi)
    t = np.arange(frames) / spec.sample_rate_hz
    theta = np.full(frames, mid)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(spec.freqs_hz))
    for f, amp, ph in zip(spec.freqs_hz, spec.amplitudes_deg, phases):
        theta += amp * np.sin(2.0 * np.pi * f * t + ph)
    return np.clip(theta, lo, hi)


def _ramp_cycle(spec: TrajectorySpec, frames: int) -> np.ndarray:
    lo, hi = spec.angle_range
    half = spec.period_frames / 2.0
    cycle = spec.period_frames + 2 * spec.dwell_frames
    tt = np.arange(frames, dtype=np.float64) % cycle
    theta = np.empty(frames)
    rise = tt < half
    at_max = (tt >= half) & (tt < half + spec.dwell_frames)
    fall = (tt >= half + spec.dwell_frames) & (tt < spec.period_frames + spec.dwell_frames)
    at_min = tt >= spec.period_frames + spec.dwell_frames
    theta[rise] = lo + (hi - lo) * (tt[rise] / half)
    theta[at_max] = hi
    theta[fall] = hi - (hi - lo) * ((tt[fall] - half - spec.dwell_frames) / half)
    theta[at_min] = lo
    return theta


def _random_walk(spec: TrajectorySpec, frames: int, rng) -> np.ndarray:
    lo, hi = spec.angle_range
    steps = rng.normal(0.0, spec.step_deg, size=frames)
    theta = np.empty(frames)
    cur = 0.5 * (lo + hi)
    for i in range(frames):
        cur = min(hi, max(lo, cur + steps[i]))
        theta[i] = cur
    return theta


def _composite(spec: TrajectorySpec, frames: int, rng) -> np.ndarray:
    # opens with a full-range ramp so any chronological prefix already
    # covers the whole angle range, then mixes random segments
    parts = []
    total = 0
    first = replace(spec, kind="ramp-cycle", period_frames=240, dwell_frames=10)
    n0 = min(frames, 260)
    parts.append(_ramp_cycle(first, n0))
    total += n0
    while total < frames:
        n = int(rng.integers(200, 600))
        n = min(n, frames - total)
        kind = ("sinusoid-mix", "ramp-cycle", "random-walk")[int(rng.integers(0, 3))]
        if kind == "sinusoid-mix":
            k = int(rng.integers(1, 4))
            sub = replace(
                spec,
                kind=kind,
                freqs_hz=tuple(rng.uniform(0.1, 1.4, size=k)),
                amplitudes_deg=tuple(rng.uniform(8.0, 62.0, size=k)),
            )
            parts.append(_sinusoid_mix(sub, n, rng))
        elif kind == "ramp-cycle":
            sub = replace(
                spec,
                kind=kind,
                period_frames=int(rng.integers(80, 400)),
                dwell_frames=int(rng.integers(0, 40)),
            )
            parts.append(_ramp_cycle(sub, n))
        else:
            sub = replace(spec, kind=kind, step_deg=float(rng.uniform(0.6, 3.0)))
            parts.append(_random_walk(sub, n, rng))
        total += n
    return np.concatenate(parts)[:frames]


def gen_trajectory(spec: TrajectorySpec, frames: int) -> np.ndarray:
    """Angle series in degrees, length `frames`, clipped to the spec range."""
    if frames < 1:
        raise ConfigError(f"frames must be >= 1, got {frames}")
    rng = substream(spec.seed, "trajectory", spec.kind)
    if spec.kind == "sinusoid-mix":
        return _sinusoid_mix(spec, frames, rng)
    if spec.kind == "ramp-cycle":
        return _ramp_cycle(spec, frames)
    if spec.kind == "random-walk":
        return _random_walk(spec, frames, rng)
    return _composite(spec, frames, rng)


def sensor_response(theta: float, cfg: SurrogateConfig, state=None, rng=None):
    """One time step of the channel response; returns (readings, new_state).

    `state` is the hysteresis memory (starts at zero when None). Noise is
    drawn from `rng` when given and noise_sd > 0.
    """
    if not np.isfinite(theta):
        raise ConfigError(f"theta must be finite, got {theta}")
    s = cfg.stretch(float(theta))
    u = np.zeros(2) if state is None else np.asarray(state, dtype=np.float64)
    u = cfg.lag * u + (1.0 - cfg.lag) * s
    r = np.array(cfg.gain) * u + np.array(cfg.offset)
    if cfg.noise_sd > 0 and rng is not None:
        r = r + rng.normal(0.0, cfg.noise_sd, size=2)
    if cfg.digitize:
        r = np.clip(np.rint(r), 0.0, 1023.0)
    return r, u


def respond_series(thetas: np.ndarray, cfg: SurrogateConfig, rng=None) -> np.ndarray:
    """Vectorized sensor_response over a whole angle series; shape (N, 2)."""
    thetas = np.asarray(thetas, dtype=np.float64)
    s = cfg.stretch(thetas)
    if cfg.lag == 0.0:
        u = s
    else:
        u = np.empty_like(s)
        prev = np.zeros(2)
        lam = cfg.lag
        for i in range(len(thetas)):
            prev = lam * prev + (1.0 - lam) * s[i]
            u[i] = prev
    r = np.array(cfg.gain) * u + np.array(cfg.offset)
    if cfg.noise_sd > 0:
        if rng is None:
            raise ConfigError("noise_sd > 0 requires a random stream")
        r = r + rng.normal(0.0, cfg.noise_sd, size=r.shape)
    if cfg.digitize:
        r = np.clip(np.rint(r), 0.0, 1023.0)
    return r


def _provenance(spec: TrajectorySpec, cfg: SurrogateConfig, seed: int) -> str:
    return f"sim seed={seed} {spec!r} {cfg!r}"


def simulate(spec: TrajectorySpec, cfg: SurrogateConfig, frames: int, seed: int,
             domain: str = "source") -> Dataset:
    """Generate a labeled dataset: trajectory angles paired with readings."""
    validate_surrogate(cfg, spec.angle_range)
    angles = gen_trajectory(spec, frames)
    rng = substream(seed, "sensor-noise")
    readings = respond_series(angles, cfg, rng)
    meta = DatasetMeta(domain=domain, provenance=_provenance(spec, cfg, seed),
                       sample_rate_hz=spec.sample_rate_hz)
    return Dataset(np.arange(frames), readings, angles, meta)


def simulate_from_angles(angles: np.ndarray, cfg: SurrogateConfig, seed: int,
                         domain: str = "source", sample_rate_hz: float = 50.0) -> Dataset:
    """Pair an externally supplied angle series (e.g. from motion files)
    with surrogate readings."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.ndim != 1 or len(angles) < 1:
        raise ConfigError("angles must be a non-empty 1-D series")
    validate_surrogate(cfg, (float(angles.min()), float(max(angles.max(), angles.min() + 1e-9))))
    rng = substream(seed, "sensor-noise")
    readings = respond_series(angles, cfg, rng)
    meta = DatasetMeta(domain=domain, provenance=f"sim-from-angles seed={seed} {cfg!r}",
                       sample_rate_hz=sample_rate_hz)
    return Dataset(np.arange(len(angles)), readings, angles, meta)


def make_domain_pair(source: DomainConfig, target: DomainConfig,
                     frames_s: int, frames_t: int,
                     seed_source: int, seed_target: int):
    """Build (D_s labeled, D_t unlabeled, D_t_eval labeled).

    D_t and D_t_eval hold the same frames; D_t just has the labels removed,
    mirroring how an unsupervised target set is produced from recordings
    whose ground truth is kept aside for evaluation.
    """
    d_s = simulate(source.trajectory, source.sensor, frames_s, seed_source, domain="source")
    d_t_eval = simulate(target.trajectory, target.sensor, frames_t, seed_target, domain="target-eval")
    d_t = strip_labels(d_t_eval)
    d_t = Dataset(d_t.t, d_t.readings, None, replace(d_t.meta, domain="target"))
    return d_s, d_t, d_t_eval


# ---------------------------------------------------------------------------
# benchmark preset and config files

def benchmark_domain_pair(noise_sd: float = 2.0, digitize: bool = True):
    """The standard shifted-domain pair used by the test harness.

    Target differs from source by gains scaled (0.85, 1.15), offsets moved
    up by 20% of each channel's response span, and a different trajectory
    kind, modeling a changed wearing position plus unmatched motions.
    """
    src_traj = TrajectorySpec(kind="composite", angle_range=(40.0, 160.0), seed=101)
    src_sensor = SurrogateConfig(gain=(4.2, 3.6), offset=(90.0, 120.0),
                                 quad=(4e-4, -3e-4), noise_sd=noise_sd,
                                 lag=0.0, digitize=digitize)
    lo, hi = src_traj.angle_range
    span = src_sensor.noiseless(hi) - src_sensor.noiseless(lo)
    tgt_traj = TrajectorySpec(kind="sinusoid-mix", angle_range=(40.0, 160.0),
                              freqs_hz=(0.21, 0.57, 1.13),
                              amplitudes_deg=(55.0, 25.0, 9.0), seed=202)
    tgt_sensor = SurrogateConfig(
        gain=(src_sensor.gain[0] * 0.85, src_sensor.gain[1] * 1.15),
        offset=(src_sensor.offset[0] + 0.2 * float(span[0]),
                src_sensor.offset[1] + 0.2 * float(span[1])),
        quad=src_sensor.quad, noise_sd=noise_sd, lag=0.0, digitize=digitize)
    return DomainConfig(src_traj, src_sensor), DomainConfig(tgt_traj, tgt_sensor)


def _spec_to_section(spec: TrajectorySpec) -> dict:
    return {
        "kind": spec.kind,
        "angle_min": repr(spec.angle_range[0]),
        "angle_max": repr(spec.angle_range[1]),
        "freqs_hz": ",".join(repr(v) for v in spec.freqs_hz),
        "amplitudes_deg": ",".join(repr(v) for v in spec.amplitudes_deg),
        "period_frames": str(spec.period_frames),
        "dwell_frames": str(spec.dwell_frames),
        "step_deg": repr(spec.step_deg),
        "seed": str(spec.seed),
        "sample_rate_hz": repr(spec.sample_rate_hz),
    }


def _sensor_to_section(cfg: SurrogateConfig) -> dict:
    return {
        "gain1": repr(cfg.gain[0]), "gain2": repr(cfg.gain[1]),
        "offset1": repr(cfg.offset[0]), "offset2": repr(cfg.offset[1]),
        "quad1": repr(cfg.quad[0]), "quad2": repr(cfg.quad[1]),
        "noise_sd": repr(cfg.noise_sd),
        "lag": repr(cfg.lag),
        "digitize": str(cfg.digitize).lower(),
    }


def _spec_from_section(sec) -> TrajectorySpec:
    def floats(key):
        raw = sec.get(key, "").strip()
        return tuple(float(v) for v in raw.split(",")) if raw else ()

    return TrajectorySpec(
        kind=sec.get("kind", "composite"),
        angle_range=(sec.getfloat("angle_min", 40.0), sec.getfloat("angle_max", 160.0)),
        freqs_hz=floats("freqs_hz") or (0.2, 0.55, 1.1),
        amplitudes_deg=floats("amplitudes_deg") or (45.0, 20.0, 8.0),
        period_frames=sec.getint("period_frames", 200),
        dwell_frames=sec.getint("dwell_frames", 0),
        step_deg=sec.getfloat("step_deg", 1.5),
        seed=sec.getint("seed", 0),
        sample_rate_hz=sec.getfloat("sample_rate_hz", 50.0),
    )


def _sensor_from_section(sec) -> SurrogateConfig:
    return SurrogateConfig(
        gain=(sec.getfloat("gain1", 4.2), sec.getfloat("gain2", 3.6)),
        offset=(sec.getfloat("offset1", 90.0), sec.getfloat("offset2", 120.0)),
        quad=(sec.getfloat("quad1", 0.0), sec.getfloat("quad2", 0.0)),
        noise_sd=sec.getfloat("noise_sd", 0.0),
        lag=sec.getfloat("lag", 0.0),
        digitize=sec.getboolean("digitize", True),
    )


def save_pair_config(source: DomainConfig, target: DomainConfig, path) -> None:
    """Write the key-value config file describing a source/target pair."""
    cp = configparser.ConfigParser()
    cp["source.trajectory"] = _spec_to_section(source.trajectory)
    cp["source.sensor"] = _sensor_to_section(source.sensor)
    cp["target.trajectory"] = _spec_to_section(target.trajectory)
    cp["target.sensor"] = _sensor_to_section(target.sensor)
    buf = io.StringIO()
    cp.write(buf)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def load_pair_config(path) -> tuple[DomainConfig, DomainConfig]:
    """Read a source/target pair config file."""
    cp = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        cp.read_file(fh)
    for sec in ("source.trajectory", "source.sensor", "target.trajectory", "target.sensor"):
        if sec not in cp:
            raise ConfigError(f"{path}: missing section [{sec}]")
    source = DomainConfig(_spec_from_section(cp["source.trajectory"]),
                          _sensor_from_section(cp["source.sensor"]))
    target = DomainConfig(_spec_from_section(cp["target.trajectory"]),
                          _sensor_from_section(cp["target.sensor"]))
    return source, target
