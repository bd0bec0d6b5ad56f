"""Synthetic ground-truth trajectories from finite-difference solvers.

Two systems are supported on square periodic grids:

* shallow water (channels h, u, v), integrated with a conservative
  Lax-Friedrichs flux scheme, so total mass is conserved to roundoff;
* scalar advection-diffusion (one channel), upwind advection plus centered
  diffusion in flux form, conserving the total scalar.

Rare high-amplitude events are injected by perturbing one stored frame and
re-running the solver from the perturbed state, so injected events stay
dynamically consistent and a physics-residual scorer remains meaningful.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dataio import DatasetManifest
from .errors import NumericsError, ShapeError, StabilityError

SYSTEM_CHANNELS = {"shallow_water": 3, "advection_diffusion": 1}

CFL_LIMIT = 0.5
DIFFUSION_LIMIT = 0.25


@dataclass
class FieldSequence:
    """A [T,C,H,W] trajectory with the physics needed to advance its frames."""

    data: np.ndarray
    dt: float
    dx: float
    system_id: str
    physics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 4:
            raise ShapeError(f"FieldSequence: expected [T,C,H,W], got {self.data.shape}")
        t, c, h, w = self.data.shape
        if t < 2:
            raise ShapeError(f"FieldSequence: need at least 2 frames, got {t}")
        if h != w:
            raise ShapeError(f"FieldSequence: grid must be square, got {h}x{w}")
        if self.system_id not in SYSTEM_CHANNELS:
            raise ShapeError(f"FieldSequence: unknown system {self.system_id!r}")
        if c != SYSTEM_CHANNELS[self.system_id]:
            raise ShapeError(
                f"FieldSequence: {self.system_id} has {SYSTEM_CHANNELS[self.system_id]} "
                f"channels, got {c}"
            )
        if not np.isfinite(self.data).all():
            raise NumericsError("FieldSequence: non-finite values")

    @property
    def n_frames(self):
        return self.data.shape[0]


def _swe_cfl_check(h, u, v, dt, dx, g):
    if h.min() <= 0.0:
        raise NumericsError("shallow water: non-positive depth")
    c = np.sqrt(g * h)
    speed = max((np.abs(u) + c).max(), (np.abs(v) + c).max())
    if dt * speed / dx > CFL_LIMIT:
        raise StabilityError(
            f"shallow water CFL violated: dt*speed/dx = {dt * speed / dx:.4f} > {CFL_LIMIT}"
        )


def swe_substep(state, dt, dx, g):
    """One Lax-Friedrichs step on a primitive [3,H,W] state (h,u,v)."""
    h, u, v = state[0], state[1], state[2]
    _swe_cfl_check(h, u, v, dt, dx, g)
    nh, nmu, nmv = kernels.swe_lxf_step(h, h * u, h * v, dt, dx, g)
    if nh.min() <= 0.0 or not np.isfinite(nh).all():
        raise NumericsError("shallow water: state left the positive-depth regime")
    return np.stack([nh, nmu / nh, nmv / nh])


def advdiff_substep(state, dt, dx, velocity, kappa):
    """One upwind + centered-diffusion step on a [1,H,W] scalar state."""
    vx, vy = velocity
    if kappa * dt / (dx * dx) > DIFFUSION_LIMIT:
        raise StabilityError(
            f"advection-diffusion: kappa*dt/dx^2 = {kappa * dt / (dx * dx):.4f} "
            f"> {DIFFUSION_LIMIT}"
        )
    if (abs(vx) + abs(vy)) * dt / dx > 1.0:
        raise StabilityError("advection-diffusion: advective CFL violated")
    out = kernels.advdiff_step(state[0], float(vx), float(vy), float(kappa), dt, dx)
    return out[None]


def frame_step(frame, system_id, dx, physics):
    """Advance one stored frame by one frame interval (possibly many substeps).

    This is the single shared dynamics entry point: dataset generation, event
    re-simulation and the physics-residual scorer all go through it, so their
    results agree bitwise.
    """
    dt_sub = float(physics["dt_sub"])
    n_sub = int(physics.get("steps_per_frame", 1))
    state = np.asarray(frame, dtype=np.float64)
    if system_id == "shallow_water":
        g = float(physics["g"])
        for _ in range(n_sub):
            state = swe_substep(state, dt_sub, dx, g)
    elif system_id == "advection_diffusion":
        velocity = tuple(physics["velocity"])
        kappa = float(physics["kappa"])
        for _ in range(n_sub):
            state = advdiff_substep(state, dt_sub, dx, velocity, kappa)
    else:
        raise ShapeError(f"unknown system {system_id!r}")
    return state


def simulate_shallow_water(h0, u0, v0, steps, dt, dx, g):
    """Integrate the 2D shallow-water system; returns steps+1 frames (h,u,v)."""
    if steps < 1:
        raise ShapeError("simulate_shallow_water: steps must be >= 1")
    state = np.stack([np.asarray(h0, dtype=np.float64),
                      np.asarray(u0, dtype=np.float64),
                      np.asarray(v0, dtype=np.float64)])
    frames = np.empty((steps + 1,) + state.shape)
    frames[0] = state
    for n in range(steps):
        state = swe_substep(state, dt, dx, g)
        frames[n + 1] = state
    return FieldSequence(frames, dt, dx, "shallow_water",
                         {"g": g, "dt_sub": dt, "steps_per_frame": 1})


def simulate_advection_diffusion(c0, velocity, kappa, steps, dt, dx):
    """Integrate scalar transport; returns steps+1 single-channel frames."""
    if steps < 1:
        raise ShapeError("simulate_advection_diffusion: steps must be >= 1")
    state = np.asarray(c0, dtype=np.float64)[None]
    frames = np.empty((steps + 1,) + state.shape)
    frames[0] = state
    for n in range(steps):
        state = advdiff_substep(state, dt, dx, velocity, kappa)
        frames[n + 1] = state
    return FieldSequence(frames, dt, dx, "advection_diffusion",
                         {"velocity": list(velocity), "kappa": kappa,
                          "dt_sub": dt, "steps_per_frame": 1})


def torus_gaussian(n, center, sigma):
    """Periodic Gaussian bump on an n x n grid, peak 1 at `center`."""
    idx = np.arange(n, dtype=np.float64)
    di = np.abs(idx - center[0])
    di = np.minimum(di, n - di)
    dj = np.abs(idx - center[1])
    dj = np.minimum(dj, n - dj)
    return np.exp(-(di[:, None] ** 2 + dj[None, :] ** 2) / (2.0 * sigma ** 2))


def random_initial_state(system_id, n, rng, n_bumps=(1, 3)):
    """Smooth random initial condition: a few periodic Gaussian bumps."""
    k = int(rng.integers(n_bumps[0], n_bumps[1] + 1))
    bumps = np.zeros((n, n))
    for _ in range(k):
        center = rng.integers(0, n, size=2)
        sigma = rng.uniform(2.0, 5.0)
        amp = rng.uniform(-0.10, 0.25)
        bumps += amp * torus_gaussian(n, center, sigma)
    if system_id == "shallow_water":
        return np.stack([1.0 + bumps, np.zeros((n, n)), np.zeros((n, n))])
    return (0.5 + np.abs(bumps))[None]


def inject_extreme_events(seq, rate, amplitude, rng):
    """Maybe add one localized burst and re-evolve the trajectory from it.

    With probability `rate` a Gaussian bump of the given amplitude is added to
    channel 0 at a random onset frame; later frames are re-simulated from the
    perturbed state. Returns (sequence, [T,H,W] mask of event cells); frames
    before the onset are untouched.
    """
    if not 0.0 <= rate <= 1.0:
        raise ShapeError(f"inject_extreme_events: rate must be in [0,1], got {rate}")
    if amplitude < 0.0:
        raise ShapeError(f"inject_extreme_events: amplitude must be >= 0, got {amplitude}")
    t, c, h, w = seq.data.shape
    mask = np.zeros((t, h, w), dtype=bool)
    if rng.random() >= rate:
        return seq, mask
    onset = int(rng.integers(1, t))
    center = rng.integers(0, h, size=2)
    sigma = rng.uniform(1.5, 3.0)
    bump = amplitude * torus_gaussian(h, center, sigma)

    data = seq.data.copy()
    data[onset, 0] += bump
    for n in range(onset + 1, t):
        data[n] = frame_step(data[n - 1], seq.system_id, seq.dx, seq.physics)

    cut = 0.05 * amplitude
    mask[onset] = bump > cut
    if t > onset + 1:
        dev = np.abs(data[onset + 1:] - seq.data[onset + 1:]).max(axis=1)
        mask[onset + 1:] = dev > cut
    out = FieldSequence(data, seq.dt, seq.dx, seq.system_id, dict(seq.physics))
    return out, mask


def trajectory_rng(seed, index):
    """Per-trajectory stream from a counter-based splittable generator."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def conservation_drift(seq):
    """Relative drift of the conserved quantity (mass or total scalar)."""
    q = seq.data[:, 0].sum(axis=(1, 2)) * seq.dx ** 2
    return float(np.abs(q - q[0]).max() / np.abs(q[0]))


def build_dataset(data_cfg, seed):
    """Generate all trajectories for a config; returns (f32 array, manifest, summary).

    Frames are stored every `steps_per_frame` solver substeps. The per-channel
    event threshold (95th percentile over the train split) is recorded in the
    manifest so downstream event metrics are comparable across models.
    """
    system = data_cfg["system_id"]
    if system not in SYSTEM_CHANNELS:
        raise ShapeError(f"unknown system_id {system!r}")
    n = int(data_cfg["grid"])
    t_in, t_out = int(data_cfg["input_len"]), int(data_cfg["target_len"])
    frames = t_in + t_out
    n_train, n_val, n_test = (int(data_cfg[k]) for k in ("n_train", "n_val", "n_test"))
    n_total = n_train + n_val + n_test
    dt_sub = float(data_cfg["dt"])
    dx = float(data_cfg["dx"])
    spf = int(data_cfg["steps_per_frame"])
    rate = float(data_cfg["extreme_event_rate"])
    amplitude = float(data_cfg["event_amplitude"])

    if system == "shallow_water":
        physics = {"g": float(data_cfg["g"]), "dt_sub": dt_sub, "steps_per_frame": spf}
    else:
        physics = {"velocity": list(data_cfg["velocity"]), "kappa": float(data_cfg["kappa"]),
                   "dt_sub": dt_sub, "steps_per_frame": spf}

    c = SYSTEM_CHANNELS[system]
    all_data = np.empty((n_total, frames, c, n, n), dtype=np.float32)
    n_events = 0
    max_drift = 0.0
    for i in range(n_total):
        rng = trajectory_rng(seed, i)
        state0 = random_initial_state(system, n, rng)
        if system == "shallow_water":
            sim = simulate_shallow_water(state0[0], state0[1], state0[2],
                                         (frames - 1) * spf, dt_sub, dx, float(data_cfg["g"]))
        else:
            sim = simulate_advection_diffusion(state0[0], tuple(data_cfg["velocity"]),
                                               float(data_cfg["kappa"]),
                                               (frames - 1) * spf, dt_sub, dx)
        max_drift = max(max_drift, conservation_drift(sim))
        traj = FieldSequence(sim.data[::spf].copy(), dt_sub * spf, dx, system, physics)
        traj, mask = inject_extreme_events(traj, rate, amplitude, rng)
        if mask.any():
            n_events += 1
        all_data[i] = traj.data.astype(np.float32)

    train_flat = all_data[:n_train].transpose(2, 0, 1, 3, 4).reshape(c, -1)
    threshold = np.percentile(train_flat, 95.0, axis=1)

    manifest = DatasetManifest(
        payload=str(data_cfg.get("payload_name", "dataset.bvqd")),
        n_train=n_train, n_val=n_val, n_test=n_test,
        input_len=t_in, target_len=t_out,
        extreme_event_rate=rate, seed=int(seed),
        system_id=system, dt=dt_sub * spf, dx=dx,
        physics=physics, event_threshold=[float(x) for x in threshold],
    )
    summary = {"n_events": n_events, "max_conservation_drift": max_drift}
    return all_data, manifest, summary
