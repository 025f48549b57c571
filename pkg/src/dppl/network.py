"""Network scenarios: a 2D Poisson ad-hoc (D2D) network and a 3D drone cellular network.

Both produce a :class:`NetworkInstance`, a set of M Tx->Rx links with the full
linear channel-gain matrix ``gain[j, i]`` (Tx j to Rx i).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1
THERMAL_NOISE_DBM_HZ = -174.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w) + 30.0


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    tx_pos: np.ndarray
    rx_pos: np.ndarray
    gain: np.ndarray
    p_high: float
    noise: float
    scenario: str
    seed: object = None
    config: dict = field(default_factory=dict)
    tx_ids: np.ndarray | None = None  # sector index per link (drone scenario)
    retries: int = 0

    def __post_init__(self):
        for name in ("tx_pos", "rx_pos", "gain"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.tx_ids is not None:
            ids = np.array(self.tx_ids, dtype=int)
            ids.setflags(write=False)
            object.__setattr__(self, "tx_ids", ids)
        m = self.gain.shape[0]
        if m < 1 or self.gain.shape != (m, m):
            raise ValueError(f"gain must be a non-empty square matrix, got {self.gain.shape}")
        if self.tx_pos.shape != (m, 3) or self.rx_pos.shape != (m, 3):
            raise ValueError("positions must be (m, 3) arrays")
        if not np.all(np.isfinite(self.gain)) or np.any(self.gain <= 0):
            raise ValueError("gains must be positive and finite")

    @property
    def m(self) -> int:
        return self.gain.shape[0]

    def to_dict(self) -> dict:
        d = {
            "schemaVersion": SCHEMA_VERSION,
            "scenarioTag": self.scenario,
            "m": self.m,
            "txPos": self.tx_pos.tolist(),
            "rxPos": self.rx_pos.tolist(),
            "gain": self.gain.tolist(),
            "pHighWatts": self.p_high,
            "noiseWatts": self.noise,
            "seed": self.seed,
            "configEcho": self.config,
            "retries": self.retries,
        }
        if self.tx_ids is not None:
            d["txIds"] = self.tx_ids.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkInstance":
        if d.get("schemaVersion") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schemaVersion {d.get('schemaVersion')!r}")
        inst = cls(
            tx_pos=d["txPos"],
            rx_pos=d["rxPos"],
            gain=d["gain"],
            p_high=float(d["pHighWatts"]),
            noise=float(d["noiseWatts"]),
            scenario=d["scenarioTag"],
            seed=d.get("seed"),
            config=d.get("configEcho", {}),
            tx_ids=d.get("txIds"),
            retries=int(d.get("retries", 0)),
        )
        if inst.m != d["m"]:
            raise ValueError(f"m={d['m']} does not match gain matrix size {inst.m}")
        return inst

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "NetworkInstance":
        return cls.from_dict(json.loads(text))


# -- link evaluation --------------------------------------------------------

def _mask(inst: NetworkInstance, active) -> np.ndarray:
    mask = np.zeros(inst.m, dtype=bool)
    idx = list(active)
    if idx:
        if min(idx) < 0 or max(idx) >= inst.m:
            raise ValueError(f"active set {idx} out of range for m={inst.m}")
        mask[idx] = True
    return mask


def sinr_powers(inst: NetworkInstance, powers) -> np.ndarray:
    """SINR of every link under an arbitrary per-link power vector (watts)."""
    p = np.asarray(powers, dtype=float)
    rx = p[:, None] * inst.gain  # rx[j, i]: power from Tx j at Rx i
    signal = np.diag(rx)
    interference = rx.sum(axis=0) - signal
    return signal / (interference + inst.noise)


def sinr(inst: NetworkInstance, active) -> np.ndarray:
    """SINR per link with the ``active`` links at full power; inactive links get 0."""
    mask = _mask(inst, active)
    gamma = sinr_powers(inst, np.where(mask, inst.p_high, 0.0))
    return np.where(mask, gamma, 0.0)


def sum_rate(inst: NetworkInstance, active) -> float:
    """Sum of log2(1 + SINR) over the active links, bits/s/Hz."""
    mask = _mask(inst, active)
    if not mask.any():
        return 0.0
    return float(np.sum(np.log2(1.0 + sinr(inst, active)[mask])))


# -- ad-hoc (D2D) scenario --------------------------------------------------

@dataclass
class AdHocConfig:
    """Poisson D2D pairs on a square window; lengths in normalized units."""

    density: float = 20.0
    side: float = 1.0
    pair_distance: float = 0.05
    pathloss_exp: float = 2.0
    p_high_dbm: float = 16.0
    noise_dbm: float = -10.0
    rx_placement: str = "circle"  # or "disk"
    num_links: int | None = None  # fixes M instead of drawing it
    seed: int = 0

    def validate(self):
        if self.density <= 0 or self.side <= 0 or self.pair_distance <= 0:
            raise ValueError("density, side and pair_distance must be positive")
        if self.pathloss_exp < 2:
            raise ValueError("pathloss exponent must be >= 2")
        if self.rx_placement not in ("circle", "disk"):
            raise ValueError(f"unknown rx_placement {self.rx_placement!r}")
        if self.num_links is not None and self.num_links < 1:
            raise ValueError("num_links must be >= 1")


def pairwise_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d[j, i] = |a_j - b_i|."""
    return np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1))


def gen_adhoc(cfg: AdHocConfig, seed=None) -> NetworkInstance:
    cfg.validate()
    seed = cfg.seed if seed is None else seed
    base = list(np.atleast_1d(seed))
    retries = 0
    while True:
        rng = np.random.default_rng(base + [retries] if retries else base)
        m = cfg.num_links if cfg.num_links is not None else rng.poisson(cfg.density * cfg.side**2)
        if m > 0:
            break
        retries += 1
    tx = np.zeros((m, 3))
    tx[:, :2] = rng.uniform(0.0, cfg.side, size=(m, 2))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=m)
    radius = np.full(m, cfg.pair_distance)
    if cfg.rx_placement == "disk":
        radius = cfg.pair_distance * np.sqrt(rng.uniform(size=m))
    rx = tx.copy()
    rx[:, 0] += radius * np.cos(angle)
    rx[:, 1] += radius * np.sin(angle)
    gain = pairwise_distance(tx, rx) ** (-cfg.pathloss_exp)
    return NetworkInstance(
        tx_pos=tx, rx_pos=rx, gain=gain,
        p_high=dbm_to_watts(cfg.p_high_dbm), noise=dbm_to_watts(cfg.noise_dbm),
        scenario="adhoc", seed=_jsonable(seed), config=asdict(cfg), retries=retries,
    )


def _jsonable(seed):
    if isinstance(seed, (list, tuple, np.ndarray)):
        return [int(s) for s in seed]
    return int(seed)


# -- drone cellular scenario ------------------------------------------------

@dataclass
class DroneCellConfig:
    """19-cell, 3-sector hexagonal layout serving drones (defaults from the simulation table)."""

    isd: float = 500.0
    rings: int = 2
    bs_height: float = 25.0
    drone_height_min: float = 1.5
    drone_height_max: float = 300.0
    carrier_hz: float = 6e9
    bandwidth_hz: float = 10e6
    noise_figure_db: float = 7.0
    tx_power_dbm: float = 46.0
    downtilt_deg: float = 100.0
    num_drones: int = 1140
    beamwidth_deg: float = 65.0
    max_attenuation_db: float = 30.0
    side_lobe_db: float = 30.0
    element_gain_dbi: float = 8.0
    wraparound: bool = True
    seed: int = 0

    def validate(self):
        if self.isd <= 0 or self.bs_height <= 0:
            raise ValueError("isd and bs_height must be positive")
        if not 0 < self.drone_height_min < self.drone_height_max:
            raise ValueError("need 0 < drone_height_min < drone_height_max")
        if self.num_drones < 1:
            raise ValueError("num_drones must be >= 1")
        if self.wraparound and self.rings != 2:
            raise ValueError("wraparound is only implemented for the 19-cell (2-ring) layout")

    @property
    def noise_watts(self) -> float:
        return dbm_to_watts(THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(self.bandwidth_hz)
                            + self.noise_figure_db)


SECTOR_AZIMUTHS = (30.0, 150.0, 270.0)
# translations of the 19-cell cluster onto its 6 neighbouring copies, axial coordinates
_WRAP_AXIAL = ((5, -2), (2, 3), (-3, 5), (-5, 2), (-2, -3), (3, -5))


def _axial_to_xy(q, r, isd: float) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    return np.stack([isd * (q + r / 2.0), isd * r * math.sqrt(3.0) / 2.0], axis=-1)


def _hex_cells(rings: int) -> list[tuple[int, int]]:
    cells = [(q, r) for q in range(-rings, rings + 1) for r in range(-rings, rings + 1)
             if abs(q + r) <= rings]
    return sorted(cells, key=lambda c: (max(abs(c[0]), abs(c[1]), abs(c[0] + c[1])), c))


def cell_centers(cfg: DroneCellConfig) -> np.ndarray:
    q, r = zip(*_hex_cells(cfg.rings))
    return _axial_to_xy(q, r, cfg.isd)


def wrap_shifts(cfg: DroneCellConfig) -> np.ndarray:
    """Horizontal image offsets including the identity, shape (7, 2) (or (1, 2))."""
    if not cfg.wraparound:
        return np.zeros((1, 2))
    q, r = zip(*_WRAP_AXIAL)
    return np.vstack([np.zeros((1, 2)), _axial_to_xy(q, r, cfg.isd)])


def sector_sites(cfg: DroneCellConfig) -> tuple[np.ndarray, np.ndarray]:
    """BS positions (3 per cell, co-located) and boresight azimuths in degrees."""
    centers = cell_centers(cfg)
    pos = np.repeat(np.column_stack([centers, np.full(len(centers), cfg.bs_height)]), 3, axis=0)
    az = np.tile(np.array(SECTOR_AZIMUTHS), len(centers))
    return pos, az


def antenna_gain_db(azimuth_deg, zenith_deg, downtilt_deg: float = 100.0,
                    beamwidth_deg: float = 65.0, max_attenuation_db: float = 30.0,
                    side_lobe_db: float = 30.0, element_gain_dbi: float = 8.0):
    """Sectorized element pattern in dBi.

    ``azimuth_deg`` is measured from the sector boresight in [-180, 180];
    ``zenith_deg`` follows the 0 = up, 90 = horizon, 180 = down convention, so
    the default 100 degree tilt points 10 degrees below the horizon.
    """
    phi = np.asarray(azimuth_deg, dtype=float)
    theta = np.asarray(zenith_deg, dtype=float)
    a_h = -np.minimum(12.0 * (phi / beamwidth_deg) ** 2, max_attenuation_db)
    a_v = -np.minimum(12.0 * ((theta - downtilt_deg) / beamwidth_deg) ** 2, side_lobe_db)
    return element_gain_dbi - np.minimum(-(a_h + a_v), max_attenuation_db)


def pathloss_db(d3d, carrier_hz: float):
    """LOS pathloss for aerial users in the urban-macro setting, d in metres."""
    d3d = np.maximum(np.asarray(d3d, dtype=float), 1.0)
    return 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(carrier_hz / 1e9)


def link_gains(cfg: DroneCellConfig, ue_pos: np.ndarray):
    """Linear gains from every sector to every UE, shape (n_sectors, n_ue).

    With wraparound each (sector, UE) pair uses the UE image nearest to the
    sector in the horizontal plane.
    """
    bs, az = sector_sites(cfg)
    shifts = wrap_shifts(cfg)
    # images[k, u] horizontal position of UE u shifted by image k
    images = ue_pos[None, :, :2] + shifts[:, None, :]
    delta = images[:, None, :, :] - bs[None, :, None, :2]  # (k, s, u, 2)
    horiz = np.linalg.norm(delta, axis=-1)
    best = np.argmin(horiz, axis=0)  # (s, u)
    dxy = np.take_along_axis(delta, best[None, :, :, None], axis=0)[0]
    dh = np.take_along_axis(horiz, best[None], axis=0)[0]
    dz = ue_pos[None, :, 2] - bs[:, None, 2]
    azimuth = np.degrees(np.arctan2(dxy[..., 1], dxy[..., 0])) - az[:, None]
    azimuth = (azimuth + 180.0) % 360.0 - 180.0
    zenith = np.degrees(np.arctan2(dh, dz))
    g_db = antenna_gain_db(azimuth, zenith, cfg.downtilt_deg, cfg.beamwidth_deg,
                           cfg.max_attenuation_db, cfg.side_lobe_db, cfg.element_gain_dbi)
    pl = pathloss_db(np.hypot(dh, dz), cfg.carrier_hz)
    return 10.0 ** ((g_db - pl) / 10.0)


def associate(cfg: DroneCellConfig, ue_pos: np.ndarray) -> np.ndarray:
    """Serving sector per UE: maximum received power, lowest index on ties."""
    return np.argmax(link_gains(cfg, np.atleast_2d(ue_pos)), axis=0)


def _in_layout(cfg: DroneCellConfig, xy: np.ndarray) -> np.ndarray:
    q, r = zip(*_hex_cells(cfg.rings + 1))
    centers = _axial_to_xy(q, r, cfg.isd)
    n_inner = len(_hex_cells(cfg.rings))
    nearest = np.argmin(pairwise_distance(xy, centers), axis=1)
    return nearest < n_inner


def place_drones(cfg: DroneCellConfig, rng) -> np.ndarray:
    """Uniform positions over the union of hexagonal cells, uniform heights."""
    extent = cfg.isd * (cfg.rings + 1)
    pts = np.zeros((0, 2))
    while len(pts) < cfg.num_drones:
        cand = rng.uniform(-extent, extent, size=(2 * cfg.num_drones, 2))
        pts = np.vstack([pts, cand[_in_layout(cfg, cand)]])
    z = rng.uniform(cfg.drone_height_min, cfg.drone_height_max, size=cfg.num_drones)
    return np.column_stack([pts[: cfg.num_drones], z])


def gen_dronecell(cfg: DroneCellConfig, seed=None) -> NetworkInstance:
    """One scheduling snapshot: a single randomly chosen associated drone per sector."""
    cfg.validate()
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(list(np.atleast_1d(seed)))
    drones = place_drones(cfg, rng)
    gains = link_gains(cfg, drones)
    serving = np.argmax(gains, axis=0)
    bs, _ = sector_sites(cfg)
    sectors, chosen = [], []
    for s in range(len(bs)):
        members = np.flatnonzero(serving == s)
        if members.size:
            sectors.append(s)
            chosen.append(int(rng.choice(members)))
    sectors = np.asarray(sectors)
    chosen = np.asarray(chosen)
    gain = gains[np.ix_(sectors, chosen)]  # gain[j, i]: sector of link j -> drone of link i
    return NetworkInstance(
        tx_pos=bs[sectors], rx_pos=drones[chosen], gain=gain,
        p_high=dbm_to_watts(cfg.tx_power_dbm), noise=cfg.noise_watts,
        scenario="dronecell", seed=_jsonable(seed), config=asdict(cfg), tx_ids=sectors,
    )


def generate(scenario: str, cfg, seed=None) -> NetworkInstance:
    if scenario == "adhoc":
        return gen_adhoc(cfg, seed)
    if scenario == "dronecell":
        return gen_dronecell(cfg, seed)
    raise ValueError(f"unknown scenario {scenario!r}")


def interference_matrix(inst: NetworkInstance, powers: Sequence[float] | None = None) -> np.ndarray:
    """I[j, i] = P_j * gain[j, i] for j != i, zero diagonal."""
    p = np.full(inst.m, inst.p_high) if powers is None else np.asarray(powers, dtype=float)
    out = p[:, None] * inst.gain
    np.fill_diagonal(out, 0.0)
    return out
