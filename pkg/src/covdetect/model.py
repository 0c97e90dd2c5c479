"""System model: cell geometry, channels, signatures, activity, covariances.

Multi-cell uplink with B base stations on a hexagonal layout (B=1 or the
7-cell wrap-around cluster), N devices per cell of which K are active, and
length-L complex Gaussian signature sequences. Large-scale gains follow the
urban path-loss model PL(d) = 128.1 + 37.6 log10(d_km); the noise variance
is normalized by the device transmit power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MIN_BS_DEVICE_DISTANCE_M = 10.0  # re-draw floor; the path-loss law diverges at d -> 0


@dataclass
class SystemConfig:
    B: int = 1                       # cells
    N: int = 100                     # devices per cell
    K: int = 10                      # active devices per cell
    L: int = 10                      # signature length
    M: int = 64                      # antennas per BS
    cell_radius_m: float = 250.0
    tx_power_dbm: float = 23.0
    noise_psd_dbm_hz: float = -169.0
    bandwidth_hz: float = 10e6
    seed: int = 0
    shadowing_std_db: float = 0.0    # optional log-normal shadowing, default off

    def __post_init__(self):
        if not (0 <= self.K <= self.N):
            raise ValueError("need 0 <= K <= N")
        if self.L < 1 or self.M < 1 or self.B < 1:
            raise ValueError("L, M, B must be positive")
        if self.cell_radius_m <= 0:
            raise ValueError("cell_radius_m must be positive")

    @property
    def noise_variance(self) -> float:
        """Noise variance normalized by transmit power (linear scale)."""
        noise_dbm = self.noise_psd_dbm_hz + 10.0 * math.log10(self.bandwidth_hz)
        return 10.0 ** ((noise_dbm - self.tx_power_dbm) / 10.0)

    @classmethod
    def from_file(cls, path: str) -> "SystemConfig":
        """Read a key=value config file (# comments and blank lines ignored)."""
        kwargs = {}
        fields = {f: t for f, t in cls.__annotations__.items()}
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in fields:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                caster = int if fields[key] == "int" else float
                kwargs[key] = caster(value)
        return cls(**kwargs)


@dataclass
class NetworkInstance:
    bs_positions: np.ndarray       # (B, 2) meters
    device_positions: np.ndarray   # (B, N, 2) meters
    gains: np.ndarray              # (B, B, N); gains[b, j, n] = g^2_{bjn}
    wrap_translates: np.ndarray    # (T, 2) lattice translation vectors

    @property
    def n_cells(self) -> int:
        return self.bs_positions.shape[0]


@dataclass
class SignatureSet:
    matrices: list                 # B complex (L, N) arrays

    @property
    def stacked(self) -> np.ndarray:
        """The L x (B*N) matrix [S_1, ..., S_B]."""
        return np.concatenate(self.matrices, axis=1)

    @property
    def L(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def N(self) -> int:
        return self.matrices[0].shape[1]


@dataclass
class ActivityPattern:
    a: np.ndarray                  # (B, N) ints in {0, 1}

    @property
    def support(self) -> list:
        return [np.flatnonzero(self.a[b]).tolist() for b in range(self.a.shape[0])]

    @property
    def flat(self) -> np.ndarray:
        """Stacked length-(B*N) indicator vector, cell-major."""
        return self.a.reshape(-1)


@dataclass
class CovarianceSet:
    matrices: list                 # B complex Hermitian (L, L) arrays
    kind: str                      # "sample" | "model" | "reconstructed"
    noise_var: float = 0.0

    def __post_init__(self):
        for S in self.matrices:
            herm_err = np.max(np.abs(S - S.conj().T))
            scale = max(np.max(np.abs(S)), 1e-300)
            if herm_err > 1e-12 * scale:
                raise ValueError("covariance matrix is not Hermitian")


def _hex_lattice(radius: float):
    """BS positions and wrap-around translates for the 7-cell cluster.

    BS spacing is sqrt(3)*radius (hexagon circumradius = cell radius); the
    cluster tiles the plane with period vectors T1 = 2v1 + v2, T2 = -v1 + 3v2.
    """
    v1 = math.sqrt(3.0) * radius * np.array([1.0, 0.0])
    v2 = math.sqrt(3.0) * radius * np.array([0.5, math.sqrt(3.0) / 2.0])
    centers = np.array([[0.0, 0.0], v1, -v1, v2, -v2, v1 - v2, v2 - v1])
    t1 = 2.0 * v1 + v2
    t2 = -v1 + 3.0 * v2
    translates = np.array([[0.0, 0.0], t1, -t1, t2, -t2, t1 - t2, t2 - t1])
    return centers, translates


def wrap_distance(point: np.ndarray, bs: np.ndarray, translates: np.ndarray) -> float:
    """Minimum distance from point to bs over the wrap-around translates."""
    deltas = point[None, :] + translates - bs[None, :]
    return float(np.min(np.linalg.norm(deltas, axis=1)))


def _sample_in_hexagon(center, radius, rng):
    """Uniform point in the pointy-top hexagon of circumradius `radius`."""
    # Voronoi cell of the triangular lattice: within sqrt(3)/2*radius of the
    # center along each of the six neighbor directions.
    half_width = math.sqrt(3.0) / 2.0 * radius
    angles = np.arange(6) * (math.pi / 3.0)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    while True:
        p = rng.uniform(-radius, radius, size=2)
        if np.all(dirs @ p <= half_width) and np.all(dirs @ p >= -half_width):
            return center + p


def path_loss_db(d_km: float) -> float:
    return 128.1 + 37.6 * math.log10(d_km)


def build_network(cfg: SystemConfig, rng=None) -> NetworkInstance:
    """Draw device positions and compute all large-scale gains g^2_{bjn}.

    Supports B in {1, 7}. Distances use the wrap-around metric; devices
    closer than 10 m to any BS are re-drawn.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if cfg.B == 1:
        centers = np.zeros((1, 2))
        translates = np.zeros((1, 2))
    elif cfg.B == 7:
        centers, translates = _hex_lattice(cfg.cell_radius_m)
    else:
        raise ValueError(f"unsupported layout B={cfg.B}; supported: 1, 7")

    B, N = cfg.B, cfg.N
    device_positions = np.zeros((B, N, 2))
    for j in range(B):
        for n in range(N):
            while True:
                p = _sample_in_hexagon(centers[j], cfg.cell_radius_m, rng)
                dmin = min(wrap_distance(p, centers[b], translates) for b in range(B))
                if dmin >= MIN_BS_DEVICE_DISTANCE_M:
                    device_positions[j, n] = p
                    break

    gains = np.zeros((B, B, N))
    for b in range(B):
        for j in range(B):
            for n in range(N):
                d_m = wrap_distance(device_positions[j, n], centers[b], translates)
                pl = path_loss_db(d_m / 1000.0)
                if cfg.shadowing_std_db > 0.0:
                    pl += rng.normal(0.0, cfg.shadowing_std_db)
                gains[b, j, n] = 10.0 ** (-pl / 10.0)
    return NetworkInstance(bs_positions=centers, device_positions=device_positions,
                           gains=gains, wrap_translates=translates)


def sample_activity(cfg: SystemConfig, rng) -> ActivityPattern:
    """Uniformly random K-subset of active devices in each cell."""
    a = np.zeros((cfg.B, cfg.N), dtype=int)
    for b in range(cfg.B):
        active = rng.choice(cfg.N, size=cfg.K, replace=False)
        a[b, active] = 1
    return ActivityPattern(a=a)


def generate_signatures(cfg: SystemConfig, rng) -> SignatureSet:
    """i.i.d. CN(0, 1) signature entries: real/imag parts are N(0, 1/2)."""
    mats = []
    for _ in range(cfg.B):
        re = rng.normal(0.0, math.sqrt(0.5), size=(cfg.L, cfg.N))
        im = rng.normal(0.0, math.sqrt(0.5), size=(cfg.L, cfg.N))
        mats.append(re + 1j * im)
    return SignatureSet(matrices=mats)


def _crandn(rng, shape, var=1.0):
    s = math.sqrt(var / 2.0)
    return rng.normal(0.0, s, size=shape) + 1j * rng.normal(0.0, s, size=shape)


def simulate_received(net: NetworkInstance, sigs: SignatureSet, act: ActivityPattern,
                      cfg: SystemConfig, rng, noise_var: float | None = None) -> list:
    """Per-BS received pilot signals Y_b (L x M)."""
    if noise_var is None:
        noise_var = cfg.noise_variance
    B, N, M = cfg.B, cfg.N, cfg.M
    ys = []
    for b in range(B):
        Y = _crandn(rng, (sigs.L, M), noise_var) if noise_var > 0 else np.zeros((sigs.L, M), dtype=complex)
        for j in range(B):
            gamma = act.a[j] * net.gains[b, j]                # a_jn * g^2_bjn
            H = _crandn(rng, (N, M))
            Y = Y + (sigs.matrices[j] * np.sqrt(gamma)[None, :]) @ H
        ys.append(Y)
    return ys


def sample_covariance(Y: np.ndarray) -> np.ndarray:
    """Sample covariance (1/M) Y Y^H; Hermitian PSD by construction."""
    M = Y.shape[1]
    S = (Y @ Y.conj().T) / M
    return 0.5 * (S + S.conj().T)


def model_covariance(net: NetworkInstance, sigs: SignatureSet, weights: np.ndarray,
                     bs_index: int, noise_var: float) -> np.ndarray:
    """Model covariance at BS b for per-device weights in [0, inf):

        Sigma_b = sum_j S_j diag(w_jn * g^2_bjn) S_j^H + noise_var * I.
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    L = sigs.L
    Sigma = noise_var * np.eye(L, dtype=complex)
    for j in range(net.n_cells):
        w = weights[j] * net.gains[bs_index, j]
        Sigma += (sigs.matrices[j] * w[None, :]) @ sigs.matrices[j].conj().T
    return 0.5 * (Sigma + Sigma.conj().T)


def model_covariance_gamma(sigs: SignatureSet, gamma: np.ndarray,
                           noise_var: float) -> np.ndarray:
    """Unknown-fading variant: Sigma = sum_j S_j diag(gamma_jn) S_j^H + noise_var*I
    with gamma of shape (B, N) giving the combined coefficients directly."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("gamma must be non-negative")
    L = sigs.L
    Sigma = noise_var * np.eye(L, dtype=complex)
    for j, S in enumerate(sigs.matrices):
        Sigma += (S * gamma[j][None, :]) @ S.conj().T
    return 0.5 * (Sigma + Sigma.conj().T)


def sample_covariance_set(ys: list, noise_var: float) -> CovarianceSet:
    return CovarianceSet(matrices=[sample_covariance(Y) for Y in ys],
                         kind="sample", noise_var=noise_var)


def ideal_covariance_set(net: NetworkInstance, sigs: SignatureSet, act: ActivityPattern,
                         noise_var: float) -> CovarianceSet:
    """Model covariances at the true activities (the M -> infinity limit)."""
    mats = [model_covariance(net, sigs, act.a, b, noise_var) for b in range(net.n_cells)]
    return CovarianceSet(matrices=mats, kind="model", noise_var=noise_var)


def export_network_csv(net: NetworkInstance, path: str) -> None:
    """Write BS positions, device positions, and gains as plain CSV."""
    B, N = net.gains.shape[0], net.gains.shape[2]
    with open(path, "w") as f:
        f.write("record,b,j,n,x,y,gain\n")
        for b in range(B):
            f.write(f"bs,{b},,,{float(net.bs_positions[b, 0])!r},"
                    f"{float(net.bs_positions[b, 1])!r},\n")
        for j in range(B):
            for n in range(N):
                p = net.device_positions[j, n]
                f.write(f"device,,{j},{n},{float(p[0])!r},{float(p[1])!r},\n")
        for b in range(B):
            for j in range(B):
                for n in range(N):
                    f.write(f"gain,{b},{j},{n},,,{float(net.gains[b, j, n])!r}\n")


def export_signatures_csv(sigs: SignatureSet, path: str) -> None:
    """Write signatures as CSV with interleaved real/imaginary columns."""
    with open(path, "w") as f:
        f.write("cell,row,col,re,im\n")
        for j, S in enumerate(sigs.matrices):
            for l in range(S.shape[0]):
                for n in range(S.shape[1]):
                    f.write(f"{j},{l},{n},{float(S[l, n].real)!r},"
                            f"{float(S[l, n].imag)!r}\n")
