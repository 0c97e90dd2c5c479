"""System model: geometry, gains, signatures, activity, covariances."""

import numpy as np
import pytest

from covdetect import model
from covdetect.model import (SystemConfig, build_network, sample_activity,
                             generate_signatures, simulate_received,
                             sample_covariance, model_covariance,
                             model_covariance_gamma, sample_covariance_set,
                             ideal_covariance_set, path_loss_db, wrap_distance,
                             CovarianceSet, NetworkInstance, SignatureSet,
                             ActivityPattern)
from helpers import draw_instance


def test_path_loss_hand_value():
    # 128.1 + 37.6*log10(0.1) = 90.5 dB, so the power gain is 10^-9.05.
    assert path_loss_db(0.1) == pytest.approx(90.5, abs=1e-12)
    assert 10.0 ** (-path_loss_db(0.1) / 10.0) == pytest.approx(10 ** -9.05)


def test_noise_variance_hand_value():
    cfg = SystemConfig()
    # -169 dBm/Hz + 70 dB - 23 dBm = -122 dB.
    assert cfg.noise_variance == pytest.approx(10.0 ** -12.2, rel=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SystemConfig(K=11, N=10)
    with pytest.raises(ValueError):
        SystemConfig(L=0)
    with pytest.raises(ValueError):
        SystemConfig(cell_radius_m=0.0)


def test_single_cell_network_geometry():
    cfg = SystemConfig(B=1, N=200, K=5, L=4)
    net = build_network(cfg, np.random.default_rng(0))
    assert net.bs_positions.shape == (1, 2)
    assert net.gains.shape == (1, 1, 200)
    assert np.all(net.gains > 0)
    dists = np.linalg.norm(net.device_positions[0], axis=1)
    assert np.all(dists <= cfg.cell_radius_m + 1e-9)
    assert np.all(dists >= model.MIN_BS_DEVICE_DISTANCE_M)


def test_unsupported_layout_rejected():
    with pytest.raises(ValueError):
        build_network(SystemConfig(B=3), np.random.default_rng(0))


def test_seven_cell_layout():
    cfg = SystemConfig(B=7, N=20, K=2, L=4)
    net = build_network(cfg, np.random.default_rng(1))
    assert net.bs_positions.shape == (7, 2)
    assert net.gains.shape == (7, 7, 20)
    spacing = np.sqrt(3.0) * cfg.cell_radius_m
    d01 = np.linalg.norm(net.bs_positions[1] - net.bs_positions[0])
    assert d01 == pytest.approx(spacing, rel=1e-12)
    # every device is closer (wrap metric) to some BS than half the spacing
    # allows only for points inside its hexagon; just check min distance floor
    for j in range(7):
        for n in range(20):
            dmin = min(wrap_distance(net.device_positions[j, n],
                                     net.bs_positions[b], net.wrap_translates)
                       for b in range(7))
            assert dmin >= model.MIN_BS_DEVICE_DISTANCE_M


def test_wrap_distance_never_exceeds_euclidean():
    cfg = SystemConfig(B=7, N=10, K=2, L=4)
    net = build_network(cfg, np.random.default_rng(2))
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = rng.uniform(-1500, 1500, size=2)
        b = int(rng.integers(0, 7))
        wd = wrap_distance(p, net.bs_positions[b], net.wrap_translates)
        assert wd <= np.linalg.norm(p - net.bs_positions[b]) + 1e-9


def test_activity_counts_and_extremes():
    cfg = SystemConfig(B=2, N=10, K=3, L=4)
    act = sample_activity(cfg, np.random.default_rng(0))
    assert act.a.shape == (2, 10)
    assert np.all(act.a.sum(axis=1) == 3)
    assert sample_activity(SystemConfig(N=10, K=0, L=4),
                           np.random.default_rng(0)).a.sum() == 0
    assert sample_activity(SystemConfig(N=10, K=10, L=4),
                           np.random.default_rng(0)).a.sum() == 10


def test_activity_frequency():
    cfg = SystemConfig(B=1, N=10, K=3, L=4)
    rng = np.random.default_rng(5)
    total = np.zeros(10)
    draws = 10_000
    for _ in range(draws):
        total += sample_activity(cfg, rng).a[0]
    freq = total / draws
    assert np.all(np.abs(freq - 0.3) < 0.02)


def test_signature_statistics():
    cfg = SystemConfig(B=1, N=1000, K=10, L=100)
    S = generate_signatures(cfg, np.random.default_rng(0)).matrices[0]
    assert S.shape == (100, 1000)
    assert abs(S.mean()) < 0.02
    assert np.mean(np.abs(S) ** 2) == pytest.approx(1.0, abs=0.02)
    # per-part variance 1/2 within 5%
    assert np.var(S.real) == pytest.approx(0.5, rel=0.05)
    assert np.var(S.imag) == pytest.approx(0.5, rel=0.05)


def test_seeded_determinism():
    cfg = SystemConfig(B=7, N=15, K=3, L=5, seed=42)
    a = draw_instance(cfg, 42)
    b = draw_instance(cfg, 42)
    assert np.array_equal(a[0].device_positions, b[0].device_positions)
    assert np.array_equal(a[0].gains, b[0].gains)
    assert all(np.array_equal(x, y) for x, y in zip(a[1].matrices, b[1].matrices))
    assert np.array_equal(a[2].a, b[2].a)


def test_received_all_inactive_no_noise():
    cfg = SystemConfig(B=1, N=8, K=0, L=4, M=3)
    rng = np.random.default_rng(0)
    net = build_network(cfg, rng)
    sigs = generate_signatures(cfg, rng)
    act = sample_activity(cfg, rng)
    ys = simulate_received(net, sigs, act, cfg, rng, noise_var=0.0)
    assert np.all(ys[0] == 0)


def test_received_single_device_rank1():
    cfg = SystemConfig(B=1, N=8, K=1, L=4, M=1)
    rng = np.random.default_rng(1)
    net = build_network(cfg, rng)
    sigs = generate_signatures(cfg, rng)
    act = sample_activity(cfg, rng)
    ys = simulate_received(net, sigs, act, cfg, rng, noise_var=0.0)
    n = act.support[0][0]
    s = sigs.matrices[0][:, n]
    y = ys[0][:, 0]
    # y is a scalar multiple of the active device's signature column
    ratio = y / s
    assert np.max(np.abs(ratio - ratio[0])) < 1e-10 * max(1.0, np.max(np.abs(ratio)))


def test_received_power_matches_model_covariance():
    cfg = SystemConfig(B=1, N=6, K=2, L=3, M=4)
    rng = np.random.default_rng(2)
    net = build_network(cfg, rng)
    sigs = generate_signatures(cfg, rng)
    act = sample_activity(cfg, rng)
    sigma = model_covariance(net, sigs, act.a, 0, cfg.noise_variance)
    acc = 0.0
    draws = 1000
    for _ in range(draws):
        Y = simulate_received(net, sigs, act, cfg, rng)[0]
        acc += np.sum(np.abs(Y) ** 2) / (sigs.L * cfg.M)
    assert acc / draws == pytest.approx(np.real(np.trace(sigma)) / sigs.L, rel=0.05)


def test_sample_covariance_basics():
    assert np.all(sample_covariance(np.zeros((3, 2), dtype=complex)) == 0)
    y = np.array([[1.0], [1j]])
    expected = np.array([[1.0, -1j], [1j, 1.0]])
    assert np.allclose(sample_covariance(y), expected)
    rng = np.random.default_rng(0)
    Y = rng.normal(size=(4, 6)) + 1j * rng.normal(size=(4, 6))
    S = sample_covariance(Y)
    assert np.allclose(S, S.conj().T)
    assert np.min(np.linalg.eigvalsh(S)) >= -1e-12


def test_model_covariance_basics():
    cfg = SystemConfig(B=1, N=5, K=2, L=3)
    rng = np.random.default_rng(3)
    net = build_network(cfg, rng)
    sigs = generate_signatures(cfg, rng)
    nv = 0.7
    assert np.allclose(model_covariance(net, sigs, np.zeros((1, 5)), 0, nv),
                       nv * np.eye(3))
    with pytest.raises(ValueError):
        model_covariance(net, sigs, -np.ones((1, 5)), 0, nv)


def test_model_covariance_single_device_unit_gain():
    # One active device with g^2 = 1: Sigma = s s^H + noise * I.
    rng = np.random.default_rng(4)
    S = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    sigs = SignatureSet(matrices=[S])
    net = NetworkInstance(bs_positions=np.zeros((1, 2)),
                          device_positions=np.zeros((1, 4, 2)),
                          gains=np.ones((1, 1, 4)),
                          wrap_translates=np.zeros((1, 2)))
    w = np.zeros((1, 4))
    w[0, 2] = 1.0
    sigma = model_covariance(net, sigs, w, 0, 0.3)
    s = S[:, 2]
    assert np.allclose(sigma, np.outer(s, s.conj()) + 0.3 * np.eye(3))


def test_model_covariance_matches_monte_carlo():
    cfg = SystemConfig(B=1, N=4, K=2, L=3, M=2)
    rng = np.random.default_rng(5)
    net = build_network(cfg, rng)
    sigs = generate_signatures(cfg, rng)
    act = sample_activity(cfg, rng)
    sigma = model_covariance(net, sigs, act.a, 0, cfg.noise_variance)
    acc = np.zeros((3, 3), dtype=complex)
    draws = 10_000
    for _ in range(draws):
        Y = simulate_received(net, sigs, act, cfg, rng)[0]
        acc += (Y @ Y.conj().T) / cfg.M
    mc = acc / draws
    rel = np.linalg.norm(mc - sigma) / np.linalg.norm(sigma)
    assert rel < 0.02


def test_model_covariance_gamma():
    rng = np.random.default_rng(6)
    S = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    sigs = SignatureSet(matrices=[S])
    gamma = np.array([[0.5, 0.0, 2.0, 0.0]])
    sigma = model_covariance_gamma(sigs, gamma, 0.1)
    expected = 0.1 * np.eye(3, dtype=complex)
    for n in range(4):
        expected += gamma[0, n] * np.outer(S[:, n], S[:, n].conj())
    assert np.allclose(sigma, expected)
    with pytest.raises(ValueError):
        model_covariance_gamma(sigs, -gamma, 0.1)


def test_covariance_set_hermitian_validation():
    with pytest.raises(ValueError):
        CovarianceSet(matrices=[np.array([[1.0, 2.0], [0.0, 1.0]])], kind="sample")
    CovarianceSet(matrices=[np.eye(2, dtype=complex)], kind="sample")  # fine


def test_ideal_covariance_positive_definite():
    cfg = SystemConfig(B=7, N=10, K=2, L=5)
    net, sigs, act, covs = draw_instance(cfg, 7, ideal=True)
    for mat in covs.matrices:
        assert np.min(np.linalg.eigvalsh(mat)) > 0


def test_law_of_large_numbers_in_M():
    cfg0 = SystemConfig(B=1, N=8, K=2, L=4)
    Ms = [16, 64, 256, 1024]
    errs = {M: [] for M in Ms}
    rng = np.random.default_rng(8)
    for t in range(100):
        net = build_network(cfg0, rng)
        sigs = generate_signatures(cfg0, rng)
        act = sample_activity(cfg0, rng)
        sigma = model_covariance(net, sigs, act.a, 0, cfg0.noise_variance)
        for M in Ms:
            cfg = SystemConfig(B=1, N=8, K=2, L=4, M=M)
            Y = simulate_received(net, sigs, act, cfg, rng)[0]
            err = np.linalg.norm(sample_covariance(Y) - sigma) / np.linalg.norm(sigma)
            errs[M].append(err)
    means = [np.mean(errs[M]) for M in Ms]
    assert all(a > b for a, b in zip(means[:-1], means[1:]))


def test_config_from_file(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("# comment\nB = 7\nN=20\nK=3\nL = 6  # inline\nM=32\n"
                    "cell_radius_m=100.0\n")
    cfg = SystemConfig.from_file(str(path))
    assert (cfg.B, cfg.N, cfg.K, cfg.L, cfg.M) == (7, 20, 3, 6, 32)
    assert cfg.cell_radius_m == 100.0
    bad = tmp_path / "bad.txt"
    bad.write_text("unknown_key=1\n")
    with pytest.raises(ValueError):
        SystemConfig.from_file(str(bad))
    bad.write_text("no equals sign\n")
    with pytest.raises(ValueError):
        SystemConfig.from_file(str(bad))


def test_csv_exports(tmp_path):
    cfg = SystemConfig(B=1, N=4, K=1, L=3)
    rng = np.random.default_rng(9)
    net = build_network(cfg, rng)
    sigs = generate_signatures(cfg, rng)
    npath = tmp_path / "net.csv"
    spath = tmp_path / "sigs.csv"
    model.export_network_csv(net, str(npath))
    model.export_signatures_csv(sigs, str(spath))
    nlines = npath.read_text().splitlines()
    assert nlines[0] == "record,b,j,n,x,y,gain"
    assert len(nlines) == 1 + 1 + 4 + 4  # header + bs + devices + gains
    slines = spath.read_text().splitlines()
    assert slines[0] == "cell,row,col,re,im"
    assert len(slines) == 1 + 3 * 4
    # values round-trip through repr
    j, l, n, re, im = slines[1].split(",")
    assert complex(float(re), float(im)) == sigs.matrices[0][0, 0]
