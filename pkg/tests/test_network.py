import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dppl import network as nw
from dppl.network import AdHocConfig, DroneCellConfig, NetworkInstance


def make_instance(gain, p_high=1.0, noise=1.0, scenario="adhoc"):
    gain = np.asarray(gain, dtype=float)
    m = gain.shape[0]
    return NetworkInstance(np.zeros((m, 3)), np.zeros((m, 3)), gain, p_high, noise, scenario)


@pytest.fixture(scope="module")
def drone_instance():
    return nw.gen_dronecell(DroneCellConfig(), seed=3)


def test_dbm_conversions():
    assert nw.dbm_to_watts(30.0) == pytest.approx(1.0)
    assert nw.watts_to_dbm(nw.dbm_to_watts(16.0)) == pytest.approx(16.0)


# -- SINR and sum-rate ------------------------------------------------------

def test_single_link_unit_sinr():
    inst = make_instance([[2.0]], p_high=0.5, noise=1.0)
    np.testing.assert_allclose(nw.sinr(inst, [0]), [1.0])
    assert nw.sum_rate(inst, [0]) == pytest.approx(1.0)


def test_empty_set_rate_is_zero():
    assert nw.sum_rate(make_instance([[1.0]]), ()) == 0.0


def test_symmetric_links_equal_sinr():
    inst = make_instance([[4.0, 0.5], [0.5, 4.0]])
    g = nw.sinr(inst, [0, 1])
    assert g[0] == pytest.approx(g[1])


def test_three_link_hand_instance():
    gain = np.array([[1.0, 0.2, 0.1], [0.3, 2.0, 0.4], [0.05, 0.6, 3.0]])
    inst = make_instance(gain, p_high=2.0, noise=0.5)
    g = nw.sinr(inst, [0, 1, 2])
    # link 1: signal 2*2, interference from Tx 0 and Tx 2 at Rx 1
    assert g[1] == pytest.approx(4.0 / (2 * 0.2 + 2 * 0.6 + 0.5))
    assert g[0] == pytest.approx(2.0 / (2 * 0.3 + 2 * 0.05 + 0.5))
    g02 = nw.sinr(inst, [0, 2])
    assert g02[1] == 0.0
    assert g02[2] == pytest.approx(6.0 / (2 * 0.1 + 0.5))


def test_strong_interferer_lowers_sum_rate():
    inst = make_instance([[10.0, 50.0], [50.0, 1.0]])
    assert nw.sum_rate(inst, [0, 1]) < nw.sum_rate(inst, [0])


def test_active_set_out_of_range():
    with pytest.raises(ValueError):
        nw.sinr(make_instance([[1.0]]), [1])


@given(st.integers(2, 12), st.integers(0, 2**31))
def test_interference_monotonicity(m, seed):
    rng = np.random.default_rng(seed)
    inst = make_instance(rng.uniform(0.01, 1.0, (m, m)) + np.diag(rng.uniform(1, 5, m)))
    small = tuple(sorted(rng.choice(m, size=rng.integers(1, m + 1), replace=False)))
    extra = rng.choice(m, size=rng.integers(0, m + 1), replace=False)
    big = tuple(sorted(set(small) | set(int(e) for e in extra)))
    g_small, g_big = nw.sinr(inst, small), nw.sinr(inst, big)
    assert np.all(g_big[list(small)] <= g_small[list(small)] + 1e-15)


def test_instance_validation():
    with pytest.raises(ValueError):
        make_instance([[1.0, -1.0], [1.0, 1.0]])
    with pytest.raises(ValueError):
        make_instance(np.zeros((0, 0)))


# -- ad-hoc generator -------------------------------------------------------

def test_adhoc_single_pair_unit_gain():
    inst = nw.gen_adhoc(AdHocConfig(num_links=1, pair_distance=1.0), seed=0)
    np.testing.assert_allclose(inst.gain, [[1.0]])


def test_adhoc_gains_are_inverse_power_of_distance():
    inst = nw.gen_adhoc(AdHocConfig(), seed=11)
    d = nw.pairwise_distance(inst.tx_pos, inst.rx_pos)
    np.testing.assert_array_equal(inst.gain, d ** -2.0)


def test_adhoc_rx_on_circle():
    inst = nw.gen_adhoc(AdHocConfig(pair_distance=0.05), seed=4)
    np.testing.assert_allclose(np.linalg.norm(inst.rx_pos - inst.tx_pos, axis=1), 0.05)


def test_adhoc_rx_in_disk():
    inst = nw.gen_adhoc(AdHocConfig(pair_distance=0.05, rx_placement="disk"), seed=4)
    assert np.all(np.linalg.norm(inst.rx_pos - inst.tx_pos, axis=1) <= 0.05 + 1e-15)


def test_adhoc_mean_link_count():
    counts = [nw.gen_adhoc(AdHocConfig(), seed=s).m for s in range(400)]
    assert np.mean(counts) == pytest.approx(20.0, abs=1.0)


def test_adhoc_empty_draw_is_retried():
    cfg = AdHocConfig(density=0.05)
    insts = [nw.gen_adhoc(cfg, seed=s) for s in range(30)]
    assert all(i.m >= 1 for i in insts)
    assert any(i.retries > 0 for i in insts)


def test_adhoc_deterministic():
    a = nw.gen_adhoc(AdHocConfig(), seed=[1, 2, 3])
    b = nw.gen_adhoc(AdHocConfig(), seed=[1, 2, 3])
    assert a.to_json() == b.to_json()


def test_adhoc_config_validation():
    with pytest.raises(ValueError):
        nw.gen_adhoc(AdHocConfig(pathloss_exp=1.5))
    with pytest.raises(ValueError):
        nw.gen_adhoc(AdHocConfig(rx_placement="square"))


def test_json_round_trip():
    inst = nw.gen_adhoc(AdHocConfig(), seed=5)
    back = NetworkInstance.from_json(inst.to_json())
    np.testing.assert_array_equal(back.gain, inst.gain)
    assert back.to_json() == inst.to_json()
    d = inst.to_dict()
    assert {"schemaVersion", "scenarioTag", "m", "txPos", "rxPos", "gain",
            "pHighWatts", "noiseWatts", "seed", "configEcho"} <= set(d)


def test_json_rejects_wrong_schema():
    d = nw.gen_adhoc(AdHocConfig(), seed=5).to_dict()
    d["schemaVersion"] = 99
    with pytest.raises(ValueError):
        NetworkInstance.from_dict(d)


# -- antenna, pathloss, drone layout ----------------------------------------

def test_antenna_boresight_peak():
    assert nw.antenna_gain_db(0.0, 100.0) == pytest.approx(8.0)


def test_antenna_90_degrees_azimuth():
    expected = 8.0 - min(12 * (90 / 65) ** 2, 30)
    assert nw.antenna_gain_db(90.0, 100.0) == pytest.approx(expected)


def test_antenna_floor_and_symmetry():
    assert nw.antenna_gain_db(180.0, 10.0) == pytest.approx(8.0 - 30.0)
    az = np.linspace(-180, 180, 73)
    np.testing.assert_allclose(nw.antenna_gain_db(az, 95.0), nw.antenna_gain_db(-az, 95.0))


def test_antenna_monotone_in_azimuth():
    g = nw.antenna_gain_db(np.linspace(0, 180, 100), 100.0)
    assert np.all(np.diff(g) <= 1e-12)


def test_pathloss_reference_value():
    assert nw.pathloss_db(100.0, 6e9) == pytest.approx(28 + 44 + 20 * math.log10(6))


def test_noise_power():
    expected = nw.dbm_to_watts(-174 + 70 + 7)
    assert DroneCellConfig().noise_watts == pytest.approx(expected)


def test_layout_sizes():
    cfg = DroneCellConfig()
    assert nw.cell_centers(cfg).shape == (19, 2)
    pos, az = nw.sector_sites(cfg)
    assert pos.shape == (57, 3) and np.all(pos[:, 2] == 25.0)
    assert set(az) == {30.0, 150.0, 270.0}
    assert nw.wrap_shifts(cfg).shape == (7, 2)


def test_wraparound_images_tile_without_overlap():
    cfg = DroneCellConfig()
    centers = nw.cell_centers(cfg)
    tiled = (nw.wrap_shifts(cfg)[:, None, :] + centers[None]).reshape(-1, 2)
    d = nw.pairwise_distance(np.column_stack([tiled, np.zeros(len(tiled))]),
                             np.column_stack([tiled, np.zeros(len(tiled))]))
    np.fill_diagonal(d, np.inf)
    assert d.min() == pytest.approx(cfg.isd)


def test_boresight_drone_associates_to_that_sector():
    cfg = DroneCellConfig(wraparound=False)
    pos, az = nw.sector_sites(cfg)
    s = 1  # centre cell, sector pointing at 150 degrees
    r = 150.0
    ue = np.array([[pos[s, 0] + r * math.cos(math.radians(az[s])),
                    pos[s, 1] + r * math.sin(math.radians(az[s])), 1.5]])
    assert nw.associate(cfg, ue)[0] == s


def test_dronecell_ground_set_is_57(drone_instance):
    assert drone_instance.m == 57
    assert sorted(drone_instance.tx_ids.tolist()) == list(range(57))


def test_dronecell_association_is_argmax():
    cfg = DroneCellConfig()
    inst = nw.gen_dronecell(cfg, seed=8)
    gains = nw.link_gains(cfg, inst.rx_pos)
    np.testing.assert_array_equal(np.argmax(gains, axis=0), inst.tx_ids)


def test_dronecell_heights_and_power(drone_instance):
    z = drone_instance.rx_pos[:, 2]
    assert np.all((z >= 1.5) & (z <= 300.0))
    assert drone_instance.p_high == pytest.approx(nw.dbm_to_watts(46.0))


def test_dronecell_usually_full():
    full = sum(nw.gen_dronecell(DroneCellConfig(), seed=s).m == 57 for s in range(40))
    assert full >= 39


def test_dronecell_deterministic():
    a = nw.gen_dronecell(DroneCellConfig(), seed=21)
    b = nw.gen_dronecell(DroneCellConfig(), seed=21)
    assert a.to_json() == b.to_json()


def test_dronecell_sparse_drones_drop_sectors():
    inst = nw.gen_dronecell(DroneCellConfig(num_drones=20), seed=0)
    assert inst.m <= 20


def test_generate_dispatch():
    assert nw.generate("adhoc", AdHocConfig(), 0).scenario == "adhoc"
    with pytest.raises(ValueError):
        nw.generate("mesh", AdHocConfig(), 0)


def test_interference_matrix_zero_diagonal(drone_instance):
    i = nw.interference_matrix(drone_instance)
    assert np.all(np.diag(i) == 0)
    assert i[0, 1] == pytest.approx(drone_instance.p_high * drone_instance.gain[0, 1])
