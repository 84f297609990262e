"""Pairwise event-driven Monte Carlo population dynamics."""

import numpy as np
import pytest

from randloc.gamma import gamma_closed
from randloc.meanfield import SolverConfig, solve_steady
from randloc.popmc import (
    Population,
    empirical_density,
    ks_distance,
    load_checkpoint,
    resume,
    run_steady,
    run_transient,
    sample_from_density,
    save_checkpoint,
)
from randloc.udist import UDensity, UGrid, exponential_density, mass, normalize


def state_tuple(pop):
    return (pop.tau, pop.u_sync.copy(), pop.t_sync.copy(), pop.localized.copy(),
            pop.overflow_count)


def assert_same_state(a, b):
    assert a[0] == b[0]
    assert np.array_equal(a[1], b[1])
    assert np.array_equal(a[2], b[2])
    assert np.array_equal(a[3], b[3])
    assert a[4] == b[4]


def test_same_seed_reproduces_exactly():
    a, _ = run_steady(2000, 2.0, seed=7)
    b, _ = run_steady(2000, 2.0, seed=7)
    assert_same_state(state_tuple(a), state_tuple(b))


def test_different_seeds_differ():
    a, _ = run_steady(2000, 2.0, seed=7)
    b, _ = run_steady(2000, 2.0, seed=8)
    assert not np.array_equal(a.u_sync, b.u_sync)


def test_snapshots_do_not_perturb_the_stream():
    plain, _ = run_steady(2000, 3.0, seed=5)
    snapped, snaps = run_steady(2000, 3.0, seed=5, snapshot_taus=(0.7, 1.5, 2.9))
    assert_same_state(state_tuple(plain), state_tuple(snapped))
    assert [s.tau for s in snaps] == [0.7, 1.5, 2.9]
    assert all(s.g_empirical == 1.0 for s in snaps)
    assert all(s.u_values.size == 2000 for s in snaps)


def test_checkpoint_resume_is_bit_identical(tmp_path):
    one_shot, _ = run_steady(3000, 4.0, seed=13)
    pop, _ = run_steady(3000, 2.0, seed=13)
    path = tmp_path / "pop.npz"
    save_checkpoint(pop, path)
    loaded = load_checkpoint(path)
    resume(loaded, 4.0)
    assert_same_state(state_tuple(one_shot), state_tuple(loaded))


def test_in_memory_resume_matches_one_shot():
    one_shot, _ = run_steady(2000, 3.0, seed=21)
    pop, _ = run_steady(2000, 1.0, seed=21)
    resume(pop, 3.0)
    assert_same_state(state_tuple(one_shot), state_tuple(pop))


def test_checkpoint_rejects_foreign_version(tmp_path):
    pop, _ = run_steady(1000, 0.5, seed=1)
    path = tmp_path / "pop.npz"
    save_checkpoint(pop, path)
    with np.load(path) as z:
        payload = {k: z[k] for k in z.files}
    payload["version"] = np.int64(99)
    np.savez(path, **payload)
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)


def test_resume_requires_generator():
    bare = Population(seed=0, tau=0.0, localized=np.ones(5, dtype=bool),
                      u_sync=np.ones(5), t_sync=np.zeros(5))
    with pytest.raises(ValueError, match="generator"):
        resume(bare, 1.0)


def test_unseeded_population_stays_delocalized():
    pop, snaps = run_transient(2000, 0.0, 3.0, seed=3, snapshot_taus=(1.5,))
    assert pop.n_localized == 0
    assert pop.g_empirical == 0.0
    assert snaps[0].u_values.size == 0


def test_full_seed_equals_steady_run():
    a, _ = run_transient(1500, 1.0, 2.0, seed=9)
    b, _ = run_steady(1500, 2.0, seed=9)
    assert_same_state(state_tuple(a), state_tuple(b))


def test_transient_fraction_tracks_closed_form():
    M = 20000
    pop, _ = run_transient(M, 0.1, 2.0, seed=0)
    gc = gamma_closed(2.0, 0.1)
    se = np.sqrt(gc * (1.0 - gc) / M)
    assert abs(pop.g_empirical - gc) < 3.0 * se


def test_rate_zero_is_pure_drift():
    pop, snaps = run_steady(1000, 2.5, seed=6, pair_rate=0.0, snapshot_taus=(1.25,))
    assert np.array_equal(pop.t_sync, np.zeros(1000))
    assert np.array_equal(pop.current_u(), pop.u_sync + 2.5)
    assert np.array_equal(snaps[0].u_values, pop.u_sync + 1.25)


def test_steady_population_matches_grid_solution():
    p_star = solve_steady(SolverConfig(u_max=15.0, h=0.05))
    pop, _ = run_steady(20000, 10.0, seed=11)
    assert ks_distance(pop, p_star) < 0.03


def test_capped_entrants_lower_the_mean():
    adopt, _ = run_transient(5000, 0.5, 1.0, seed=4, entrant_rule="adopt")
    capped, _ = run_transient(5000, 0.5, 1.0, seed=4,
                              entrant_rule="capped", entrant_cap=0.01)
    assert capped.current_u().mean() < adopt.current_u().mean()


def test_overflow_counter_fires():
    pop, _ = run_steady(1000, 1.0, seed=3, u_ceiling=0.5)
    assert pop.overflow_count > 0
    quiet, _ = run_steady(1000, 1.0, seed=3)
    assert quiet.overflow_count == 0


def test_sampler_scores_small_ks_against_its_source():
    rng = np.random.Generator(np.random.Philox(key=99))
    ref = exponential_density(UGrid.from_spacing(20.0, 0.01))
    draws = sample_from_density(ref, 50000, rng)
    assert ks_distance(draws, ref) < 4.0 / np.sqrt(50000)


def test_ks_detects_a_wrong_reference():
    rng = np.random.Generator(np.random.Philox(key=99))
    grid = UGrid.from_spacing(8.0, 0.01)
    draws = sample_from_density(exponential_density(grid), 30000, rng)
    slower = normalize(UDensity(grid, np.exp(-0.5 * grid.nodes())))
    assert ks_distance(draws, slower) > 0.1


def test_empirical_density_has_unit_mass():
    grid = UGrid.from_spacing(10.0, 0.1)
    values = np.array([0.1, 0.12, 0.2, 3.33, 25.0])  # last one clips to u_max
    d = empirical_density(values, grid)
    assert mass(d) == pytest.approx(1.0, abs=1e-12)
    assert d.values[grid.n_nodes - 1] > 0.0


def test_population_size_guards():
    with pytest.raises(ValueError, match="at least"):
        run_steady(500, 1.0, seed=0)
    with pytest.raises(ValueError, match="localized particles"):
        run_transient(1000, 0.001, 1.0, seed=0)  # ceil(g0*M) = 1 seed particle


@pytest.mark.parametrize(
    "kwargs,msg",
    [
        (dict(g0=-0.1), "g0"),
        (dict(g0=1.5), "g0"),
        (dict(entrant_rule="copy"), "entrant rule"),
        (dict(entrant_rule="capped", entrant_cap=0.0), "entrant_cap"),
    ],
)
def test_transient_argument_validation(kwargs, msg):
    base = dict(M=2000, g0=0.5, tau_end=1.0, seed=0)
    base.update(kwargs)
    with pytest.raises(ValueError, match=msg):
        run_transient(**base)


def test_snapshot_and_rate_guards():
    with pytest.raises(ValueError, match="outside"):
        run_steady(1000, 1.0, seed=0, snapshot_taus=(2.0,))
    with pytest.raises(ValueError, match="nonnegative"):
        run_steady(1000, 1.0, seed=0, pair_rate=-1.0)
    pop, _ = run_steady(1000, 1.0, seed=0)
    with pytest.raises(ValueError, match="before"):
        resume(pop, 0.5)


def test_empty_sample_guards():
    grid = UGrid.from_spacing(5.0, 0.1)
    with pytest.raises(ValueError, match="no localized"):
        empirical_density(np.array([]), grid)
    with pytest.raises(ValueError, match="no localized"):
        ks_distance(np.array([]), exponential_density(grid))
    rng = np.random.Generator(np.random.Philox(key=0))
    with pytest.raises(ValueError, match="nonnegative"):
        sample_from_density(exponential_density(grid), -1, rng)
    with pytest.raises(ValueError, match="zero mass"):
        sample_from_density(UDensity(grid, np.zeros(grid.n_nodes)), 5, rng)
