"""Environment tests: placement, exact reward accounting, step mechanics,
observations, rendering, and the conservation/determinism invariants."""

import numpy as np
import pytest

from repval.env import (
    ATTACK_BASE,
    DESK_CONFIG,
    MOVE_BASE,
    N_ACTIONS,
    STAY,
    ConfigError,
    GridConfig,
    GridWorld,
    TEAM_A,
    TEAM_B,
)

# direction indices, clockwise from north
N, NE, E, SE, S, SW, W, NW = range(8)


def move(direction):
    return MOVE_BASE + direction


def attack(direction):
    return ATTACK_BASE + direction


def small_config(**kw):
    defaults = dict(width=10, height=10, agents_per_team=2, max_steps=50,
                    hp_max=10, attack_damage=2, view_radius=2, neighbor_radius=3)
    defaults.update(kw)
    return GridConfig(**defaults)


class TestPlacement:
    def test_battle_quarters_8x8(self):
        cfg = GridConfig(width=8, height=8, agents_per_team=2)
        world = GridWorld.new_scenario(cfg, "battle", 0)
        xs_a = {a.pos[0] for a in world.agents.values() if a.team == TEAM_A}
        xs_b = {a.pos[0] for a in world.agents.values() if a.team == TEAM_B}
        assert xs_a <= {0, 1}
        assert xs_b <= {6, 7}

    def test_wildwar_same_seed_same_positions(self):
        cfg = small_config()
        w1 = GridWorld.new_scenario(cfg, "wildwar", 123)
        w2 = GridWorld.new_scenario(cfg, "wildwar", 123)
        assert [a.pos for a in w1.agents.values()] == [a.pos for a in w2.agents.values()]

    def test_wildwar_distinct_cells_full_scale(self):
        cfg = GridConfig(width=40, height=40, agents_per_team=64)
        world = GridWorld.new_scenario(cfg, "wildwar", 7)
        positions = [a.pos for a in world.agents.values()]
        assert len(set(positions)) == 128

    def test_battle_infeasible_placement(self):
        cfg = GridConfig(width=8, height=4, agents_per_team=16)
        with pytest.raises(ConfigError):
            GridWorld.new_scenario(cfg, "battle", 0)

    def test_fresh_world_state(self):
        world = GridWorld.new_scenario(small_config(), "battle", 0)
        assert world.step_count == 0
        assert all(a.hp == world.config.hp_max for a in world.agents.values())

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            GridConfig(width=3, height=10).validate()
        with pytest.raises(ConfigError):
            GridConfig(agents_per_team=0).validate()
        with pytest.raises(ConfigError):
            GridConfig(width=4, height=4, agents_per_team=9).validate()


class TestRewardAccounting:
    """The five reward rules are exact constants; zero tolerance."""

    def duel(self, pos_a=(5, 5), pos_b=(5, 4), **kw):
        return GridWorld.from_positions(
            small_config(**kw), [(TEAM_A, pos_a), (TEAM_B, pos_b)])

    def test_move_into_free_cell(self):
        world = self.duel(pos_b=(9, 9))
        out = world.step({0: move(E), 1: STAY})
        assert out.rewards[0] == -0.005
        assert out.rewards[1] == 0.0
        assert world.agents[0].pos == (6, 5)

    def test_attack_enemy_surviving(self):
        world = self.duel()  # B one cell north of A
        out = world.step({0: attack(N), 1: STAY})
        assert out.rewards[0] == 0.2
        assert out.rewards[1] == -0.1
        assert world.agents[1].hp == 8
        assert out.kills == []

    def test_attack_kills(self):
        world = self.duel(hp_max=2)
        out = world.step({0: attack(N), 1: STAY})
        assert out.rewards[0] == 0.2 + 5.0
        assert out.rewards[1] == -0.1
        assert not world.agents[1].alive
        assert out.kills == [(0, 1)]
        assert out.terminal and out.winner == TEAM_A

    def test_attack_empty_cell(self):
        world = self.duel(pos_b=(9, 9))
        out = world.step({0: attack(N), 1: STAY})
        assert out.rewards[0] == -0.1

    def test_attack_out_of_bounds_counts_as_empty(self):
        world = self.duel(pos_a=(0, 0), pos_b=(9, 9))
        out = world.step({0: attack(N), 1: STAY})
        assert out.rewards[0] == -0.1

    def test_attack_ally_counts_as_empty(self):
        world = GridWorld.from_positions(
            small_config(),
            [(TEAM_A, (5, 5)), (TEAM_A, (5, 4)), (TEAM_B, (9, 9))])
        out = world.step({0: attack(N), 1: STAY, 2: STAY})
        assert out.rewards[0] == -0.1
        assert world.agents[1].hp == world.config.hp_max

    def test_stay_costs_nothing(self):
        world = self.duel(pos_b=(9, 9))
        out = world.step({0: STAY, 1: STAY})
        assert out.rewards[0] == 0.0

    def test_blocked_move_pays_penalty(self):
        world = self.duel()  # B directly north of A
        out = world.step({0: move(N), 1: STAY})
        assert out.rewards[0] == -0.005
        assert world.agents[0].pos == (5, 5)

    def test_out_of_bounds_move_pays_penalty(self):
        world = self.duel(pos_a=(0, 0), pos_b=(9, 9))
        out = world.step({0: move(W), 1: STAY})
        assert out.rewards[0] == -0.005
        assert world.agents[0].pos == (0, 0)

    def test_simultaneous_kill_split(self):
        world = GridWorld.from_positions(
            small_config(hp_max=4),
            [(TEAM_A, (4, 5)), (TEAM_A, (6, 5)), (TEAM_B, (5, 5))])
        out = world.step({0: attack(E), 1: attack(W), 2: STAY})
        assert out.rewards[0] == 0.2 + 2.5
        assert out.rewards[1] == 0.2 + 2.5
        assert out.rewards[2] == pytest.approx(-0.2)
        assert sorted(out.kills) == [(0, 2), (1, 2)]

    def test_attacked_twice_and_surviving(self):
        world = GridWorld.from_positions(
            small_config(),
            [(TEAM_A, (4, 5)), (TEAM_A, (6, 5)), (TEAM_B, (5, 5))])
        out = world.step({0: attack(E), 1: attack(W), 2: STAY})
        assert out.rewards[2] == pytest.approx(-0.2)
        assert world.agents[2].hp == 6

    def test_killed_agent_never_attempts_its_move(self):
        world = self.duel(hp_max=2)
        out = world.step({0: attack(N), 1: move(N)})
        assert out.rewards[1] == -0.1  # no move penalty on top
        assert not world.agents[1].alive


class TestStepMechanics:
    def test_attacks_resolve_against_pre_step_positions(self):
        world = GridWorld.from_positions(
            small_config(), [(TEAM_A, (5, 5)), (TEAM_B, (5, 4))])
        out = world.step({0: attack(N), 1: move(N)})
        assert out.rewards[0] == 0.2  # hit lands before the move
        assert world.agents[1].hp == 8
        assert world.agents[1].pos == (5, 3)

    def test_dying_agents_attack_still_lands(self):
        world = GridWorld.from_positions(
            small_config(hp_max=2), [(TEAM_A, (5, 5)), (TEAM_B, (5, 4))])
        out = world.step({0: attack(N), 1: attack(S)})
        assert not world.agents[0].alive and not world.agents[1].alive
        # rules accumulate in application order: +0.2, then -0.1, then +5
        assert out.rewards[0] == 0.2 - 0.1 + 5.0
        assert out.rewards[1] == 0.2 - 0.1 + 5.0
        assert out.terminal and out.winner == "Draw"

    def test_move_conflict_exactly_one_enters(self):
        world = GridWorld.from_positions(
            small_config(), [(TEAM_A, (4, 5)), (TEAM_B, (6, 5))])
        out = world.step({0: move(E), 1: move(W)})
        positions = {world.agents[0].pos, world.agents[1].pos}
        assert len(positions) == 2
        assert (5, 5) in positions
        assert out.rewards[0] == out.rewards[1] == -0.005

    def test_action_for_dead_agent_rejected(self):
        world = GridWorld.from_positions(
            small_config(hp_max=2), [(TEAM_A, (5, 5)), (TEAM_B, (5, 4))])
        world.step({0: attack(N), 1: STAY})
        with pytest.raises(ValueError):
            world.step({0: STAY, 1: STAY})

    def test_missing_action_rejected(self):
        world = GridWorld.from_positions(
            small_config(), [(TEAM_A, (5, 5)), (TEAM_B, (5, 4))])
        with pytest.raises(ValueError):
            world.step({0: STAY})

    def test_last_action_records_submission(self):
        world = GridWorld.from_positions(
            small_config(), [(TEAM_A, (5, 5)), (TEAM_B, (9, 9))])
        world.step({0: move(N), 1: STAY})
        assert world.agents[0].last_action == move(N)
        assert world.agents[1].last_action == STAY


class TestTerminal:
    def test_annihilation_wins(self):
        world = GridWorld.from_positions(
            small_config(hp_max=2), [(TEAM_A, (5, 5)), (TEAM_B, (5, 4))])
        out = world.step({0: attack(N), 1: STAY})
        assert out.terminal and out.winner == TEAM_A
        assert world.is_terminal() == (True, TEAM_A)

    def test_step_cap_head_count(self):
        placements = [(TEAM_A, (0, y)) for y in range(3)]
        placements += [(TEAM_B, (9, y)) for y in range(2)]
        world = GridWorld.from_positions(small_config(max_steps=1), placements)
        out = world.step({i: STAY for i in range(5)})
        assert out.terminal and out.winner == TEAM_A

    def test_step_cap_draw_on_tie(self):
        world = GridWorld.from_positions(
            small_config(max_steps=1), [(TEAM_A, (0, 0)), (TEAM_B, (9, 9))])
        out = world.step({0: STAY, 1: STAY})
        assert out.terminal and out.winner == "Draw"

    def test_ongoing(self):
        world = GridWorld.from_positions(
            small_config(), [(TEAM_A, (0, 0)), (TEAM_B, (9, 9))])
        assert world.is_terminal() == (False, None)


class TestObservation:
    def test_lone_agent_center(self):
        world = GridWorld.from_positions(
            small_config(view_radius=2), [(TEAM_A, (5, 5)), (TEAM_B, (9, 9))])
        obs = world.observe(0)
        view = obs.local_view.reshape(5, 5, 3)
        assert view[2, 2, 0] == 1.0  # own cell, ally channel
        assert view[2, 2, 2] == 1.0  # own cell, full hp
        view[2, 2, 0] = view[2, 2, 2] = 0.0
        assert np.all(view == 0.0)

    def test_adjacent_enemies_see_each_other(self):
        world = GridWorld.from_positions(
            small_config(view_radius=2), [(TEAM_A, (5, 5)), (TEAM_B, (6, 5))])
        va = world.observe(0).local_view.reshape(5, 5, 3)
        vb = world.observe(1).local_view.reshape(5, 5, 3)
        assert va[2, 3, 1] == 1.0  # B one cell east in A's enemy channel
        assert vb[2, 1, 1] == 1.0  # A one cell west in B's enemy channel

    def test_cells_outside_map_read_zero(self):
        world = GridWorld.from_positions(
            small_config(view_radius=2), [(TEAM_A, (0, 0)), (TEAM_B, (9, 9))])
        view = world.observe(0).local_view.reshape(5, 5, 3)
        assert np.all(view[:2, :, :] == 0.0)  # rows above the map
        assert np.all(view[:, :2, :] == 0.0)  # columns left of the map

    def test_self_features_encoding(self):
        cfg = small_config()
        world = GridWorld.from_positions(cfg, [(TEAM_A, (3, 6)), (TEAM_B, (9, 9))])
        world.step({0: MOVE_BASE + E, 1: STAY})
        obs = world.observe(0)
        assert obs.self_features[0] == pytest.approx(4 / 9)
        assert obs.self_features[1] == pytest.approx(6 / 9)
        assert obs.self_features[2] == 1.0
        onehot = obs.self_features[3:]
        assert onehot[MOVE_BASE + E] == 1.0 and onehot.sum() == 1.0

    def test_deterministic_and_bounded(self):
        world = GridWorld.new_scenario(small_config(), "wildwar", 5)
        v1 = world.observe(0).vector
        v2 = world.observe(0).vector
        np.testing.assert_array_equal(v1, v2)
        assert v1.min() >= 0.0 and v1.max() <= 1.0
        assert v1.shape == (world.config.obs_dim,)

    def test_observe_dead_agent_fails(self):
        world = GridWorld.from_positions(
            small_config(hp_max=2), [(TEAM_A, (5, 5)), (TEAM_B, (5, 4))])
        world.step({0: attack(N), 1: STAY})
        with pytest.raises(ValueError):
            world.observe(1)


class TestRender:
    def test_ascii_empty_2x2(self):
        world = GridWorld.from_positions(GridConfig(width=2, height=2), [])
        assert world.render("ascii") == b"..\n..\n"

    def test_ppm_header_and_size(self):
        cfg = GridConfig(width=8, height=8, agents_per_team=2)
        world = GridWorld.new_scenario(cfg, "battle", 0)
        data = world.render("ppm")
        assert data.startswith(b"P6\n8 8\n255\n")
        assert len(data) == len(b"P6\n8 8\n255\n") + 192

    def test_ppm_team_colors_scaled_by_hp(self):
        cfg = small_config()
        world = GridWorld.from_positions(cfg, [(TEAM_A, (0, 0)), (TEAM_B, (1, 0))], hp=5)
        data = world.render("ppm")
        body = data[len(b"P6\n10 10\n255\n"):]
        level = round(255 * 5 / 10)
        assert body[0:3] == bytes((level, 0, 0))
        assert body[3:6] == bytes((0, 0, level))
        assert body[6:9] == b"\xff\xff\xff"

    def test_ascii_hp_casing(self):
        world = GridWorld.from_positions(
            small_config(), [(TEAM_A, (0, 0)), (TEAM_B, (1, 0))], hp=4)
        first = world.render("ascii").decode().split("\n")[0]
        assert first.startswith("AB")

    def test_render_repeatable(self):
        world = GridWorld.new_scenario(small_config(), "wildwar", 9)
        assert world.render("ascii") == world.render("ascii")
        assert world.render("ppm") == world.render("ppm")


def random_rollout(world, seed, steps):
    rng = np.random.default_rng(seed)
    transcript = []
    for _ in range(steps):
        actions = {aid: int(rng.integers(N_ACTIONS)) for aid in world.living_ids()}
        out = world.step(actions)
        transcript.append((sorted(out.rewards.items()), world.render("ppm")))
        if out.terminal:
            break
    return transcript


class TestInvariants:
    def test_conservation_and_occupancy(self):
        world = GridWorld.new_scenario(DESK_CONFIG, "wildwar", 11)
        rng = np.random.default_rng(0)
        prev_alive = len(world.living_ids())
        prev_hp = sum(a.hp for a in world.living_agents())
        for _ in range(60):
            actions = {aid: int(rng.integers(N_ACTIONS)) for aid in world.living_ids()}
            out = world.step(actions)
            alive = world.living_ids()
            hp = sum(a.hp for a in world.living_agents())
            assert len(alive) <= prev_alive
            assert hp <= prev_hp
            assert all(a.hp <= DESK_CONFIG.hp_max for a in world.living_agents())
            positions = [world.agents[i].pos for i in alive]
            assert len(set(positions)) == len(positions)
            prev_alive, prev_hp = len(alive), hp
            if out.terminal:
                break

    def test_full_determinism(self):
        cfg = small_config(agents_per_team=4)
        t1 = random_rollout(GridWorld.new_scenario(cfg, "wildwar", 3), 42, 50)
        t2 = random_rollout(GridWorld.new_scenario(cfg, "wildwar", 3), 42, 50)
        assert t1 == t2

    def test_episode_length_capped(self):
        cfg = small_config(max_steps=7)
        world = GridWorld.from_positions(cfg, [(TEAM_A, (0, 0)), (TEAM_B, (9, 9))])
        for i in range(7):
            out = world.step({aid: STAY for aid in world.living_ids()})
        assert out.terminal
        assert world.step_count == 7
