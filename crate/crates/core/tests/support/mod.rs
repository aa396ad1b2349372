//! Randomised invariants shared by the property suite and the acceptance
//! runner. Each property takes a case count and runs on a deterministic
//! proptest RNG.
#![allow(dead_code)]

use anisoflock::analysis::{closest_sets, hex_lattice, verify_equilibrium};
use anisoflock::integrator::{cap_speed, noise_rng, random_initial, run_with, step, step_with};
use anisoflock::metrics::{
    alignment_index_of, elongation, nn_angle_histogram, nn_bearings, nnd, MetricsReport,
};
use anisoflock::model::{select_neighbors, select_neighbors_with, velocity_field, TieBreak};
use anisoflock::{AgentState, Configuration, ModelParams, RunOptions, Vec2};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

/// Runs `test` on `cases` inputs drawn from `strategy`.
pub fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn points(max_n: usize, extent: f64) -> impl Strategy<Value = Vec<Vec2>> {
    prop::collection::vec((0.0..extent, 0.0..extent), 2..=max_n)
        .prop_map(|v| {
            v.into_iter()
                .map(|(x, y)| Vec2::new(x, y))
                .collect::<Vec<_>>()
        })
        .prop_filter("separated", |ps| min_distance(ps) > 1e-3)
}

pub fn min_distance(ps: &[Vec2]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            best = best.min(ps[i].distance(ps[j]));
        }
    }
    best
}

/// Positions with independent random headings.
pub fn agents(max_n: usize, extent: f64) -> impl Strategy<Value = Configuration> {
    points(max_n, extent)
        .prop_flat_map(|ps| {
            let n = ps.len();
            (Just(ps), prop::collection::vec(-180.0f64..180.0, n))
        })
        .prop_map(|(ps, hs)| {
            Configuration::new(
                ps.into_iter()
                    .zip(hs)
                    .map(|(p, h)| AgentState::with_heading(p, Vec2::from_angle(h.to_radians())))
                    .collect(),
            )
        })
}

pub fn params_for(config: &Configuration) -> impl Strategy<Value = ModelParams> {
    let n_agents = config.len();
    (
        1..n_agents,
        0.5f64..20.0,
        1.0f64..=360.0,
        1.0f64..=360.0,
        0.1f64..3.0,
    )
        .prop_map(move |(n, xi, aa, ar, r_sr)| ModelParams {
            n_agents,
            n_neighbors: n,
            xi,
            alpha_a: aa,
            alpha_r: ar,
            r_sr,
            ..ModelParams::default()
        })
}

pub fn config_and_params(max_n: usize) -> impl Strategy<Value = (Configuration, ModelParams)> {
    agents(max_n, 30.0).prop_flat_map(|c| {
        let p = params_for(&c);
        (Just(c), p)
    })
}

/// Angle test through atan2, independent of the dot-product form.
pub fn within_cone(heading: Vec2, offset: Vec2, width: f64) -> bool {
    if width >= 360.0 {
        return true;
    }
    let a = (heading.x * offset.y - heading.y * offset.x)
        .atan2(heading.x * offset.x + heading.y * offset.y)
        .to_degrees()
        .abs();
    a <= width / 2.0
}

pub fn brute_force_neighbors(
    config: &Configuration,
    p: &ModelParams,
) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut attract = Vec::new();
    let mut repel = Vec::new();
    for (i, a) in config.agents.iter().enumerate() {
        let mut others: Vec<(f64, usize)> = config
            .agents
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, b)| (a.position.distance(b.position), j))
            .collect();
        others.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        let offset = |j: usize| config.agents[j].position - a.position;
        attract.push(
            others
                .iter()
                .filter(|(_, j)| within_cone(a.heading, offset(*j), p.alpha_a))
                .take(p.n_neighbors)
                .map(|(_, j)| *j)
                .collect(),
        );
        repel.push(
            others
                .iter()
                .filter(|(d, j)| *d <= p.r_sr || within_cone(a.heading, offset(*j), p.alpha_r))
                .take(p.n_neighbors)
                .map(|(_, j)| *j)
                .collect(),
        );
    }
    (attract, repel)
}

pub fn transform(config: &Configuration, angle: f64, shift: Vec2) -> Configuration {
    Configuration::new(
        config
            .agents
            .iter()
            .map(|a| {
                AgentState::with_heading(
                    a.position.rotated(angle) + shift,
                    a.heading.rotated(angle),
                )
            })
            .collect(),
    )
}

pub fn close(a: Vec2, b: Vec2, scale: f64) -> bool {
    (a - b).norm() <= 1e-9 * scale.max(1.0)
}

pub fn neighbors_match_brute_force(cases: u32) -> Result<(), String> {
    check(cases, config_and_params(50), |(config, p)| {
        let sets = select_neighbors(&config, &p).unwrap();
        let (attract, repel) = brute_force_neighbors(&config, &p);
        prop_assert_eq!(&sets.attract, &attract);
        prop_assert_eq!(&sets.repel, &repel);
        for i in 0..config.len() {
            prop_assert!(sets.attract[i].len() <= p.n_neighbors);
            prop_assert!(sets.repel[i].len() <= p.n_neighbors);
        }
        Ok(())
    })
}

pub fn rotation_and_translation_covariance(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            config_and_params(25),
            -3.2f64..3.2,
            -100.0f64..100.0,
            -100.0f64..100.0,
        ),
        |((config, p), angle, sx, sy)| {
            let base_sets = select_neighbors(&config, &p).unwrap();
            let base_v = velocity_field(&config, &base_sets, &p).unwrap();
            let moved = transform(&config, angle, Vec2::new(sx, sy));
            let sets = select_neighbors(&moved, &p).unwrap();
            prop_assert_eq!(&sets, &base_sets);
            let v = velocity_field(&moved, &sets, &p).unwrap();
            let scale = base_v.iter().map(|v| v.norm()).fold(0.0, f64::max) + p.xi * p.xi;
            for (a, b) in base_v.iter().zip(&v) {
                prop_assert!(close(a.rotated(angle), *b, scale), "{a:?} vs {b:?}");
            }
            Ok(())
        },
    )
}

pub fn complete_graph_attraction_sums_to_zero(cases: u32) -> Result<(), String> {
    check(cases, points(40, 30.0), |ps| {
        let config = Configuration::from_positions(ps);
        let n = config.len();
        let p = ModelParams::isotropic(n, n - 1, 5.0);
        let sets = select_neighbors(&config, &p).unwrap();
        let mut total = Vec2::ZERO;
        for i in 0..n {
            prop_assert_eq!(sets.attract[i].len(), n - 1);
            for &j in &sets.attract[i] {
                prop_assert!(sets.attract[j].contains(&i));
                total += config.agents[j].position - config.agents[i].position;
            }
        }
        prop_assert!(total.norm() < 1e-9 * (n * n) as f64 * 30.0, "{total:?}");
        Ok(())
    })
}

pub fn step_displacement_is_capped_and_noise_bounded(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            config_and_params(20),
            0.0f64..180.0,
            any::<u64>(),
            0.5f64..50.0,
        ),
        |((config, mut p), noise, seed, v_max)| {
            p.alpha_noise = noise;
            p.v_max = v_max;
            let sets = select_neighbors(&config, &p).unwrap();
            let capped: Vec<Vec2> = velocity_field(&config, &sets, &p)
                .unwrap()
                .into_iter()
                .map(|v| cap_speed(v, p.v_max))
                .collect();
            let mut rng = noise_rng(seed);
            let Ok(res) = step(&config, &p, &mut rng) else {
                // Repulsion can throw two agents onto each other; that is reported
                // as an error and not a displacement.
                return Ok(());
            };
            let cap = p.disp_cap();
            for (i, (a, b)) in config.agents.iter().zip(&res.config.agents).enumerate() {
                prop_assert!(a.position.distance(b.position) <= cap * (1.0 + 1e-12));
                let applied = b.velocity;
                prop_assert!(
                    (applied.norm() - capped[i].norm()).abs() <= 1e-9 * capped[i].norm().max(1.0)
                );
                if capped[i].norm() > 1e-9 {
                    let turn = capped[i].signed_angle_to(applied).to_degrees().abs();
                    prop_assert!(turn <= noise + 1e-9, "turn {turn} > {noise}");
                }
            }
            prop_assert!(res.dt_used <= p.solver.dt_max);
            Ok(())
        },
    )
}

pub fn runs_are_deterministic(cases: u32) -> Result<(), String> {
    check(
        cases,
        (any::<u64>(), 2usize..12, 0.0f64..30.0),
        |(seed, n_agents, noise)| {
            let mut p = ModelParams::isotropic(n_agents, 1, 3.0);
            p.alpha_noise = noise;
            p.seed = seed;
            p.solver.max_iters = 150;
            let init = random_initial(&p, seed).unwrap();
            let opts = RunOptions {
                snapshot_stride: 10,
                ..RunOptions::default()
            };
            let a = run_with(&init, &p, &opts).unwrap();
            let b = run_with(&init, &p, &opts).unwrap();
            prop_assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
            prop_assert_eq!(a, b);
            Ok(())
        },
    )
}

pub fn collision_avoidance_small_groups(cases: u32) -> Result<(), String> {
    check(cases, (points(3, 6.0), 1.0f64..5.0), |(ps, xi)| {
        let config = Configuration::from_positions(ps);
        let p = ModelParams::isotropic(config.len(), 1, xi);
        let mut rng = noise_rng(0);
        let mut current = config;
        for _ in 0..400 {
            let before = current.min_pairwise_distance();
            let res = step(&current, &p, &mut rng).unwrap();
            let after = res.config.min_pairwise_distance();
            if before < xi {
                prop_assert!(after >= before * (1.0 - 1e-12), "{before} -> {after}");
            }
            current = res.config;
        }
        Ok(())
    })
}

pub fn metrics_translation_and_rotation_invariance(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            agents(30, 20.0),
            -3.2f64..3.2,
            -50.0f64..50.0,
            -50.0f64..50.0,
        ),
        |(config, angle, sx, sy)| {
            let shifted = transform(&config, 0.0, Vec2::new(sx, sy));
            let turned = transform(&config, angle, Vec2::new(sx, sy));
            let (m0, v0) = nnd(&config).unwrap();
            for other in [&shifted, &turned] {
                let (m, v) = nnd(other).unwrap();
                prop_assert!((m - m0).abs() <= 1e-9 * m0.max(1.0));
                prop_assert!((v - v0).abs() <= 1e-8 * v0.max(1.0));
            }
            let e0 = elongation(&config);
            let b0 = nn_bearings(&config).unwrap();
            for other in [&shifted, &turned] {
                let e = elongation(other);
                if e0.is_finite() && e0 < 1e6 {
                    prop_assert!((e - e0).abs() <= 1e-6 * e0.max(1.0), "{e0} vs {e}");
                }
                for (a, b) in b0.iter().zip(nn_bearings(other).unwrap()) {
                    let diff = (a - b).rem_euclid(360.0);
                    prop_assert!(diff.min(360.0 - diff) <= 1e-6, "{a} vs {b}");
                }
            }
            Ok(())
        },
    )
}

pub fn alignment_index_partition_sums_to_100(cases: u32) -> Result<(), String> {
    check(cases, (agents(40, 20.0), 1usize..=90), |(config, m)| {
        let eps = 90.0 / m as f64;
        let bearings = nn_bearings(&config).unwrap();
        let total: f64 = (0..m)
            .map(|k| alignment_index_of(&bearings, (2 * k + 1) as f64 * eps, eps))
            .sum();
        prop_assert!((total - 100.0).abs() < 1e-9, "{total}");
        Ok(())
    })
}

pub fn histogram_counts_every_agent(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            agents(40, 20.0),
            prop::sample::select(vec![1.0, 5.0, 10.0, 15.0, 30.0, 90.0]),
        ),
        |(config, width)| {
            let h = nn_angle_histogram(&config, width).unwrap();
            prop_assert_eq!(h.total(), config.len() as u64);
            Ok(())
        },
    )
}

pub fn elongation_inverts_under_quarter_turn(cases: u32) -> Result<(), String> {
    check(cases, (points(30, 20.0), -3.2f64..3.2), |(ps, heading)| {
        let h = Vec2::from_angle(heading);
        let a = Configuration::new(ps.iter().map(|&p| AgentState::with_heading(p, h)).collect());
        let b = Configuration::new(
            ps.iter()
                .map(|&p| AgentState::with_heading(p, h.perp()))
                .collect(),
        );
        let (ea, eb) = (elongation(&a), elongation(&b));
        prop_assume!(ea.is_finite() && eb.is_finite() && ea > 1e-6 && eb > 1e-6);
        prop_assert!((ea * eb - 1.0).abs() < 1e-9, "{ea} * {eb}");
        Ok(())
    })
}

pub fn closest_sets_match_arg_min(cases: u32) -> Result<(), String> {
    check(cases, points(40, 20.0), |ps| {
        let config = Configuration::from_positions(ps.clone());
        let sets = closest_sets(&config, 0.0).unwrap();
        for (i, &pi) in ps.iter().enumerate() {
            let d_min = ps
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| pi.distance(*q))
                .fold(f64::INFINITY, f64::min);
            let expected: Vec<usize> = (0..ps.len())
                .filter(|&j| j != i && pi.distance(ps[j]) == d_min)
                .collect();
            prop_assert_eq!(&sets.members[i], &expected);
            prop_assert_eq!(sets.min_distance[i], d_min);
        }
        Ok(())
    })
}

pub fn equilibria_are_stationary_under_any_tie_break(cases: u32) -> Result<(), String> {
    check(
        cases,
        (
            1usize..=3,
            0.5f64..20.0,
            prop::collection::vec(any::<u32>(), 37),
        ),
        |(rings, xi, keys)| {
            let config = hex_lattice(rings, xi);
            let n = config.len();
            let verdict = verify_equilibrium(&config, xi, 1e-9 * xi, 1e-9 * xi).unwrap();
            prop_assert!(verdict.is_filippov_equilibrium);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| (keys[i], i));
            let p = ModelParams::isotropic(n, 1, xi);
            let res = step_with(
                &config,
                &p,
                &mut noise_rng(0),
                &TieBreak::from_priority(&order),
            )
            .unwrap();
            prop_assert!(
                res.max_relative_drift <= 1e-9 * xi,
                "{}",
                res.max_relative_drift
            );
            prop_assert!(res.max_speed <= 1e-9 * xi);
            Ok(())
        },
    )
}

pub fn equilibrium_subsets_respect_cardinality_bound(cases: u32) -> Result<(), String> {
    check(
        cases,
        (prop::collection::vec(any::<bool>(), 37), 0.5f64..10.0),
        |(mask, xi)| {
            let lattice = hex_lattice(3, xi);
            let kept: Vec<Vec2> = lattice
                .positions()
                .zip(&mask)
                .filter(|(_, &m)| m)
                .map(|(p, _)| p)
                .collect();
            prop_assume!(kept.len() >= 2);
            let config = Configuration::from_positions(kept);
            let verdict = verify_equilibrium(&config, xi, 1e-9 * xi, 1e-9 * xi).unwrap();
            if verdict.is_filippov_equilibrium {
                prop_assert!(verdict.max_cardinality <= 6);
            }
            prop_assert!(verdict.per_agent_cardinality.iter().all(|&c| c <= 6));
            Ok(())
        },
    )
}

pub fn metrics_report_flat_keys_are_fixed() {
    let config = hex_lattice(1, 2.0);
    let p = ModelParams::isotropic(config.len(), 1, 2.0);
    let keys: Vec<String> = MetricsReport::compute(&config, &p, &[45.0])
        .unwrap()
        .flat()
        .into_iter()
        .map(|(k, _)| k)
        .collect();
    assert_eq!(
        keys,
        [
            "nnd_mean",
            "nnd_variance",
            "elongation",
            "ai_30",
            "ai_180",
            "ai_45"
        ]
    );
}

pub fn tie_break_choice_changes_selection_only_among_equals() {
    let config = hex_lattice(1, 1.0);
    let p = ModelParams::isotropic(config.len(), 1, 1.0);
    let natural: Vec<usize> = (0..config.len()).collect();
    let reversed: Vec<usize> = natural.iter().rev().copied().collect();
    let by_index = select_neighbors_with(&config, &p, &TieBreak::from_priority(&natural)).unwrap();
    let by_rank = select_neighbors_with(&config, &p, &TieBreak::from_priority(&reversed)).unwrap();
    // Ring distances from the centre differ only by rounding.
    assert_eq!(by_index.attract[0], vec![1]);
    assert_eq!(by_rank.attract[0], vec![6]);
    for i in 0..config.len() {
        let d = |j: usize| {
            config.agents[i]
                .position
                .distance(config.agents[j].position)
        };
        assert!((d(by_index.attract[i][0]) - d(by_rank.attract[i][0])).abs() < 1e-12);
    }
}
