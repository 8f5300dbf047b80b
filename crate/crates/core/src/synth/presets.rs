//! Ready-made personas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Persona, PlaceSpec, VisitRule, DEFAULT_START};
use crate::geo::GeoPoint;
use crate::pctc::Tier;

fn origin() -> GeoPoint {
    GeoPoint::new(43.7044, -72.2887).expect("valid origin")
}

fn place(name: &str, tier: Tier, east_m: f64, north_m: f64, radius_m: f64, visits: Vec<VisitRule>) -> PlaceSpec {
    PlaceSpec {
        name: name.into(),
        tier,
        east_m,
        north_m,
        radius_m,
        visits,
        locals: Vec::new(),
        background: false,
    }
}

fn base(user_id: &str, seed: u64, span_days: u32) -> Persona {
    Persona {
        user_id: user_id.into(),
        seed,
        start: DEFAULT_START,
        span_days,
        sampling_interval_s: 600,
        sampling_jitter_s: 60,
        noise_sigma_m: 10.0,
        accuracy_m: 10.0,
        transit: true,
        transit_speed_mps: 1.4,
        origin: origin(),
        places: Vec::new(),
    }
}

const WEEKDAYS: [u8; 5] = [0, 1, 2, 3, 4];

/// Home every evening and a campus on weekdays, with a lab, a cafe and a
/// library inside the campus. 70 days from a Monday.
pub fn weekday_campus_worker(seed: u64) -> Persona {
    let mut p = base("campus_worker", seed, 70);
    let home = place("home", Tier::Global, 0.0, 0.0, 50.0, vec![VisitRule::daily(18 * 60 + 30, 240)]);
    let mut campus = place(
        "campus",
        Tier::Global,
        1200.0,
        400.0,
        200.0,
        vec![VisitRule::on(&WEEKDAYS, 9 * 60, 480)],
    );
    campus.locals = vec![
        place("lab", Tier::Local, -120.0, 60.0, 30.0, vec![VisitRule::on(&WEEKDAYS, 9 * 60 + 30, 150)]),
        place("cafe", Tier::Local, 40.0, -110.0, 30.0, vec![VisitRule::on(&WEEKDAYS, 12 * 60, 45)]),
        place("library", Tier::Local, 110.0, 90.0, 30.0, vec![VisitRule::on(&WEEKDAYS, 13 * 60 + 30, 150)]),
    ];
    p.places = vec![home, campus];
    p
}

/// Two buildings 48 m apart, each visited for two hours every day, with
/// noise small enough that their fixes never come closer than 45 m.
pub fn two_buildings(seed: u64) -> Persona {
    let mut p = base("two_buildings", seed, 20);
    p.sampling_jitter_s = 0;
    p.noise_sigma_m = 0.5;
    p.transit = false;
    p.places = vec![
        place("a", Tier::Global, 0.0, 0.0, 10.0, vec![VisitRule::daily(9 * 60, 120)]),
        place("b", Tier::Global, 48.0, 0.0, 10.0, vec![VisitRule::daily(14 * 60, 120)]),
    ];
    p
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    /// Time at the center, then `children` nested places.
    Dwell { children: usize },
    /// Only nested places.
    Campus { children: usize },
}

impl Kind {
    fn planted_locals(self) -> usize {
        match self {
            Kind::Dwell { children: 0 } => 0,
            Kind::Dwell { children } => children + 1,
            Kind::Campus { children } => children,
        }
    }
}

const LOCAL_RING_M: f64 = 100.0;
const MAX_LOCALS: usize = 5;

/// A seeded persona with 1 to 3 global places and at most 5 planted local
/// places, observed for 60 days at 10-minute sampling with σ = 10 m.
///
/// The first global place is home and closes every day. Others are visited
/// on weekdays or Monday to Saturday. A global place either has a center
/// where the user dwells, planted as its own local place when it has nested
/// places, or is a campus made only of nested places. Every day is one
/// chain of visits with walking time between places. An occasional errand
/// far from everything else adds fixes that belong to no POI.
pub fn random_persona(seed: u64) -> Persona {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = base(&format!("persona_{seed}"), seed, 60);
    let g = rng.random_range(1..=3usize);

    let kinds: Vec<Kind> = loop {
        let kinds: Vec<Kind> = (0..g)
            .map(|i| {
                if i > 0 && rng.random_bool(0.4) {
                    Kind::Campus {
                        children: rng.random_range(3..=5),
                    }
                } else {
                    Kind::Dwell {
                        children: rng.random_range(0..=3),
                    }
                }
            })
            .collect();
        if kinds.iter().map(|k| k.planted_locals()).sum::<usize>() <= MAX_LOCALS {
            break kinds;
        }
    };

    let mut centers: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    while centers.len() < g {
        let r = rng.random_range(500.0..=800.0);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let anchor = centers[rng.random_range(0..centers.len())];
        let c = (anchor.0 + r * a.cos(), anchor.1 + r * a.sin());
        let ok = centers.iter().all(|o| (c.0 - o.0).hypot(c.1 - o.1) >= 500.0);
        if ok {
            centers.push(c);
        }
    }

    // nested places as (name, offset from the global center)
    let mut layouts: Vec<Vec<(String, (f64, f64))>> = Vec::new();
    for (i, k) in kinds.iter().enumerate() {
        let mut spots = Vec::new();
        let (children, center) = match *k {
            Kind::Dwell { children } => (children, children > 0),
            Kind::Campus { children } => (children, false),
        };
        if center {
            spots.push((format!("g{i}.center"), (0.0, 0.0)));
        }
        let turn = rng.random_range(0.0..std::f64::consts::TAU);
        for j in 0..children {
            let step = std::f64::consts::TAU / children as f64;
            let a = turn + j as f64 * step + rng.random_range(-10f64..=10.0).to_radians();
            spots.push((format!("g{i}.l{j}"), (LOCAL_RING_M * a.cos(), LOCAL_RING_M * a.sin())));
        }
        layouts.push(spots);
    }

    let weekdays_of: Vec<Vec<u8>> = (0..g)
        .map(|i| {
            if i == 0 {
                (0..7).collect()
            } else if rng.random_bool(0.5) {
                WEEKDAYS.to_vec()
            } else {
                (0..6).collect()
            }
        })
        .collect();

    let mut global_rules: Vec<Vec<VisitRule>> = vec![Vec::new(); g];
    let mut local_rules: Vec<Vec<Vec<VisitRule>>> = layouts.iter().map(|l| vec![Vec::new(); l.len()]).collect();
    for day in 0..7u8 {
        let mut order: Vec<usize> = (1..g).filter(|&i| weekdays_of[i].contains(&day)).collect();
        order.push(0);
        let mut t = 7 * 60 + rng.random_range(0..30u32);
        let mut last: Option<(f64, f64)> = None;
        for &gi in &order {
            let c = centers[gi];
            let spots = &layouts[gi];
            let first = spots.first().map_or(c, |s| (c.0 + s.1 .0, c.1 + s.1 .1));
            if let Some(prev) = last {
                let d = (first.0 - prev.0).hypot(first.1 - prev.1);
                t += (d / 1.4 / 60.0).ceil() as u32 + 1;
            }
            let start = t;
            let mut spot_minutes: Vec<u32> = Vec::new();
            match kinds[gi] {
                Kind::Dwell { children } => {
                    let (lo, hi) = match children {
                        0 => (130, 190),
                        1 => (90, 145),
                        2 => (60, 105),
                        _ => (60, 60),
                    };
                    let center = rng.random_range(lo..=hi);
                    if children == 0 {
                        t += center;
                    } else {
                        spot_minutes.push(center);
                    }
                    for _ in 0..children {
                        spot_minutes.push(rng.random_range(40..=45));
                    }
                }
                Kind::Campus { children } => {
                    for _ in 0..children {
                        spot_minutes.push(rng.random_range(40..=45));
                    }
                }
            }
            for (k, &m) in spot_minutes.iter().enumerate() {
                local_rules[gi][k].push(VisitRule::on(&[day], t, m));
                t += m;
            }
            global_rules[gi].push(VisitRule::on(&[day], start, t - start));
            let end = spots.last().map_or(c, |s| (c.0 + s.1 .0, c.1 + s.1 .1));
            last = Some(end);
        }
    }

    p.places = (0..g)
        .map(|i| {
            let mut gp = place(&format!("g{i}"), Tier::Global, centers[i].0, centers[i].1, 150.0, global_rules[i].clone());
            gp.locals = layouts[i]
                .iter()
                .zip(&local_rules[i])
                .map(|((name, at), rules)| place(name, Tier::Local, at.0, at.1, 30.0, rules.clone()))
                .collect();
            gp
        })
        .collect();

    // an errand on about half of the Sundays, too rare to be a POI at either tier
    let errand = loop {
        let r = rng.random_range(1500.0..=2500.0);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let c = (r * a.cos(), r * a.sin());
        if centers.iter().all(|o| (c.0 - o.0).hypot(c.1 - o.1) >= 500.0) {
            break c;
        }
    };
    let mut rule = VisitRule::on(&[6], 6 * 60, 40);
    rule.probability = 0.5;
    let mut errand = place("errand", Tier::Global, errand.0, errand.1, 50.0, vec![rule]);
    errand.background = true;
    p.places.push(errand);
    p
}
