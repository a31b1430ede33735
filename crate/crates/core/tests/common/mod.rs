#![allow(dead_code)]

use rand::Rng;
use stlfunnel_core::stl::{Interval, Predicate, StateFormula, TemporalFormula};

pub const DIM: usize = 3;

fn selector<R: Rng>(rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..DIM).filter(|_| rng.random_bool(0.6)).collect();
    if idx.is_empty() {
        idx.push(rng.random_range(0..DIM));
    }
    idx
}

/// Random concave predicate leaf: affine, negated affine or ball.
pub fn random_leaf<R: Rng>(rng: &mut R, name: &str) -> StateFormula {
    let sel = selector(rng);
    match rng.random_range(0..3) {
        0 | 1 => {
            let coeffs = sel.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = Predicate::affine(name, coeffs, rng.random_range(-2.0..2.0), sel).unwrap();
            if rng.random_bool(0.5) {
                StateFormula::pred(p)
            } else {
                StateFormula::neg(p).unwrap()
            }
        }
        _ => {
            let center = sel.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
            let radius = rng.random_range(0.3..3.0);
            StateFormula::pred(Predicate::ball(name, center, radius, sel).unwrap())
        }
    }
}

/// Conjunction of 1..=`max_leaves` random leaves with distinct names.
pub fn random_state_formula<R: Rng>(rng: &mut R, max_leaves: usize) -> StateFormula {
    let k = rng.random_range(1..=max_leaves);
    StateFormula::and((0..k).map(|i| random_leaf(rng, &format!("p{i}"))))
}

pub fn random_interval<R: Rng>(rng: &mut R) -> Interval {
    let a = rng.random_range(0..10) as f64;
    let b = a + rng.random_range(0..10) as f64;
    Interval::new(a, b).unwrap()
}

pub fn random_temporal<R: Rng>(rng: &mut R, body: StateFormula) -> TemporalFormula {
    match rng.random_range(0..3) {
        0 => TemporalFormula::always(random_interval(rng), body).unwrap(),
        1 => TemporalFormula::eventually(random_interval(rng), body).unwrap(),
        _ => {
            TemporalFormula::eventually_always(random_interval(rng), random_interval(rng), body)
                .unwrap()
        }
    }
}
