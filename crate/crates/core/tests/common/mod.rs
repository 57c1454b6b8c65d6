#![allow(dead_code)]

use std::sync::Arc;

use harmbound::ahe::{Atom, AtomLaw};
use harmbound::data::Arm;
use harmbound::estimands::EstimandKind;
use harmbound::nuisance::{NuisanceBundle, ScalarFn};
use harmbound::policy::Policy;
use harmbound::spec::AheSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A finite population: atom `i` sits at `x = [i, u_i]` with outcome means
/// `mu[i]` and propensity `e[i]`.
#[derive(Clone)]
pub struct Instance {
    pub law: AtomLaw,
    pub mu: Vec<[f64; 2]>,
    pub e: Vec<f64>,
    pub pi0: Policy,
    pub pi1: Policy,
}

impl Instance {
    pub fn mu_fn(&self) -> impl Fn(&[f64], Arm) -> f64 + Send + Sync + 'static {
        let mu = self.mu.clone();
        move |x, a| mu[x[0] as usize][a.index()]
    }

    pub fn e_fn(&self) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
        let e = self.e.clone();
        move |x| e[x[0] as usize]
    }

    pub fn atoms(&self) -> usize {
        self.mu.len()
    }

    /// The five estimand kinds with AHE encodings, using this instance's policies.
    pub fn kinds(&self) -> Vec<EstimandKind> {
        vec![
            EstimandKind::FnaLower,
            EstimandKind::FnaUpper,
            EstimandKind::FnaLowerPolicy { pi0: self.pi0.clone(), pi1: self.pi1.clone() },
            EstimandKind::FnaUpperPolicy { pi0: self.pi0.clone(), pi1: self.pi1.clone() },
            EstimandKind::FnaUpperOptimal,
        ]
    }
}

fn random_mu(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random::<f64>(),
    }
}

/// Per-atom arm table as a policy.
pub fn table_policy(arms: Vec<Arm>) -> Policy {
    Policy::custom(move |x| arms[x[0] as usize])
}

fn random_policy(rng: &mut ChaCha8Rng, atoms: usize) -> Policy {
    match rng.random_range(0..4) {
        0 => Policy::never(),
        1 => Policy::always(),
        2 => Policy::Threshold { column: 1, cutoff: rng.random_range(-1.0..1.0) },
        _ => table_policy((0..atoms).map(|_| Arm::from_bit(rng.random_range(0..2)).unwrap()).collect()),
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_atoms: usize) -> Instance {
    let k = rng.random_range(1..=max_atoms);
    let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|p| *p /= total);
    // absorb rounding into the last atom so the masses sum to one
    let head: f64 = w[..k - 1].iter().sum();
    w[k - 1] = 1.0 - head;
    let atoms = w
        .iter()
        .enumerate()
        .map(|(i, &prob)| Atom { x: vec![i as f64, rng.random_range(-1.0..1.0)], prob })
        .collect();
    let mu = (0..k).map(|_| [random_mu(rng), random_mu(rng)]).collect();
    let e = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
    let pi0 = random_policy(rng, k);
    let pi1 = if rng.random_range(0..5) == 0 { pi0.clone() } else { random_policy(rng, k) };
    Instance { law: AtomLaw::new(atoms).unwrap(), mu, e, pi0, pi1 }
}

pub fn instances(seed: u64, count: usize, max_atoms: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng, max_atoms)).collect()
}

/// Hand-built cases where the fraction harmed is point identified or not.
pub fn edge_cases() -> Vec<(Instance, bool)> {
    let law1 = AtomLaw::new(vec![Atom { x: vec![0.0, 0.0], prob: 1.0 }]).unwrap();
    let law2 = AtomLaw::new(vec![Atom { x: vec![0.0, -0.5], prob: 0.5 }, Atom { x: vec![1.0, 0.5], prob: 0.5 }]).unwrap();
    let make = |law: &AtomLaw, mu: Vec<[f64; 2]>, pi0: Policy, pi1: Policy| Instance {
        law: law.clone(),
        e: vec![0.5; mu.len()],
        mu,
        pi0,
        pi1,
    };
    let thr = Policy::Threshold { column: 1, cutoff: 0.0 };
    vec![
        (make(&law1, vec![[0.5, 0.5]], thr.clone(), thr.clone()), true),
        (make(&law2, vec![[0.3, 0.8], [0.6, 0.2]], thr.clone(), thr.clone()), true),
        (make(&law1, vec![[0.0, 0.4]], Policy::never(), Policy::always()), true),
        (make(&law1, vec![[1.0, 0.4]], Policy::never(), Policy::always()), true),
        (make(&law1, vec![[0.4, 0.0]], Policy::never(), Policy::always()), true),
        (make(&law1, vec![[0.4, 1.0]], Policy::always(), Policy::never()), true),
        (make(&law2, vec![[1.0, 0.6], [0.5, 0.0]], Policy::never(), Policy::always()), true),
        // policies agree on the non-degenerate atom only
        (make(&law2, vec![[0.5, 0.5], [1.0, 0.3]], Policy::never(), thr.clone()), true),
        (make(&law1, vec![[0.5, 0.5]], Policy::never(), Policy::always()), false),
        (make(&law2, vec![[0.5, 0.5], [0.6, 0.3]], thr, Policy::never()), false),
    ]
}

/// Bundle with the true propensity and outcome model and the true hinge arguments.
pub fn true_bundle(inst: &Instance, spec: &AheSpec, floor: f64) -> NuisanceBundle {
    bundle_with(Arc::new(inst.e_fn()), inst.mu.clone(), true_eta(inst, spec), floor)
}

pub fn true_eta(inst: &Instance, spec: &AheSpec) -> Vec<ScalarFn> {
    (0..spec.m())
        .map(|l| {
            let spec = spec.clone();
            let mu = inst.mu.clone();
            Arc::new(move |x: &[f64]| {
                let m = mu[x[0] as usize];
                spec.eta(l, x, m[0], m[1])
            }) as ScalarFn
        })
        .collect()
}

pub fn bundle_with(
    e: ScalarFn,
    mu: Vec<[f64; 2]>,
    eta: Vec<ScalarFn>,
    floor: f64,
) -> NuisanceBundle {
    NuisanceBundle::new(e, Arc::new(move |x: &[f64], a: Arm| mu[x[0] as usize][a.index()]), eta, floor)
}

/// Hinge arguments with the sign of the truth flipped on a random subset of atoms.
pub fn flipped_eta(
    inst: &Instance,
    spec: &AheSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<ScalarFn> {
    (0..spec.m())
        .map(|l| {
            let values: Vec<f64> = inst
                .law
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let eta = spec.eta(l, &a.x, inst.mu[i][0], inst.mu[i][1]);
                    match rng.random_range(0..3) {
                        0 => -eta,
                        1 if eta == 0.0 => 0.5,
                        _ => eta,
                    }
                })
                .collect();
            Arc::new(move |x: &[f64]| values[x[0] as usize]) as ScalarFn
        })
        .collect()
}

/// Brute-force CVaR: the average of the worst `alpha` mass of a finite law.
pub fn cvar_bruteforce(law: &[(f64, f64)], alpha: f64) -> f64 {
    let mut sorted = law.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut mass, mut total) = (0.0, 0.0);
    for (v, p) in sorted {
        if mass >= alpha {
            break;
        }
        let take = p.min(alpha - mass);
        total += take * v;
        mass += take;
    }
    total / alpha
}

/// Random law of the individual effect on `{-1, 0, 1}`.
pub fn three_point_law(rng: &mut ChaCha8Rng) -> [(f64, f64); 3] {
    let mut w = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
    if rng.random_range(0..8) == 0 {
        w[rng.random_range(0..3)] = 0.0;
    }
    let total: f64 = w.iter().sum();
    [(-1.0, w[0] / total), (0.0, w[1] / total), (1.0, w[2] / total)]
}
