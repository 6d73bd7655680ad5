//! Random draws for one chain or a coupled pair of chains.
//!
//! Every proposal is written once against [`Pair`]: with `y` absent it is
//! the ordinary single-chain kernel, with `y` present each draw is a
//! maximal coupling of the two chains' proposal laws, so each chain keeps
//! its own marginal law and the draws coincide as often as possible.

use rand::Rng;

/// A value for the `x` chain and, when coupled, for the `y` chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair<T> {
    pub x: T,
    pub y: Option<T>,
}

impl<T> Pair<T> {
    pub fn single(x: T) -> Self {
        Pair { x, y: None }
    }

    pub fn both(x: T, y: T) -> Self {
        Pair { x, y: Some(y) }
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> Pair<U> {
        Pair {
            x: f(self.x),
            y: self.y.map(f),
        }
    }

    pub fn as_ref(&self) -> Pair<&T> {
        Pair {
            x: &self.x,
            y: self.y.as_ref(),
        }
    }

    pub fn zip<U>(self, other: Pair<U>) -> Pair<(T, U)> {
        Pair {
            x: (self.x, other.x),
            y: match (self.y, other.y) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => panic!("pairs of different arity"),
            },
        }
    }
}

/// A proposal law that can be sampled and evaluated.
pub trait Law {
    type Value: Clone + PartialEq;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Value;
    /// Log density (or log mass) at `v`; `-∞` off the support.
    fn log_density(&self, v: &Self::Value) -> f64;
}

/// Draw from each available law. Two laws are maximally coupled: `x` is
/// drawn from its law, `y` copies it with probability `min(1, q/p)` and is
/// otherwise drawn from the residual of its own law by rejection.
pub fn draw<L: Law, R: Rng + ?Sized>(laws: Pair<Option<L>>, rng: &mut R) -> Pair<Option<L::Value>> {
    match (laws.x, laws.y) {
        (p, None) => Pair::single(p.map(|p| p.sample(rng))),
        (None, Some(q)) => Pair::both(None, q.map(|q| q.sample(rng))),
        (Some(p), Some(None)) => Pair::both(Some(p.sample(rng)), None),
        (Some(p), Some(Some(q))) => {
            let (a, b) = coupled(&p, &q, rng);
            Pair::both(Some(a), Some(b))
        }
    }
}

/// Draw from one law per chain, all present.
pub fn draw_all<L: Law, R: Rng + ?Sized>(laws: Pair<L>, rng: &mut R) -> Pair<L::Value> {
    let out = draw(laws.map(Some), rng);
    out.map(|v| v.expect("law present"))
}

fn coupled<L: Law, R: Rng + ?Sized>(p: &L, q: &L, rng: &mut R) -> (L::Value, L::Value) {
    let x = p.sample(rng);
    let (px, qx) = (p.log_density(&x), q.log_density(&x));
    if rng.random::<f64>().ln() + px <= qx {
        return (x.clone(), x);
    }
    loop {
        let y = q.sample(rng);
        let (py, qy) = (p.log_density(&y), q.log_density(&y));
        if rng.random::<f64>().ln() + qy > py {
            return (x, y);
        }
    }
}

/// Uniform on `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Uniform {
    pub lo: f64,
    pub hi: f64,
}

impl Uniform {
    /// `None` when the interval is empty.
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo < hi && lo.is_finite() && hi.is_finite()).then_some(Uniform { lo, hi })
    }
}

impl Law for Uniform {
    type Value = f64;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = self.lo + (self.hi - self.lo) * rng.random::<f64>();
        if v >= self.hi {
            self.lo
        } else {
            v
        }
    }

    fn log_density(&self, v: &f64) -> f64 {
        if (self.lo..self.hi).contains(v) {
            -(self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `shift + base·e^u` with `u ~ U(-δ, δ)`: a log-uniform multiplier acting
/// on the distance from `shift`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    pub shift: f64,
    pub base: f64,
    pub delta: f64,
}

impl Law for Scaled {
    type Value = f64;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = self.delta * (2.0 * rng.random::<f64>() - 1.0);
        self.shift + self.base * u.exp()
    }

    fn log_density(&self, v: &f64) -> f64 {
        let d = v - self.shift;
        if !(d > 0.0) {
            return f64::NEG_INFINITY;
        }
        let u = (d / self.base).ln();
        if u.abs() <= self.delta {
            -(2.0 * self.delta).ln() - d.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Either continuous law, so one coupled draw can mix them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Continuous {
    Uniform(Uniform),
    Scaled(Scaled),
}

impl Law for Continuous {
    type Value = f64;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Continuous::Uniform(u) => u.sample(rng),
            Continuous::Scaled(s) => s.sample(rng),
        }
    }

    fn log_density(&self, v: &f64) -> f64 {
        match self {
            Continuous::Uniform(u) => u.log_density(v),
            Continuous::Scaled(s) => s.log_density(v),
        }
    }
}

/// A choice among keyed items with optional weights. Coupled choices agree
/// on the key, so the same clade is picked in both chains even when their
/// node numbering differs.
#[derive(Clone, Debug, PartialEq)]
pub struct Keyed<K> {
    pub keys: Vec<K>,
    pub weights: Option<Vec<f64>>,
}

impl<K: Clone + PartialEq> Keyed<K> {
    /// Uniform over `keys`; `None` when empty.
    pub fn uniform(keys: Vec<K>) -> Option<Self> {
        (!keys.is_empty()).then_some(Keyed {
            keys,
            weights: None,
        })
    }

    /// Proportional to `weights`; `None` when all weights are zero.
    pub fn weighted(keys: Vec<K>, weights: Vec<f64>) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        (total > 0.0).then_some(Keyed {
            keys,
            weights: Some(weights),
        })
    }

    pub fn position(&self, k: &K) -> usize {
        self.keys
            .iter()
            .position(|x| x == k)
            .expect("drawn key is present")
    }
}

impl<K: Clone + PartialEq> Law for Keyed<K> {
    type Value = K;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> K {
        match &self.weights {
            None => self.keys[rng.random_range(0..self.keys.len())].clone(),
            Some(w) => {
                let total: f64 = w.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (k, &wi) in self.keys.iter().zip(w) {
                    if u < wi {
                        return k.clone();
                    }
                    u -= wi;
                }
                let last = w.iter().rposition(|&x| x > 0.0).unwrap();
                self.keys[last].clone()
            }
        }
    }

    fn log_density(&self, v: &K) -> f64 {
        let Some(i) = self.keys.iter().position(|x| x == v) else {
            return f64::NEG_INFINITY;
        };
        match &self.weights {
            None => -(self.keys.len() as f64).ln(),
            Some(w) => (w[i] / w.iter().sum::<f64>()).ln(),
        }
    }
}

/// A law on counts given by its log mass function and a sampler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CountLaw {
    Poisson {
        mean: f64,
    },
    /// Mass `Γ(r+k)/(Γ(r)k!) p^k (1-p)^r`.
    NegativeBinomial {
        r: f64,
        p: f64,
    },
}

impl Law for CountLaw {
    type Value = usize;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        use rand_distr::{Distribution, Gamma, Poisson};
        let mean = match *self {
            CountLaw::Poisson { mean } => mean,
            CountLaw::NegativeBinomial { r, p } => Gamma::new(r, p / (1.0 - p))
                .expect("valid shape")
                .sample(rng),
        };
        if mean <= 0.0 {
            return 0;
        }
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    }

    fn log_density(&self, v: &usize) -> f64 {
        use statrs::function::gamma::ln_gamma;
        let k = *v as f64;
        match *self {
            CountLaw::Poisson { mean } => {
                if mean <= 0.0 {
                    return if *v == 0 { 0.0 } else { f64::NEG_INFINITY };
                }
                k * mean.ln() - mean - ln_gamma(k + 1.0)
            }
            CountLaw::NegativeBinomial { r, p } => {
                if p <= 0.0 {
                    return if *v == 0 { 0.0 } else { f64::NEG_INFINITY };
                }
                ln_gamma(r + k) - ln_gamma(r) - ln_gamma(k + 1.0) + k * p.ln() + r * (-p).ln_1p()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn check_marginals<L: Law<Value = f64>>(p: L, q: L, lo: f64, hi: f64, expect_meet: f64) {
        let mut r = rng::from_seed(21);
        let n = 200_000;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut met = 0;
        for _ in 0..n {
            let (a, b) = coupled(&p, &q, &mut r);
            met += (a == b) as usize;
            xs.push(a);
            ys.push(b);
        }
        let mut ind_x: Vec<f64> = (0..n).map(|_| p.sample(&mut r)).collect();
        let mut ind_y: Vec<f64> = (0..n).map(|_| q.sample(&mut r)).collect();
        for (mut a, b) in [(xs, &mut ind_x), (ys, &mut ind_y)] {
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for k in 1..10 {
                let i = k * n / 10;
                assert!(
                    (a[i] - b[i]).abs() < 0.01 * (hi - lo),
                    "decile {k}: {} vs {}",
                    a[i],
                    b[i]
                );
            }
        }
        let rate = met as f64 / n as f64;
        assert!((rate - expect_meet).abs() < 0.01, "meeting rate {rate}");
    }

    #[test]
    fn uniform_coupling_meets_at_overlap() {
        check_marginals(
            Uniform::new(0.0, 2.0).unwrap(),
            Uniform::new(1.0, 3.0).unwrap(),
            0.0,
            3.0,
            0.5,
        );
    }

    #[test]
    fn scaled_coupling_keeps_marginals() {
        let p = Scaled {
            shift: 0.0,
            base: 1.0,
            delta: 0.7,
        };
        let q = Scaled { base: 1.2, ..p };
        // Overlap of the two log-uniform laws: both densities are 1/(2δv);
        // the common support in log scale has length 2δ - ln 1.2.
        let overlap = (1.4 - 1.2f64.ln()) / 1.4;
        check_marginals(p, q, 0.4, 2.5, overlap);
    }

    #[test]
    fn identical_laws_always_agree() {
        let mut r = rng::from_seed(1);
        let k = Keyed::uniform(vec![3, 1, 4, 1_5]).unwrap();
        for _ in 0..1000 {
            let (a, b) = coupled(&k, &k, &mut r);
            assert_eq!(a, b);
            let c = CountLaw::NegativeBinomial { r: 2.5, p: 0.3 };
            let (a, b) = coupled(&c, &c, &mut r);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn keyed_coupling_uses_common_keys() {
        let mut r = rng::from_seed(2);
        let p = Keyed::uniform(vec!['a', 'b']).unwrap();
        let q = Keyed::uniform(vec!['b', 'c']).unwrap();
        let n = 100_000;
        let mut same = 0;
        let mut y_b = 0;
        for _ in 0..n {
            let (a, b) = coupled(&p, &q, &mut r);
            same += (a == b) as usize;
            y_b += (b == 'b') as usize;
        }
        assert!((same as f64 / n as f64 - 0.5).abs() < 0.01);
        assert!((y_b as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn count_laws_sum_to_one() {
        for law in [
            CountLaw::Poisson { mean: 2.3 },
            CountLaw::NegativeBinomial { r: 1.5, p: 0.2 },
        ] {
            let total: f64 = (0..200).map(|k| law.log_density(&k).exp()).sum();
            assert!((total - 1.0).abs() < 1e-10);
            let mut r = rng::from_seed(5);
            let n = 100_000;
            let mean = (0..n).map(|_| law.sample(&mut r) as f64).sum::<f64>() / n as f64;
            let expect: f64 = (0..200).map(|k| k as f64 * law.log_density(&k).exp()).sum();
            assert!((mean - expect).abs() < 0.03, "{mean} vs {expect}");
        }
    }
}
