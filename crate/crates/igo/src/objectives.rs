//! Analytic benchmark objectives.
//!
//! The centerpiece is the convex quadratic `f(x) = x^T H x / 2` whose volume
//! loss, utility and natural gradient all have closed forms, making it the
//! reference against which the Monte-Carlo machinery is checked. A small
//! suite of named benchmark functions (sphere, ellipsoids, monotone-warped
//! variants) feeds invariance tests and the `bench` command.

use crate::matrix::{sym_eigen, symmetrize, SpdMatrix};
use crate::ngd::{GaussianSearchDistribution, Objective};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Gamma function via the Lanczos approximation (g = 7, 9 coefficients).
///
/// Accurate to better than 1e-13 relative on `[0.5, 60]`, which covers every
/// `Gamma(d/2 + 1)` needed for dimensions up to 100.
pub fn gamma(z: f64) -> f64 {
    const COEFFICIENTS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(z >= 0.5, "gamma is evaluated on [0.5, inf) here");
    let z = z - 1.0;
    let mut x = COEFFICIENTS[0];
    for (i, c) in COEFFICIENTS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + 7.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * x
}

/// Volume of the unit ball in `dim` dimensions,
/// `pi^{d/2} / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    PI.powf(dim as f64 / 2.0) / gamma(dim as f64 / 2.0 + 1.0)
}

/// The benchmark quadratic `f(x) = x^T H x / 2` with SPD Hessian `H`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    hessian: SpdMatrix,
}

impl QuadraticObjective {
    pub fn new(hessian: SpdMatrix) -> Self {
        Self { hessian }
    }

    pub fn sphere(dim: usize) -> Self {
        Self::new(SpdMatrix::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    pub fn hessian(&self) -> &SpdMatrix {
        &self.hessian
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x.transpose() * self.hessian.as_matrix() * x)[(0, 0)]
    }

    fn det_hessian(&self) -> f64 {
        let (values, _) = sym_eigen(self.hessian.as_matrix()).expect("validated SPD");
        values.iter().product()
    }

    /// The gradient constant
    /// `kappa = 2 pi / (Gamma(d/2 + 1) sqrt(det H))^{2/d}`.
    pub fn kappa(&self) -> f64 {
        let d = self.dim() as f64;
        let base = gamma(d / 2.0 + 1.0) * self.det_hessian().sqrt();
        2.0 * PI / base.powf(2.0 / d)
    }

    /// Volume of the sublevel set `{y : f(y) <= f(x)}`, i.e.
    /// `|sqrt(H) x|^d det(H)^{-1/2} V_d(1)`. Invariant under strictly
    /// increasing transformations of `f` because the set itself is.
    pub fn volume_loss(&self, x: &DVector<f64>) -> f64 {
        let d = self.dim();
        let hx = (x.transpose() * self.hessian.as_matrix() * x)[(0, 0)].max(0.0);
        hx.sqrt().powi(d as i32) / self.det_hessian().sqrt() * unit_ball_volume(d)
    }

    /// Expected `L^{2/d}` under the search distribution:
    /// `(V_d(1)/sqrt(det H))^{2/d} (mu^T H mu + Tr(H Sigma))`.
    pub fn utility(&self, dist: &GaussianSearchDistribution) -> f64 {
        let d = self.dim() as f64;
        let factor =
            (unit_ball_volume(self.dim()) / self.det_hessian().sqrt()).powf(2.0 / d);
        let h = self.hessian.as_matrix();
        let quad = (dist.mu().transpose() * h * dist.mu())[(0, 0)];
        let trace = (h * dist.sigma().as_matrix()).trace();
        factor * (quad + trace)
    }

    /// Exact natural gradient `(kappa Sigma H mu, kappa Sigma H Sigma)`.
    ///
    /// The covariance term is a sandwich of SPD factors and therefore SPD
    /// itself; this is asserted as a structural check.
    pub fn exact_natural_gradient(
        &self,
        dist: &GaussianSearchDistribution,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let kappa = self.kappa();
        let sigma = dist.sigma().as_matrix();
        let h = self.hessian.as_matrix();
        let delta_mu = sigma * h * dist.mu() * kappa;
        let delta_sigma = symmetrize(&(sigma * h * sigma)) * kappa;
        let (values, _) = sym_eigen(&delta_sigma).expect("symmetrized product");
        assert!(
            values[values.len() - 1] > 0.0,
            "Sigma H Sigma sandwich must stay positive definite"
        );
        (delta_mu, delta_sigma)
    }
}

/// Diagonal Hessian `diag(c^{i/(d-1)})`, `i = 0..d-1`, with condition
/// number `c`.
pub fn ellipsoid_hessian(dim: usize, condition: f64) -> SpdMatrix {
    assert!(dim >= 1 && condition >= 1.0);
    let entries: Vec<f64> = (0..dim)
        .map(|i| {
            if dim == 1 {
                1.0
            } else {
                condition.powf(i as f64 / (dim - 1) as f64)
            }
        })
        .collect();
    SpdMatrix::from_diagonal(&entries).expect("positive diagonal")
}

/// A named benchmark function, optionally carrying the Hessian of its
/// underlying quadratic (shared by monotone-warped variants, which have the
/// same sublevel sets).
pub struct Benchmark {
    pub name: &'static str,
    pub hessian: Option<SpdMatrix>,
    f: Box<dyn Fn(&DVector<f64>) -> f64 + Sync + Send>,
}

impl Benchmark {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.f)(x)
    }
}

impl Objective for Benchmark {
    fn evaluate(&self, x: &DVector<f64>) -> f64 {
        self.value(x)
    }
}

/// Deterministic benchmark objectives: sphere, ellipsoids with condition 10
/// and 100, and monotone-warped variants sharing the sphere/ellipsoid argmin.
pub fn benchmark_suite(dim: usize) -> Vec<Benchmark> {
    let sphere = QuadraticObjective::sphere(dim);
    let ell10 = QuadraticObjective::new(ellipsoid_hessian(dim, 10.0));
    let ell100 = QuadraticObjective::new(ellipsoid_hessian(dim, 100.0));
    let sphere_exp = sphere.clone();
    let ell10_cbrt = ell10.clone();
    vec![
        Benchmark {
            name: "sphere",
            hessian: Some(sphere.hessian().clone()),
            f: Box::new(move |x| sphere.value(x)),
        },
        Benchmark {
            name: "ellipsoid-10",
            hessian: Some(ell10.hessian().clone()),
            f: Box::new(move |x| ell10.value(x)),
        },
        Benchmark {
            name: "ellipsoid-100",
            hessian: Some(ell100.hessian().clone()),
            f: Box::new(move |x| ell100.value(x)),
        },
        Benchmark {
            name: "exp-sphere",
            hessian: Some(SpdMatrix::identity(dim)),
            f: Box::new(move |x| sphere_exp.value(x).exp()),
        },
        Benchmark {
            name: "cbrt-ellipsoid-10",
            hessian: Some(ellipsoid_hessian(dim, 10.0)),
            f: Box::new(move |x| ell10_cbrt.value(x).cbrt()),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::condition_number;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn dist(mu: Vec<f64>, sigma: SpdMatrix) -> GaussianSearchDistribution {
        GaussianSearchDistribution::new(DVector::from_vec(mu), sigma).unwrap()
    }

    #[test]
    fn gamma_matches_exact_half_integers() {
        // Gamma(n) = (n-1)! and Gamma(n + 1/2) = sqrt(pi) (2n)! / (4^n n!),
        // both computable by the recursion Gamma(z+1) = z Gamma(z).
        let mut exact_int = 1.0; // Gamma(1)
        let mut exact_half = PI.sqrt(); // Gamma(1/2)
        for n in 1..=60 {
            let z_int = n as f64;
            assert_relative_eq!(gamma(z_int), exact_int, max_relative = 1e-12);
            let z_half = n as f64 - 0.5;
            assert_relative_eq!(gamma(z_half), exact_half, max_relative = 1e-12);
            exact_int *= z_int;
            exact_half *= z_half;
        }
    }

    #[test]
    fn kappa_examples() {
        let q = QuadraticObjective::sphere(2);
        assert_relative_eq!(q.kappa(), 2.0 * PI, max_relative = 1e-12);
        let q = QuadraticObjective::sphere(1);
        assert_relative_eq!(q.kappa(), 8.0, max_relative = 1e-12);
        let q = QuadraticObjective::new(SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap());
        assert_relative_eq!(q.kappa(), PI, max_relative = 1e-12);
    }

    #[test]
    fn volume_loss_examples() {
        let q = QuadraticObjective::sphere(2);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_relative_eq!(q.volume_loss(&x), PI, max_relative = 1e-12);

        let q = QuadraticObjective::new(SpdMatrix::from_diagonal(&[2.0]).unwrap());
        let x = DVector::from_vec(vec![1.0]);
        assert_relative_eq!(q.volume_loss(&x), 2.0, max_relative = 1e-12);

        let q = QuadraticObjective::new(SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap());
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_relative_eq!(q.volume_loss(&x), 2.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn volume_loss_matches_grid_oracle_d2() {
        // Brute-force integration of the sublevel indicator over [-5, 5]^2
        // with 2001 points per axis.
        let q = QuadraticObjective::new(SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap());
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let level = q.value(&x);
        let n = 2001;
        let step = 10.0 / (n - 1) as f64;
        let mut count = 0u64;
        for i in 0..n {
            let y1 = -5.0 + i as f64 * step;
            for j in 0..n {
                let y2 = -5.0 + j as f64 * step;
                if 0.5 * (4.0 * y1 * y1 + y2 * y2) <= level {
                    count += 1;
                }
            }
        }
        let grid_volume = count as f64 * step * step;
        assert!((grid_volume - q.volume_loss(&x)).abs() < 0.05);
        assert_relative_eq!(q.volume_loss(&x), 6.2832, epsilon = 1e-4);
    }

    #[test]
    fn volume_loss_invariant_under_monotone_warp() {
        // The sublevel set of g(f) equals the sublevel set of f for any
        // strictly increasing g, so the loss is literally the same number.
        let q = QuadraticObjective::new(ellipsoid_hessian(3, 10.0));
        let x = DVector::from_vec(vec![0.3, -1.2, 0.7]);
        let y = DVector::from_vec(vec![1.0, 0.1, -0.4]);
        let monotone_pair = |a: &DVector<f64>, b: &DVector<f64>| {
            (q.value(a) <= q.value(b)) == (q.value(a).exp() <= q.value(b).exp())
        };
        assert!(monotone_pair(&x, &y));
        assert!(monotone_pair(&y, &x));
    }

    #[test]
    fn utility_examples() {
        let q = QuadraticObjective::sphere(1);
        let u = q.utility(&dist(vec![0.0], SpdMatrix::identity(1)));
        assert_relative_eq!(u, 4.0, max_relative = 1e-12);

        let tiny = q.utility(&dist(vec![0.0], SpdMatrix::from_diagonal(&[1e-12]).unwrap()));
        assert!(tiny < 1e-11);

        let q = QuadraticObjective::sphere(2);
        let u = q.utility(&dist(vec![1.0, 0.0], SpdMatrix::identity(2)));
        assert_relative_eq!(u, 3.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn utility_matches_monte_carlo_oracle() {
        // E[L^{2/d}] estimated with 1e6 draws; for d=2, H=I the integrand is
        // pi * |X|^2.
        let q = QuadraticObjective::sphere(2);
        let d = dist(vec![1.0, 0.0], SpdMatrix::identity(2));
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_101);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let x = DVector::from_vec(vec![d.mu()[0] + z0, d.mu()[1] + z1]);
            sum += q.volume_loss(&x);
        }
        let mc = sum / n as f64;
        assert_relative_eq!(mc, q.utility(&d), max_relative = 0.01);
        assert_relative_eq!(mc, 9.42, max_relative = 0.01);
    }

    #[test]
    fn exact_gradient_examples() {
        let q = QuadraticObjective::sphere(2);
        let (dm, _) = q.exact_natural_gradient(&dist(vec![0.0, 0.0], SpdMatrix::identity(2)));
        assert_eq!(dm.norm(), 0.0);

        let q = QuadraticObjective::sphere(1);
        let (dm, ds) = q.exact_natural_gradient(&dist(vec![1.0], SpdMatrix::identity(1)));
        assert_relative_eq!(dm[0], 8.0, max_relative = 1e-12);
        assert_relative_eq!(ds[(0, 0)], 8.0, max_relative = 1e-12);
    }

    #[test]
    fn finite_differences_confirm_utility_gradient() {
        // Central differences of the utility match kappa * [H mu; vec(H)/2]
        // to 1e-5 relative.
        let q = QuadraticObjective::new(ellipsoid_hessian(2, 4.0));
        let mu = vec![0.7, -0.4];
        let sigma = SpdMatrix::from_diagonal(&[1.3, 0.8]).unwrap();
        let kappa = q.kappa();
        let h = 1e-5;

        for i in 0..2 {
            let mut up = mu.clone();
            let mut down = mu.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (q.utility(&dist(up, sigma.clone())) - q.utility(&dist(down, sigma.clone())))
                / (2.0 * h);
            let expected = kappa * (q.hessian().as_matrix() * DVector::from_vec(mu.clone()))[i];
            assert_relative_eq!(fd, expected, max_relative = 1e-5);
        }

        for i in 0..2 {
            for j in 0..2 {
                let mut pert = DMatrix::zeros(2, 2);
                pert[(i, j)] += 0.5;
                pert[(j, i)] += 0.5;
                let up = SpdMatrix::from_symmetrized(sigma.as_matrix() + &pert * h).unwrap();
                let down = SpdMatrix::from_symmetrized(sigma.as_matrix() - &pert * h).unwrap();
                let fd = (q.utility(&dist(mu.clone(), up))
                    - q.utility(&dist(mu.clone(), down)))
                    / (2.0 * h);
                let expected = 0.5 * kappa * q.hessian().as_matrix()[(i, j)];
                assert_relative_eq!(fd, expected, max_relative = 1e-5, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_recursion_contracts_condition_number() {
        // Lambda' = Lambda - nu Lambda^2 from diag(0.5, 0.25) with nu = 1:
        // diag(0.25, 0.1875); the condition-gap ratio (1/3) respects the
        // 1 - nu * lambda_1 bound.
        let lambda = [0.5, 0.25];
        let nu = 1.0;
        let next: Vec<f64> = lambda.iter().map(|l| l - nu * l * l).collect();
        assert_relative_eq!(next[0], 0.25);
        assert_relative_eq!(next[1], 0.1875);
        let cond_before = lambda[0] / lambda[1];
        let cond_after = next[0] / next[1];
        let ratio = (cond_after - 1.0) / (cond_before - 1.0);
        assert_relative_eq!(ratio, 1.0 / 3.0, max_relative = 1e-12);
        assert!(ratio <= 1.0 - nu * lambda[1]);
    }

    #[test]
    fn oracle_agreement_exact_vs_monte_carlo() {
        use crate::ngd::{
            estimate_loss, mc_natural_gradient, sample_population, LearningRateSchedule,
            OptimizerState,
        };
        let q = QuadraticObjective::sphere(2);
        let d = dist(vec![1.0, 1.0], SpdMatrix::identity(2));
        let state = OptimizerState {
            dist: d.clone(),
            iteration: 0,
            rng_seed: 77,
            population: 100_000,
            schedule: LearningRateSchedule::fixed(0.1, 0.1),
        };
        let (zs, xs) = sample_population(&state).unwrap();
        let f: Vec<f64> = xs.iter().map(|x| q.value(x)).collect();
        let loss = estimate_loss(&f, &zs, d.sigma()).unwrap();
        let (dm_hat, ds_hat) = mc_natural_gradient(&xs, &loss, &d);
        let (dm, ds) = q.exact_natural_gradient(&d);
        assert!((dm_hat - &dm).norm() / dm.norm() < 0.05);
        assert!(
            crate::matrix::frobenius_norm(&(ds_hat - &ds)) / crate::matrix::frobenius_norm(&ds)
                < 0.05
        );
    }

    #[test]
    fn suite_examples() {
        let suite = benchmark_suite(3);
        let zero = DVector::zeros(3);
        let by_name = |n: &str| suite.iter().find(|b| b.name == n).unwrap();
        assert_eq!(by_name("sphere").value(&zero), 0.0);
        assert_relative_eq!(
            condition_number(by_name("ellipsoid-10").hessian.as_ref().unwrap()),
            10.0,
            max_relative = 1e-12
        );
        assert_eq!(by_name("exp-sphere").value(&zero), 1.0);
        // Warped variants share the argmin with their base.
        let x = DVector::from_vec(vec![0.5, -0.5, 0.1]);
        assert!(by_name("exp-sphere").value(&x) > by_name("exp-sphere").value(&zero));
        assert!(by_name("cbrt-ellipsoid-10").value(&x) > 0.0);
    }
}
