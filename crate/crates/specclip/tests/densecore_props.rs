//! Property suite for the dense kernels: the SVD oracle, the eigensolver,
//! and the norms they feed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use specclip::{
    generate_matrix, random_orthonormal, rms_operator_norm, rms_vector_norm, spectral_norm,
    svd_compact, sym_eig, DenseMatrix, SigmaLaw, SpectrumSpec, DEFAULT_TRUNC_TOL,
};

fn random_spec(rng: &mut ChaCha8Rng, max_dim: usize) -> SpectrumSpec {
    let rows = rng.gen_range(1..=max_dim);
    let cols = rng.gen_range(1..=max_dim);
    let law = match rng.gen_range(0..3) {
        0 => SigmaLaw::UniformRange { lo: 0.05, hi: 3.0 },
        1 => {
            // Rank-deficient: explicit spectrum shorter than min(m, n).
            let r = rng.gen_range(1..=rows.min(cols));
            let mut values: Vec<f64> = (0..r).map(|_| rng.gen_range(0.1..2.5)).collect();
            values.sort_by(|a, b| b.partial_cmp(a).unwrap());
            SigmaLaw::ExplicitList { values }
        }
        _ => SigmaLaw::PowerLaw { exponent: 1.5 },
    };
    SpectrumSpec { rows, cols, sigma_law: law, seed: rng.gen() }
}

#[test]
fn svd_round_trip_on_500_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDEC0);
    for trial in 0..500 {
        let spec = random_spec(&mut rng, 64);
        let m = generate_matrix(&spec).unwrap();
        if m.frobenius_norm() == 0.0 {
            continue;
        }
        let f = svd_compact(&m, DEFAULT_TRUNC_TOL).unwrap();
        let rel = f.reconstruct().sub(&m).unwrap().frobenius_norm() / m.frobenius_norm();
        assert!(rel <= 1e-10, "trial {trial} ({}x{}): round-trip {rel}", m.rows(), m.cols());

        let gram_u = f.u.matmul_at_b(&f.u).unwrap();
        let gram_v = f.v.matmul_at_b(&f.v).unwrap();
        let eye = DenseMatrix::identity(f.rank());
        assert!(gram_u.sub(&eye).unwrap().max_abs() <= 1e-10, "trial {trial}: U not orthonormal");
        assert!(gram_v.sub(&eye).unwrap().max_abs() <= 1e-10, "trial {trial}: V not orthonormal");
        for w in f.sigma.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }
}

#[test]
fn spectral_norm_is_unitarily_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0157);
    for _ in 0..40 {
        let spec = random_spec(&mut rng, 24);
        let m = generate_matrix(&spec).unwrap();
        let p = random_orthonormal(m.rows(), m.rows(), &mut rng).unwrap();
        let q = random_orthonormal(m.cols(), m.cols(), &mut rng).unwrap();
        let rotated = p.matmul(&m).unwrap().matmul(&q).unwrap();
        let diff = (spectral_norm(&rotated) - spectral_norm(&m)).abs();
        assert!(diff <= 1e-10, "invariance violated by {diff}");
    }
}

#[test]
fn sym_eig_matches_svd_on_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE16);
    for _ in 0..25 {
        let n = rng.gen_range(2..=20);
        let spec = SpectrumSpec {
            rows: n,
            cols: n,
            sigma_law: SigmaLaw::UniformRange { lo: 0.1, hi: 2.0 },
            seed: rng.gen(),
        };
        let a = generate_matrix(&spec).unwrap();
        // PSD via the Gram construction.
        let h = a.matmul_at_b(&a).unwrap().symmetrized();
        let eig = sym_eig(&h).unwrap();
        let svd = svd_compact(&h, DEFAULT_TRUNC_TOL).unwrap();
        for (lambda, sigma) in eig.lambda.iter().zip(&svd.sigma) {
            assert!((lambda - sigma).abs() <= 1e-10 * svd.sigma[0].max(1.0));
        }
    }
}

#[test]
fn sym_eig_recovers_constructed_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let n = 12;
    let q = random_orthonormal(n, n, &mut rng).unwrap();
    let lambda: Vec<f64> = (0..n).map(|i| 3.0 - 0.45 * i as f64).collect();
    let mut scaled = q.clone();
    for i in 0..n {
        for j in 0..n {
            let v = scaled.get(i, j) * lambda[j];
            scaled.set(i, j, v);
        }
    }
    let h = scaled.matmul(&q.transpose()).unwrap().symmetrized();
    let eig = sym_eig(&h).unwrap();
    let mut sorted = lambda.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for (got, want) in eig.lambda.iter().zip(&sorted) {
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn rms_operator_norm_dominates_unit_vector_ratios() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11);
    let spec = SpectrumSpec {
        rows: 9,
        cols: 13,
        sigma_law: SigmaLaw::UniformRange { lo: 0.1, hi: 2.0 },
        seed: 77,
    };
    let m = generate_matrix(&spec).unwrap();
    let bound = rms_operator_norm(&m);
    let mut max_ratio = 0.0f64;
    for _ in 0..1000 {
        let v: Vec<f64> = (0..m.cols()).map(|_| rng.gen::<f64>() - 0.5).collect();
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let v: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let mv = m.apply(&v).unwrap();
        let ratio = rms_vector_norm(&mv, m.rows()) / rms_vector_norm(&v, m.cols());
        max_ratio = max_ratio.max(ratio);
    }
    assert!(
        max_ratio <= bound + 1e-8,
        "unit-vector ratio {max_ratio} exceeds operator norm {bound}"
    );
    // The sup should also be approached from below, not just bounded.
    assert!(max_ratio > 0.3 * bound);
}

// ---------------------------------------------------------------------------
// Independent oracle: singular values of a 7x4 matrix from the characteristic
// polynomial of M^T M, roots located by sign-change bisection.
// ---------------------------------------------------------------------------

fn det_small(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    match n {
        1 => a.get(0, 0),
        2 => a.get(0, 0) * a.get(1, 1) - a.get(0, 1) * a.get(1, 0),
        _ => {
            let mut det = 0.0;
            for j in 0..n {
                let mut minor = DenseMatrix::zeros(n - 1, n - 1);
                for i in 1..n {
                    let mut cj = 0;
                    for k in 0..n {
                        if k == j {
                            continue;
                        }
                        minor.set(i - 1, cj, a.get(i, k));
                        cj += 1;
                    }
                }
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                det += sign * a.get(0, j) * det_small(&minor);
            }
            det
        }
    }
}

#[test]
fn singular_values_match_characteristic_polynomial_roots() {
    let spec = SpectrumSpec {
        rows: 7,
        cols: 4,
        sigma_law: SigmaLaw::UniformRange { lo: 0.3, hi: 2.2 },
        seed: 2024,
    };
    let m = generate_matrix(&spec).unwrap();
    let gram = m.matmul_at_b(&m).unwrap().symmetrized();
    let char_poly = |lambda: f64| det_small(&gram.add_diag(-lambda));

    // Bracket the four real roots by scanning, then bisect each bracket.
    let upper = gram.norm_inf() * 1.01 + 1.0;
    let steps = 40_000;
    let mut roots = Vec::new();
    let mut prev_x = 0.0;
    let mut prev_f = char_poly(0.0);
    for i in 1..=steps {
        let x = upper * i as f64 / steps as f64;
        let f = char_poly(x);
        if prev_f == 0.0 {
            roots.push(prev_x);
        } else if prev_f.signum() != f.signum() {
            let (mut lo, mut hi) = (prev_x, x);
            let mut flo = prev_f;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fmid = char_poly(mid);
                if fmid == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if flo.signum() != fmid.signum() {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fmid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_f = f;
    }
    assert_eq!(roots.len(), 4, "expected 4 eigenvalues, found {roots:?}");
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let f = svd_compact(&m, DEFAULT_TRUNC_TOL).unwrap();
    assert_eq!(f.rank(), 4);
    for (sigma, root) in f.sigma.iter().zip(&roots) {
        let oracle_sigma = root.sqrt();
        assert!(
            (sigma - oracle_sigma).abs() <= 1e-10,
            "sigma {sigma} vs char-poly oracle {oracle_sigma}"
        );
    }
}
