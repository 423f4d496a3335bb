//! Projection properties of the exact clip and convergence properties of
//! the Newton-Schulz polar kernel.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use specclip::{
    generate_matrix, mclip_exact, polar_exact, polar_newton_schulz, spectral_norm, svd_compact,
    DenseMatrix, SigmaLaw, SpectrumSpec, DEFAULT_TRUNC_TOL,
};

const TAU: f64 = 1.0;

fn random_matrix(rng: &mut ChaCha8Rng, max_dim: usize) -> DenseMatrix {
    let spec = SpectrumSpec {
        rows: rng.gen_range(2..=max_dim),
        cols: rng.gen_range(2..=max_dim),
        sigma_law: SigmaLaw::UniformRange { lo: 0.05, hi: 3.0 },
        seed: rng.gen(),
    };
    generate_matrix(&spec).unwrap()
}

#[test]
fn clip_is_feasible_and_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC11F);
    for _ in 0..50 {
        let m = random_matrix(&mut rng, 24);
        let first = mclip_exact(&m, TAU).unwrap();
        assert!(spectral_norm(&first.x) <= TAU + 1e-10, "clip not feasible");
        let second = mclip_exact(&first.x, TAU).unwrap();
        let drift = second.x.sub(&first.x).unwrap().frobenius_norm();
        assert!(drift <= 1e-10, "clip not idempotent: {drift}");
    }
}

#[test]
fn clip_is_noop_below_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBE10);
    for _ in 0..20 {
        let spec = SpectrumSpec {
            rows: rng.gen_range(2..=20),
            cols: rng.gen_range(2..=20),
            sigma_law: SigmaLaw::UniformRange { lo: 0.01, hi: 0.99 },
            seed: rng.gen(),
        };
        let m = generate_matrix(&spec).unwrap();
        let clip = mclip_exact(&m, TAU).unwrap();
        let drift = clip.x.sub(&m).unwrap().max_abs();
        assert!(drift <= 1e-12, "no-op region drift {drift}");
    }
}

#[test]
fn clip_beats_200_random_feasible_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA0B);
    let spec = SpectrumSpec {
        rows: 10,
        cols: 8,
        sigma_law: SigmaLaw::UniformRange { lo: 0.2, hi: 2.8 },
        seed: 31,
    };
    let m = generate_matrix(&spec).unwrap();
    let x = mclip_exact(&m, TAU).unwrap().x;
    let obj_x = x.sub(&m).unwrap().frobenius_norm();
    for trial in 0..200 {
        // Random feasible candidate: clip a random matrix, then shrink by a
        // random factor so the ball interior is explored too.
        let y_raw = random_matrix_with_shape(&mut rng, 10, 8);
        let mut y = mclip_exact(&y_raw, TAU).unwrap().x;
        if rng.gen_bool(0.5) {
            y = y.scale(rng.gen_range(0.05..1.0));
        }
        debug_assert!(spectral_norm(&y) <= TAU + 1e-10);
        let obj_y = y.sub(&m).unwrap().frobenius_norm();
        assert!(
            obj_x <= obj_y + 1e-10,
            "trial {trial}: candidate beats projection ({obj_y} < {obj_x})"
        );
    }
}

fn random_matrix_with_shape(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let spec = SpectrumSpec {
        rows,
        cols,
        sigma_law: SigmaLaw::UniformRange { lo: 0.05, hi: 3.0 },
        seed: rng.gen(),
    };
    generate_matrix(&spec).unwrap()
}

#[test]
fn clip_is_nonexpansive() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x202F);
    for _ in 0..40 {
        let rows = rng.gen_range(2..=16);
        let cols = rng.gen_range(2..=16);
        let a = random_matrix_with_shape(&mut rng, rows, cols);
        let b = random_matrix_with_shape(&mut rng, rows, cols);
        let ca = mclip_exact(&a, TAU).unwrap().x;
        let cb = mclip_exact(&b, TAU).unwrap().x;
        let lhs = ca.sub(&cb).unwrap().frobenius_norm();
        let rhs = a.sub(&b).unwrap().frobenius_norm();
        assert!(lhs <= rhs + 1e-10, "expansion: {lhs} > {rhs}");
    }
}

#[test]
fn repeated_singular_values_still_give_unique_clip() {
    // U, V are not unique for a repeated spectrum, but the clipped matrix is.
    let spec = SpectrumSpec {
        rows: 8,
        cols: 8,
        sigma_law: SigmaLaw::ExplicitList { values: vec![2.0, 2.0, 2.0, 0.5, 0.5] },
        seed: 12,
    };
    let m = generate_matrix(&spec).unwrap();
    let x = mclip_exact(&m, TAU).unwrap().x;
    // Compare against the functional-calculus construction scaled directly:
    // clip = M * g(sigma) on the right Gram factor basis.
    let f = svd_compact(&m, DEFAULT_TRUNC_TOL).unwrap();
    let mut scaled = f.u.clone();
    for i in 0..scaled.rows() {
        for (j, &s) in f.sigma.iter().enumerate() {
            let v = scaled.get(i, j) * s.min(TAU);
            scaled.set(i, j, v);
        }
    }
    let rebuilt = scaled.matmul(&f.v.transpose()).unwrap();
    let diff = x.sub(&rebuilt).unwrap().frobenius_norm();
    assert!(diff <= 1e-10, "non-unique clip: {diff}");
}

// ---------------------------------------------------------------------------
// Polar kernel properties
// ---------------------------------------------------------------------------

#[test]
fn newton_schulz_produces_partial_isometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1503);
    for _ in 0..25 {
        let m = random_matrix(&mut rng, 20);
        let r = polar_newton_schulz(&m, 40, 1e-9).unwrap();
        if !r.converged {
            continue;
        }
        let qqt_q = r.q.matmul(&r.q.matmul_at_b(&r.q).unwrap()).unwrap();
        let drift = qqt_q.sub(&r.q).unwrap().frobenius_norm();
        assert!(drift <= 1e-8, "q q^T q != q by {drift}");
    }
}

#[test]
fn newton_schulz_agrees_with_oracle_on_conditioned_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x906D);
    for _ in 0..25 {
        // sigma_r / sigma_1 >= 1e-3 guaranteed by the law bounds.
        let spec = SpectrumSpec {
            rows: rng.gen_range(3..=24),
            cols: rng.gen_range(3..=24),
            sigma_law: SigmaLaw::UniformRange { lo: 0.005, hi: 3.0 },
            seed: rng.gen(),
        };
        let m = generate_matrix(&spec).unwrap();
        let ns = polar_newton_schulz(&m, 40, 1e-9).unwrap();
        let exact = polar_exact(&m).unwrap();
        let diff = ns.q.sub(&exact.q).unwrap().frobenius_norm();
        assert!(diff <= 1e-7, "NS vs oracle {diff}");
    }
}

#[test]
fn residuals_decrease_monotonically_inside_basin() {
    let spec = SpectrumSpec {
        rows: 16,
        cols: 12,
        sigma_law: SigmaLaw::UniformRange { lo: 0.4, hi: 2.0 },
        seed: 5,
    };
    let m = generate_matrix(&spec).unwrap();
    let r = polar_newton_schulz(&m, 40, 1e-14).unwrap();
    // Inside the basin means residual below 1; check monotone decrease there.
    let inside: Vec<f64> = r
        .residual_history
        .iter()
        .copied()
        .skip_while(|&x| x >= 1.0)
        .collect();
    assert!(inside.len() >= 3, "not enough basin iterations: {:?}", r.residual_history);
    for w in inside.windows(2) {
        assert!(
            w[1] <= w[0] * (1.0 + 1e-12) + 1e-15,
            "residual increased: {:?}",
            r.residual_history
        );
    }
}

#[test]
fn quadratic_tail_has_bounded_constant() {
    let spec = SpectrumSpec {
        rows: 14,
        cols: 14,
        sigma_law: SigmaLaw::UniformRange { lo: 0.5, hi: 2.0 },
        seed: 8,
    };
    let m = generate_matrix(&spec).unwrap();
    let r = polar_newton_schulz(&m, 40, 1e-15).unwrap();
    let mut fitted_c = 0.0f64;
    let mut pairs = 0;
    for w in r.residual_history.windows(2) {
        // Only the quadratic regime, and above the rounding floor.
        if w[0] < 0.5 && w[1] > 1e-13 {
            fitted_c = fitted_c.max(w[1] / (w[0] * w[0]));
            pairs += 1;
        }
    }
    assert!(pairs >= 2, "quadratic tail too short: {:?}", r.residual_history);
    eprintln!("fitted quadratic constant C = {fitted_c:.4} over {pairs} pairs");
    assert!(fitted_c <= 1.5, "tail not quadratic: C = {fitted_c}");
}
