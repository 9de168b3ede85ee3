use rand::Rng;
use ysl_core::field::Grid;
use ysl_core::FieldD;

use super::{chunk_rng, Budget, Check, Failure, Report, Suite, Tally};
use crate::error::Result;

pub const EXPONENTS: [f64; 3] = [2.0, 2.2, 3.0];
pub const COARSE: usize = 64;
pub const FINE: usize = 128;
/// Allowed relative change of the ratio between the two grids.
pub const REFINEMENT_TOL: f64 = 0.1;

const TAG_KORN: u64 = 0xD00;

/// `‖∇v‖_p / (‖v‖_2 + ‖(∇v)_s‖_p)` by quadrature; 0 for the zero field.
pub fn korn_ratio(field: &FieldD, p: f64) -> f64 {
    let (full, sym) = field.gradient_lp_norms(p);
    let den = field.l2_norm() + sym;
    if den == 0.0 {
        0.0
    } else {
        full / den
    }
}

/// Random smooth periodic field: modes `1 ≤ |k|∞ ≤ 3` with `|k|⁻²` decay.
fn random_field(rng: &mut rand_chacha::ChaCha8Rng) -> impl Fn(f64, f64) -> [f64; 2] {
    let mut terms = Vec::new();
    for kx in -3i32..=3 {
        for ky in 0i32..=3 {
            if ky == 0 && kx <= 0 {
                continue;
            }
            let decay = 1.0 / f64::from(kx * kx + ky * ky);
            let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0) * decay);
            terms.push((f64::from(kx), f64::from(ky), c));
        }
    }
    move |x, y| {
        terms.iter().fold([0.0, 0.0], |acc, &(kx, ky, c)| {
            let (s, co) = (kx * x + ky * y).sin_cos();
            [acc[0] + c[0] * co + c[1] * s, acc[1] + c[2] * co + c[3] * s]
        })
    }
}

pub fn suite_korn(seed: u64, budget: &Budget) -> Result<Report> {
    let coarse = Grid::torus(COARSE)?;
    let fine = Grid::torus(FINE)?;
    let mut tally = Tally::default();
    let mut max_ratio = 0.0f64;
    for (pi, &p) in EXPONENTS.iter().enumerate() {
        let mut rng = chunk_rng(seed, TAG_KORN, pi as u64);
        for k in 0..budget.korn_fields {
            let f = random_field(&mut rng);
            let r0 = korn_ratio(&FieldD::from_fn(coarse, &f), p);
            let r1 = korn_ratio(&FieldD::from_fn(fine, &f), p);
            max_ratio = max_ratio.max(r0).max(r1);
            let change = (r1 - r0).abs() / r0;
            let margin = REFINEMENT_TOL - change;
            let ok = r0.is_finite() && r1.is_finite() && change <= REFINEMENT_TOL;
            tally.record(margin, !ok, || {
                Failure::new(
                    "korn_refinement",
                    None,
                    margin,
                    format!("ratio {r0:e} at {COARSE}, {r1:e} at {FINE}"),
                )
                .with_values("p_field", vec![p, k as f64])
            });
        }
    }
    let check = Check::from_tally("korn_refinement", REFINEMENT_TOL, tally);
    Ok(Report::new(Suite::Korn, seed, Vec::new(), vec![check])
        .metric("exponents", EXPONENTS)
        .metric("max_ratio", max_ratio)
        .metric("grids", [COARSE, FINE]))
}
