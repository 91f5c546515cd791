//! The nine end-to-end checks, shared by the acceptance tests and the CLI.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cover::CoverData;
use crate::error::Result;
use crate::example::{
    ball_pair, casewise_defect, convergence_experiment, defect_column, direct_image_check, m1_m2, Sign,
    SymbolPair, COMPACT_BOTT, WIDE_BOTT,
};
use crate::group::{ball, GroupElement, GroupSpec};
use crate::linalg::{self, c64, random_hermitian, random_unitary, CMat};
use crate::maps::{character, defect_report, unitary_rep, FiniteMap};
use crate::projections::{
    build_p_double_prime, build_p_prime, homotopy_sweep, p_double_prime_blocks, p_double_prime_factored,
    universal_generators, SelfadjointPair,
};
use crate::sparse::{self, SparseMatrix};
use crate::truncation::truncate_pair;

/// Pinned constant in `||P''^2 - P''|| <= C delta` for perturbed relation pairs.
pub const PERTURBATION_CONSTANT: f64 = 16.0;

/// Radii of the truncation and convergence curves.
pub const CURVE_RADII: [usize; 4] = [4, 6, 8, 12];

/// Stand-in for the infinite radius in the convergence curve.
pub const REFERENCE_RADIUS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn timed(id: u8, name: &str, limit: Option<f64>, run: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let result = run();
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match result {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit {
        if seconds >= limit {
            passed = false;
            detail.push_str(&format!("; exceeded the {limit} s budget"));
        }
    }
    Outcome {
        id,
        name: name.into(),
        passed,
        detail,
        seconds,
    }
}

fn random_contraction(n: usize, scale: f64, rng: &mut impl Rng) -> CMat {
    let h = random_hermitian(n, rng);
    let s = linalg::op_norm(&h);
    linalg::scale(&h, scale / s)
}

/// Exact pairs: characters of `Z^2`, commuting unitaries on `Z^2` and
/// independent unitaries on `F_2`; all eps must vanish on balls of radius 0 to 2.
pub fn exact_representations(seed: u64) -> Outcome {
    timed(1, "exact representations", Some(1.0), || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let z2 = GroupSpec::FreeAbelian(2);
        let f2 = GroupSpec::Free(2);
        for f in 0..=2usize {
            let dom_z = ball(z2, 2 * f, None)?;
            let dom_f = ball(f2, 2 * f, None)?;
            let set_z = ball(z2, f, None)?;
            let set_f = ball(f2, f, None)?;

            let th: [[f64; 2]; 2] = [[rng.gen(), rng.gen()], [rng.gen(), rng.gen()]];
            let chars: Vec<FiniteMap> = th
                .iter()
                .map(|t| FiniteMap::from_dense(z2, dom_z.elements(), |g| CMat::from_fn(1, 1, |_, _| character(t, g))))
                .collect::<Result<_>>()?;

            let n = 3;
            let w = random_unitary(n, &mut rng);
            let diag = |rng: &mut ChaCha8Rng| {
                let d: Vec<c64> = (0..n).map(|_| c64::from_polar(1.0, rng.gen_range(0.0..6.3))).collect();
                &w * CMat::from_fn(n, n, |i, j| if i == j { d[i] } else { c64::new(0.0, 0.0) }) * w.adjoint()
            };
            let comm_p = [diag(&mut rng), diag(&mut rng)];
            let comm_m = [diag(&mut rng), diag(&mut rng)];
            let free_p = [random_unitary(n, &mut rng), random_unitary(n, &mut rng)];
            let free_m = [random_unitary(n, &mut rng), random_unitary(n, &mut rng)];

            let pairs = [
                (chars[0].clone(), chars[1].clone(), &set_z),
                (
                    FiniteMap::from_dense(z2, dom_z.elements(), |g| unitary_rep(&comm_p, g))?,
                    FiniteMap::from_dense(z2, dom_z.elements(), |g| unitary_rep(&comm_m, g))?,
                    &set_z,
                ),
                (
                    FiniteMap::from_dense(f2, dom_f.elements(), |g| unitary_rep(&free_p, g))?,
                    FiniteMap::from_dense(f2, dom_f.elements(), |g| unitary_rep(&free_m, g))?,
                    &set_f,
                ),
            ];
            for (p, m, set) in &pairs {
                let r = defect_report(p, m, set.elements(), Some(f))?;
                worst = worst.max(r.eps1).max(r.eps2).max(r.eps2prime);
            }
        }
        Ok((worst < 1e-12, format!("max eps {worst:.2e} over 9 pairs")))
    })
}

/// Truncations of the wide Bott pair on `F = ball(1)`.
pub fn truncation_convergence() -> Outcome {
    timed(2, "truncation convergence", Some(120.0), || {
        let symbols = SymbolPair::bott(WIDE_BOTT);
        let (ps, ms) = symbols.map_specs();
        let fam = truncate_pair(&ps, &ms, &CURVE_RADII, 2, None)?;
        let set = ball(GroupSpec::FreeAbelian(2), 1, None)?;
        let rows: Vec<_> = fam.reports(&set)?.into_iter().map(|(r, _)| r).collect();
        let series = [
            ("eps1", rows.iter().map(|r| r.eps1).collect::<Vec<_>>()),
            ("eps2", rows.iter().map(|r| r.eps2).collect()),
            ("eps2prime", rows.iter().map(|r| r.eps2prime).collect()),
        ];
        let mut ok = true;
        let mut parts = Vec::new();
        for (name, v) in &series {
            let mono = v.windows(2).all(|w| w[1] <= w[0]);
            let halved = v[v.len() - 1] < 0.5 * v[0];
            ok &= mono && halved;
            parts.push(format!("{name} {:.3}->{:.3}", v[0], v[v.len() - 1]));
        }
        Ok((ok, parts.join(", ")))
    })
}

fn relation_pair(rng: &mut ChaCha8Rng) -> Result<SelfadjointPair> {
    let k = rng.gen_range(1..=8);
    let parts: Vec<_> = (0..k)
        .map(|_| universal_generators(rng.gen_range(-1.0..=1.0)))
        .collect::<Result<_>>()?;
    let u = random_unitary(2 * k, rng);
    Ok(SelfadjointPair::direct_sum(&parts).conjugate(&u))
}

fn perturb(pair: &SelfadjointPair, delta: f64, rng: &mut ChaCha8Rng) -> Result<SelfadjointPair> {
    let n = pair.dim();
    SelfadjointPair::new(
        &pair.a + random_contraction(n, delta, rng),
        &pair.b + random_contraction(n, delta, rng),
    )
}

/// `P''` of exact relation pairs is a projection, and degrades linearly
/// under perturbation.
pub fn perturbation_bound(seed: u64) -> Outcome {
    timed(3, "relation pairs give projections", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut exact, mut ratio) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let pair = relation_pair(&mut rng)?;
            exact = exact.max(build_p_double_prime(&pair).deviation());
            for delta in [1e-1, 1e-2, 1e-3] {
                let q = perturb(&pair, delta, &mut rng)?;
                ratio = ratio.max(build_p_double_prime(&q).deviation() / delta);
            }
        }
        Ok((
            exact < 1e-10 && ratio <= PERTURBATION_CONSTANT,
            format!("exact deviation {exact:.2e}, max deviation/delta {ratio:.3} vs C = {PERTURBATION_CONSTANT}"),
        ))
    })
}

/// `P'` and `P''` agree along the universal generators.
pub fn rotation_agreement() -> Outcome {
    timed(4, "P' equals P''", Some(5.0), || {
        let mut worst = 0.0f64;
        for k in 0..=1000 {
            let t = (-1.0 + k as f64 / 500.0).clamp(-1.0, 1.0);
            let pair = universal_generators(t)?;
            let (pp, _) = build_p_prime(&pair)?;
            let diff = pp.to_dense() - build_p_double_prime(&pair).to_dense();
            worst = worst.max(linalg::op_norm(&diff));
        }
        Ok((worst < 1e-10, format!("max norm gap {worst:.2e} over 1001 points")))
    })
}

/// The cutting homotopy keeps perturbed relation pairs inside the
/// almost-projection regime with constant rank.
pub fn cutting_homotopy(seed: u64) -> Outcome {
    timed(5, "cutting homotopy", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let trials = 20;
        for _ in 0..trials {
            let pair = perturb(&relation_pair(&mut rng)?, 1e-3, &mut rng)?;
            let rep = homotopy_sweep(&pair, 101)?;
            worst = worst.max(rep.max_deviation);
        }
        Ok((worst < 0.25, format!("max deviation {worst:.2e} over {trials} pairs, rank constant")))
    })
}

/// Pushed-forward projections converge to the reference radius.
pub fn projection_convergence() -> Outcome {
    timed(6, "pushed projections converge", None, || {
        let symbols = SymbolPair::bott(WIDE_BOTT);
        let cover = CoverData::torus(16, 16);
        let rep = convergence_experiment(&symbols, &cover, &CURVE_RADII, REFERENCE_RADIUS, 1, None)?;
        let gaps: Vec<f64> = rep.rows.iter().map(|r| r.sup_norm_gap).collect();
        let ok = gaps.windows(2).all(|w| w[1] < w[0]) && gaps[gaps.len() - 1] < 0.1;
        let curve: Vec<String> = gaps.iter().map(|g| format!("{g:.4}")).collect();
        Ok((ok, format!("sup gap {}", curve.join(" > "))))
    })
}

/// Chern number of the Bott pair against that of the pushed field.
pub fn direct_image() -> Outcome {
    timed(7, "direct image Chern numbers", None, || {
        let rep = direct_image_check(&COMPACT_BOTT, 12, &[24, 48])?;
        let ok = rep.agree && rep.chern_input.abs() == 1;
        let per: Vec<String> = rep
            .grids
            .iter()
            .zip(rep.input_by_grid.iter().zip(&rep.output_by_grid))
            .map(|(n, (i, o))| format!("{n}: {} / {}", i.chern, o.chern))
            .collect();
        Ok((ok, format!("input / output {}", per.join(", "))))
    })
}

/// The closed-form defect columns match the matrices.
pub fn casewise_oracle(seed: u64) -> Outcome {
    timed(8, "casewise defect oracle", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols = SymbolPair::bott(COMPACT_BOTT);
        let (b, plus, minus) = ball_pair(&symbols, 6, 4, None)?;
        let small = ball(GroupSpec::FreeAbelian(2), 2, None)?;
        let pick = |rng: &mut ChaCha8Rng, s: &[GroupElement]| s[rng.gen_range(0..s.len())].clone();
        let (mut col, mut norm) = (0.0f64, 0.0f64);
        for _ in 0..200 {
            let g = pick(&mut rng, small.elements());
            let h = pick(&mut rng, small.elements());
            let y = pick(&mut rng, b.elements());
            let sign = if rng.gen() { Sign::Plus } else { Sign::Minus };
            let map = if sign == Sign::Plus { &plus } else { &minus };
            let (_, block) = casewise_defect(&symbols, &b, &g, &h, &y, sign)?;
            let d = map.defect(&g, &h)?;
            let target = b.position(&g.multiply(&h).multiply(&y));
            let (dense, rest) = defect_column(&d, 2, b.position(&y).unwrap(), target);
            col = col.max(linalg::max_abs_diff(&dense, &block)).max(rest);

            let m = m1_m2(&symbols, &b, &g, &h)?;
            let diff: SparseMatrix = d_pair(&plus, &minus, &g, &h)?;
            norm = norm.max((m.m1.max(m.m2) - sparse::op_norm(&diff)).abs());
        }
        Ok((
            col < 1e-12 && norm < 1e-10,
            format!("column gap {col:.2e}, norm gap {norm:.2e} over 200 tuples"),
        ))
    })
}

fn d_pair(plus: &FiniteMap, minus: &FiniteMap, g: &GroupElement, h: &GroupElement) -> Result<SparseMatrix> {
    Ok(plus.defect(g, h)?.sub(&minus.defect(g, h)?))
}

/// Block and factored forms of `P''` agree.
pub fn formula_equivalence(seed: u64) -> Outcome {
    timed(9, "P'' formulas agree", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let n = rng.gen_range(1..=16);
            let a = random_contraction(n, 1.0, &mut rng);
            let b = random_contraction(n, 1.0, &mut rng);
            worst = worst.max(linalg::max_abs_diff(
                &p_double_prime_blocks(&a, &b),
                &p_double_prime_factored(&a, &b),
            ));
        }
        Ok((worst < 1e-12, format!("max entry gap {worst:.2e} over 100 pairs")))
    })
}

/// Runs a single check by number.
pub fn run_one(id: u8, seed: u64) -> Option<Outcome> {
    Some(match id {
        1 => exact_representations(seed),
        2 => truncation_convergence(),
        3 => perturbation_bound(seed),
        4 => rotation_agreement(),
        5 => cutting_homotopy(seed),
        6 => projection_convergence(),
        7 => direct_image(),
        8 => casewise_oracle(seed),
        9 => formula_equivalence(seed),
        _ => return None,
    })
}

pub fn run_all(seed: u64) -> Vec<Outcome> {
    (1..=9).filter_map(|id| run_one(id, seed)).collect()
}
